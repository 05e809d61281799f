//! In-memory link backend for discrete-event simulation.
//!
//! Delays are drawn uniformly from `[min, max]` microseconds with a seeded
//! ChaCha generator, so a run is a pure function of `(seed, delay range)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Authenticator, LinkMessage, LinkStats};
use crate::config::PartyId;
use crate::crypto::LinkKeys;

/// Virtual time in microseconds.
pub type Micros = u64;

struct Entry<E> {
    at: Micros,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (time, insertion order)
        (other.at, other.seq).cmp(&(self.at, self.seq))
    }
}

/// Time-ordered event queue; events scheduled for the same instant pop in
/// insertion order.
pub struct EventQueue<E> {
    heap: BinaryHeap<Entry<E>>,
    next_seq: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            next_seq: 0,
        }
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, at: Micros, event: E) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry { at, seq, event });
    }

    pub fn pop(&mut self) -> Option<(Micros, E)> {
        self.heap.pop().map(|e| (e.at, e.event))
    }

    pub fn peek_time(&self) -> Option<Micros> {
        self.heap.peek().map(|e| e.at)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DelayRange {
    pub min: Micros,
    pub max: Micros,
}

impl DelayRange {
    pub fn fixed(d: Micros) -> Self {
        DelayRange { min: d, max: d }
    }

    pub fn mean(&self) -> Micros {
        (self.min + self.max) / 2
    }
}

/// Network adversary able to inject extra copies of messages in flight.
/// The original message is always delivered; interceptors only add traffic.
pub trait Tamper {
    fn intercept(&mut self, msg: &LinkMessage, rng: &mut ChaCha8Rng) -> Vec<(Micros, LinkMessage)>;
}

/// Replays, bit-flips and sender-spoofs messages with fixed probabilities.
#[derive(Clone, Debug)]
pub struct TamperingAdversary {
    pub replay: f64,
    pub flip: f64,
    pub spoof: f64,
}

impl Tamper for TamperingAdversary {
    fn intercept(&mut self, msg: &LinkMessage, rng: &mut ChaCha8Rng) -> Vec<(Micros, LinkMessage)> {
        let mut out = Vec::new();
        if rng.gen_bool(self.replay) {
            out.push((rng.gen_range(0..5_000), msg.clone()));
        }
        if rng.gen_bool(self.flip) && !msg.body.is_empty() {
            let mut m = msg.clone();
            let i = rng.gen_range(0..m.body.len());
            m.body[i] ^= 1 << rng.gen_range(0..8);
            out.push((rng.gen_range(0..5_000), m));
        }
        if rng.gen_bool(self.spoof) {
            let mut m = msg.clone();
            // claim the message came from the receiver itself
            m.from = m.to;
            out.push((rng.gen_range(0..5_000), m));
        }
        out
    }
}

/// Simulated links between `n` parties.
pub struct SimNetwork {
    endpoints: Vec<Authenticator>,
    delay: DelayRange,
    rng: ChaCha8Rng,
    tamper: Option<Box<dyn Tamper>>,
}

impl SimNetwork {
    pub fn new(n: usize, seed: u64, delay: DelayRange) -> Self {
        assert!(delay.min <= delay.max, "delay range inverted");
        let endpoints = (0..n)
            .map(|i| Authenticator::new(LinkKeys::derive(seed, PartyId(i as u32), n)))
            .collect();
        SimNetwork {
            endpoints,
            delay,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x006e_6574_776f_726b),
            tamper: None,
        }
    }

    pub fn with_tamper(mut self, tamper: Box<dyn Tamper>) -> Self {
        self.tamper = Some(tamper);
        self
    }

    pub fn delay(&self) -> DelayRange {
        self.delay
    }

    pub fn sample_delay(&mut self) -> Micros {
        if self.delay.min == self.delay.max {
            self.delay.min
        } else {
            self.rng.gen_range(self.delay.min..=self.delay.max)
        }
    }

    /// Seals `body` and returns the scheduled arrivals, relative to `now`.
    pub fn send(
        &mut self,
        now: Micros,
        from: PartyId,
        to: PartyId,
        body: Vec<u8>,
    ) -> Vec<(Micros, LinkMessage)> {
        let msg = self.endpoints[from.index()].seal(to, body);
        let at = now + self.sample_delay();
        let mut out = Vec::with_capacity(1);
        if let Some(t) = self.tamper.as_mut() {
            for (extra, forged) in t.intercept(&msg, &mut self.rng) {
                out.push((at + extra, forged));
            }
        }
        out.insert(0, (at, msg));
        out
    }

    /// Authenticates and filters an arriving message at its destination.
    pub fn receive(&mut self, msg: LinkMessage) -> Option<(PartyId, Vec<u8>)> {
        let to = msg.to.index();
        match self.endpoints.get_mut(to) {
            Some(ep) => ep.open(msg),
            None => None,
        }
    }

    pub fn stats(&self, party: PartyId) -> LinkStats {
        self.endpoints[party.index()].stats()
    }

    pub fn total_stats(&self) -> LinkStats {
        self.endpoints
            .iter()
            .fold(LinkStats::default(), |mut acc, ep| {
                let s = ep.stats();
                acc.sent += s.sent;
                acc.delivered += s.delivered;
                acc.bad_mac += s.bad_mac;
                acc.duplicates += s.duplicates;
                acc
            })
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;

    type Trace = Vec<(Micros, u32, u32, Vec<u8>)>;

    fn run(seed: u64, tamper: bool) -> (Trace, BTreeMap<(u32, u32), Vec<Vec<u8>>>, LinkStats) {
        let n = 4;
        let mut net = SimNetwork::new(n, seed, DelayRange { min: 100, max: 900 });
        if tamper {
            net = net.with_tamper(Box::new(TamperingAdversary {
                replay: 0.3,
                flip: 0.3,
                spoof: 0.2,
            }));
        }
        let mut q = EventQueue::new();
        let mut sent: BTreeMap<(u32, u32), Vec<Vec<u8>>> = BTreeMap::new();
        for k in 0..50u32 {
            let from = PartyId(k % 4);
            let to = PartyId((k * 7 + 1) % 4);
            let body = format!("m{k}").into_bytes();
            sent.entry((from.0, to.0)).or_default().push(body.clone());
            for (at, m) in net.send(u64::from(k) * 10, from, to, body) {
                q.push(at, m);
            }
        }
        let mut trace = Vec::new();
        let mut got: BTreeMap<(u32, u32), Vec<Vec<u8>>> = BTreeMap::new();
        while let Some((at, m)) = q.pop() {
            let to = m.to;
            if let Some((from, body)) = net.receive(m) {
                trace.push((at, from.0, to.0, body.clone()));
                got.entry((from.0, to.0)).or_default().push(body);
            }
        }
        for v in got.values_mut() {
            v.sort();
        }
        for v in sent.values_mut() {
            v.sort();
        }
        assert_eq!(got, sent, "delivered multiset differs from sent multiset");
        (trace, got, net.total_stats())
    }

    #[test]
    fn reliable_no_duplication_authentic_under_tampering() {
        let (_, _, stats) = run(3, true);
        assert!(stats.dropped() > 0, "adversary injected nothing");
    }

    #[test]
    fn same_seed_same_trace() {
        assert_eq!(run(9, true).0, run(9, true).0);
        assert_eq!(run(9, false).0, run(9, false).0);
        assert_ne!(run(9, false).0, run(10, false).0);
    }

    #[test]
    fn delays_within_range() {
        let mut net = SimNetwork::new(2, 1, DelayRange { min: 5, max: 7 });
        for _ in 0..100 {
            let d = net.sample_delay();
            assert!((5..=7).contains(&d));
        }
    }

    #[test]
    fn queue_is_time_then_fifo() {
        let mut q = EventQueue::new();
        q.push(5, "b");
        q.push(1, "a");
        q.push(5, "c");
        assert_eq!(q.pop(), Some((1, "a")));
        assert_eq!(q.pop(), Some((5, "b")));
        assert_eq!(q.pop(), Some((5, "c")));
        assert!(q.is_empty());
    }
}
