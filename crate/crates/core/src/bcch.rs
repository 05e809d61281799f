//! FIFO Byzantine consistent broadcast channel.
//!
//! Each sender runs a sequence of signed echo broadcast instances numbered
//! `0, 1, 2, ...` with exactly one active at a time:
//!
//! 1. the sender sends `SEND(r, m)` to all parties;
//! 2. every party echoes the first `SEND` it sees for `(sender, r)` with a
//!    signature over `(sender, r, digest(m))`;
//! 3. with `ceil((n + f + 1) / 2)` valid echoes the sender assembles an
//!    [`EchoCertificate`] and sends `FINAL(r, m, certificate)` to all;
//! 4. a receiver delivers `m` once the certificate verifies and every earlier
//!    instance of that sender has been delivered.
//!
//! Two quorums intersect in at least one correct party, and correct parties
//! echo once per instance, so no two correct parties deliver different
//! messages for the same instance. Delivered `FINAL`s are retained so other
//! parties can fetch instances they are missing; the certificate makes the
//! transfer self-authenticating.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use crate::codec::{Canonical, DecodeError, Decoder, Encoder};
use crate::config::{Config, PartyId};
use crate::crypto::{Digest, KeyMaterial, Signature, Signer, Verifier};
use crate::error::{Error, Result};
use crate::message::Dest;
use crate::tx::{TxId, TxRef};

/// Out-of-order `FINAL`s buffered per sender beyond the next expected instance.
pub const DEFAULT_WINDOW: u64 = 64;
pub const DEFAULT_QUEUE_BOUND: usize = 1 << 16;
/// Upper bound on instances returned by one fetch reply.
pub const MAX_FETCH: u64 = 512;

pub fn echo_bytes(sender: PartyId, round: u64, digest: &Digest) -> Vec<u8> {
    let mut enc = Encoder::with_domain("qof/echo");
    enc.u32(sender.0).u64(round).put(digest);
    enc.finish()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EchoCertificate {
    pub sender: PartyId,
    pub round: u64,
    pub digest: Digest,
    pub sigs: Vec<(PartyId, Signature)>,
}

impl EchoCertificate {
    /// Valid iff it carries at least an echo quorum of distinct, known
    /// signers whose signatures all verify over the same instance and digest.
    pub fn verify(&self, cfg: &Config, verifier: &dyn Verifier) -> bool {
        if self.sigs.len() < cfg.echo_quorum() {
            return false;
        }
        let mut signers = BTreeSet::new();
        if !self
            .sigs
            .iter()
            .all(|(p, _)| cfg.contains(*p) && signers.insert(*p))
        {
            return false;
        }
        let bytes = echo_bytes(self.sender, self.round, &self.digest);
        self.sigs
            .iter()
            .all(|(p, s)| verifier.verify(*p, &bytes, s))
    }
}

impl Canonical for EchoCertificate {
    fn encode(&self, enc: &mut Encoder) {
        enc.u32(self.sender.0)
            .u64(self.round)
            .put(&self.digest)
            .len(self.sigs.len());
        for (p, s) in &self.sigs {
            enc.u32(p.0).put(s);
        }
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let sender = PartyId(dec.u32()?);
        let round = dec.u64()?;
        let digest = dec.get()?;
        let k = dec.len()?;
        let sigs = (0..k)
            .map(|_| Ok((PartyId(dec.u32()?), dec.get()?)))
            .collect::<Result<_, DecodeError>>()?;
        Ok(EchoCertificate {
            sender,
            round,
            digest,
            sigs,
        })
    }
}

/// A completed instance: the message plus the certificate that proves it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Final {
    pub tx: TxRef,
    pub cert: EchoCertificate,
}

impl Canonical for Final {
    fn encode(&self, enc: &mut Encoder) {
        enc.put(&self.tx).put(&self.cert);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(Final {
            tx: dec.get()?,
            cert: dec.get()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BcchWire {
    /// The link sender is the broadcasting party.
    Send {
        round: u64,
        tx: TxRef,
    },
    /// Echo for `(sender, round)`; the link sender is the signer.
    Echo {
        sender: PartyId,
        round: u64,
        digest: Digest,
        sig: Signature,
    },
    Final(Final),
    FetchRequest {
        sender: PartyId,
        from: u64,
        to: u64,
    },
    FetchReply(Vec<Final>),
}

impl BcchWire {
    pub fn signature_count(&self) -> usize {
        match self {
            BcchWire::Send { .. } | BcchWire::FetchRequest { .. } => 0,
            BcchWire::Echo { .. } => 1,
            BcchWire::Final(f) => f.cert.sigs.len(),
            BcchWire::FetchReply(fs) => fs.iter().map(|f| f.cert.sigs.len()).sum(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            BcchWire::Send { .. } => "bcch_send",
            BcchWire::Echo { .. } => "bcch_echo",
            BcchWire::Final(_) => "bcch_final",
            BcchWire::FetchRequest { .. } => "fetch_request",
            BcchWire::FetchReply(_) => "fetch_reply",
        }
    }
}

impl Canonical for BcchWire {
    fn encode(&self, enc: &mut Encoder) {
        match self {
            BcchWire::Send { round, tx } => {
                enc.u8(0).u64(*round).put(tx);
            }
            BcchWire::Echo {
                sender,
                round,
                digest,
                sig,
            } => {
                enc.u8(1).u32(sender.0).u64(*round).put(digest).put(sig);
            }
            BcchWire::Final(f) => {
                enc.u8(2).put(f);
            }
            BcchWire::FetchRequest { sender, from, to } => {
                enc.u8(3).u32(sender.0).u64(*from).u64(*to);
            }
            BcchWire::FetchReply(fs) => {
                enc.u8(4).list(fs);
            }
        }
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(match dec.u8()? {
            0 => BcchWire::Send {
                round: dec.u64()?,
                tx: dec.get()?,
            },
            1 => BcchWire::Echo {
                sender: PartyId(dec.u32()?),
                round: dec.u64()?,
                digest: dec.get()?,
                sig: dec.get()?,
            },
            2 => BcchWire::Final(dec.get()?),
            3 => BcchWire::FetchRequest {
                sender: PartyId(dec.u32()?),
                from: dec.u64()?,
                to: dec.u64()?,
            },
            4 => BcchWire::FetchReply(dec.list()?),
            t => return Err(DecodeError::InvalidTag(t, "bcch")),
        })
    }
}

/// One bcch delivery: `tx` from `from`'s channel at instance `round`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BcchMessage {
    pub tx: TxRef,
    pub round: u64,
    pub from: PartyId,
    pub id: TxId,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BcchStats {
    pub invalid_echoes: u64,
    pub invalid_finals: u64,
    pub duplicate_finals: u64,
    pub window_drops: u64,
}

struct Active {
    round: u64,
    tx: TxRef,
    echoes: BTreeMap<PartyId, Signature>,
}

pub type Outbox = Vec<(Dest, BcchWire)>;

/// The bcch endpoint of one party: its own sending channel plus the
/// receiving side of every sender's channel.
pub struct Bcch {
    cfg: Config,
    keys: KeyMaterial,
    window: u64,
    queue_bound: usize,
    queue: VecDeque<TxRef>,
    next_instance: u64,
    active: Option<Active>,
    next_deliver: Vec<u64>,
    echoed: Vec<HashSet<u64>>,
    buffered: Vec<BTreeMap<u64, Final>>,
    fetch_upto: Vec<u64>,
    store: Vec<Vec<Final>>,
    stats: BcchStats,
}

impl Bcch {
    pub fn new(cfg: Config, keys: KeyMaterial) -> Self {
        let n = cfg.n;
        Bcch {
            cfg,
            keys,
            window: DEFAULT_WINDOW,
            queue_bound: DEFAULT_QUEUE_BOUND,
            queue: VecDeque::new(),
            next_instance: 0,
            active: None,
            next_deliver: vec![0; n],
            echoed: vec![HashSet::new(); n],
            buffered: vec![BTreeMap::new(); n],
            fetch_upto: vec![0; n],
            store: vec![Vec::new(); n],
            stats: BcchStats::default(),
        }
    }

    pub fn with_limits(mut self, window: u64, queue_bound: usize) -> Self {
        self.window = window;
        self.queue_bound = queue_bound;
        self
    }

    pub fn me(&self) -> PartyId {
        self.keys.id()
    }

    pub fn stats(&self) -> BcchStats {
        self.stats
    }

    /// Number of instances delivered from `sender`.
    pub fn delivered(&self, sender: PartyId) -> u64 {
        self.next_deliver[sender.index()]
    }

    /// Transactions queued behind the active instance.
    pub fn backlog(&self) -> usize {
        self.queue.len()
    }

    /// The retained `FINAL` for an instance already delivered here.
    pub fn proof(&self, sender: PartyId, round: u64) -> Option<&Final> {
        self.store.get(sender.index())?.get(round as usize)
    }

    /// Queues `tx` on this party's channel. Returns
    /// [`Error::Backpressure`] once the queue bound is reached.
    pub fn broadcast(&mut self, tx: TxRef, out: &mut Outbox) -> Result<()> {
        if self.queue.len() >= self.queue_bound {
            return Err(Error::Backpressure(self.queue.len()));
        }
        self.queue.push_back(tx);
        self.start_next(out);
        Ok(())
    }

    fn start_next(&mut self, out: &mut Outbox) {
        if self.active.is_some() {
            return;
        }
        let Some(tx) = self.queue.pop_front() else {
            return;
        };
        let round = self.next_instance;
        self.next_instance += 1;
        out.push((
            Dest::All,
            BcchWire::Send {
                round,
                tx: tx.clone(),
            },
        ));
        self.active = Some(Active {
            round,
            tx,
            echoes: BTreeMap::new(),
        });
    }

    /// Handles one authenticated message from `from`; returns the
    /// transactions delivered as a consequence, in channel order.
    pub fn handle(&mut self, from: PartyId, wire: BcchWire, out: &mut Outbox) -> Vec<BcchMessage> {
        let mut delivered = Vec::new();
        if !self.cfg.contains(from) {
            return delivered;
        }
        match wire {
            BcchWire::Send { round, tx } => self.on_send(from, round, tx, out),
            BcchWire::Echo {
                sender,
                round,
                digest,
                sig,
            } => self.on_echo(from, sender, round, digest, sig, out),
            BcchWire::Final(f) => self.accept_final(f, false, &mut delivered),
            BcchWire::FetchRequest {
                sender,
                from: lo,
                to: hi,
            } => self.on_fetch(from, sender, lo, hi, out),
            BcchWire::FetchReply(finals) => {
                for f in finals {
                    self.accept_final(f, true, &mut delivered);
                }
            }
        }
        delivered
    }

    fn on_send(&mut self, sender: PartyId, round: u64, tx: TxRef, out: &mut Outbox) {
        let s = sender.index();
        if round < self.next_deliver[s] || !self.echoed[s].insert(round) {
            return;
        }
        let digest = tx.id();
        let sig = self.keys.sign(&echo_bytes(sender, round, &digest));
        out.push((
            Dest::One(sender),
            BcchWire::Echo {
                sender,
                round,
                digest,
                sig,
            },
        ));
    }

    fn on_echo(
        &mut self,
        signer: PartyId,
        sender: PartyId,
        round: u64,
        digest: Digest,
        sig: Signature,
        out: &mut Outbox,
    ) {
        if sender != self.me() {
            return;
        }
        let Some(active) = self.active.as_mut() else {
            return;
        };
        if active.round != round || active.tx.id() != digest || active.echoes.contains_key(&signer)
        {
            return;
        }
        if !self
            .keys
            .verify(signer, &echo_bytes(sender, round, &digest), &sig)
        {
            self.stats.invalid_echoes += 1;
            return;
        }
        active.echoes.insert(signer, sig);
        if active.echoes.len() < self.cfg.echo_quorum() {
            return;
        }
        let active = self.active.take().unwrap();
        let cert = EchoCertificate {
            sender,
            round,
            digest,
            sigs: active.echoes.into_iter().collect(),
        };
        out.push((
            Dest::All,
            BcchWire::Final(Final {
                tx: active.tx,
                cert,
            }),
        ));
        self.start_next(out);
    }

    fn on_fetch(
        &mut self,
        requester: PartyId,
        sender: PartyId,
        lo: u64,
        hi: u64,
        out: &mut Outbox,
    ) {
        let Some(store) = self.store.get(sender.index()) else {
            return;
        };
        let hi = hi.min(store.len() as u64).min(lo.saturating_add(MAX_FETCH));
        if lo >= hi {
            return;
        }
        let finals = store[lo as usize..hi as usize].to_vec();
        out.push((Dest::One(requester), BcchWire::FetchReply(finals)));
    }

    /// Validates a `FINAL` and delivers it (and any buffered successors) if it
    /// is the next instance of its sender. Fetched instances bypass the window.
    fn accept_final(&mut self, f: Final, solicited: bool, delivered: &mut Vec<BcchMessage>) {
        let sender = f.cert.sender;
        if !self.cfg.contains(sender) {
            self.stats.invalid_finals += 1;
            return;
        }
        let s = sender.index();
        let round = f.cert.round;
        if round < self.next_deliver[s] || self.buffered[s].contains_key(&round) {
            self.stats.duplicate_finals += 1;
            return;
        }
        if f.cert.digest != f.tx.id() || !f.cert.verify(&self.cfg, self.keys.keyring().as_ref()) {
            self.stats.invalid_finals += 1;
            return;
        }
        let limit = (self.next_deliver[s] + self.window).max(self.fetch_upto[s]);
        if round >= limit && !solicited {
            self.stats.window_drops += 1;
            return;
        }
        self.buffered[s].insert(round, f);
        while let Some(next) = self.buffered[s].remove(&self.next_deliver[s]) {
            let round = self.next_deliver[s];
            self.next_deliver[s] += 1;
            self.echoed[s].retain(|r| *r >= round);
            delivered.push(BcchMessage {
                tx: next.tx.clone(),
                round,
                from: sender,
                id: next.tx.id(),
            });
            self.store[s].push(next);
        }
    }

    /// Asks every other party for `sender`'s instances up to (excluding) `upto`.
    pub fn request_missing(&mut self, sender: PartyId, upto: u64, out: &mut Outbox) {
        let s = sender.index();
        if self.next_deliver[s] >= upto || self.fetch_upto[s] >= upto {
            return;
        }
        self.fetch_upto[s] = upto;
        out.push((
            Dest::Others,
            BcchWire::FetchRequest {
                sender,
                from: self.next_deliver[s],
                to: upto,
            },
        ));
    }
}

#[cfg(test)]
mod tests {
    use std::collections::VecDeque;
    use std::sync::Arc;

    use super::*;
    use crate::tx::Transaction;

    /// Immediate in-order delivery between endpoints, with an optional
    /// per-message filter standing in for a Byzantine sender or a lossy link.
    struct Net {
        nodes: Vec<Bcch>,
        queue: VecDeque<(PartyId, PartyId, BcchWire)>,
        delivered: Vec<Vec<BcchMessage>>,
    }

    impl Net {
        fn new(n: usize, f: usize) -> Self {
            let cfg = Config::new(n, f, 0).unwrap();
            let keys = KeyMaterial::generate(42, n);
            Net {
                nodes: keys
                    .into_iter()
                    .map(|k| Bcch::new(cfg.clone(), k))
                    .collect(),
                queue: VecDeque::new(),
                delivered: vec![Vec::new(); n],
            }
        }

        fn post(&mut self, from: PartyId, out: Outbox) {
            let n = self.nodes.len();
            for (dest, m) in out {
                let targets: Vec<PartyId> = match dest {
                    Dest::All => (0..n).map(PartyId::from).collect(),
                    Dest::Others => (0..n).map(PartyId::from).filter(|p| *p != from).collect(),
                    Dest::One(p) => vec![p],
                };
                for to in targets {
                    self.queue.push_back((from, to, m.clone()));
                }
            }
        }

        fn broadcast(&mut self, p: usize, tx: TxRef) {
            let mut out = Vec::new();
            self.nodes[p].broadcast(tx, &mut out).unwrap();
            self.post(PartyId::from(p), out);
        }

        fn run(&mut self, mut keep: impl FnMut(PartyId, PartyId, &BcchWire) -> bool) {
            while let Some((from, to, m)) = self.queue.pop_front() {
                if !keep(from, to, &m) {
                    continue;
                }
                let mut out = Vec::new();
                let d = self.nodes[to.index()].handle(from, m, &mut out);
                self.delivered[to.index()].extend(d);
                self.post(to, out);
            }
        }
    }

    fn tx(i: u64) -> TxRef {
        Arc::new(Transaction::new(1, i, format!("t{i}").into_bytes()))
    }

    #[test]
    fn correct_sender_delivers_everywhere_once() {
        let mut net = Net::new(4, 1);
        net.broadcast(2, tx(0));
        net.run(|_, _, _| true);
        for d in &net.delivered {
            assert_eq!(d.len(), 1);
            assert_eq!(d[0].id, tx(0).id());
            assert_eq!((d[0].from, d[0].round), (PartyId(2), 0));
        }
    }

    #[test]
    fn fifo_order_per_sender() {
        let mut net = Net::new(4, 1);
        for i in 0..3 {
            net.broadcast(0, tx(i));
        }
        net.run(|_, _, _| true);
        for d in &net.delivered {
            let ids: Vec<_> = d.iter().map(|m| m.id).collect();
            assert_eq!(ids, vec![tx(0).id(), tx(1).id(), tx(2).id()]);
            assert_eq!(d.iter().map(|m| m.round).collect::<Vec<_>>(), vec![0, 1, 2]);
        }
    }

    #[test]
    fn silent_sender_creates_nothing() {
        let mut net = Net::new(4, 1);
        net.broadcast(3, tx(0));
        // the sender's SENDs never leave it
        net.run(|from, to, m| {
            !(from == PartyId(3) && to != PartyId(3) && matches!(m, BcchWire::Send { .. }))
        });
        for p in 0..3 {
            assert!(net.delivered[p].is_empty());
        }
    }

    #[test]
    fn replayed_final_is_ignored() {
        let mut net = Net::new(4, 1);
        net.broadcast(1, tx(0));
        let mut finals = Vec::new();
        net.run(|_, _, m| {
            if let BcchWire::Final(f) = m {
                finals.push(f.clone());
            }
            true
        });
        let mut out = Vec::new();
        let again = net.nodes[0].handle(PartyId(1), BcchWire::Final(finals[0].clone()), &mut out);
        assert!(again.is_empty());
        assert_eq!(net.nodes[0].stats().duplicate_finals, 1);
    }

    #[test]
    fn forged_certificate_rejected() {
        let mut net = Net::new(4, 1);
        let keys = KeyMaterial::generate(42, 4);
        let t = tx(5);
        // only two echoes, one short of the quorum
        let sigs = (0..2)
            .map(|i| {
                (
                    PartyId(i),
                    keys[i as usize].sign(&echo_bytes(PartyId(3), 0, &t.id())),
                )
            })
            .collect();
        let short = Final {
            tx: t.clone(),
            cert: EchoCertificate {
                sender: PartyId(3),
                round: 0,
                digest: t.id(),
                sigs,
            },
        };
        let mut out = Vec::new();
        assert!(net.nodes[0]
            .handle(PartyId(3), BcchWire::Final(short.clone()), &mut out)
            .is_empty());
        // duplicated signer to pad the count
        let mut padded = short.clone();
        padded.cert.sigs.push(padded.cert.sigs[0]);
        assert!(net.nodes[0]
            .handle(PartyId(3), BcchWire::Final(padded), &mut out)
            .is_empty());
        // a quorum over a different message
        let other = tx(6);
        let mut swapped = short;
        swapped.cert.sigs = (0..3)
            .map(|i| {
                (
                    PartyId(i),
                    keys[i as usize].sign(&echo_bytes(PartyId(3), 0, &other.id())),
                )
            })
            .collect();
        assert!(net.nodes[0]
            .handle(PartyId(3), BcchWire::Final(swapped), &mut out)
            .is_empty());
        assert_eq!(net.nodes[0].stats().invalid_finals, 3);
    }

    #[test]
    fn no_two_disjoint_echo_quorums_n4_f1() {
        // Oracle: enumerate every echo assignment of the three correct parties
        // (echo m, echo m', or nothing); the Byzantine sender signs both.
        let quorum = Config::new(4, 1, 0).unwrap().echo_quorum();
        assert_eq!(quorum, 3);
        for assignment in 0..27u32 {
            let mut support = [1usize, 1usize];
            let mut a = assignment;
            for _ in 0..3 {
                match a % 3 {
                    0 => support[0] += 1,
                    1 => support[1] += 1,
                    _ => {}
                }
                a /= 3;
            }
            assert!(
                !(support[0] >= quorum && support[1] >= quorum),
                "assignment {assignment} yields two quorums"
            );
        }
    }

    #[test]
    fn equivocating_sender_cannot_split_deliveries() {
        // p3 sends m to p0, p1 and m' to p2; p3 echoes both and forwards every
        // FINAL it can assemble.
        for split in 0..3usize {
            let mut net = Net::new(4, 1);
            let m = tx(10);
            let alt = tx(11);
            let keys = KeyMaterial::generate(42, 4);
            net.broadcast(3, m.clone());
            let mut alt_echoes: Vec<(PartyId, Signature)> = vec![(
                PartyId(3),
                keys[3].sign(&echo_bytes(PartyId(3), 0, &alt.id())),
            )];
            let mut queue = std::mem::take(&mut net.queue);
            // rewrite the SEND for the party in the alt group
            for item in queue.iter_mut() {
                if let (from, to, BcchWire::Send { round, .. }) = item {
                    if *from == PartyId(3) && to.index() == split {
                        *item = (
                            PartyId(3),
                            *to,
                            BcchWire::Send {
                                round: *round,
                                tx: alt.clone(),
                            },
                        );
                    }
                }
            }
            net.queue = queue;
            net.run(|_, to, msg| {
                if let BcchWire::Echo { digest, sig, .. } = msg {
                    if to == PartyId(3) && *digest == alt.id() {
                        alt_echoes.push((PartyId::from(split), *sig));
                    }
                }
                true
            });
            assert!(alt_echoes.len() < 3, "alt reached a quorum");
            for p in 0..3 {
                for d in &net.delivered[p] {
                    assert_eq!(d.id, m.id(), "party {p} delivered the alternative");
                }
            }
        }
    }

    #[test]
    fn fetch_recovers_missing_instances_with_proof() {
        let mut net = Net::new(4, 1);
        for i in 0..3 {
            net.broadcast(1, tx(i));
        }
        // p0 never sees p1's FINALs
        net.run(|from, to, m| {
            !(from == PartyId(1) && to == PartyId(0) && matches!(m, BcchWire::Final(_)))
        });
        assert!(net.delivered[0].is_empty());
        let mut out = Vec::new();
        net.nodes[0].request_missing(PartyId(1), 3, &mut out);
        assert_eq!(out.len(), 1);
        net.post(PartyId(0), out);
        net.run(|_, _, _| true);
        let ids: Vec<_> = net.delivered[0].iter().map(|m| m.id).collect();
        assert_eq!(ids, vec![tx(0).id(), tx(1).id(), tx(2).id()]);
        assert!(net.nodes[0].proof(PartyId(1), 2).is_some());
        // already covered: no request
        let mut out = Vec::new();
        net.nodes[0].request_missing(PartyId(1), 3, &mut out);
        assert!(out.is_empty());
    }

    #[test]
    fn backpressure_when_queue_full() {
        let cfg = Config::new(4, 1, 0).unwrap();
        let keys = KeyMaterial::generate(1, 4);
        let mut b = Bcch::new(cfg, keys[0].clone()).with_limits(DEFAULT_WINDOW, 2);
        let mut out = Vec::new();
        // the first becomes active, two fill the queue
        for i in 0..3 {
            b.broadcast(tx(i), &mut out).unwrap();
        }
        assert!(matches!(
            b.broadcast(tx(9), &mut out),
            Err(Error::Backpressure(2))
        ));
    }

    #[test]
    fn wire_encoding_round_trips() {
        let mut net = Net::new(4, 1);
        net.broadcast(0, tx(1));
        let mut seen = Vec::new();
        net.run(|_, _, m| {
            seen.push(m.clone());
            true
        });
        seen.push(BcchWire::FetchRequest {
            sender: PartyId(1),
            from: 2,
            to: 9,
        });
        for m in seen {
            assert_eq!(BcchWire::from_bytes(&m.to_bytes()).unwrap(), m);
        }
    }
}
