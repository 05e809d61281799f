//! The per-party QOF round engine.
//!
//! A round runs in two phases. In the broadcast-and-consensus phase a party
//! signs its vector clock, collects `n - f` signed clocks from the status
//! messages of others and proposes them to vbc; the decided matrix fixes the
//! cut, and any transaction inside the cut that this party has not
//! bcch-delivered yet is fetched with its echo certificate. In the graph phase
//! the undelivered transactions inside the cut are ordered by
//! [`fairgraph::order_round`] and emitted as batches.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::abc::{Abc, AbcOutput, AbcParams};
use crate::bcch::{Bcch, BcchMessage, DEFAULT_QUEUE_BOUND, DEFAULT_WINDOW};
use crate::clock::VectorClock;
use crate::codec::{Canonical, DecodeError, Decoder, Encoder};
use crate::config::{Config, PartyId};
use crate::crypto::{digest, KeyMaterial, Signer};
use crate::error::Result;
use crate::fairgraph::{self, RoundOrder};
use crate::message::{status_bytes, Dest, Message, StatusMessage};
use crate::trace::{GraphSummary, TraceEvent};
use crate::transport::sim::Micros;
use crate::tx::{TxId, TxRef, MAX_PAYLOAD};
use crate::vbc::{ClockMatrix, Decision, Vbc, VbcAdmission};

/// Rounds started on a flush without the cut moving before retries stop.
const IDLE_ROUND_LIMIT: u32 = 3;
/// Status messages further ahead than this are dropped.
const STATUS_HORIZON: u64 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TimerKind {
    Flush(u64),
    Abc(u64),
}

#[derive(Clone, Debug)]
pub enum Input {
    /// A client submission.
    Client(TxRef),
    Message {
        from: PartyId,
        msg: Message,
    },
    Timer(TimerKind),
}

#[derive(Clone, Debug)]
pub enum Output {
    Send {
        dest: Dest,
        msg: Message,
    },
    Timer {
        kind: TimerKind,
        after: Micros,
    },
    Deliver(DeliveredBatch),
    Trace(TraceEvent),
    /// Abstract local computation performed, for cost models.
    Work(u64),
}

/// A set of transactions of-delivered together.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeliveredBatch {
    pub round: u64,
    pub seq: u32,
    pub txs: Vec<TxRef>,
}

impl DeliveredBatch {
    pub fn ids(&self) -> Vec<TxId> {
        self.txs.iter().map(|t| t.id()).collect()
    }
}

impl Canonical for DeliveredBatch {
    fn encode(&self, enc: &mut Encoder) {
        enc.u64(self.round).u32(self.seq).list(&self.txs);
    }

    fn decode(dec: &mut Decoder<'_>) -> std::result::Result<Self, DecodeError> {
        let b = DeliveredBatch {
            round: dec.u64()?,
            seq: dec.u32()?,
            txs: dec.list()?,
        };
        if b.txs.is_empty() {
            return Err(DecodeError::Invalid("empty batch"));
        }
        Ok(b)
    }
}

/// A sans-IO protocol endpoint.
pub trait Protocol {
    fn id(&self) -> PartyId;
    fn handle(&mut self, input: Input) -> Vec<Output>;
}

#[derive(Clone, Debug)]
pub struct PartyParams {
    pub flush_after: Micros,
    pub abc: AbcParams,
    pub bcch_window: u64,
    pub queue_bound: usize,
    /// Emit [`TraceEvent::Graph`] summaries (costly for large rounds).
    pub trace_graphs: bool,
}

impl Default for PartyParams {
    fn default() -> Self {
        PartyParams {
            flush_after: 5_000,
            abc: AbcParams::default(),
            bcch_window: DEFAULT_WINDOW,
            queue_bound: DEFAULT_QUEUE_BOUND,
            trace_graphs: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PartyStats {
    pub rounds: u64,
    pub batches: u64,
    pub bad_status: u64,
    pub rejected_submissions: u64,
}

/// `cut[j]`: the largest `v` such that more than `f` rows have column `j` at least `v`.
pub fn compute_cut<'a>(
    rows: impl IntoIterator<Item = &'a VectorClock>,
    n: usize,
    f: usize,
) -> Vec<u64> {
    let mut columns = vec![Vec::new(); n];
    for vc in rows {
        for (j, col) in columns.iter_mut().enumerate() {
            col.push(vc.counts().get(j).copied().unwrap_or(0));
        }
    }
    columns
        .into_iter()
        .map(|mut col| {
            col.sort_unstable_by(|a, b| b.cmp(a));
            col.get(f).copied().unwrap_or(0)
        })
        .collect()
}

pub struct Party {
    cfg: Config,
    keys: KeyMaterial,
    params: PartyParams,
    bcch: Bcch,
    vbc: Vbc,
    abc: Abc,
    seen: HashSet<TxId>,
    msgs: Vec<Vec<TxRef>>,
    by_id: HashMap<TxId, TxRef>,
    vc: VectorClock,
    new_since_status: usize,
    completed: u64,
    status_sent: u64,
    statuses: BTreeMap<u64, ClockMatrix>,
    proposed: u64,
    awaiting: Option<(u64, Vec<u64>)>,
    last_cut: Vec<u64>,
    idle_rounds: u32,
    delivered: HashSet<TxId>,
    flush_epoch: u64,
    flush_armed: bool,
    stats: PartyStats,
}

impl Party {
    pub fn new(cfg: Config, keys: KeyMaterial, params: PartyParams) -> Self {
        let n = cfg.n;
        let ring = keys.keyring().clone();
        let admission = VbcAdmission::new(cfg.clone(), ring.clone());
        Party {
            bcch: Bcch::new(cfg.clone(), keys.clone())
                .with_limits(params.bcch_window, params.queue_bound),
            vbc: Vbc::new(cfg.clone(), ring),
            abc: Abc::new(cfg.clone(), keys.clone(), params.abc, Box::new(admission)),
            cfg,
            keys,
            params,
            seen: HashSet::new(),
            msgs: vec![Vec::new(); n],
            by_id: HashMap::new(),
            vc: VectorClock::new(n),
            new_since_status: 0,
            completed: 0,
            status_sent: 0,
            statuses: BTreeMap::new(),
            proposed: 0,
            awaiting: None,
            last_cut: vec![0; n],
            idle_rounds: 0,
            delivered: HashSet::new(),
            flush_epoch: 0,
            flush_armed: false,
            stats: PartyStats::default(),
        }
    }

    pub fn config(&self) -> &Config {
        &self.cfg
    }

    pub fn keys(&self) -> &KeyMaterial {
        &self.keys
    }

    pub fn vc(&self) -> &VectorClock {
        &self.vc
    }

    pub fn msgs(&self) -> &[Vec<TxRef>] {
        &self.msgs
    }

    pub fn completed_rounds(&self) -> u64 {
        self.completed
    }

    pub fn delivered(&self) -> &HashSet<TxId> {
        &self.delivered
    }

    pub fn stats(&self) -> PartyStats {
        self.stats
    }

    pub fn bcch(&self) -> &Bcch {
        &self.bcch
    }

    pub fn abc(&self) -> &Abc {
        &self.abc
    }

    pub fn vbc(&self) -> &Vbc {
        &self.vbc
    }

    fn me(&self) -> PartyId {
        self.keys.id()
    }

    fn trace(&self, out: &mut Vec<Output>, event: TraceEvent) {
        out.push(Output::Trace(event));
    }

    /// Hands `tx` to this party's bcch channel; re-submissions are no-ops.
    pub fn of_broadcast(&mut self, tx: TxRef, out: &mut Vec<Output>) -> Result<()> {
        if !tx.payload_within(MAX_PAYLOAD) || self.seen.contains(&tx.id()) {
            return Ok(());
        }
        let mut wire = Vec::new();
        self.bcch.broadcast(tx.clone(), &mut wire)?;
        self.seen.insert(tx.id());
        self.trace(
            out,
            TraceEvent::OfBroadcast {
                party: self.me(),
                tx: tx.id(),
            },
        );
        self.push_bcch(wire, out);
        Ok(())
    }

    fn push_bcch(&self, wire: crate::bcch::Outbox, out: &mut Vec<Output>) {
        out.extend(wire.into_iter().map(|(dest, w)| Output::Send {
            dest,
            msg: Message::Bcch(w),
        }));
    }

    fn push_abc(&mut self, abc_out: Vec<AbcOutput>, out: &mut Vec<Output>) {
        for o in abc_out {
            match o {
                AbcOutput::Send(dest, w) => out.push(Output::Send {
                    dest,
                    msg: Message::Abc(w),
                }),
                AbcOutput::Timer { epoch, after } => out.push(Output::Timer {
                    kind: TimerKind::Abc(epoch),
                    after,
                }),
                AbcOutput::Deliver { values, .. } => {
                    for v in values {
                        if let Some(d) = self.vbc.on_abc_deliver(&v) {
                            self.on_decide(d, out);
                        }
                    }
                }
            }
        }
    }

    fn on_bcch_deliver(&mut self, m: BcchMessage, out: &mut Vec<Output>) {
        self.vc.increment(m.from);
        self.by_id.entry(m.id).or_insert_with(|| m.tx.clone());
        self.msgs[m.from.index()].push(m.tx);
        self.new_since_status += 1;
        self.trace(
            out,
            TraceEvent::BcchDeliver {
                party: self.me(),
                from: m.from,
                round: m.round,
                tx: m.id,
            },
        );
    }

    fn current_round(&self) -> u64 {
        self.completed + 1
    }

    fn beyond_last_cut(&self) -> bool {
        self.vc
            .counts()
            .iter()
            .zip(&self.last_cut)
            .any(|(v, c)| v > c)
    }

    fn has_reason_for_round(&self) -> bool {
        self.new_since_status > 0 || (self.beyond_last_cut() && self.idle_rounds < IDLE_ROUND_LIMIT)
    }

    fn maybe_start_round(&mut self, flushed: bool, out: &mut Vec<Output>) {
        let r = self.current_round();
        if self.status_sent >= r {
            return;
        }
        let joined = self.statuses.get(&r).is_some_and(|m| !m.is_empty());
        let triggered = self.new_since_status >= self.cfg.round_trigger
            || joined
            || (flushed && self.has_reason_for_round());
        if triggered {
            self.send_status(r, out);
        } else if self.has_reason_for_round() && !self.flush_armed {
            self.flush_epoch += 1;
            self.flush_armed = true;
            out.push(Output::Timer {
                kind: TimerKind::Flush(self.flush_epoch),
                after: self.params.flush_after,
            });
        }
    }

    fn send_status(&mut self, r: u64, out: &mut Vec<Output>) {
        let vc = self.vc.clone();
        let sig = self.keys.sign(&status_bytes(r, &vc));
        self.status_sent = r;
        self.new_since_status = 0;
        self.trace(
            out,
            TraceEvent::Status {
                party: self.me(),
                round: r,
                vc: vc.clone(),
            },
        );
        out.push(Output::Send {
            dest: Dest::Others,
            msg: Message::Status(StatusMessage {
                round: r,
                vc: vc.clone(),
                sig,
            }),
        });
        let me = self.me();
        self.statuses
            .entry(r)
            .or_insert_with(|| ClockMatrix::new(r))
            .rows
            .entry(me)
            .or_insert((vc, sig));
        self.maybe_propose(out);
    }

    fn on_status(&mut self, from: PartyId, s: StatusMessage, out: &mut Vec<Output>) {
        if s.round < self.current_round() || s.round > self.current_round() + STATUS_HORIZON {
            return;
        }
        if s.vc.len() != self.cfg.n
            || !self
                .keys
                .verify(from, &status_bytes(s.round, &s.vc), &s.sig)
        {
            self.stats.bad_status += 1;
            return;
        }
        self.statuses
            .entry(s.round)
            .or_insert_with(|| ClockMatrix::new(s.round))
            .rows
            .entry(from)
            .or_insert((s.vc, s.sig));
        if s.round == self.current_round() {
            self.maybe_start_round(false, out);
            self.maybe_propose(out);
        }
    }

    fn maybe_propose(&mut self, out: &mut Vec<Output>) {
        let r = self.current_round();
        if self.proposed >= r || self.status_sent < r {
            return;
        }
        let Some(matrix) = self.statuses.get(&r) else {
            return;
        };
        if matrix.len() < self.cfg.quorum() {
            return;
        }
        let matrix = matrix.clone();
        self.proposed = r;
        match self.vbc.propose(matrix) {
            Ok(outcome) => {
                self.trace(
                    out,
                    TraceEvent::Propose {
                        party: self.me(),
                        round: r,
                    },
                );
                if let Some(bytes) = outcome.broadcast {
                    let abc_out = self.abc.broadcast(bytes);
                    self.push_abc(abc_out, out);
                }
                if let Some(d) = outcome.decided {
                    self.on_decide(d, out);
                }
            }
            Err(e) => {
                tracing::warn!(party = %self.me(), round = r, "vbc propose failed: {e}");
            }
        }
    }

    fn on_decide(&mut self, d: Decision, out: &mut Vec<Output>) {
        let cut = compute_cut(d.value.clocks(), self.cfg.n, self.cfg.f);
        self.trace(
            out,
            TraceEvent::Decide {
                party: self.me(),
                round: d.round,
                rows: d.value.rows.keys().copied().collect(),
                value: digest(&d.value.to_bytes()),
            },
        );
        self.trace(
            out,
            TraceEvent::Cut {
                party: self.me(),
                round: d.round,
                cut: cut.clone(),
            },
        );
        let mut wire = Vec::new();
        for (j, &c) in cut.iter().enumerate() {
            if self.vc[j] < c {
                self.bcch.request_missing(PartyId::from(j), c, &mut wire);
            }
        }
        self.push_bcch(wire, out);
        self.awaiting = Some((d.round, cut));
        self.try_complete(out);
    }

    fn try_complete(&mut self, out: &mut Vec<Output>) {
        let ready = match &self.awaiting {
            Some((_, cut)) => self.vc.counts().iter().zip(cut).all(|(v, c)| v >= c),
            None => false,
        };
        if !ready {
            return;
        }
        let (r, cut) = self.awaiting.take().unwrap();
        self.run_round(r, cut, out);
        self.maybe_start_round(false, out);
        self.maybe_propose(out);
    }

    fn run_round(&mut self, r: u64, cut: Vec<u64>, out: &mut Vec<Output>) {
        let order = fairgraph::order_round(&self.msgs, &cut, &self.delivered, &self.cfg)
            .expect("cut is covered by the local logs");
        out.push(Output::Work(order.work));
        if self.params.trace_graphs {
            let summary = self.summarize(&cut, &order);
            self.trace(
                out,
                TraceEvent::Graph {
                    party: self.me(),
                    round: r,
                    summary,
                },
            );
        }
        for (seq, ids) in order.batches.iter().enumerate() {
            let txs: Vec<TxRef> = ids.iter().map(|id| self.by_id[id].clone()).collect();
            self.delivered.extend(ids.iter().copied());
            self.trace(
                out,
                TraceEvent::Batch {
                    party: self.me(),
                    round: r,
                    seq: seq as u32,
                    txs: ids.clone(),
                },
            );
            out.push(Output::Deliver(DeliveredBatch {
                round: r,
                seq: seq as u32,
                txs,
            }));
            self.stats.batches += 1;
        }
        self.idle_rounds = if cut == self.last_cut {
            self.idle_rounds + 1
        } else {
            0
        };
        self.last_cut = cut;
        self.completed = r;
        self.stats.rounds += 1;
        self.statuses = self.statuses.split_off(&(r + 1));
    }

    fn summarize(&self, cut: &[u64], order: &RoundOrder) -> GraphSummary {
        let label = |id: &TxId| self.by_id[id].label();
        let sorted = |ids: &[TxId]| {
            let mut v: Vec<String> = ids.iter().map(label).collect();
            v.sort();
            v
        };
        let mut comps: Vec<(Vec<String>, usize)> = order
            .collapsed
            .vertices()
            .iter()
            .enumerate()
            .map(|(i, v)| (sorted(&v.members), i))
            .collect();
        comps.sort();
        let mut pos = vec![0; comps.len()];
        for (new, (_, old)) in comps.iter().enumerate() {
            pos[*old] = new;
        }
        let mut edges: Vec<(usize, usize)> = order
            .collapsed
            .edges()
            .map(|(a, b)| (pos[a], pos[b]))
            .collect();
        edges.sort();
        GraphSummary {
            cut: cut.to_vec(),
            vertices: sorted(&order.vertices),
            components: comps.into_iter().map(|(c, _)| c).collect(),
            edges,
            batches: order.batches.iter().map(|b| sorted(b)).collect(),
        }
    }
}

impl Protocol for Party {
    fn id(&self) -> PartyId {
        self.me()
    }

    fn handle(&mut self, input: Input) -> Vec<Output> {
        let mut out = Vec::new();
        match input {
            Input::Client(tx) => {
                if self.of_broadcast(tx, &mut out).is_err() {
                    self.stats.rejected_submissions += 1;
                }
            }
            Input::Message { from, msg } => match msg {
                Message::Bcch(w) => {
                    let mut wire = Vec::new();
                    let delivered = self.bcch.handle(from, w, &mut wire);
                    self.push_bcch(wire, &mut out);
                    if !delivered.is_empty() {
                        for m in delivered {
                            self.on_bcch_deliver(m, &mut out);
                        }
                        self.try_complete(&mut out);
                        self.maybe_start_round(false, &mut out);
                    }
                }
                Message::Status(s) => self.on_status(from, s, &mut out),
                Message::Abc(w) => {
                    let abc_out = self.abc.handle(from, w);
                    self.push_abc(abc_out, &mut out);
                }
            },
            Input::Timer(TimerKind::Flush(epoch)) => {
                if epoch == self.flush_epoch && self.flush_armed {
                    self.flush_armed = false;
                    self.maybe_start_round(true, &mut out);
                }
            }
            Input::Timer(TimerKind::Abc(epoch)) => {
                let abc_out = self.abc.on_timer(epoch);
                self.push_abc(abc_out, &mut out);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn column_cut(col: &[u64], f: usize) -> u64 {
        let rows: Vec<VectorClock> = col
            .iter()
            .map(|v| VectorClock::from_counts(vec![*v]))
            .collect();
        compute_cut(rows.iter(), 1, f)[0]
    }

    #[test]
    fn cut_examples() {
        assert_eq!(column_cut(&[5, 3, 0, 2], 1), 3);
        assert_eq!(column_cut(&[4, 4, 4], 1), 4);
        assert_eq!(column_cut(&[4, 3, 2], 0), 4);
        assert_eq!(column_cut(&[7], 1), 0);
    }

    proptest! {
        #[test]
        fn cut_matches_threshold_enumeration(
            col in prop::collection::vec(0u64..20, 1..8),
            f in 0usize..3,
        ) {
            let max = col.iter().copied().max().unwrap_or(0);
            let want = (0..=max)
                .filter(|&v| col.iter().filter(|&&x| x >= v).count() > f)
                .max()
                .unwrap_or(0);
            prop_assert_eq!(column_cut(&col, f), want);
        }
    }
}
