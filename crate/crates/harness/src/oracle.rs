//! Trace oracles: fairness, atomic broadcast, bcch and vbc properties
//! checked over a finished run.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use qof_core::{Config, PartyId, TxId};

use crate::sim::{BatchRecord, RunOutput};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FairnessViolation {
    /// The transaction that had to come first.
    pub first: TxId,
    pub second: TxId,
    /// `b(first, second)` and `b(second, first)`.
    pub forward: usize,
    pub backward: usize,
    pub party: PartyId,
}

impl fmt::Display for FairnessViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} delivered {} before {} although b = {} vs {}",
            self.party,
            self.second.short(),
            self.first.short(),
            self.forward,
            self.backward
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AbcViolation {
    /// Two correct parties' batch sequences diverge at `index`.
    Order {
        a: PartyId,
        b: PartyId,
        index: usize,
    },
    Duplicate {
        party: PartyId,
        tx: TxId,
    },
    Creation {
        party: PartyId,
        tx: TxId,
    },
    EmptyBatch {
        party: PartyId,
        index: usize,
    },
}

impl fmt::Display for AbcViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbcViolation::Order { a, b, index } => {
                write!(f, "total order: {a} and {b} differ at batch {index}")
            }
            AbcViolation::Duplicate { party, tx } => {
                write!(f, "duplication: {party} delivered {} twice", tx.short())
            }
            AbcViolation::Creation { party, tx } => {
                write!(f, "creation: {party} delivered unknown {}", tx.short())
            }
            AbcViolation::EmptyBatch { party, index } => {
                write!(f, "{party} delivered empty batch {index}")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BcchViolation {
    /// Correct parties delivered different transactions for one instance.
    Conflict {
        sender: PartyId,
        instance: u64,
        txs: Vec<TxId>,
    },
    /// Deliveries from `sender` at `party` skipped or repeated an instance.
    Fifo {
        party: PartyId,
        sender: PartyId,
        expected: u64,
        got: u64,
    },
}

impl fmt::Display for BcchViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BcchViolation::Conflict {
                sender,
                instance,
                txs,
            } => {
                write!(
                    f,
                    "bcch conflict on ({sender}, {instance}): {} values",
                    txs.len()
                )
            }
            BcchViolation::Fifo {
                party,
                sender,
                expected,
                got,
            } => write!(
                f,
                "bcch fifo at {party} from {sender}: expected {expected}, got {got}"
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RoundViolation {
    Disagreement { round: u64, a: PartyId, b: PartyId },
    CutDecreased { party: PartyId, round: u64 },
}

impl fmt::Display for RoundViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RoundViolation::Disagreement { round, a, b } => {
                write!(f, "vbc: {a} and {b} decided differently in round {round}")
            }
            RoundViolation::CutDecreased { party, round } => {
                write!(f, "{party}: cut of round {round} decreased")
            }
        }
    }
}

/// `b(x, y)`: parties whose order contains `x` and has it before `y`
/// (a party that never broadcast `y` counts as broadcasting `x` first).
pub fn precedes_count(orders: &[&[TxId]], x: &TxId, y: &TxId) -> usize {
    orders
        .iter()
        .filter(
            |o| match (o.iter().position(|t| t == x), o.iter().position(|t| t == y)) {
                (Some(a), Some(b)) => a < b,
                (Some(_), None) => true,
                _ => false,
            },
        )
        .count()
}

fn positions(order: &[TxId]) -> HashMap<TxId, usize> {
    let mut m = HashMap::with_capacity(order.len());
    for (i, t) in order.iter().enumerate() {
        m.entry(*t).or_insert(i);
    }
    m
}

fn batch_index(batches: &[BatchRecord]) -> HashMap<TxId, usize> {
    let mut m = HashMap::new();
    for (i, b) in batches.iter().enumerate() {
        for t in &b.txs {
            m.entry(*t).or_insert(i);
        }
    }
    m
}

/// Every pair whose broadcast margin exceeds `2f + kappa` yet was delivered
/// in the opposite order, in strictly earlier batches, by a correct party.
pub fn oracle_fairness(out: &RunOutput, cfg: &Config) -> Vec<FairnessViolation> {
    let orders: Vec<HashMap<TxId, usize>> = out
        .correct
        .iter()
        .map(|p| positions(&out.broadcast_orders[p.index()]))
        .collect();
    let delivered: Vec<(PartyId, HashMap<TxId, usize>)> = out
        .correct_batches()
        .map(|(p, b)| (p, batch_index(b)))
        .collect();
    let mut txs: Vec<TxId> = orders.iter().flat_map(|o| o.keys().copied()).collect();
    txs.sort();
    txs.dedup();
    let margin = 2 * cfg.f + cfg.kappa;
    let before = |x: &TxId, y: &TxId| {
        orders
            .iter()
            .filter(|o| match (o.get(x), o.get(y)) {
                (Some(a), Some(b)) => a < b,
                (Some(_), None) => true,
                _ => false,
            })
            .count()
    };
    let mut found = Vec::new();
    for (i, x) in txs.iter().enumerate() {
        for y in &txs[i + 1..] {
            let (xy, yx) = (before(x, y), before(y, x));
            let (first, second, forward, backward) = if xy > yx + margin {
                (x, y, xy, yx)
            } else if yx > xy + margin {
                (y, x, yx, xy)
            } else {
                continue;
            };
            for (p, idx) in &delivered {
                if let (Some(a), Some(b)) = (idx.get(first), idx.get(second)) {
                    if b < a {
                        found.push(FairnessViolation {
                            first: *first,
                            second: *second,
                            forward,
                            backward,
                            party: *p,
                        });
                    }
                }
            }
        }
    }
    found
}

/// Agreement and total order (prefix-consistent batch sequences), no
/// duplication and no creation at correct parties.
pub fn oracle_abc(out: &RunOutput) -> Vec<AbcViolation> {
    let mut found = Vec::new();
    let logs: Vec<(PartyId, &Vec<BatchRecord>)> = out.correct_batches().collect();
    if let Some((lp, longest)) = logs
        .iter()
        .max_by_key(|(p, l)| (l.len(), std::cmp::Reverse(*p)))
    {
        for (p, log) in &logs {
            if let Some(index) = log
                .iter()
                .zip(longest.iter())
                .position(|(a, b)| a.txs != b.txs)
            {
                found.push(AbcViolation::Order {
                    a: *lp,
                    b: *p,
                    index,
                });
            }
        }
    }
    for (p, log) in &logs {
        let mut seen = HashSet::new();
        for (index, b) in log.iter().enumerate() {
            if b.txs.is_empty() {
                found.push(AbcViolation::EmptyBatch { party: *p, index });
            }
            for t in &b.txs {
                if !seen.insert(*t) {
                    found.push(AbcViolation::Duplicate { party: *p, tx: *t });
                }
                if !out.known.contains(t) {
                    found.push(AbcViolation::Creation { party: *p, tx: *t });
                }
            }
        }
    }
    found
}

/// Consistency across correct parties and per-sender FIFO delivery.
pub fn oracle_bcch(out: &RunOutput) -> Vec<BcchViolation> {
    let mut found = Vec::new();
    let mut values: BTreeMap<(PartyId, u64), Vec<TxId>> = BTreeMap::new();
    for p in &out.correct {
        let mut next = vec![0u64; out.n];
        for (sender, instance, tx) in &out.bcch[p.index()] {
            let slot = &mut next[sender.index()];
            if *instance != *slot {
                found.push(BcchViolation::Fifo {
                    party: *p,
                    sender: *sender,
                    expected: *slot,
                    got: *instance,
                });
            }
            *slot = instance + 1;
            let v = values.entry((*sender, *instance)).or_default();
            if !v.contains(tx) {
                v.push(*tx);
            }
        }
    }
    for ((sender, instance), txs) in values {
        if txs.len() > 1 {
            found.push(BcchViolation::Conflict {
                sender,
                instance,
                txs,
            });
        }
    }
    found
}

/// Agreement on decided values and monotone cuts at correct parties.
pub fn oracle_rounds(out: &RunOutput) -> Vec<RoundViolation> {
    let mut found = Vec::new();
    let mut first: BTreeMap<u64, (PartyId, qof_core::Digest)> = BTreeMap::new();
    for p in &out.correct {
        for (round, d) in &out.decisions[p.index()] {
            match first.get(round) {
                Some((q, e)) if e != d => found.push(RoundViolation::Disagreement {
                    round: *round,
                    a: *q,
                    b: *p,
                }),
                Some(_) => {}
                None => {
                    first.insert(*round, (*p, *d));
                }
            }
        }
        for w in out.cuts[p.index()].windows(2) {
            if w[1].1.iter().zip(&w[0].1).any(|(b, a)| b < a) {
                found.push(RoundViolation::CutDecreased {
                    party: *p,
                    round: w[1].0,
                });
            }
        }
    }
    found
}

/// Submitted transactions some correct party has not delivered.
pub fn oracle_validity(out: &RunOutput) -> Vec<TxId> {
    let delivered: Vec<HashSet<TxId>> = out
        .correct_batches()
        .map(|(_, log)| log.iter().flat_map(|b| b.txs.iter().copied()).collect())
        .collect();
    out.submitted
        .iter()
        .filter(|t| delivered.iter().any(|d| !d.contains(t)))
        .copied()
        .collect()
}

#[derive(Clone, Debug, Default)]
pub struct OracleReport {
    pub fairness: Vec<FairnessViolation>,
    pub abc: Vec<AbcViolation>,
    pub bcch: Vec<BcchViolation>,
    pub rounds: Vec<RoundViolation>,
    /// Only populated when liveness is expected.
    pub undelivered: Vec<TxId>,
}

impl OracleReport {
    pub fn check(out: &RunOutput, cfg: &Config, expect_liveness: bool) -> Self {
        OracleReport {
            fairness: oracle_fairness(out, cfg),
            abc: oracle_abc(out),
            bcch: oracle_bcch(out),
            rounds: oracle_rounds(out),
            undelivered: if expect_liveness {
                oracle_validity(out)
            } else {
                Vec::new()
            },
        }
    }

    pub fn is_clean(&self) -> bool {
        self.fairness.is_empty()
            && self.abc.is_empty()
            && self.bcch.is_empty()
            && self.rounds.is_empty()
            && self.undelivered.is_empty()
    }

    pub fn lines(&self) -> Vec<String> {
        let mut v: Vec<String> = Vec::new();
        v.extend(self.fairness.iter().map(|x| format!("fairness: {x}")));
        v.extend(self.abc.iter().map(ToString::to_string));
        v.extend(self.bcch.iter().map(ToString::to_string));
        v.extend(self.rounds.iter().map(ToString::to_string));
        v.extend(
            self.undelivered
                .iter()
                .map(|t| format!("validity: {} never delivered", t.short())),
        );
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use qof_core::digest;

    fn tx(i: u8) -> TxId {
        digest(&[i])
    }

    fn output(orders: Vec<Vec<TxId>>, batches: Vec<Vec<Vec<TxId>>>) -> RunOutput {
        let n = orders.len();
        let known = orders.iter().flatten().copied().collect();
        RunOutput {
            n,
            correct: (0..n).map(PartyId::from).collect(),
            broadcast_orders: orders,
            batches: batches
                .into_iter()
                .map(|bs| {
                    bs.into_iter()
                        .enumerate()
                        .map(|(i, txs)| BatchRecord {
                            round: 1,
                            seq: i as u32,
                            txs,
                            at: 0,
                        })
                        .collect()
                })
                .collect(),
            bcch: vec![Vec::new(); n],
            decisions: vec![BTreeMap::new(); n],
            cuts: vec![Vec::new(); n],
            known,
            ..RunOutput::default()
        }
    }

    /// Brute force over every ordered pair and every party.
    fn brute(out: &RunOutput, cfg: &Config) -> usize {
        let orders: Vec<&[TxId]> = out
            .correct
            .iter()
            .map(|p| out.broadcast_orders[p.index()].as_slice())
            .collect();
        let all: HashSet<TxId> = orders.iter().flat_map(|o| o.iter().copied()).collect();
        let mut count = 0;
        for x in &all {
            for y in &all {
                if x == y
                    || precedes_count(&orders, x, y)
                        <= precedes_count(&orders, y, x) + 2 * cfg.f + cfg.kappa
                {
                    continue;
                }
                for (_, log) in out.correct_batches() {
                    let bx = log.iter().position(|b| b.txs.contains(x));
                    let by = log.iter().position(|b| b.txs.contains(y));
                    if matches!((bx, by), (Some(a), Some(b)) if b < a) {
                        count += 1;
                    }
                }
            }
        }
        count
    }

    #[test]
    fn unanimous_order_respected_passes() {
        let cfg = Config::new(4, 1, 0).unwrap();
        let (a, b) = (tx(1), tx(2));
        let mut out = output(vec![vec![a, b]; 3], vec![vec![vec![a], vec![b]]; 3]);
        out.correct.truncate(3);
        assert_eq!(precedes_count(&[&[a, b], &[a, b], &[a, b]], &a, &b), 3);
        assert!(oracle_fairness(&out, &cfg).is_empty());
        assert_eq!(brute(&out, &cfg), 0);
    }

    #[test]
    fn unanimous_order_reversed_flagged() {
        let cfg = Config::new(4, 1, 0).unwrap();
        let (a, b) = (tx(1), tx(2));
        let mut out = output(vec![vec![a, b]; 3], vec![vec![vec![b], vec![a]]; 3]);
        out.correct.truncate(3);
        let v = oracle_fairness(&out, &cfg);
        assert_eq!(v.len(), 3);
        assert_eq!((v[0].first, v[0].forward, v[0].backward), (a, 3, 0));
        assert_eq!(brute(&out, &cfg), 3);
    }

    #[test]
    fn same_batch_is_not_a_violation() {
        let cfg = Config::new(4, 1, 0).unwrap();
        let (a, b) = (tx(1), tx(2));
        let mut out = output(vec![vec![a, b]; 3], vec![vec![vec![b, a]]; 3]);
        out.correct.truncate(3);
        assert!(oracle_fairness(&out, &cfg).is_empty());
    }

    #[test]
    fn boundary_is_not_strict() {
        // b(a,b) = 2 with 2f + kappa = 2: premise false, any order allowed
        let cfg = Config::new(4, 1, 0).unwrap();
        let (a, b) = (tx(1), tx(2));
        let orders = vec![vec![a, b], vec![a, b], vec![b, a]];
        let out = output(orders.clone(), vec![vec![vec![b], vec![a]]; 3]);
        let mut out = out;
        out.correct.truncate(3);
        let slices: Vec<&[TxId]> = orders.iter().map(Vec::as_slice).collect();
        assert_eq!(precedes_count(&slices, &a, &b), 2);
        assert!(oracle_fairness(&out, &cfg).is_empty());
    }

    #[test]
    fn swapped_batches_break_total_order() {
        let (a, b) = (tx(1), tx(2));
        let mut out = output(vec![vec![a, b]; 3], vec![vec![vec![a], vec![b]]; 3]);
        assert!(oracle_abc(&out).is_empty());
        out.batches[1].swap(0, 1);
        assert!(oracle_abc(&out)
            .iter()
            .any(|v| matches!(v, AbcViolation::Order { b: PartyId(1), .. })));
    }

    #[test]
    fn phantom_transaction_flagged() {
        let (a, b) = (tx(1), tx(2));
        let mut out = output(vec![vec![a, b]; 3], vec![vec![vec![a], vec![b]]; 3]);
        out.batches[2][1].txs.push(tx(9));
        let v = oracle_abc(&out);
        assert!(v.iter().any(|v| matches!(
            v,
            AbcViolation::Creation {
                party: PartyId(2),
                ..
            }
        )));
    }

    #[test]
    fn duplicate_flagged() {
        let a = tx(1);
        let out = output(vec![vec![a]; 1], vec![vec![vec![a], vec![a]]]);
        assert_eq!(
            oracle_abc(&out),
            vec![AbcViolation::Duplicate {
                party: PartyId(0),
                tx: a
            }]
        );
    }

    #[test]
    fn bcch_conflict_and_gap_flagged() {
        let mut out = output(vec![Vec::new(); 2], vec![Vec::new(); 2]);
        out.bcch[0] = vec![(PartyId(1), 0, tx(1)), (PartyId(1), 1, tx(2))];
        out.bcch[1] = vec![(PartyId(1), 0, tx(3)), (PartyId(1), 2, tx(4))];
        let v = oracle_bcch(&out);
        assert!(v.contains(&BcchViolation::Fifo {
            party: PartyId(1),
            sender: PartyId(1),
            expected: 1,
            got: 2
        }));
        assert!(v
            .iter()
            .any(|x| matches!(x, BcchViolation::Conflict { instance: 0, .. })));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn pair_scan_matches_brute_force(
                perms in proptest::collection::vec(Just((0u8..5).collect::<Vec<_>>()).prop_shuffle(), 4),
                batches in proptest::collection::vec(Just((0u8..5).collect::<Vec<_>>()).prop_shuffle(), 4),
                cuts in proptest::collection::vec(1usize..5, 4),
                f in 0usize..2,
                kappa in 0usize..3,
            ) {
                let n = 3 * f + 1;
                let cfg = Config::new(n.max(4), f, kappa).unwrap();
                let orders: Vec<Vec<TxId>> = perms.iter().map(|p| p.iter().map(|i| tx(*i)).collect()).collect();
                // split each party's delivery order into batches at an arbitrary point
                let logs: Vec<Vec<Vec<TxId>>> = batches
                    .iter()
                    .zip(&cuts)
                    .map(|(p, c)| {
                        let ids: Vec<TxId> = p.iter().map(|i| tx(*i)).collect();
                        vec![ids[..*c].to_vec(), ids[*c..].to_vec()]
                            .into_iter()
                            .filter(|b| !b.is_empty())
                            .collect()
                    })
                    .collect();
                let out = output(orders, logs);
                prop_assert_eq!(oracle_fairness(&out, &cfg).len(), brute(&out, &cfg));
            }
        }
    }
}
