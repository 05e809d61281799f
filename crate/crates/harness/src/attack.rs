//! Front-running and sandwich attack runs with a fairness verdict.

use qof_core::{Config, TxId};

use crate::adversary::{Behavior, FaultSpec};
use crate::metrics::MetricsReport;
use crate::oracle::{oracle_fairness, FairnessViolation};
use crate::scenario::{Load, Scenario};
use crate::sim::{self, RunError, RunOutput};

/// Client whose transactions the attacker targets.
pub const VICTIM_CLIENT: u64 = 0;
pub const ATTACKER: u32 = 3;

/// n = 4, f = 1 with party 3 sandwiching every transaction of client 0.
/// Correct parties listed in `race_lost` see the victim 20 ms late.
pub fn sandwich_scenario(seed: u64, kappa: usize, race_lost: Vec<u32>) -> Scenario {
    let cfg = Config::new(4, 1, kappa).expect("valid configuration");
    let mut sc = Scenario::basic(cfg, 8, seed);
    sc.name = format!("sandwich-k{kappa}-{seed}");
    sc.n_clients = 2;
    sc.load = Load::Open { interval_ms: 15.0 };
    sc.client_delay_ms = [0.0, 1.0];
    sc.delay_ms = [0.5, 2.0];
    sc.faults = vec![FaultSpec {
        party: ATTACKER,
        behavior: Behavior::Frontrun {
            victim_client: VICTIM_CLIENT,
            sandwich: true,
            race_lost,
        },
    }];
    sc
}

#[derive(Clone, Debug, Default)]
pub struct PairOutcome {
    pub victim: TxId,
    pub attacker: TxId,
    /// `b(victim, attacker) > b(attacker, victim) + 2f + kappa`.
    pub premise: bool,
    /// Some correct party delivered the attacker's transaction in a strictly
    /// earlier batch than the victim's.
    pub attacker_first: bool,
}

#[derive(Clone, Debug, Default)]
pub struct AttackReport {
    pub pairs: Vec<PairOutcome>,
    pub violations: Vec<FairnessViolation>,
    pub metrics: MetricsReport,
}

impl AttackReport {
    /// Pairs where fairness applied and the attacker still won: must be zero.
    pub fn excluded_but_won(&self) -> usize {
        self.pairs
            .iter()
            .filter(|p| p.premise && p.attacker_first)
            .count()
    }

    /// Pairs where the premise failed and the attacker got ahead.
    pub fn allowed_and_won(&self) -> usize {
        self.pairs
            .iter()
            .filter(|p| !p.premise && p.attacker_first)
            .count()
    }

    pub fn premise_pairs(&self) -> usize {
        self.pairs.iter().filter(|p| p.premise).count()
    }
}

fn count_before(out: &RunOutput, x: &TxId, y: &TxId) -> usize {
    let orders: Vec<&[TxId]> = out
        .correct
        .iter()
        .map(|p| out.broadcast_orders[p.index()].as_slice())
        .collect();
    crate::oracle::precedes_count(&orders, x, y)
}

/// Runs `sc` and classifies every attacker transaction against the victim
/// transaction it was injected around.
pub fn attack_frontrun(sc: &Scenario) -> Result<AttackReport, RunError> {
    let out = sim::run(sc)?;
    let mut targeted: Vec<(TxId, TxId)> = out.targets.iter().map(|(a, v)| (*v, *a)).collect();
    targeted.sort();
    let margin = 2 * sc.config.f + sc.config.kappa;
    let mut pairs = Vec::new();
    for (v, a) in &targeted {
        let premise = count_before(&out, v, a) > count_before(&out, a, v) + margin;
        let attacker_first = out.correct_batches().any(|(_, log)| {
            let bv = log.iter().position(|b| b.txs.contains(v));
            let ba = log.iter().position(|b| b.txs.contains(a));
            matches!((bv, ba), (Some(x), Some(y)) if y < x)
        });
        pairs.push(PairOutcome {
            victim: *v,
            attacker: *a,
            premise,
            attacker_first,
        });
    }
    Ok(AttackReport {
        pairs,
        violations: oracle_fairness(&out, &sc.config),
        metrics: MetricsReport::from_run(&out),
    })
}
