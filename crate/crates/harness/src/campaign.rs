//! Randomized scenario campaigns over configurations and adversaries.

use std::collections::BTreeMap;

use qof_core::Config;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adversary::{Behavior, FaultSpec, LieMode};
use crate::oracle::OracleReport;
use crate::scenario::{CostModel, Load, Scenario};
use crate::sim;

/// Which behaviors a campaign draws faults from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaultMix {
    All,
    Equivocation,
}

fn draw_behavior(rng: &mut ChaCha8Rng, correct: &[u32], n_clients: usize) -> Behavior {
    match rng.gen_range(0..7) {
        0 => Behavior::Crash {
            at_ms: rng.gen_range(0.0..30.0),
        },
        1 => Behavior::Mute,
        2 => Behavior::EquivocateBcch,
        3 => Behavior::LieStatus {
            mode: LieMode::Inflate,
        },
        4 => Behavior::LieStatus {
            mode: LieMode::Deflate,
        },
        5 => Behavior::LieStatus {
            mode: LieMode::Random,
        },
        _ => {
            let mut race_lost: Vec<u32> = correct
                .iter()
                .copied()
                .filter(|_| rng.gen_bool(0.3))
                .collect();
            race_lost.sort_unstable();
            Behavior::Frontrun {
                victim_client: rng.gen_range(0..n_clients as u64),
                sandwich: rng.gen_bool(0.5),
                race_lost,
            }
        }
    }
}

/// A random scenario over `n ∈ {4, 7}`, every admissible `f`, `kappa ∈ {0, 1, 2}`
/// and up to `f` faulty parties.
pub fn random_scenario(seed: u64, mix: FaultMix) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = *[4usize, 7].choose(&mut rng).unwrap();
    let f = rng.gen_range(0..=(n - 1) / 3);
    let kappa = rng.gen_range(0..=2);
    let mut config = Config::new(n, f, kappa).expect("n > 3f by construction");
    config.round_trigger = rng.gen_range(1..=4);
    config.batch_cap = rng.gen_range(4..=64);
    let mut sc = Scenario::basic(config, rng.gen_range(6..=18), seed);
    sc.name = format!("campaign-{seed}");
    sc.n_clients = rng.gen_range(1..=4);
    sc.payload_size = rng.gen_range(16..=256);
    let lo = rng.gen_range(0.2..2.0);
    sc.delay_ms = [lo, lo + rng.gen_range(0.0..3.0)];
    sc.client_delay_ms = [0.0, rng.gen_range(0.0..3.0)];
    sc.load = Load::Open {
        interval_ms: rng.gen_range(0.1..3.0),
    };
    sc.flush_ms = rng.gen_range(2.0..10.0);
    sc.duration_ms = 60_000.0;
    sc.cost = if rng.gen_bool(0.5) {
        CostModel::default()
    } else {
        CostModel::zero()
    };
    let mut parties: Vec<u32> = (0..n as u32).collect();
    parties.shuffle(&mut rng);
    let k = match mix {
        FaultMix::All if f > 0 && rng.gen_bool(0.8) => rng.gen_range(1..=f),
        FaultMix::All => 0,
        FaultMix::Equivocation => f,
    };
    let (faulty, correct) = parties.split_at(k);
    for p in faulty {
        let behavior = match mix {
            FaultMix::All => draw_behavior(&mut rng, correct, sc.n_clients),
            FaultMix::Equivocation => Behavior::EquivocateBcch,
        };
        sc.faults.push(FaultSpec {
            party: *p,
            behavior,
        });
    }
    sc.faults.sort_by_key(|f| f.party);
    sc
}

#[derive(Clone, Debug, Default)]
pub struct CampaignSummary {
    pub runs: usize,
    /// Runs per fault behavior kind (`none` for fault-free runs).
    pub by_behavior: BTreeMap<String, usize>,
    pub fairness_violations: usize,
    pub abc_violations: usize,
    pub bcch_violations: usize,
    pub round_violations: usize,
    /// Fault-free runs where some correct party did not deliver every
    /// submitted transaction (a weak validity violation).
    pub stalled_runs: Vec<u64>,
    /// Runs with faults that ended with undelivered transactions. Weak
    /// validity promises nothing here: a transaction only a faulty party
    /// broadcasts never becomes stable and can hold back everything
    /// collapsed with it.
    pub stalled_under_faults: Vec<u64>,
    /// `(seed, description)` for failing runs.
    pub failures: Vec<(u64, String)>,
}

impl CampaignSummary {
    pub fn is_safe(&self) -> bool {
        self.fairness_violations
            + self.abc_violations
            + self.bcch_violations
            + self.round_violations
            == 0
            && self.failures.is_empty()
            && self.stalled_runs.is_empty()
    }
}

pub fn behavior_kind(b: &Behavior) -> &'static str {
    match b {
        Behavior::Crash { .. } => "crash",
        Behavior::Mute => "mute",
        Behavior::EquivocateBcch => "equivocate_bcch",
        Behavior::LieStatus { .. } => "lie_status",
        Behavior::Frontrun { .. } => "frontrun",
    }
}

/// Runs `seeds` and checks every oracle on each run.
pub fn run_campaign(seeds: impl IntoIterator<Item = u64>, mix: FaultMix) -> CampaignSummary {
    let mut s = CampaignSummary::default();
    for seed in seeds {
        let sc = random_scenario(seed, mix);
        s.runs += 1;
        if sc.faults.is_empty() {
            *s.by_behavior.entry("none".into()).or_default() += 1;
        }
        for f in &sc.faults {
            *s.by_behavior
                .entry(behavior_kind(&f.behavior).into())
                .or_default() += 1;
        }
        let out = match sim::run(&sc) {
            Ok(out) => out,
            Err(e) => {
                s.failures.push((seed, e.to_string()));
                continue;
            }
        };
        let report = OracleReport::check(&out, &sc.config, sc.faults.is_empty());
        s.fairness_violations += report.fairness.len();
        s.abc_violations += report.abc.len();
        s.bcch_violations += report.bcch.len();
        s.round_violations += report.rounds.len();
        if !report.undelivered.is_empty() {
            s.stalled_runs.push(seed);
        } else if !sc.faults.is_empty() && !crate::oracle::oracle_validity(&out).is_empty() {
            s.stalled_under_faults.push(seed);
        }
        if !report.fairness.is_empty()
            || !report.abc.is_empty()
            || !report.bcch.is_empty()
            || !report.rounds.is_empty()
        {
            s.failures.push((seed, report.lines().join("; ")));
        }
    }
    s
}
