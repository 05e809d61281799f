//! Scenario files: protocol parameters, load, network, faults.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use qof_core::transport::sim::{DelayRange, Micros};
use qof_core::Config;
use serde::{Deserialize, Serialize};

use crate::adversary::FaultSpec;

pub fn ms(v: f64) -> Micros {
    (v * 1000.0).round().max(0.0) as Micros
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    #[default]
    Qof,
    Baseline,
}

/// How clients submit transactions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Load {
    /// Transaction `i` is submitted at `i * interval_ms`.
    Open { interval_ms: f64 },
    /// Every client keeps `window` transactions outstanding; a slot frees up
    /// when its transaction is first delivered at a correct party.
    Closed { window: usize },
}

impl Default for Load {
    fn default() -> Self {
        Load::Open { interval_ms: 1.0 }
    }
}

/// A scripted client submission to a single party.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arrival {
    pub at_ms: f64,
    pub party: u32,
    pub payload: String,
}

/// Simulated processing cost per party, in microseconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostModel {
    /// Fixed cost of handling any input.
    pub base_us: f64,
    /// Per kilobyte of received message.
    pub per_kb_us: f64,
    /// Per signature a received message requires checking.
    pub verify_us: f64,
    /// Per outgoing message (serialization and MAC).
    pub send_us: f64,
    /// Per abstract unit of graph work.
    pub work_us: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            base_us: 4.0,
            per_kb_us: 1.0,
            verify_us: 40.0,
            send_us: 2.0,
            work_us: 0.02,
        }
    }
}

impl CostModel {
    pub fn zero() -> Self {
        CostModel {
            base_us: 0.0,
            per_kb_us: 0.0,
            verify_us: 0.0,
            send_us: 0.0,
            work_us: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TamperSpec {
    pub replay: f64,
    pub flip: f64,
    pub spoof: f64,
}

fn default_clients() -> usize {
    4
}
fn default_payload() -> usize {
    64
}
fn default_delay() -> [f64; 2] {
    [1.0, 1.0]
}
fn default_client_delay() -> [f64; 2] {
    [0.0, 2.0]
}
fn default_duration() -> f64 {
    120_000.0
}
fn default_flush() -> f64 {
    5.0
}
fn default_abc_floor() -> f64 {
    20.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub config: Config,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub protocol: ProtocolKind,
    #[serde(default = "default_clients")]
    pub n_clients: usize,
    #[serde(default)]
    pub tx_count: usize,
    #[serde(default = "default_payload")]
    pub payload_size: usize,
    /// One-way party-to-party delay range.
    #[serde(default = "default_delay")]
    pub delay_ms: [f64; 2],
    /// Client-to-party delay range.
    #[serde(default = "default_client_delay")]
    pub client_delay_ms: [f64; 2],
    #[serde(default)]
    pub load: Load,
    #[serde(default)]
    pub arrivals: Vec<Arrival>,
    #[serde(default)]
    pub faults: Vec<FaultSpec>,
    #[serde(default = "default_duration")]
    pub duration_ms: f64,
    #[serde(default = "default_flush")]
    pub flush_ms: f64,
    #[serde(default = "default_abc_floor")]
    pub abc_timeout_floor_ms: f64,
    #[serde(default)]
    pub cost: CostModel,
    #[serde(default)]
    pub tamper: Option<TamperSpec>,
    #[serde(default)]
    pub trace_graphs: bool,
    /// Expected graph-phase lines, relative to the scenario file.
    #[serde(default)]
    pub golden: Option<PathBuf>,
}

impl Scenario {
    /// A fault-free open-loop scenario with default network settings.
    pub fn basic(config: Config, tx_count: usize, seed: u64) -> Self {
        Scenario {
            name: String::new(),
            config,
            seed,
            protocol: ProtocolKind::Qof,
            n_clients: default_clients(),
            tx_count,
            payload_size: default_payload(),
            delay_ms: default_delay(),
            client_delay_ms: default_client_delay(),
            load: Load::default(),
            arrivals: Vec::new(),
            faults: Vec::new(),
            duration_ms: default_duration(),
            flush_ms: default_flush(),
            abc_timeout_floor_ms: default_abc_floor(),
            cost: CostModel::default(),
            tamper: None,
            trace_graphs: false,
            golden: None,
        }
    }

    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let s: Scenario = serde_json::from_str(text).context("malformed scenario")?;
        s.validate()?;
        Ok(s)
    }

    /// Loads and validates a scenario; a relative `golden` path is resolved
    /// against the scenario file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut s = Self::from_json(&text).with_context(|| format!("in {}", path.display()))?;
        if let (Some(g), Some(dir)) = (s.golden.as_mut(), path.parent()) {
            if g.is_relative() {
                *g = dir.join(&*g);
            }
        }
        Ok(s)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.config.validate()?;
        if !(1..=qof_core::tx::MAX_PAYLOAD).contains(&self.payload_size) {
            bail!("payload_size must be in [1, {}]", qof_core::tx::MAX_PAYLOAD);
        }
        for (name, [lo, hi]) in [
            ("delay_ms", self.delay_ms),
            ("client_delay_ms", self.client_delay_ms),
        ] {
            if !(lo >= 0.0 && lo <= hi) {
                bail!("{name}: need 0 <= min <= max, got [{lo}, {hi}]");
            }
        }
        if self.n_clients == 0 && self.tx_count > 0 {
            bail!("n_clients must be positive when tx_count > 0");
        }
        if let Load::Closed { window: 0 } = self.load {
            bail!("closed-loop window must be positive");
        }
        let mut parties = BTreeSet::new();
        for fault in &self.faults {
            if fault.party as usize >= self.config.n {
                bail!("fault targets unknown party {}", fault.party);
            }
            if !parties.insert(fault.party) {
                bail!("party {} has more than one fault", fault.party);
            }
        }
        if parties.len() > self.config.f {
            bail!(
                "{} faulty parties exceed f = {}",
                parties.len(),
                self.config.f
            );
        }
        for a in &self.arrivals {
            if a.party as usize >= self.config.n {
                bail!("arrival for unknown party {}", a.party);
            }
        }
        Ok(())
    }

    pub fn delay(&self) -> DelayRange {
        DelayRange {
            min: ms(self.delay_ms[0]),
            max: ms(self.delay_ms[1]),
        }
    }

    pub fn client_delay(&self) -> DelayRange {
        DelayRange {
            min: ms(self.client_delay_ms[0]),
            max: ms(self.client_delay_ms[1]),
        }
    }

    pub fn is_faulty(&self, party: usize) -> bool {
        self.faults.iter().any(|f| f.party as usize == party)
    }
}
