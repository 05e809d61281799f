//! Simulation harness for quick order-fair atomic broadcast: scenarios,
//! adversaries, a deterministic discrete-event simulator, property oracles,
//! metrics, randomized campaigns and benchmark sweeps.

pub mod adversary;
pub mod attack;
pub mod bench;
pub mod campaign;
pub mod cluster;
pub mod metrics;
pub mod oracle;
pub mod scenario;
pub mod sim;

pub use crate::metrics::MetricsReport;
pub use crate::oracle::OracleReport;
pub use crate::scenario::Scenario;
pub use crate::sim::{run, run_with, RunError, RunOptions, RunOutput};
