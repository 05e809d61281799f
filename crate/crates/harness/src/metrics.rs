//! Throughput and server-latency metrics over a finished run.

use std::fmt::Write;

use crate::scenario::ProtocolKind;
use crate::sim::{PhaseTimes, RunOutput};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Latency {
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p99_ms: f64,
    pub samples: usize,
}

impl Latency {
    pub fn from_micros(mut samples: Vec<u64>) -> Self {
        if samples.is_empty() {
            return Latency::default();
        }
        samples.sort_unstable();
        let pick = |q: f64| {
            let i = ((samples.len() as f64 * q).ceil() as usize).clamp(1, samples.len()) - 1;
            samples[i] as f64 / 1000.0
        };
        let sum: u64 = samples.iter().sum();
        Latency {
            mean_ms: sum as f64 / samples.len() as f64 / 1000.0,
            median_ms: pick(0.5),
            p99_ms: pick(0.99),
            samples: samples.len(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsReport {
    /// Transactions delivered at every correct party per second of virtual time.
    pub throughput: f64,
    pub delivered: usize,
    pub submitted: usize,
    /// Server latency: first bcch delivery at a correct party (first arrival
    /// for the baseline, which has no bcch) to of-delivery.
    pub latency: Latency,
    /// First arrival at a correct party to of-delivery, for both protocols.
    pub arrival_latency: Latency,
    pub phases: PhaseTimes,
    pub messages: u64,
    pub dropped_bad_mac: u64,
    pub dropped_duplicate: u64,
    pub malformed: u64,
    pub duration_ms: f64,
}

impl MetricsReport {
    pub fn from_run(out: &RunOutput) -> Self {
        let mut server = Vec::new();
        let mut arrival = Vec::new();
        let mut last = 0;
        let mut everywhere: Option<std::collections::HashSet<_>> = None;
        for (_, log) in out.correct_batches() {
            let mut here = std::collections::HashSet::new();
            for b in log {
                last = last.max(b.at);
                for t in &b.txs {
                    here.insert(*t);
                    let origin = match out.protocol {
                        ProtocolKind::Qof => out.first_bcch.get(t),
                        ProtocolKind::Baseline => out.first_arrival.get(t),
                    };
                    if let Some(t0) = origin {
                        server.push(b.at.saturating_sub(*t0));
                    }
                    if let Some(t0) = out.first_arrival.get(t) {
                        arrival.push(b.at.saturating_sub(*t0));
                    }
                }
            }
            everywhere = Some(match everywhere {
                None => here,
                Some(prev) => prev.intersection(&here).copied().collect(),
            });
        }
        let delivered = everywhere.map_or(0, |s| s.len());
        let span = last.saturating_sub(out.first_submit.unwrap_or(0));
        let link = out.link;
        MetricsReport {
            throughput: if span == 0 {
                0.0
            } else {
                delivered as f64 / (span as f64 / 1e6)
            },
            delivered,
            submitted: out.submitted.len(),
            latency: Latency::from_micros(server),
            arrival_latency: Latency::from_micros(arrival),
            phases: out.phases,
            messages: link.sent,
            dropped_bad_mac: link.bad_mac,
            dropped_duplicate: link.duplicates,
            malformed: out.malformed,
            duration_ms: out.end_time as f64 / 1000.0,
        }
    }

    pub const CSV_HEADER: &'static str = "throughput_tps,delivered,submitted,latency_mean_ms,latency_median_ms,latency_p99_ms,arrival_latency_mean_ms,status_to_propose_ms,propose_to_decide_ms,decide_to_deliver_ms,rounds,messages,dropped_bad_mac,dropped_duplicate,malformed,duration_ms";

    pub fn csv_row(&self) -> String {
        let mut s = String::new();
        write!(
            s,
            "{:.2},{},{},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{},{},{},{},{},{:.3}",
            self.throughput,
            self.delivered,
            self.submitted,
            self.latency.mean_ms,
            self.latency.median_ms,
            self.latency.p99_ms,
            self.arrival_latency.mean_ms,
            self.phases.status_to_propose_us / 1000.0,
            self.phases.propose_to_decide_us / 1000.0,
            self.phases.decide_to_deliver_us / 1000.0,
            self.phases.rounds,
            self.messages,
            self.dropped_bad_mac,
            self.dropped_duplicate,
            self.malformed,
            self.duration_ms
        )
        .unwrap();
        s
    }

    pub fn csv(&self) -> String {
        format!("{}\n{}\n", Self::CSV_HEADER, self.csv_row())
    }
}
