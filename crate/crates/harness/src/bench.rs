//! Benchmark sweeps: QOF against the plain sequencer baseline under the
//! same seed, network and load generator.

use std::fmt::Write;
use std::str::FromStr;

use anyhow::{anyhow, bail};
use qof_core::Config;

use crate::metrics::MetricsReport;
use crate::scenario::{Load, ProtocolKind, Scenario};
use crate::sim;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sweep {
    Servers,
    Payload,
    Delay,
}

impl Sweep {
    pub const ALL: [Sweep; 3] = [Sweep::Servers, Sweep::Payload, Sweep::Delay];

    pub fn name(self) -> &'static str {
        match self {
            Sweep::Servers => "servers",
            Sweep::Payload => "payload",
            Sweep::Delay => "delay",
        }
    }

    pub fn points(self) -> &'static [u64] {
        match self {
            Sweep::Servers => &[4, 8, 16],
            Sweep::Payload => &[256, 512, 1024, 2048],
            Sweep::Delay => &[0, 5, 10, 15, 20],
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Sweep::Servers => "n",
            Sweep::Payload => "bytes",
            Sweep::Delay => "ms",
        }
    }
}

impl FromStr for Sweep {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        Sweep::ALL
            .into_iter()
            .find(|w| w.name() == s)
            .ok_or_else(|| anyhow!("unknown sweep {s:?}, expected servers, payload or delay"))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BenchParams {
    pub seed: u64,
    pub tx_count: usize,
    pub n_clients: usize,
    /// Outstanding transactions per client.
    pub window: usize,
}

impl Default for BenchParams {
    fn default() -> Self {
        BenchParams {
            seed: 7,
            tx_count: 256,
            n_clients: 4,
            window: 8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchPoint {
    pub sweep: Sweep,
    pub x: u64,
    pub qof: MetricsReport,
    pub baseline: MetricsReport,
}

impl BenchPoint {
    /// Relative throughput loss of QOF against the baseline.
    pub fn throughput_overhead(&self) -> f64 {
        if self.baseline.throughput == 0.0 {
            0.0
        } else {
            1.0 - self.qof.throughput / self.baseline.throughput
        }
    }

    pub fn added_latency_ms(&self) -> f64 {
        self.qof.latency.mean_ms - self.baseline.latency.mean_ms
    }
}

/// The scenario for one sweep point. Both protocols get the same scenario
/// apart from `protocol`.
pub fn point_scenario(sweep: Sweep, x: u64, protocol: ProtocolKind, p: &BenchParams) -> Scenario {
    let (mut n, mut payload, mut delay) = (4usize, 256usize, 1.0f64);
    match sweep {
        Sweep::Servers => n = x as usize,
        Sweep::Payload => payload = x as usize,
        Sweep::Delay => delay = x as f64,
    }
    let cfg = Config::new(n, (n - 1) / 3, 0).expect("n > 3f by construction");
    let mut sc = Scenario::basic(cfg, p.tx_count, p.seed);
    sc.name = format!("bench-{}-{x}-{:?}", sweep.name(), protocol).to_lowercase();
    sc.protocol = protocol;
    sc.n_clients = p.n_clients;
    sc.payload_size = payload;
    sc.delay_ms = [delay, delay + 0.5];
    sc.load = Load::Closed { window: p.window };
    sc.duration_ms = 600_000.0;
    sc
}

fn measure(sc: &Scenario) -> anyhow::Result<MetricsReport> {
    let out = sim::run(sc)?;
    let m = MetricsReport::from_run(&out);
    if m.delivered != sc.tx_count {
        bail!(
            "{}: delivered {} of {} transactions",
            sc.name,
            m.delivered,
            sc.tx_count
        );
    }
    Ok(m)
}

/// Runs every point of `sweep`, points in parallel.
pub fn run_sweep(sweep: Sweep, p: &BenchParams) -> anyhow::Result<Vec<BenchPoint>> {
    let results: Vec<anyhow::Result<BenchPoint>> = std::thread::scope(|s| {
        let handles: Vec<_> = sweep
            .points()
            .iter()
            .map(|&x| {
                s.spawn(move || {
                    Ok(BenchPoint {
                        sweep,
                        x,
                        qof: measure(&point_scenario(sweep, x, ProtocolKind::Qof, p))?,
                        baseline: measure(&point_scenario(sweep, x, ProtocolKind::Baseline, p))?,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().map_err(|_| anyhow!("sweep worker panicked"))?)
            .collect()
    });
    results.into_iter().collect()
}

pub fn csv(points: &[BenchPoint]) -> String {
    let mut s = String::new();
    writeln!(s, "sweep,x,protocol,{}", MetricsReport::CSV_HEADER).unwrap();
    for p in points {
        for (name, m) in [("qof", &p.qof), ("baseline", &p.baseline)] {
            writeln!(s, "{},{},{name},{}", p.sweep.name(), p.x, m.csv_row()).unwrap();
        }
    }
    s
}

/// Gnuplot-ready columns for one sweep.
pub fn dat(points: &[BenchPoint]) -> String {
    let mut s = String::new();
    if let Some(first) = points.first() {
        writeln!(
            s,
            "# {} ({})  qof_tps  baseline_tps  qof_latency_ms  baseline_latency_ms  throughput_overhead  added_latency_ms",
            first.sweep.name(),
            first.sweep.unit()
        )
        .unwrap();
    }
    for p in points {
        writeln!(
            s,
            "{} {:.2} {:.2} {:.3} {:.3} {:.4} {:.3}",
            p.x,
            p.qof.throughput,
            p.baseline.throughput,
            p.qof.latency.mean_ms,
            p.baseline.latency.mean_ms,
            p.throughput_overhead(),
            p.added_latency_ms()
        )
        .unwrap();
    }
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrendCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: impl Into<String>, pass: bool, detail: String) -> TrendCheck {
    TrendCheck {
        name: name.into(),
        pass,
        detail,
    }
}

/// The qualitative trends a sweep is expected to show.
pub fn check_trends(points: &[BenchPoint]) -> Vec<TrendCheck> {
    let Some(sweep) = points.first().map(|p| p.sweep) else {
        return Vec::new();
    };
    let mut v = Vec::new();
    for p in points {
        v.push(check(
            format!("{} x={}: qof throughput <= baseline", sweep.name(), p.x),
            p.qof.throughput <= p.baseline.throughput,
            format!(
                "{:.1} vs {:.1} tx/s",
                p.qof.throughput, p.baseline.throughput
            ),
        ));
        v.push(check(
            format!("{} x={}: qof latency >= baseline", sweep.name(), p.x),
            p.qof.latency.mean_ms >= p.baseline.latency.mean_ms,
            format!(
                "{:.2} vs {:.2} ms",
                p.qof.latency.mean_ms, p.baseline.latency.mean_ms
            ),
        ));
    }
    let qof_lat: Vec<f64> = points.iter().map(|p| p.qof.latency.mean_ms).collect();
    let series = |f: fn(&BenchPoint) -> f64| points.iter().map(f).collect::<Vec<f64>>();
    match sweep {
        Sweep::Servers => {
            for (name, tps) in [
                ("qof", series(|p| p.qof.throughput)),
                ("baseline", series(|p| p.baseline.throughput)),
            ] {
                v.push(check(
                    format!("servers: {name} throughput non-increasing in n"),
                    tps.windows(2).all(|w| w[1] <= w[0]),
                    format!("{tps:.1?}"),
                ));
            }
        }
        Sweep::Delay => {
            v.push(check(
                "delay: qof latency strictly increasing",
                qof_lat.windows(2).all(|w| w[1] > w[0]),
                format!("{qof_lat:.2?}"),
            ));
            let tps = series(|p| p.qof.throughput);
            v.push(check(
                "delay: qof throughput decreasing",
                tps.windows(2).all(|w| w[1] < w[0]),
                format!("{tps:.1?}"),
            ));
        }
        Sweep::Payload => {
            let (lo, hi) = qof_lat
                .iter()
                .fold((f64::MAX, f64::MIN), |(lo, hi), x| (lo.min(*x), hi.max(*x)));
            let spread = (hi - lo) / lo;
            v.push(check(
                "payload: qof latency within 20%",
                spread < 0.2,
                format!("{qof_lat:.2?}, spread {:.1}%", spread * 100.0),
            ));
        }
    }
    v
}
