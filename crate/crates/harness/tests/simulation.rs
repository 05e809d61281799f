use qof_core::Config;
use qof_harness::adversary::{Behavior, FaultSpec};
use qof_harness::scenario::{Load, ProtocolKind, TamperSpec};
use qof_harness::{run, run_with, MetricsReport, OracleReport, RunOptions, Scenario};

fn cfg(n: usize, f: usize, kappa: usize) -> Config {
    Config::new(n, f, kappa).unwrap()
}

#[test]
fn crashed_party_does_not_block_delivery() {
    let mut sc = Scenario::basic(cfg(4, 1, 0), 100, 3);
    sc.faults = vec![FaultSpec {
        party: 2,
        behavior: Behavior::Crash { at_ms: 0.0 },
    }];
    let out = run(&sc).unwrap();
    assert_eq!(out.correct.len(), 3);
    let logs: Vec<_> = out
        .correct_batches()
        .map(|(_, b)| b.iter().map(|b| b.txs.clone()).collect::<Vec<_>>())
        .collect();
    assert!(logs.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(logs[0].iter().map(Vec::len).sum::<usize>(), 100);
    assert!(OracleReport::check(&out, &sc.config, true).is_clean());
}

#[test]
fn sequencer_leader_crash_rotates() {
    // p0 leads view 0 and stops mid-run
    let mut sc = Scenario::basic(cfg(4, 1, 0), 40, 11);
    sc.faults = vec![FaultSpec {
        party: 0,
        behavior: Behavior::Crash { at_ms: 12.0 },
    }];
    let out = run(&sc).unwrap();
    let report = OracleReport::check(&out, &sc.config, true);
    assert!(report.is_clean(), "{:?}", report.lines());
    assert_eq!(MetricsReport::from_run(&out).delivered, 40);
    assert!(out.view_changes >= 3, "{}", out.view_changes);
}

#[test]
fn same_seed_same_digest() {
    let mut sc = Scenario::basic(cfg(4, 1, 1), 30, 5);
    sc.delay_ms = [0.5, 4.0];
    let a = run(&sc).unwrap();
    let b = run(&sc).unwrap();
    assert_eq!(a.trace_digest, b.trace_digest);
    assert_eq!(MetricsReport::from_run(&a), MetricsReport::from_run(&b));
    sc.seed = 6;
    assert_ne!(run(&sc).unwrap().trace_digest, a.trace_digest);
}

#[test]
fn fault_free_delivers_everything() {
    for (n, f) in [(4, 0), (4, 1), (7, 2)] {
        let sc = Scenario::basic(cfg(n, f, 0), 50, n as u64);
        let out = run(&sc).unwrap();
        let m = MetricsReport::from_run(&out);
        assert_eq!(m.delivered, 50);
        assert_eq!(m.submitted, 50);
        assert!(m.throughput > 0.0 && m.latency.samples == 50 * n);
    }
}

#[test]
fn baseline_delivers_everything() {
    let mut sc = Scenario::basic(cfg(4, 1, 0), 60, 2);
    sc.protocol = ProtocolKind::Baseline;
    sc.load = Load::Closed { window: 4 };
    let out = run(&sc).unwrap();
    assert_eq!(MetricsReport::from_run(&out).delivered, 60);
    let report = OracleReport::check(&out, &sc.config, true);
    assert!(report.abc.is_empty() && report.undelivered.is_empty());
}

#[test]
fn tampered_links_are_filtered() {
    let mut sc = Scenario::basic(cfg(4, 1, 0), 30, 9);
    sc.tamper = Some(TamperSpec {
        replay: 0.05,
        flip: 0.05,
        spoof: 0.05,
    });
    let out = run(&sc).unwrap();
    let m = MetricsReport::from_run(&out);
    assert!(m.dropped_bad_mac > 0 && m.dropped_duplicate > 0);
    assert_eq!(m.delivered, 30);
    assert!(OracleReport::check(&out, &sc.config, true).is_clean());
}

#[test]
fn trace_lines_are_json_with_time() {
    let sc = Scenario::basic(cfg(4, 1, 0), 3, 1);
    let out = run_with(&sc, RunOptions { keep_trace: true }).unwrap();
    let text = out.trace_jsonl();
    assert!(!text.is_empty());
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["t_us"].is_u64() && v["event"].is_string());
    }
    assert!(text.contains(r#""event":"batch""#));
}
