use qof_harness::bench::{check_trends, csv, dat, point_scenario, run_sweep, BenchParams, Sweep};
use qof_harness::scenario::ProtocolKind;

#[test]
fn sweep_shares_everything_but_protocol() {
    let p = BenchParams::default();
    let mut a = point_scenario(Sweep::Delay, 10, ProtocolKind::Qof, &p);
    let b = point_scenario(Sweep::Delay, 10, ProtocolKind::Baseline, &p);
    assert_ne!(a.protocol, b.protocol);
    a.protocol = b.protocol;
    a.name = b.name.clone();
    assert_eq!(a, b);
}

#[test]
fn small_payload_sweep_outputs() {
    let p = BenchParams {
        tx_count: 32,
        ..BenchParams::default()
    };
    let points = run_sweep(Sweep::Payload, &p).unwrap();
    assert_eq!(points.len(), 4);
    let c = csv(&points);
    assert_eq!(c.lines().count(), 1 + 2 * 4);
    let d = dat(&points);
    assert!(d.starts_with("# payload"));
    assert_eq!(d.lines().count(), 5);
    assert!(!check_trends(&points).is_empty());
    assert!("delay".parse::<Sweep>().is_ok() && "nodes".parse::<Sweep>().is_err());
}
