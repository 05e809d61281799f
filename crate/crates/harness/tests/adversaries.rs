use qof_core::Config;
use qof_harness::adversary::{Behavior, FaultSpec, LieMode};
use qof_harness::attack::{attack_frontrun, sandwich_scenario};
use qof_harness::campaign::{random_scenario, run_campaign, FaultMix};
use qof_harness::oracle::oracle_bcch;
use qof_harness::{run, OracleReport, Scenario};

fn with_fault(behavior: Behavior, seed: u64) -> Scenario {
    let mut sc = Scenario::basic(Config::new(4, 1, 0).unwrap(), 24, seed);
    sc.faults = vec![FaultSpec { party: 1, behavior }];
    sc
}

#[test]
fn every_behavior_is_safe() {
    let behaviors = [
        Behavior::Mute,
        Behavior::Crash { at_ms: 5.0 },
        Behavior::EquivocateBcch,
        Behavior::LieStatus {
            mode: LieMode::Inflate,
        },
        Behavior::LieStatus {
            mode: LieMode::Deflate,
        },
        Behavior::LieStatus {
            mode: LieMode::Random,
        },
        Behavior::Frontrun {
            victim_client: 0,
            sandwich: true,
            race_lost: vec![],
        },
    ];
    for b in behaviors {
        for seed in 0..3 {
            let sc = with_fault(b.clone(), seed);
            let out = run(&sc).unwrap();
            let r = OracleReport::check(&out, &sc.config, false);
            assert!(r.is_clean(), "{b:?} seed {seed}: {:?}", r.lines());
        }
    }
}

#[test]
fn status_liars_do_not_stall_delivery() {
    for mode in [LieMode::Inflate, LieMode::Deflate, LieMode::Random] {
        let sc = with_fault(Behavior::LieStatus { mode }, 4);
        let out = run(&sc).unwrap();
        assert!(
            OracleReport::check(&out, &sc.config, true).is_clean(),
            "{mode:?}"
        );
    }
}

#[test]
fn equivocation_splits_but_never_conflicts() {
    let mut conflicting_sends = 0;
    for seed in 0..20 {
        let sc = random_scenario(seed, FaultMix::Equivocation);
        let out = run(&sc).unwrap();
        assert!(oracle_bcch(&out).is_empty(), "seed {seed}");
        conflicting_sends += usize::from(!sc.faults.is_empty());
    }
    assert!(conflicting_sends > 0);
}

#[test]
fn sandwich_never_wins_when_premise_holds() {
    for seed in 0..10 {
        let r = attack_frontrun(&sandwich_scenario(seed, 0, vec![])).unwrap();
        assert!(r.premise_pairs() > 0);
        assert_eq!(r.excluded_but_won(), 0);
        assert!(r.violations.is_empty());
    }
}

#[test]
fn lost_race_is_reported_not_flagged() {
    let mut won = 0;
    for seed in 0..10 {
        let r = attack_frontrun(&sandwich_scenario(seed, 0, vec![0, 1])).unwrap();
        assert_eq!(r.excluded_but_won(), 0);
        assert!(r.violations.is_empty());
        won += r.allowed_and_won();
    }
    assert!(won > 0);
}

#[test]
fn small_campaign_is_clean() {
    let s = run_campaign(1000..1100, FaultMix::All);
    assert_eq!(s.runs, 100);
    assert!(s.is_safe(), "{:?}", s.failures);
    assert!(s.by_behavior.len() > 3);
}
