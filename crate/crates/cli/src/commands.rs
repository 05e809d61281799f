use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, Context};
use qof_core::codec::Canonical;
use qof_core::crypto::LinkKeys;
use qof_core::party::{Party, PartyParams};
use qof_core::transport::tcp::{TcpTransport, Topology};
use qof_core::{Config, KeyMaterial, PartyId, Transaction, TxRef};
use qof_harness::attack::{attack_frontrun, sandwich_scenario};
use qof_harness::bench::{self, BenchParams, Sweep};
use qof_harness::campaign::{run_campaign, FaultMix};
use qof_harness::scenario::ProtocolKind;
use qof_harness::sim::BatchRecord;
use qof_harness::{MetricsReport, OracleReport, RunOptions, RunOutput, Scenario};
use std::sync::Arc;
use thiserror::Error;
use tracing::info;

use crate::batchfile::{ledger_text, verify_batch_file, KeysFile, SignedBatchFile};

pub const TRACE_FILE: &str = "trace.jsonl";
pub const METRICS_FILE: &str = "metrics.csv";
pub const GOLDEN_FILE: &str = "golden.txt";
pub const BATCH_FILE: &str = "batches.bin";
pub const KEYS_FILE: &str = "keys.json";

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or unreadable input (exit code 2).
    #[error("{0:#}")]
    Usage(anyhow::Error),
    /// Something broke while running (exit code 1).
    #[error("{0:#}")]
    Failed(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

/// Result of a command that ran to completion: `pass` selects exit code 0 or 1.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub pass: bool,
    pub lines: Vec<String>,
}

impl Report {
    pub fn exit_code(&self) -> u8 {
        if self.pass {
            0
        } else {
            1
        }
    }
}

fn usage(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Usage(e.into())
}

fn failed(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Failed(e.into())
}

fn write(dir: &Path, name: &str, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, bytes)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(failed)
}

#[derive(Clone, Debug, Default)]
pub struct RunArgs {
    pub scenario: PathBuf,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub baseline: bool,
    /// Corrupt one delivered log before checking; the run must then fail.
    pub self_test_corrupt: bool,
}

pub fn cmd_run(args: &RunArgs) -> Result<Report, CliError> {
    let mut sc = Scenario::load(&args.scenario).map_err(usage)?;
    if let Some(seed) = args.seed {
        sc.seed = seed;
    }
    if args.baseline {
        sc.protocol = ProtocolKind::Baseline;
    }
    info!(scenario = %sc.name, seed = sc.seed, "running");
    let mut out = qof_harness::run_with(
        &sc,
        RunOptions {
            keep_trace: args.out_dir.is_some(),
        },
    )
    .map_err(failed)?;
    if args.self_test_corrupt {
        corrupt(&mut out);
    }
    let metrics = MetricsReport::from_run(&out);
    let oracle = OracleReport::check(&out, &sc.config, sc.faults.is_empty());
    let mut lines = vec![
        format!(
            "scenario {} seed {} protocol {:?}",
            sc.name, sc.seed, sc.protocol
        ),
        format!(
            "delivered {}/{} tx, {:.1} tx/s, mean latency {:.3} ms",
            metrics.delivered, metrics.submitted, metrics.throughput, metrics.latency.mean_ms
        ),
        format!("trace digest {}", out.trace_digest.to_hex()),
    ];
    let mut pass = oracle.is_clean();
    if pass {
        lines.push("oracles: clean".into());
    }
    lines.extend(oracle.lines());

    if let Some(golden) = &sc.golden {
        let expected = std::fs::read_to_string(golden)
            .with_context(|| format!("reading golden trace {}", golden.display()))
            .map_err(usage)?;
        match golden_diff(&expected, &out.golden_lines()) {
            None => lines.push(format!("golden: match ({})", golden.display())),
            Some(d) => {
                pass = false;
                lines.push(format!("golden: mismatch, {d}"));
            }
        }
    }

    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(failed)?;
        write(dir, TRACE_FILE, out.trace_jsonl())?;
        write(dir, METRICS_FILE, metrics.csv())?;
        write(dir, GOLDEN_FILE, out.golden_lines().join("\n") + "\n")?;
        let (file, keys) = signed_batches(&sc, &out);
        write(dir, BATCH_FILE, file.to_bytes())?;
        write(
            dir,
            KEYS_FILE,
            serde_json::to_string_pretty(&keys).map_err(failed)? + "\n",
        )?;
        lines.push(format!(
            "wrote {} batches signed by {} parties to {}",
            file.batches.len(),
            file.attestations.len(),
            dir.display()
        ));
    }
    Ok(Report { pass, lines })
}

/// First difference between a golden file and the produced lines.
pub fn golden_diff(expected: &str, actual: &[String]) -> Option<String> {
    let expected: Vec<&str> = expected.lines().filter(|l| !l.trim().is_empty()).collect();
    for (i, (e, a)) in expected.iter().zip(actual).enumerate() {
        if e != a {
            return Some(format!("line {}: expected {e:?}, got {a:?}", i + 1));
        }
    }
    (expected.len() != actual.len())
        .then(|| format!("expected {} lines, got {}", expected.len(), actual.len()))
}

/// The log of the lowest correct party, signed by every correct party that
/// delivered exactly the same log.
pub fn signed_batches(sc: &Scenario, out: &RunOutput) -> (SignedBatchFile, KeysFile) {
    let keys = KeyMaterial::generate(sc.seed, sc.config.n);
    let Some(&reference) = out.correct.first() else {
        return (
            SignedBatchFile::sign(Vec::new(), &[]),
            KeysFile::new(&sc.config, keys[0].keyring()),
        );
    };
    let ids = |p: PartyId| -> Vec<_> { out.batches[p.index()].iter().map(|b| &b.txs).collect() };
    let signers: Vec<&KeyMaterial> = out
        .correct
        .iter()
        .filter(|p| ids(**p) == ids(reference))
        .map(|p| &keys[p.index()])
        .collect();
    (
        SignedBatchFile::sign(out.delivered_log(reference), &signers),
        KeysFile::new(&sc.config, keys[0].keyring()),
    )
}

/// Breaks one correct party's log so that the oracles must object.
fn corrupt(out: &mut RunOutput) {
    let target = out
        .correct
        .iter()
        .copied()
        .find(|p| out.batches[p.index()].len() >= 2)
        .or_else(|| out.correct.first().copied());
    let Some(p) = target else { return };
    let log = &mut out.batches[p.index()];
    if log.len() >= 2 {
        log.swap(0, 1);
    } else {
        log.push(BatchRecord {
            round: u64::MAX,
            seq: 0,
            txs: vec![qof_core::digest(b"qof/self-test")],
            at: out.end_time,
        });
    }
}

#[derive(Clone, Debug)]
pub struct BenchArgs {
    pub sweeps: Vec<Sweep>,
    pub out_dir: Option<PathBuf>,
    pub params: BenchParams,
}

pub fn cmd_bench(args: &BenchArgs) -> Result<Report, CliError> {
    let mut report = Report {
        pass: true,
        lines: Vec::new(),
    };
    let mut all = Vec::new();
    for &sweep in &args.sweeps {
        info!(sweep = sweep.name(), "sweeping");
        let points = bench::run_sweep(sweep, &args.params).map_err(failed)?;
        for p in &points {
            report.lines.push(format!(
                "{} {}{}: qof {:.1} tx/s {:.3} ms, baseline {:.1} tx/s {:.3} ms, overhead {:.1}%, +{:.3} ms",
                sweep.name(),
                p.x,
                sweep.unit(),
                p.qof.throughput,
                p.qof.latency.mean_ms,
                p.baseline.throughput,
                p.baseline.latency.mean_ms,
                100.0 * p.throughput_overhead(),
                p.added_latency_ms()
            ));
        }
        for c in bench::check_trends(&points) {
            report.pass &= c.pass;
            report.lines.push(format!(
                "{} {}: {}",
                if c.pass { "ok  " } else { "FAIL" },
                c.name,
                c.detail
            ));
        }
        if let Some(dir) = &args.out_dir {
            std::fs::create_dir_all(dir)
                .with_context(|| format!("creating {}", dir.display()))
                .map_err(failed)?;
            write(dir, &format!("{}.dat", sweep.name()), bench::dat(&points))?;
        }
        all.extend(points);
    }
    if let Some(dir) = &args.out_dir {
        write(dir, "bench.csv", bench::csv(&all))?;
    }
    Ok(report)
}

#[derive(Clone, Debug, Default)]
pub struct VerifyArgs {
    pub file: PathBuf,
    pub keys: PathBuf,
    pub ledger: Option<PathBuf>,
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<Report, CliError> {
    let bytes = std::fs::read(&args.file)
        .with_context(|| format!("reading {}", args.file.display()))
        .map_err(usage)?;
    let keys = KeysFile::load(&args.keys).map_err(usage)?;
    let ring = keys.keyring().map_err(usage)?;
    match verify_batch_file(&bytes, &ring, keys.f) {
        Ok(ledger) => {
            let text = ledger_text(&ledger);
            let mut lines = vec![format!("accept: {} transactions executed", ledger.len())];
            match &args.ledger {
                Some(path) => {
                    std::fs::write(path, &text)
                        .with_context(|| format!("writing {}", path.display()))
                        .map_err(failed)?;
                    lines.push(format!("ledger written to {}", path.display()));
                }
                None => lines.extend(text.lines().map(String::from)),
            }
            Ok(Report { pass: true, lines })
        }
        Err(r) => Ok(Report {
            pass: false,
            lines: vec![format!("reject: {r}")],
        }),
    }
}

#[derive(Clone, Debug)]
pub struct CampaignArgs {
    pub seeds: std::ops::Range<u64>,
    pub equivocation_only: bool,
}

pub fn cmd_campaign(args: &CampaignArgs) -> Result<Report, CliError> {
    let mix = if args.equivocation_only {
        FaultMix::Equivocation
    } else {
        FaultMix::All
    };
    let s = run_campaign(args.seeds.clone(), mix);
    let mut lines = vec![
        format!("{} runs {:?}", s.runs, s.by_behavior),
        format!(
            "violations: fairness {} abc {} bcch {} rounds {}",
            s.fairness_violations, s.abc_violations, s.bcch_violations, s.round_violations
        ),
        format!(
            "stalled: fault-free {:?}, under faults {}",
            s.stalled_runs,
            s.stalled_under_faults.len()
        ),
    ];
    lines.extend(
        s.failures
            .iter()
            .map(|(seed, what)| format!("seed {seed}: {what}")),
    );
    Ok(Report {
        pass: s.is_safe(),
        lines,
    })
}

#[derive(Clone, Debug)]
pub struct AttackArgs {
    pub seeds: std::ops::Range<u64>,
    pub kappa: usize,
    pub race_lost: Vec<u32>,
}

pub fn cmd_attack(args: &AttackArgs) -> Result<Report, CliError> {
    let (mut pairs, mut premise, mut excluded_won, mut allowed_won, mut violations) =
        (0, 0, 0, 0, 0);
    for seed in args.seeds.clone() {
        let sc = sandwich_scenario(seed, args.kappa, args.race_lost.clone());
        sc.validate().map_err(usage)?;
        let r = attack_frontrun(&sc).map_err(failed)?;
        pairs += r.pairs.len();
        premise += r.premise_pairs();
        excluded_won += r.excluded_but_won();
        allowed_won += r.allowed_and_won();
        violations += r.violations.len();
    }
    Ok(Report {
        pass: excluded_won == 0 && violations == 0,
        lines: vec![
            format!("{pairs} victim/attacker pairs, {premise} with the fairness premise"),
            format!("attacker ahead: {excluded_won} where excluded, {allowed_won} where allowed"),
            format!("fairness violations: {violations}"),
        ],
    })
}

#[derive(Clone, Debug)]
pub struct NodeArgs {
    pub topology: PathBuf,
    pub id: u32,
    pub config: Config,
    pub seed: u64,
    pub tx_count: usize,
    pub deadline: Duration,
}

/// Transactions every node of a TCP cluster submits, identical at all nodes.
pub fn node_transactions(seed: u64, count: usize) -> Vec<TxRef> {
    (0..count as u64)
        .map(|i| Arc::new(Transaction::new(seed, i, format!("tx{i}").into_bytes())))
        .collect()
}

pub fn cmd_node(args: &NodeArgs) -> Result<Report, CliError> {
    let topology = Topology::load(&args.topology).map_err(usage)?;
    let n = args.config.n;
    if topology.len() != n {
        return Err(usage(anyhow!(
            "topology has {} peers, config n = {n}",
            topology.len()
        )));
    }
    if args.id as usize >= n {
        return Err(usage(anyhow!("--id {} out of range for n = {n}", args.id)));
    }
    let me = PartyId(args.id);
    let keys = KeyMaterial::generate(args.seed, n).swap_remove(me.index());
    let transport =
        TcpTransport::bind(me, topology, LinkKeys::derive(args.seed, me, n)).map_err(failed)?;
    let params = PartyParams {
        abc: qof_core::abc::AbcParams::for_delay(1_000, 200_000),
        ..PartyParams::default()
    };
    let party = Party::new(args.config.clone(), keys, params);
    let mut lines = Vec::new();
    let batches = qof_harness::cluster::run_node(
        party,
        &transport,
        node_transactions(args.seed, args.tx_count),
        args.tx_count,
        args.deadline,
        |b| {
            let labels: Vec<String> = b.txs.iter().map(|t| t.label()).collect();
            println!(
                "deliver round={} seq={} [{}]",
                b.round,
                b.seq,
                labels.join(",")
            );
        },
    )
    .map_err(failed)?;
    let delivered: usize = batches.iter().map(|b| b.txs.len()).sum();
    lines.push(format!(
        "{me}: delivered {delivered}/{} transactions",
        args.tx_count
    ));
    Ok(Report {
        pass: delivered == args.tx_count,
        lines,
    })
}
