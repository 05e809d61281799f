use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use qof_cli::commands::{self, AttackArgs, BenchArgs, CampaignArgs, NodeArgs, RunArgs, VerifyArgs};
use qof_cli::{CliError, Report};
use qof_core::Config;
use qof_harness::bench::{BenchParams, Sweep};

#[derive(Parser)]
#[command(
    name = "qof",
    version,
    about = "Order-fair atomic broadcast simulator and tools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and check every oracle.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write trace.jsonl, metrics.csv, golden.txt, batches.bin and keys.json here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Run the plain sequencer instead of the fair protocol.
        #[arg(long)]
        baseline: bool,
        /// Corrupt a delivered log before checking (must exit 1).
        #[arg(long)]
        self_test_corrupt: bool,
    },
    /// Benchmark sweeps of the fair protocol against the baseline.
    Bench {
        /// servers, payload, delay or all.
        #[arg(long, default_value = "all")]
        sweep: String,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, default_value_t = BenchParams::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = BenchParams::default().tx_count)]
        tx_count: usize,
    },
    /// Verify a signed batch file and replay its ledger.
    Verify {
        #[arg(long)]
        verify: PathBuf,
        #[arg(long)]
        keys: PathBuf,
        /// Write the replayed ledger here instead of stdout.
        #[arg(long)]
        ledger: Option<PathBuf>,
    },
    /// Random adversarial scenarios against every oracle.
    Campaign {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        runs: u64,
        /// Only bcch equivocation faults.
        #[arg(long)]
        equivocation: bool,
    },
    /// Replay the sandwich attack over a range of seeds.
    Attack {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        runs: u64,
        #[arg(long, default_value_t = 0)]
        kappa: usize,
        /// Correct parties that see the victim late.
        #[arg(long, value_delimiter = ',')]
        race_lost: Vec<u32>,
    },
    /// Run one party over TCP.
    Node {
        /// JSON file mapping party ids to addresses.
        #[arg(long)]
        topology: PathBuf,
        #[arg(long)]
        id: u32,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        f: usize,
        #[arg(long, default_value_t = 0)]
        kappa: usize,
        /// Shared by all nodes; derives keys and link secrets.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        tx_count: usize,
        #[arg(long, default_value_t = 60)]
        deadline_secs: u64,
    },
}

fn dispatch(cmd: Command) -> Result<Report, CliError> {
    let usage = |e: anyhow::Error| CliError::Usage(e);
    match cmd {
        Command::Run {
            scenario,
            seed,
            out_dir,
            baseline,
            self_test_corrupt,
        } => commands::cmd_run(&RunArgs {
            scenario,
            seed,
            out_dir,
            baseline,
            self_test_corrupt,
        }),
        Command::Bench {
            sweep,
            out_dir,
            seed,
            tx_count,
        } => {
            let sweeps = if sweep == "all" {
                Sweep::ALL.to_vec()
            } else {
                vec![sweep.parse::<Sweep>().map_err(usage)?]
            };
            commands::cmd_bench(&BenchArgs {
                sweeps,
                out_dir,
                params: BenchParams {
                    seed,
                    tx_count,
                    ..BenchParams::default()
                },
            })
        }
        Command::Verify {
            verify,
            keys,
            ledger,
        } => commands::cmd_verify(&VerifyArgs {
            file: verify,
            keys,
            ledger,
        }),
        Command::Campaign {
            seed,
            runs,
            equivocation,
        } => commands::cmd_campaign(&CampaignArgs {
            seeds: seed..seed + runs,
            equivocation_only: equivocation,
        }),
        Command::Attack {
            seed,
            runs,
            kappa,
            race_lost,
        } => commands::cmd_attack(&AttackArgs {
            seeds: seed..seed + runs,
            kappa,
            race_lost,
        }),
        Command::Node {
            topology,
            id,
            n,
            f,
            kappa,
            seed,
            tx_count,
            deadline_secs,
        } => commands::cmd_node(&NodeArgs {
            topology,
            id,
            config: Config::new(n, f, kappa).map_err(|e| usage(e.into()))?,
            seed,
            tx_count,
            deadline: Duration::from_secs(deadline_secs),
        }),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_env("QOF_LOG"))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(report) => {
            for l in &report.lines {
                println!("{l}");
            }
            println!("{}", if report.pass { "PASS" } else { "FAIL" });
            ExitCode::from(report.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
