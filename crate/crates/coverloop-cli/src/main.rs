//! Command-line driver for the coverloop flow.
//!
//! Exit codes: 0 on success (and on loop convergence), 2 on configuration or
//! data errors, 3 when the closed loop exhausts its iteration cap without
//! reaching the regain target.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use coverloop::duv::DuvKind;
use coverloop::ml::{AlgoKind, Hyperparams};
use coverloop::pipeline::{self, RunConfig};
use coverloop::synth::DEFAULT_MARGIN;

#[derive(Parser)]
#[command(
    name = "coverloop",
    about = "ML-guided coverage closure for constrained-random simulation regressions",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct OutArg {
    /// Run directory (defaults to $COVERLOOP_OUT, then ./coverloop_out)
    #[arg(long)]
    out: Option<PathBuf>,
}

impl OutArg {
    fn resolve(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| {
            std::env::var_os("COVERLOOP_OUT")
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("coverloop_out"))
        })
    }
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Design under verification
    #[arg(long, value_parser = parse_duv)]
    duv: DuvKind,
    /// Covergroup definition file (defaults to the design's built-in group)
    #[arg(long)]
    covergroup: Option<PathBuf>,
    /// Base constraint-set file (defaults to full-domain randomization)
    #[arg(long)]
    constraints: Option<PathBuf>,
    /// Number of tests in the original regression
    #[arg(long)]
    tests: Option<usize>,
    /// Transactions per test
    #[arg(long)]
    txns: Option<usize>,
    /// Master seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Clone)]
struct AlgoArgs {
    /// Comma-separated algorithms: linear,lasso,ridge,dt,rf,adaboost,knn or `all`
    #[arg(long, default_value = "linear")]
    algos: String,
}

fn parse_duv(s: &str) -> Result<DuvKind, String> {
    DuvKind::parse(s).map_err(|e| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Run the original constrained-random regression and collect the dataset
    RunOriginal(RunArgs),
    /// Dedupe the dataset and pick per-bin dependent variables
    Prepare {
        #[command(flatten)]
        out: OutArg,
    },
    /// Train per-bin models for the requested algorithms
    Train {
        #[command(flatten)]
        algos: AlgoArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Synthesize directed constraints and optimized regression plans
    Synthesize {
        #[command(flatten)]
        algos: AlgoArgs,
        /// Widen predicted ranges by this fraction of the domain width
        #[arg(long, default_value_t = DEFAULT_MARGIN)]
        margin: f64,
        /// Target only the bins the original regression missed
        #[arg(long)]
        only_missed: bool,
        #[command(flatten)]
        out: OutArg,
    },
    /// Run each algorithm's optimized regression plan
    RunOptimized {
        #[command(flatten)]
        algos: AlgoArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Compute comparison metrics and write report files
    Report {
        #[command(flatten)]
        algos: AlgoArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Run the whole flow repeatedly until the coverage-regain target is met
    ClosedLoop {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        algos: AlgoArgs,
        /// Iteration cap
        #[arg(long, default_value_t = 5)]
        max_iters: usize,
        #[arg(long, default_value_t = DEFAULT_MARGIN)]
        margin: f64,
        #[arg(long)]
        only_missed: bool,
    },
}

fn build_config(run: &RunArgs, algos: Vec<AlgoKind>) -> RunConfig {
    let mut cfg = RunConfig::new(run.duv, run.out.resolve());
    cfg.covergroup_path = run.covergroup.clone();
    cfg.constraints_path = run.constraints.clone();
    cfg.tests = run.tests;
    cfg.transactions = run.txns;
    cfg.seed = run.seed;
    cfg.algos = algos;
    cfg
}

fn run(cli: Cli) -> Result<ExitCode, coverloop::Error> {
    match cli.command {
        Command::RunOriginal(args) => {
            let cfg = build_config(&args, vec![AlgoKind::Linear]);
            let summary = pipeline::cmd_run_original(&cfg)?;
            println!(
                "original regression: {} tests, coverage {:.2}% ({} bins missed), dataset at {}",
                summary.n_test_runs,
                summary.coverage_pct,
                summary.merged_coverage.missed_bins().len(),
                cfg.out_dir.join("dataset.csv").display()
            );
        }
        Command::Prepare { out } => {
            let report = pipeline::cmd_prepare(&out.resolve())?;
            let learnable = report
                .bins
                .iter()
                .filter(|b| matches!(b, coverloop::dataprep::BinPrep::Learnable(_)))
                .count();
            println!(
                "prepared: {} -> {} rows after dedup, {learnable}/{} bins learnable",
                report.rows_before,
                report.rows_after,
                report.bins.len()
            );
        }
        Command::Train { algos, out } => {
            let algos = AlgoKind::parse_list(&algos.algos)?;
            pipeline::cmd_train(&out.resolve(), &algos, &Hyperparams::default())?;
            println!("trained models for {} algorithm(s)", algos.len());
        }
        Command::Synthesize {
            algos,
            margin,
            only_missed,
            out,
        } => {
            let algos = AlgoKind::parse_list(&algos.algos)?;
            pipeline::cmd_synthesize(&out.resolve(), &algos, margin, only_missed)?;
            println!("synthesized optimized plans for {} algorithm(s)", algos.len());
        }
        Command::RunOptimized { algos, out } => {
            let algos = AlgoKind::parse_list(&algos.algos)?;
            let runs = pipeline::cmd_run_optimized(&out.resolve(), &algos)?;
            for (algo, summary) in runs {
                println!(
                    "{}: {} directed tests, coverage {:.2}%",
                    algo.tag(),
                    summary.n_test_runs,
                    summary.coverage_pct
                );
            }
        }
        Command::Report { algos, out } => {
            let algos = AlgoKind::parse_list(&algos.algos)?;
            let report = pipeline::cmd_report(&out.resolve(), &algos)?;
            print!("{}", report.to_csv());
        }
        Command::ClosedLoop {
            run,
            algos,
            max_iters,
            margin,
            only_missed,
        } => {
            let algos = AlgoKind::parse_list(&algos.algos)?;
            let mut cfg = build_config(&run, algos);
            cfg.max_iters = max_iters;
            cfg.margin = margin;
            cfg.only_missed = only_missed;
            let outcome = pipeline::cmd_closed_loop(&cfg)?;
            match (&outcome.best_algorithm, outcome.best_regain) {
                (Some(algo), Some(regain)) => println!(
                    "{} after {} iteration(s): best {} with {:.2}% regain",
                    if outcome.converged { "converged" } else { "loop cap exhausted" },
                    outcome.iterations,
                    algo.tag(),
                    regain
                ),
                _ => println!(
                    "loop finished after {} iteration(s) with no reportable result",
                    outcome.iterations
                ),
            }
            if !outcome.converged {
                return Ok(ExitCode::from(3));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
