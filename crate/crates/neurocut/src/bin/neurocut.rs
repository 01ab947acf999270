//! Command-line entry point: dataset generation, the fixed-mu sweep,
//! training, evaluation, benchmarks, bound tables, and the self-check suite.

use clap::{Parser, Subcommand};
use neurocut::harness::{
    cmd_bench_timing, cmd_bounds, cmd_evaluate, cmd_generate, cmd_sweep, cmd_train, cmd_verify,
    RunConfig, TrainMode,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "neurocut", version, about = "Learned cut selection for integer programs")]
struct Cli {
    /// Path to a key=value configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Rayon worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the train and test datasets.
    Generate,
    /// Sweep the score-weighting mu over [0,1] and record mean tree sizes.
    Sweep,
    /// Train an actor and write the checkpoint plus training history.
    Train {
        /// Trainer: td3, cem, or ste_lt.
        #[arg(long, default_value = "td3", value_parser = parse_mode)]
        mode: TrainMode,
    },
    /// Evaluate a checkpoint on the test set against the sweep baseline.
    Evaluate {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Time actor forwards against root LP solves.
    Bench {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Repetitions over the test set; 0 flags the ratio as undefined.
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// Print the closed-form bound table as CSV.
    Bounds,
    /// Run the oracle and lemma checks; exits nonzero on any failure.
    Verify,
}

fn parse_mode(s: &str) -> Result<TrainMode, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn run(cli: Cli) -> neurocut::error::Result<bool> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let checkpoint_or_default =
        |explicit: &Option<PathBuf>| explicit.clone().unwrap_or_else(|| cfg.checkpoint_path());

    match &cli.command {
        Command::Generate => {
            let (train, test) = cmd_generate(&cfg)?;
            println!("wrote {train} train and {test} test instances to {}", cfg.out_dir.display());
        }
        Command::Sweep => {
            let report = cmd_sweep(&cfg)?;
            let (mu, mean) = report.best();
            println!("wrote {} ({} rows)", report.path.display(), report.rows.len());
            println!("best mu {mu} with mean tree size {mean}");
        }
        Command::Train { mode } => {
            let artifacts = cmd_train(&cfg, *mode)?;
            println!("wrote {}", artifacts.checkpoint.display());
            println!("wrote {}", artifacts.history.display());
            if let Some(last) = artifacts.run.history.last() {
                println!(
                    "final epoch {}: mean reward {}, mean tree size {}",
                    last.epoch, last.mean_reward, last.mean_tree_size
                );
            }
        }
        Command::Evaluate { checkpoint } => {
            let report = cmd_evaluate(&cfg, &checkpoint_or_default(checkpoint))?;
            println!("wrote {}", report.per_instance_path.display());
            println!("wrote {}", report.summary_path.display());
            println!(
                "baseline {} | learned {} | best mu {} at {}",
                report.stats.mean_baseline,
                report.stats.mean_tree_size,
                report.best_mu,
                report.best_mu_mean
            );
        }
        Command::Bench { checkpoint, repeats } => {
            let repeats = repeats.unwrap_or(cfg.bench_repeats);
            let report = cmd_bench_timing(&cfg, &checkpoint_or_default(checkpoint), repeats)?;
            println!("nn total {}s, lp total {}s", report.nn_total_secs, report.lp_total_secs);
            match report.ratio {
                Some(r) => println!("lp/nn ratio {r}"),
                None => println!("lp/nn ratio undefined (no repeats)"),
            }
        }
        Command::Bounds => print!("{}", cmd_bounds(&cfg)?),
        Command::Verify => {
            let report = cmd_verify(&cfg)?;
            print!("{}", report.render_csv());
            return Ok(report.all_passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global() {
            eprintln!("error: failed to set worker count: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
