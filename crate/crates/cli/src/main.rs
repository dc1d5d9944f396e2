//! `gatguard` command-line front end.
//!
//! Exit status: 0 on success, 1 for usage and configuration errors, 2 when a
//! command fails at run time.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gatguard::runner::{
    cmd_analyze, cmd_attack, cmd_benchmark, cmd_prepare, cmd_train, fmt_stat, RunConfig, Variant,
};
use gatguard::Error;

#[derive(Parser)]
#[command(
    name = "gatguard",
    version,
    about = "GAT training under rogue-node poisoning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration file (flat `key = value`, dotted keys).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `run.base_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `run.output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a Planetoid .content/.cites pair into a binary graph cache.
    Prepare {
        #[arg(long)]
        content: PathBuf,
        #[arg(long)]
        cites: PathBuf,
        /// Cache file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model; writes report.json and model.ckpt.
    Train(Common),
    /// Write the configured poisoned graph to poisoned.bin.
    Attack(Common),
    /// Export per-node attention statistics of a checkpoint on a graph.
    Analyze {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Poisoned graph file or dataset cache.
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the attack grid for the baseline and regularized models.
    Benchmark {
        #[command(flatten)]
        common: Common,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn load_config(c: &Common) -> Result<RunConfig, Error> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.base_seed = s;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Prepare {
            content,
            cites,
            out,
        } => {
            println!("{}", cmd_prepare(&content, &cites, &out)?);
        }
        Command::Train(c) => {
            let cfg = load_config(&c)?;
            println!("{}", cmd_train(&cfg, &cfg.output_dir)?);
        }
        Command::Attack(c) => {
            let cfg = load_config(&c)?;
            println!("{}", cmd_attack(&cfg, &cfg.output_dir)?);
        }
        Command::Analyze {
            checkpoint,
            graph,
            out,
        } => {
            let s = cmd_analyze(&checkpoint, &graph, &out)?;
            println!(
                "{} rows to {}, mean rogue mass {}",
                s.rows,
                s.csv.display(),
                fmt_stat(s.mean_rogue_mass)
            );
        }
        Command::Benchmark { common, jobs } => {
            let cfg = load_config(&common)?;
            let report = cmd_benchmark(&cfg, jobs, &cfg.output_dir)?;
            println!("lambda* = {}", report.lambda_star);
            for s in report
                .summary
                .iter()
                .filter(|s| s.variant == Variant::Robust)
            {
                let b = report
                    .summary_for(&s.case, s.n_rogue, s.edges_per_rogue, Variant::Baseline)
                    .map_or(f64::NAN, |b| b.test_acc_mean);
                println!(
                    "{} n_rogue={} edges={}: baseline {} robust {}",
                    s.case,
                    s.n_rogue,
                    s.edges_per_rogue,
                    fmt_stat(b),
                    fmt_stat(s.test_acc_mean)
                );
            }
            let failed: usize = report.summary.iter().map(|s| s.n_failed).sum();
            if failed > 0 {
                eprintln!("{failed} cell(s) failed; see errors.log");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
