use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use rte::agents::AgentKind;
use rte::harness::{
    compare, load_repertoire, load_stats, run_experiment, write_outputs, ComparisonMode, ExperimentConfig,
};
use rte::repertoire::map_elites;

#[derive(Parser)]
#[command(name = "rte", version, about = "Reset-free trial-and-error damage recovery experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an action repertoire with MAP-Elites on the intact robot.
    Evolve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        evals: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run replicated recovery experiments and write CSV results.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        agent: Option<AgentKind>,
        #[arg(long)]
        repertoire: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        iters_per_tree: Option<usize>,
        #[arg(long)]
        trees: Option<usize>,
    },
    /// Compare two experiments given their summary files.
    Stats {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Test per-replicate means instead of pooled per-target counts.
        #[arg(long)]
        per_replicate: bool,
    },
}

fn load_config(path: Option<&PathBuf>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => Ok(ExperimentConfig::load(p)?),
        None => Ok(ExperimentConfig::default()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Evolve {
            config,
            out,
            evals,
            seed,
        } => {
            let cfg = load_config(config.as_ref())?;
            let evals = evals.unwrap_or(cfg.evaluations);
            let rep = map_elites(evals, seed.unwrap_or(cfg.seed), &cfg.evolve);
            rep.save(&out)?;
            println!("{} cells filled after {evals} evaluations -> {}", rep.len(), out.display());
        }
        Command::Run {
            config,
            agent,
            repertoire,
            out_dir,
            replicates,
            seed,
            iters_per_tree,
            trees,
        } => {
            let mut cfg = load_config(config.as_ref())?;
            if let Some(a) = agent {
                cfg.agent = a;
            }
            if let Some(r) = repertoire {
                cfg.repertoire = Some(r);
            }
            if let Some(r) = replicates {
                cfg.replicates = r;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(i) = iters_per_tree {
                cfg.agent_config.mcts.iterations_per_tree = i;
            }
            if let Some(t) = trees {
                cfg.agent_config.mcts.trees = t;
            }
            cfg.validate()?;
            let rep = load_repertoire(&cfg)?;
            let out = run_experiment(&cfg, rep.as_ref())?;
            write_outputs(&out_dir, &cfg, &out)?;
            println!(
                "{}: median {:.4} [{:.4}, {:.4}] episodes/target over {} replicates, {} failed targets",
                cfg.agent,
                out.stats.median,
                out.stats.percentile25,
                out.stats.percentile75,
                out.stats.replicates(),
                out.stats.failures
            );
        }
        Command::Stats { a, b, per_replicate } => {
            let sa = load_stats(&a).with_context(|| format!("loading {}", a.display()))?;
            let sb = load_stats(&b).with_context(|| format!("loading {}", b.display()))?;
            let mode = if per_replicate {
                ComparisonMode::ReplicateMeans
            } else {
                ComparisonMode::PooledTargets
            };
            println!("{}", compare(&sa, &sb, mode)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
