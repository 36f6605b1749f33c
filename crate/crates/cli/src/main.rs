use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use polylife::envs::DomainKind;
use polylife::memsim::{simulate_memory, MemSimConfig};
use polylife::metrics::{
    cluster_points, cluster_tasks, empirical_task_capacity, integrated_task_capacity,
    CapacityTable, DEFAULT_LINKAGE_THRESHOLD,
};
use polylife_cli::analysis::{aggregate, compute_metrics, load_logs, write_rows};
use polylife_cli::{run_experiment, ExperimentConfig, InvalidConfig};
use serde_json::json;

#[derive(Parser)]
#[command(name = "polylife", version, about = "Lifetime policy reuse experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experimental condition over all its task sequences.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Learning curve over windows of consecutive blocks.
    Aggregate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 25)]
        window: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Forgetting and transfer ratios against 1-to-1 and uniform-random runs.
    Metrics {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        one_to_one: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Empirical and integrated task capacity from a performance table.
    Capacity {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        ntau: usize,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        /// Library size of the 1-to-1 row (default: the largest).
        #[arg(long)]
        one_to_one: Option<usize>,
    },
    /// Memory use of dynamic policy generation versus a fixed library.
    Memsim {
        #[arg(long, default_value_t = 1000)]
        ntau: usize,
        #[arg(long)]
        capacity: usize,
        #[arg(long)]
        tc: usize,
        #[arg(long)]
        accept: f64,
        #[arg(long, default_value_t = 10_000)]
        blocks: usize,
        #[arg(long, default_value_t = 50)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cluster cart-pole tasks by random-policy failure statistics.
    Cluster {
        #[arg(long, value_enum, default_value = "cartpole27")]
        domain: ClusterDomain,
        #[arg(long, default_value_t = 600_000)]
        steps: u64,
        #[arg(long, default_value_t = DEFAULT_LINKAGE_THRESHOLD)]
        threshold: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ClusterDomain {
    Cartpole27,
    Cartpole125,
}

/// CSV to `path`, or stdout when absent.
fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn print_json(value: &impl serde::Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn execute(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Run { config, seed, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let out = out.or_else(|| cfg.out_dir.clone());
            let (summary, _) = run_experiment(&cfg, out.as_deref())?;
            print_json(&json!({
                "condition": summary.condition,
                "lifetime_average": summary.lifetime_average,
                "final_average": summary.final_average,
            }))
        }
        Command::Aggregate { input, window, out } => {
            let rows = aggregate(&load_logs(&input)?, window)?;
            write_rows(&rows, output(out.as_deref())?)
        }
        Command::Metrics {
            input,
            baseline,
            one_to_one,
            out,
        } => {
            let logs = load_logs(&input)?;
            let random = load_logs(&baseline)?;
            // Task indices are zero-based and the baseline covers every task.
            let n_tau = random
                .iter()
                .flat_map(|l| l.records.iter().map(|r| r.task_idx + 1))
                .max()
                .unwrap_or(0);
            let report = compute_metrics(&logs, &load_logs(&one_to_one)?, &random, n_tau)?;
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                write_rows(&report.forgetting, File::create(dir.join("forgetting.csv"))?)?;
                write_rows(&report.forgetting_samples, File::create(dir.join("forgetting_samples.csv"))?)?;
                write_rows(&report.transfer_samples, File::create(dir.join("transfer_samples.csv"))?)?;
            }
            print_json(&report)
        }
        Command::Capacity {
            table,
            ntau,
            eps,
            one_to_one,
        } => {
            if !(0.0..1.0).contains(&eps) {
                return Err(InvalidConfig(format!("eps {eps} is outside [0, 1)")).into());
            }
            let file = File::open(&table).with_context(|| format!("opening {}", table.display()))?;
            let table = CapacityTable::read_csv(file, one_to_one)?;
            let (c_emp, n_pi_star) = empirical_task_capacity(&table, ntau, eps);
            print_json(&json!({
                "n_pi_star": n_pi_star,
                "c_emp": c_emp,
                "itc": integrated_task_capacity(&table, ntau),
            }))
        }
        Command::Memsim {
            ntau,
            capacity,
            tc,
            accept,
            blocks,
            runs,
            seed,
            out,
        } => {
            let cfg = MemSimConfig {
                n_tau: ntau,
                task_capacity: capacity,
                blocks_to_convergence: tc,
                acceptance_probability: accept,
                n_blocks: blocks,
                runs,
                seed,
            };
            cfg.validate().map_err(|e| InvalidConfig(e.to_string()))?;
            let result = simulate_memory(&cfg)?;
            result.write_csv(output(out.as_deref())?)?;
            eprintln!(
                "peak mean total {:.1} against a fixed library of {}",
                result.peak_total(),
                result.baseline
            );
            Ok(())
        }
        Command::Cluster {
            domain,
            steps,
            threshold,
            seed,
        } => {
            let kind = match domain {
                ClusterDomain::Cartpole27 => DomainKind::Cartpole27,
                ClusterDomain::Cartpole125 => DomainKind::Cartpole125,
            };
            let tasks = kind.tasks();
            let points = cluster_points(&tasks, steps, seed)?;
            let clustering = cluster_tasks(&points, threshold)?;
            print_json(&json!({
                "n_clusters": clustering.clusters.len(),
                "capacity": clustering.capacity(tasks.len()),
                "clusters": clustering.clusters,
                "points": points,
            }))
        }
    }
}

fn is_invalid_config(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        e.downcast_ref::<InvalidConfig>().is_some()
            || matches!(e.downcast_ref::<polylife::Error>(), Some(polylife::Error::Config(_)))
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if is_invalid_config(&err) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
