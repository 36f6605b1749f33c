use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::Context;
use polylife::envs::{make_task_sequences, TaskSequence, TaskSpec};
use polylife::metrics::mean_stderr;
use polylife::reuse::{
    run_lifetime, unadaptive_assignment, Library, LifetimeConfig, RunLog, RunLogWriter,
    SelectorConfig, SelectorMode,
};
use polylife::rng::derive_seed;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

/// Blocks averaged for the end-of-lifetime statistic.
pub const FINAL_BLOCKS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceSummary {
    pub seq_id: usize,
    /// Mean of per-block mean episode returns over the whole lifetime.
    pub lifetime_average: f64,
    /// The same over the last `FINAL_BLOCKS` blocks.
    pub final_average: f64,
    pub reward_per_step: f64,
    pub episodes: usize,
    pub selections: u64,
    pub explorations: u64,
    pub spread: Vec<(usize, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
}

impl MeanStderr {
    fn of(values: &[f64]) -> Self {
        let (mean, stderr) = mean_stderr(values).unwrap_or((f64::NAN, f64::NAN));
        Self { mean, stderr }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub condition: String,
    pub config: ExperimentConfig,
    pub lifetime_average: MeanStderr,
    pub final_average: MeanStderr,
    pub sequences: Vec<SequenceSummary>,
}

/// Seed of the lifetime run on sequence `seq_id`.
pub fn sequence_seed(seed: u64, seq_id: usize) -> u64 {
    derive_seed(seed, 1_000 + seq_id as u64)
}

pub fn sequence_csv(dir: &Path, seq_id: usize) -> PathBuf {
    dir.join(format!("seq_{seq_id:03}.csv"))
}

/// Summary statistics of one sequence's log.
pub fn summarise_log(seq_id: usize, log: &RunLog) -> SequenceSummary {
    let means: Vec<f64> = log.block_means().into_iter().map(|(_, m)| m).collect();
    let tail = &means[means.len().saturating_sub(FINAL_BLOCKS)..];
    SequenceSummary {
        seq_id,
        lifetime_average: MeanStderr::of(&means).mean,
        final_average: MeanStderr::of(tail).mean,
        reward_per_step: log.reward_per_step().unwrap_or(f64::NAN),
        episodes: log.len(),
        selections: 0,
        explorations: 0,
        spread: Vec::new(),
    }
}

/// Runs one lifetime, streaming episodes to `csv` so a failure leaves the
/// completed part of the log on disk.
pub fn run_sequence(
    cfg: &ExperimentConfig,
    tasks: &[TaskSpec],
    seq: &TaskSequence,
    csv: Option<&Path>,
) -> anyhow::Result<(RunLog, SequenceSummary)> {
    let learner = cfg.learner_config()?;
    let seed = sequence_seed(cfg.seed, seq.id);
    let first = &tasks[0];
    let mut library = Library::new(
        cfg.n_policies,
        &learner,
        first.obs_dim(),
        first.n_actions(),
        seed,
    )?;
    let selector = match cfg.selector {
        SelectorMode::Adaptive => SelectorConfig::adaptive(cfg.epsilon),
        SelectorMode::Unadaptive => {
            SelectorConfig::unadaptive(unadaptive_assignment(tasks.len(), cfg.n_policies, seed)?)
        }
    };
    let mut lifetime = LifetimeConfig::new(cfg.block_steps, cfg.time_unit());
    lifetime.spread_interval = cfg.spread_interval;

    let mut writer = match csv {
        Some(path) => Some(RunLogWriter::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        ))?),
        None => None,
    };
    let mut sink = |r: &polylife::reuse::EpisodeRecord| match writer.as_mut() {
        Some(w) => w.append(r),
        None => Ok(()),
    };
    let result = run_lifetime(tasks, seq, &mut library, &selector, &lifetime, seed, &mut sink);
    if let Some(w) = writer.as_mut() {
        w.flush()?;
    }
    let (log, stats) = result.with_context(|| format!("sequence {}", seq.id))?;
    let mut summary = summarise_log(seq.id, &log);
    summary.selections = stats.selections;
    summary.explorations = stats.explorations;
    summary.spread = stats.spread;
    Ok((log, summary))
}

/// Worker count: one per sequence, capped by `POLYLIFE_THREADS`.
pub fn worker_count(n_sequences: usize) -> usize {
    let cap = std::env::var("POLYLIFE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    cap.min(n_sequences).max(1)
}

/// Runs every sequence of the condition in parallel, then writes the
/// summary. Returns the summary and the per-sequence logs in sequence order.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: Option<&Path>,
) -> anyhow::Result<(ExperimentSummary, Vec<RunLog>)> {
    let tasks = cfg.domain.tasks();
    let sequences = make_task_sequences(tasks.len(), cfg.n_sequences, cfg.n_blocks, cfg.seed);
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(sequences.len()))
        .build()?;
    let results: Vec<anyhow::Result<(RunLog, SequenceSummary)>> = pool.install(|| {
        sequences
            .par_iter()
            .map(|seq| {
                let csv = out_dir.map(|d| sequence_csv(d, seq.id));
                run_sequence(cfg, &tasks, seq, csv.as_deref())
            })
            .collect()
    });
    let (logs, per_seq): (Vec<RunLog>, Vec<SequenceSummary>) =
        results.into_iter().collect::<anyhow::Result<Vec<_>>>()?.into_iter().unzip();

    let lifetime: Vec<f64> = per_seq.iter().map(|s| s.lifetime_average).collect();
    let fin: Vec<f64> = per_seq.iter().map(|s| s.final_average).collect();
    let summary = ExperimentSummary {
        condition: cfg.condition(),
        config: cfg.clone(),
        lifetime_average: MeanStderr::of(&lifetime),
        final_average: MeanStderr::of(&fin),
        sequences: per_seq,
    };
    if let Some(dir) = out_dir {
        let path = dir.join("summary.json");
        fs::write(&path, serde_json::to_string_pretty(&summary)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok((summary, logs))
}
