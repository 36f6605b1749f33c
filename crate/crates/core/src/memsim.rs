//! Counting model of memory use when policies are generated per task instead
//! of kept in a fixed library.
//!
//! Each block presents a uniformly drawn task. The first block of an unseen
//! task opens a temporary policy, which stays in memory until its task has
//! been presented `blocks_to_convergence` times. It is then accepted with
//! probability `acceptance_probability`, joining a library policy with fewer
//! than `task_capacity` tasks or founding a new one, or else discarded. A
//! closed task never reopens. Counts are taken while each block runs, so a
//! temporary policy is counted during its final block.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::rng::child_rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemSimConfig {
    pub n_tau: usize,
    pub task_capacity: usize,
    pub blocks_to_convergence: usize,
    pub acceptance_probability: f64,
    pub n_blocks: usize,
    pub runs: usize,
    pub seed: u64,
}

impl Default for MemSimConfig {
    fn default() -> Self {
        Self {
            n_tau: 1000,
            task_capacity: 1,
            blocks_to_convergence: 1,
            acceptance_probability: 1.0,
            n_blocks: 10_000,
            runs: 50,
            seed: 0,
        }
    }
}

impl MemSimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_tau == 0 {
            return config("n_tau must be at least 1");
        }
        if self.task_capacity == 0 {
            return config("task capacity must be at least 1");
        }
        if self.blocks_to_convergence == 0 {
            return config("blocks to convergence must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.acceptance_probability) {
            return config(format!(
                "acceptance probability {} is outside [0, 1]",
                self.acceptance_probability
            ));
        }
        if self.runs == 0 || self.n_blocks == 0 {
            return config("runs and n_blocks must be positive");
        }
        Ok(())
    }

    /// Policies a fixed library needs: `ceil(n_tau / C)`.
    pub fn baseline(&self) -> usize {
        self.n_tau.div_ceil(self.task_capacity)
    }
}

pub const MEMSIM_COLUMNS: [&str; 5] = [
    "block_index",
    "mean_library",
    "mean_temporary",
    "mean_total",
    "baseline",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemSimRow {
    pub block_index: usize,
    pub mean_library: f64,
    pub mean_temporary: f64,
    pub mean_total: f64,
    pub baseline: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MemSimResult {
    pub rows: Vec<MemSimRow>,
    pub baseline: usize,
    /// Per-run totals, kept for dispersion checks: `totals[run][block]`.
    pub totals: Vec<Vec<u32>>,
}

impl MemSimResult {
    pub fn peak_total(&self) -> f64 {
        self.rows.iter().map(|r| r.mean_total).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq)]
enum TaskState {
    Unseen,
    Open(usize),
    Closed,
}

/// `(library, temporary)` counts during each block of one run.
fn simulate_run<R: Rng + ?Sized>(cfg: &MemSimConfig, rng: &mut R) -> Vec<(u32, u32)> {
    let mut tasks = vec![TaskState::Unseen; cfg.n_tau];
    let mut library = 0u32;
    // Tasks held by the newest library policy; older ones are full.
    let mut newest_load = cfg.task_capacity;
    let mut temporary = 0u32;
    let mut out = Vec::with_capacity(cfg.n_blocks);
    for _ in 0..cfg.n_blocks {
        let task = rng.random_range(0..cfg.n_tau);
        let seen = match tasks[task] {
            TaskState::Unseen => {
                temporary += 1;
                1
            }
            TaskState::Open(n) => n + 1,
            TaskState::Closed => {
                out.push((library, temporary));
                continue;
            }
        };
        out.push((library, temporary));
        if seen < cfg.blocks_to_convergence {
            tasks[task] = TaskState::Open(seen);
            continue;
        }
        tasks[task] = TaskState::Closed;
        temporary -= 1;
        if rng.random_bool(cfg.acceptance_probability) {
            if newest_load == cfg.task_capacity {
                library += 1;
                newest_load = 0;
            }
            newest_load += 1;
        }
    }
    out
}

/// Mean counts per block over `cfg.runs` independent runs.
pub fn simulate_memory(cfg: &MemSimConfig) -> Result<MemSimResult> {
    cfg.validate()?;
    let baseline = cfg.baseline();
    let mut lib_sum = vec![0u64; cfg.n_blocks];
    let mut tmp_sum = vec![0u64; cfg.n_blocks];
    let mut totals = Vec::with_capacity(cfg.runs);
    for run in 0..cfg.runs {
        let counts = simulate_run(cfg, &mut child_rng(cfg.seed, run as u64));
        for (b, &(l, t)) in counts.iter().enumerate() {
            lib_sum[b] += u64::from(l);
            tmp_sum[b] += u64::from(t);
        }
        totals.push(counts.iter().map(|&(l, t)| l + t).collect());
    }
    let runs = cfg.runs as f64;
    let rows = (0..cfg.n_blocks)
        .map(|b| {
            let mean_library = lib_sum[b] as f64 / runs;
            let mean_temporary = tmp_sum[b] as f64 / runs;
            MemSimRow {
                block_index: b,
                mean_library,
                mean_temporary,
                mean_total: mean_library + mean_temporary,
                baseline,
            }
        })
        .collect();
    Ok(MemSimResult {
        rows,
        baseline,
        totals,
    })
}
