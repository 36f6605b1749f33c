use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reuse::RunLog;

/// Performance over one task-block: the mean episode return.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockArea {
    pub sequence_id: usize,
    pub task_index: usize,
    pub block_index: usize,
    /// Earlier blocks of the same task in the sequence.
    pub presentation: usize,
    pub area: f64,
    pub episodes: usize,
}

/// Per-block areas of one sequence's log, in block order.
pub fn block_areas(log: &RunLog) -> Vec<BlockArea> {
    let mut sums: BTreeMap<(usize, usize), (usize, f64, usize)> = BTreeMap::new();
    for r in &log.records {
        let e = sums.entry((r.seq_id, r.block_idx)).or_insert((r.task_idx, 0.0, 0));
        e.1 += r.episode_return;
        e.2 += 1;
    }
    let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
    sums.into_iter()
        .map(|((sequence_id, block_index), (task_index, sum, episodes))| {
            let count = seen.entry((sequence_id, task_index)).or_insert(0);
            let presentation = *count;
            *count += 1;
            BlockArea {
                sequence_id,
                task_index,
                block_index,
                presentation,
                area: sum / episodes as f64,
                episodes,
            }
        })
        .collect()
}

/// `(delta - delta_one_to_one) / random_area` with
/// `delta = current - previous` on consecutive presentations of one task.
pub fn forgetting_ratio(
    current: &BlockArea,
    previous: &BlockArea,
    one_to_one_delta: f64,
    random_area: f64,
) -> Result<f64> {
    if random_area <= 0.0 {
        return Err(Error::Analysis("uniform-random area must be positive".into()));
    }
    if current.task_index != previous.task_index || current.presentation != previous.presentation + 1 {
        return Err(Error::Usage(
            "forgetting ratio needs consecutive presentations of one task".into(),
        ));
    }
    Ok((current.area - previous.area - one_to_one_delta) / random_area)
}

/// `(area - one_to_one_area) / random_area`, defined only on the first
/// presentation of a task.
pub fn transfer_ratio(first: &BlockArea, one_to_one_area: f64, random_area: f64) -> Result<f64> {
    if first.presentation != 0 {
        return Err(Error::Usage(format!(
            "transfer ratio on presentation {} of task {}; only the first counts",
            first.presentation, first.task_index
        )));
    }
    if random_area <= 0.0 {
        return Err(Error::Analysis("uniform-random area must be positive".into()));
    }
    Ok((first.area - one_to_one_area) / random_area)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum InterferenceBin {
    None,
    From1To9,
    From10To19,
    From20To29,
    AtLeast30,
}

impl InterferenceBin {
    pub const ALL: [InterferenceBin; 5] = [
        InterferenceBin::None,
        InterferenceBin::From1To9,
        InterferenceBin::From10To19,
        InterferenceBin::From20To29,
        InterferenceBin::AtLeast30,
    ];

    pub fn of(interfering: usize) -> Self {
        match interfering {
            0 => InterferenceBin::None,
            1..=9 => InterferenceBin::From1To9,
            10..=19 => InterferenceBin::From10To19,
            20..=29 => InterferenceBin::From20To29,
            _ => InterferenceBin::AtLeast30,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            InterferenceBin::None => "0",
            InterferenceBin::From1To9 => "1-9",
            InterferenceBin::From10To19 => "10-19",
            InterferenceBin::From20To29 => "20-29",
            InterferenceBin::AtLeast30 => ">=30",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForgettingSample {
    pub sequence_id: usize,
    pub task_index: usize,
    pub block_index: usize,
    /// Blocks of other tasks since the previous presentation.
    pub interfering: usize,
    pub ratio: f64,
}

fn area_lookup(areas: &[BlockArea]) -> HashMap<(usize, usize), &BlockArea> {
    areas
        .iter()
        .map(|a| ((a.sequence_id, a.block_index), a))
        .collect()
}

fn paired<'a>(
    lookup: &HashMap<(usize, usize), &'a BlockArea>,
    a: &BlockArea,
) -> Result<&'a BlockArea> {
    lookup
        .get(&(a.sequence_id, a.block_index))
        .copied()
        .filter(|b| b.task_index == a.task_index)
        .ok_or_else(|| {
            Error::Analysis(format!(
                "no paired 1-to-1 block {} for sequence {}",
                a.block_index, a.sequence_id
            ))
        })
}

fn random_area(random_areas: &[f64], task: usize) -> Result<f64> {
    random_areas
        .get(task)
        .copied()
        .ok_or_else(|| Error::Analysis(format!("no uniform-random area for task {task}")))
}

/// Forgetting ratio for every repeated presentation, paired with the 1-to-1
/// run on the same sequence.
pub fn forgetting_samples(
    areas: &[BlockArea],
    one_to_one: &[BlockArea],
    random_areas: &[f64],
) -> Result<Vec<ForgettingSample>> {
    let reference = area_lookup(one_to_one);
    let mut last: HashMap<(usize, usize), &BlockArea> = HashMap::new();
    let mut out = Vec::new();
    for a in areas {
        if let Some(prev) = last.insert((a.sequence_id, a.task_index), a) {
            let d_ref = paired(&reference, a)?.area - paired(&reference, prev)?.area;
            out.push(ForgettingSample {
                sequence_id: a.sequence_id,
                task_index: a.task_index,
                block_index: a.block_index,
                interfering: a.block_index - prev.block_index - 1,
                ratio: forgetting_ratio(a, prev, d_ref, random_area(random_areas, a.task_index)?)?,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferSample {
    pub sequence_id: usize,
    pub task_index: usize,
    pub block_index: usize,
    pub ratio: f64,
}

pub fn transfer_samples(
    areas: &[BlockArea],
    one_to_one: &[BlockArea],
    random_areas: &[f64],
) -> Result<Vec<TransferSample>> {
    let reference = area_lookup(one_to_one);
    areas
        .iter()
        .filter(|a| a.presentation == 0)
        .map(|a| {
            Ok(TransferSample {
                sequence_id: a.sequence_id,
                task_index: a.task_index,
                block_index: a.block_index,
                ratio: transfer_ratio(
                    a,
                    paired(&reference, a)?.area,
                    random_area(random_areas, a.task_index)?,
                )?,
            })
        })
        .collect()
}

/// Mean block area per task, for normalising by a uniform-random baseline.
/// Every task in `0..n_tau` must appear.
pub fn mean_area_by_task(areas: &[BlockArea], n_tau: usize) -> Result<Vec<f64>> {
    let mut sums = vec![(0.0, 0usize); n_tau];
    for a in areas {
        let slot = sums.get_mut(a.task_index).ok_or_else(|| {
            Error::Analysis(format!("task {} outside a {n_tau}-task domain", a.task_index))
        })?;
        slot.0 += a.area;
        slot.1 += 1;
    }
    sums.into_iter()
        .enumerate()
        .map(|(task, (sum, n))| {
            if n == 0 {
                Err(Error::Analysis(format!("baseline never presented task {task}")))
            } else {
                Ok(sum / n as f64)
            }
        })
        .collect()
}

/// Mean and standard error of a sample; the error is 0 for fewer than two
/// values.
pub fn mean_stderr(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, (var / n).sqrt()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinSummary {
    pub bin: InterferenceBin,
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

/// Forgetting ratios grouped by number of interfering blocks; empty bins
/// are omitted.
pub fn bin_forgetting(samples: &[ForgettingSample]) -> Vec<BinSummary> {
    InterferenceBin::ALL
        .iter()
        .filter_map(|&bin| {
            let v: Vec<f64> = samples
                .iter()
                .filter(|s| InterferenceBin::of(s.interfering) == bin)
                .map(|s| s.ratio)
                .collect();
            mean_stderr(&v).map(|(mean, stderr)| BinSummary {
                bin,
                mean,
                stderr,
                count: v.len(),
            })
        })
        .collect()
}
