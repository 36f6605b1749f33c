use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use polylife::metrics::{
    bin_forgetting, block_areas, forgetting_samples, mean_area_by_task, mean_stderr,
    transfer_samples, BinSummary, BlockArea, ForgettingSample, TransferSample,
};
use polylife::reuse::RunLog;
use serde::{Deserialize, Serialize};

/// Per-sequence CSV logs in `dir`, sorted by file name.
pub fn sequence_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "csv")
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("seq_"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no seq_*.csv logs in {}", dir.display());
    }
    Ok(files)
}

pub fn load_logs(dir: &Path) -> anyhow::Result<Vec<RunLog>> {
    sequence_files(dir)?
        .iter()
        .map(|p| RunLog::load(p).with_context(|| format!("loading {}", p.display())))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    pub window: usize,
    pub first_block: usize,
    pub last_block: usize,
    pub mean: f64,
    pub stderr: f64,
    pub n_sequences: usize,
}

/// Learning curve: for each window of `window` consecutive blocks, the mean
/// and standard error across sequences of each sequence's average block
/// score in that window.
pub fn aggregate(logs: &[RunLog], window: usize) -> anyhow::Result<Vec<WindowRow>> {
    if window == 0 {
        bail!("window must be positive");
    }
    if logs.is_empty() {
        bail!("nothing to aggregate");
    }
    let curves: Vec<Vec<(usize, f64)>> = logs.iter().map(RunLog::block_means).collect();
    let n_blocks = curves.iter().map(|c| c.len()).max().unwrap_or(0);
    let mut rows = Vec::new();
    for (w, start) in (0..n_blocks).step_by(window).enumerate() {
        let end = (start + window).min(n_blocks);
        let per_seq: Vec<f64> = curves
            .iter()
            .filter_map(|c| {
                let vals: Vec<f64> = c
                    .iter()
                    .filter(|(b, _)| (start..end).contains(b))
                    .map(|&(_, m)| m)
                    .collect();
                mean_stderr(&vals).map(|(m, _)| m)
            })
            .collect();
        if let Some((mean, stderr)) = mean_stderr(&per_seq) {
            rows.push(WindowRow {
                window: w,
                first_block: start,
                last_block: end - 1,
                mean,
                stderr,
                n_sequences: per_seq.len(),
            });
        }
    }
    Ok(rows)
}

pub fn write_rows<T: Serialize, W: Write>(rows: &[T], writer: W) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub bin: String,
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl From<&BinSummary> for BinRow {
    fn from(b: &BinSummary) -> Self {
        Self {
            bin: b.bin.label().to_string(),
            mean: b.mean,
            stderr: b.stderr,
            count: b.count,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub forgetting: Vec<BinRow>,
    pub transfer_mean: f64,
    pub transfer_stderr: f64,
    pub transfer_count: usize,
    #[serde(skip)]
    pub forgetting_samples: Vec<ForgettingSample>,
    #[serde(skip)]
    pub transfer_samples: Vec<TransferSample>,
}

fn all_areas(logs: &[RunLog]) -> Vec<BlockArea> {
    logs.iter().flat_map(block_areas).collect()
}

/// Forgetting bins and transfer for `logs`, paired block by block with a
/// 1-to-1 run on the same sequences and normalised by a uniform-random run.
pub fn compute_metrics(
    logs: &[RunLog],
    one_to_one: &[RunLog],
    baseline: &[RunLog],
    n_tau: usize,
) -> anyhow::Result<MetricsReport> {
    let areas = all_areas(logs);
    let reference = all_areas(one_to_one);
    let random = mean_area_by_task(&all_areas(baseline), n_tau)?;
    let forgetting = forgetting_samples(&areas, &reference, &random)?;
    let transfer = transfer_samples(&areas, &reference, &random)?;
    let ratios: Vec<f64> = transfer.iter().map(|t| t.ratio).collect();
    let (transfer_mean, transfer_stderr) = mean_stderr(&ratios).unwrap_or((f64::NAN, f64::NAN));
    Ok(MetricsReport {
        forgetting: bin_forgetting(&forgetting).iter().map(BinRow::from).collect(),
        transfer_mean,
        transfer_stderr,
        transfer_count: ratios.len(),
        forgetting_samples: forgetting,
        transfer_samples: transfer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use polylife::reuse::EpisodeRecord;

    fn log(seq: usize, blocks: &[(usize, &[f64])]) -> RunLog {
        let mut l = RunLog::default();
        for (b, &(task, rets)) in blocks.iter().enumerate() {
            for (e, &r) in rets.iter().enumerate() {
                l.push(EpisodeRecord {
                    seq_id: seq,
                    block_idx: b,
                    episode_idx: e,
                    task_idx: task,
                    policy_id: 0,
                    episode_return: r,
                    steps: 1,
                });
            }
        }
        l
    }

    #[test]
    fn windows_match_hand_computation() {
        // Block means: seq 0 -> 1, 3, 5; seq 1 -> 2, 2, 8.
        let a = log(0, &[(0, &[0.0, 2.0]), (0, &[3.0]), (0, &[5.0, 5.0])]);
        let b = log(1, &[(0, &[2.0]), (0, &[1.0, 3.0]), (0, &[8.0])]);
        let rows = aggregate(&[a.clone(), b], 2).unwrap();
        assert_eq!(rows.len(), 2);
        // Window 0: seq means 2 and 2.
        assert_eq!((rows[0].mean, rows[0].stderr), (2.0, 0.0));
        // Window 1: 5 and 8 -> mean 6.5, sd 2.1213, se 1.5.
        assert_eq!(rows[1].mean, 6.5);
        assert!((rows[1].stderr - 1.5).abs() < 1e-12);
        assert_eq!((rows[1].first_block, rows[1].last_block), (2, 2));

        let single = aggregate(&[a], 3).unwrap();
        assert_eq!(single[0].stderr, 0.0);
        assert_eq!(single[0].mean, 3.0);
    }

    #[test]
    fn constant_returns_give_flat_curve() {
        let l = log(0, &[(0, &[4.0, 4.0]), (1, &[4.0]), (0, &[4.0])]);
        let rows = aggregate(&[l], 1).unwrap();
        assert!(rows.iter().all(|r| r.mean == 4.0 && r.stderr == 0.0));
    }

    #[test]
    fn metrics_pair_blocks_with_reference() {
        let reuse = log(0, &[(0, &[10.0]), (1, &[5.0]), (0, &[6.0])]);
        let one = log(0, &[(0, &[10.0]), (1, &[5.0]), (0, &[12.0])]);
        let random = log(0, &[(0, &[2.0]), (1, &[4.0])]);
        let m = compute_metrics(&[reuse], &[one], &[random], 2).unwrap();
        assert_eq!(m.forgetting_samples.len(), 1);
        // (6 - 10) - (12 - 10) = -6, over 2.
        assert_eq!(m.forgetting_samples[0].ratio, -3.0);
        assert_eq!(m.forgetting[0].bin, "1-9");
        assert_eq!(m.transfer_count, 2);
        assert_eq!(m.transfer_mean, 0.0);
        assert!(compute_metrics(&[log(0, &[(0, &[1.0])])], &[], &[log(0, &[(0, &[1.0])])], 1).is_err());
    }
}
