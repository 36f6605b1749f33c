use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column order of the per-episode CSV.
pub const RUNLOG_COLUMNS: [&str; 7] = [
    "seq_id",
    "block_idx",
    "episode_idx",
    "task_idx",
    "policy_id",
    "return",
    "steps",
];

/// One episode; `episode_idx` counts episodes within the block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub seq_id: usize,
    pub block_idx: usize,
    pub episode_idx: usize,
    pub task_idx: usize,
    pub policy_id: usize,
    #[serde(rename = "return")]
    pub episode_return: f64,
    pub steps: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub records: Vec<EpisodeRecord>,
}

impl RunLog {
    pub fn push(&mut self, record: EpisodeRecord) {
        debug_assert!(self
            .records
            .last()
            .is_none_or(|r| r.block_idx <= record.block_idx));
        self.records.push(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Total reward over total steps.
    pub fn reward_per_step(&self) -> Option<f64> {
        let steps: u64 = self.records.iter().map(|r| r.steps).sum();
        let total: f64 = self.records.iter().map(|r| r.episode_return).sum();
        (steps > 0).then(|| total / steps as f64)
    }

    /// Mean episode return per block, in block order.
    pub fn block_means(&self) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64, usize)> = Vec::new();
        for r in &self.records {
            match out.last_mut() {
                Some(last) if last.0 == r.block_idx => {
                    last.1 += r.episode_return;
                    last.2 += 1;
                }
                _ => out.push((r.block_idx, r.episode_return, 1)),
            }
        }
        out.into_iter().map(|(b, s, n)| (b, s / n as f64)).collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        if self.records.is_empty() {
            w.write_record(RUNLOG_COLUMNS)?;
        }
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().ne(RUNLOG_COLUMNS) {
            return Err(Error::Analysis(format!(
                "run log columns {:?}, expected {:?}",
                headers.iter().collect::<Vec<_>>(),
                RUNLOG_COLUMNS
            )));
        }
        let records = rdr
            .deserialize()
            .collect::<Result<Vec<EpisodeRecord>, _>>()
            .map_err(|e| Error::Analysis(format!("malformed run log row: {e}")))?;
        Ok(Self { records })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(File::open(path)?).map_err(|e| match e {
            Error::Analysis(m) => Error::Analysis(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

/// Appends records to a CSV as they are produced.
pub struct RunLogWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> RunLogWriter<W> {
    pub fn new(writer: W) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        inner.write_record(RUNLOG_COLUMNS)?;
        Ok(Self { inner })
    }

    pub fn append(&mut self, record: &EpisodeRecord) -> Result<()> {
        self.inner.serialize(record)?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunLog {
        let mut log = RunLog::default();
        for (b, ret) in [(0, 10.0), (0, 20.0), (1, 7.5)] {
            log.push(EpisodeRecord {
                seq_id: 2,
                block_idx: b,
                episode_idx: 0,
                task_idx: 4,
                policy_id: 1,
                episode_return: ret,
                steps: ret as u64,
            });
        }
        log
    }

    #[test]
    fn csv_roundtrip_with_exact_header() {
        let log = sample();
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("seq_id,block_idx,episode_idx,task_idx,policy_id,return,steps\n"));
        assert_eq!(RunLog::read_csv(buf.as_slice()).unwrap(), log);
        assert_eq!(log.block_means(), vec![(0, 15.0), (1, 7.5)]);
    }

    #[test]
    fn streaming_writer_matches_batch() {
        let log = sample();
        let mut a = Vec::new();
        log.write_csv(&mut a).unwrap();
        let mut b = Vec::new();
        {
            let mut w = RunLogWriter::new(&mut b).unwrap();
            for r in &log.records {
                w.append(r).unwrap();
            }
            w.flush().unwrap();
        }
        assert_eq!(a, b);
        let mut empty = Vec::new();
        RunLog::default().write_csv(&mut empty).unwrap();
        assert_eq!(RunLog::read_csv(empty.as_slice()).unwrap(), RunLog::default());
    }

    #[test]
    fn schema_mismatch_is_an_analysis_error() {
        let bad = "seq,block_idx\n0,1\n";
        assert!(matches!(RunLog::read_csv(bad.as_bytes()), Err(Error::Analysis(_))));
    }
}
