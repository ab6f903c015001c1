use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const METRICS_HEADER: &str = "episode,step,raw_score,avg100";
pub const WINDOW: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricRow {
    /// 1-based, in completion order.
    pub episode: u64,
    /// Environment interactions so far, summed over environments.
    pub step: u64,
    pub raw_score: f64,
    pub avg100: f64,
}

impl MetricRow {
    pub fn to_csv(&self) -> String {
        format!("{},{},{},{}", self.episode, self.step, self.raw_score, self.avg100)
    }
}

/// Mean of the last [`WINDOW`] values, or of all of them while fewer exist.
#[derive(Clone, Debug, Default)]
pub struct MovingAverage {
    window: VecDeque<f64>,
}

impl MovingAverage {
    pub fn push(&mut self, v: f64) -> f64 {
        self.window.push_back(v);
        if self.window.len() > WINDOW {
            self.window.pop_front();
        }
        self.mean()
    }

    pub fn mean(&self) -> f64 {
        if self.window.is_empty() {
            0.0
        } else {
            self.window.iter().sum::<f64>() / self.window.len() as f64
        }
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }
}

pub struct MetricsWriter {
    out: BufWriter<File>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{METRICS_HEADER}")?;
        Ok(Self { out })
    }

    pub fn write(&mut self, row: &MetricRow) -> Result<()> {
        writeln!(self.out, "{}", row.to_csv())?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricRow>> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if n == 0 {
            if line.trim() != METRICS_HEADER {
                return Err(Error::Config(format!("{}: unexpected header `{line}`", path.display())));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Config(format!("{}: bad metrics line {}", path.display(), n + 1));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(bad());
        }
        rows.push(MetricRow {
            episode: f[0].parse().map_err(|_| bad())?,
            step: f[1].parse().map_err(|_| bad())?,
            raw_score: f[2].parse().map_err(|_| bad())?,
            avg100: f[3].parse().map_err(|_| bad())?,
        });
    }
    Ok(rows)
}
