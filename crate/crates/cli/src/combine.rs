use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use shakg::trainer::read_metrics;

pub const COMBINED_HEADER: &str = "episode,mean_avg100,std_avg100,runs";

/// Mean and sample standard deviation of avg100 across runs, aligned by
/// episode index and cut to the shortest run.
pub fn combine(files: &[PathBuf]) -> Result<String> {
    if files.is_empty() {
        bail!("combine needs at least one metrics file");
    }
    let mut runs = Vec::new();
    for f in files {
        runs.push(read_metrics(f).with_context(|| format!("metrics {}", f.display()))?);
    }
    let len = runs.iter().map(Vec::len).min().unwrap_or(0);
    let n = runs.len() as f64;
    let mut out = format!("{COMBINED_HEADER}\n");
    for i in 0..len {
        let values: Vec<f64> = runs.iter().map(|r| r[i].avg100).collect();
        let mean = values.iter().sum::<f64>() / n;
        let std = if runs.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let _ = writeln!(out, "{},{mean},{std},{}", runs[0][i].episode, runs.len());
    }
    Ok(out)
}
