use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::train::{train, Splits};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 6] = ["D", "T", "seed", "valid_acc", "test_acc", "status"];

/// Window sizes × step counts × seed replicates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepGrid {
    pub windows: Vec<usize>,
    pub steps: Vec<usize>,
    pub seeds: usize,
}

impl Default for SweepGrid {
    /// D ∈ 1..=6, T ∈ 1..=8, one seed per point.
    fn default() -> Self {
        Self { windows: (1..=6).collect(), steps: (1..=8).collect(), seeds: 1 }
    }
}

impl SweepGrid {
    pub fn len(&self) -> usize {
        self.windows.len() * self.steps.len() * self.seeds
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major points `(D, T, replicate)` with D outermost.
    pub fn points(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::with_capacity(self.len());
        for &d in &self.windows {
            for &t in &self.steps {
                for r in 0..self.seeds {
                    out.push((d, t, r));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "D")]
    pub window: usize,
    #[serde(rename = "T")]
    pub steps: usize,
    pub seed: u64,
    pub valid_acc: Option<f64>,
    pub test_acc: Option<f64>,
    pub status: String,
}

/// Trains one model per grid point. Point `i` (in row-major order) uses seed
/// `base.seed + i`. Failures are recorded in the row's status and the sweep
/// continues. Rows come back in grid order regardless of `parallel`.
pub fn sweep(
    base: &RunConfig,
    splits: &Splits,
    vocab_size: usize,
    grid: &SweepGrid,
    parallel: bool,
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::Input("sweep grid is empty".into()));
    }
    let points = grid.points();
    let run = |(i, &(window, steps, _)): (usize, &(usize, usize, usize))| {
        let seed = base.seed + i as u64;
        let config = RunConfig { window, steps, seed, ..base.clone() };
        match train(&config, splits, vocab_size) {
            Ok(out) => {
                log::info!(
                    "D={window} T={steps} seed={seed}: valid {:.4} test {:?}",
                    out.report.best_valid_accuracy,
                    out.report.test_accuracy
                );
                SweepRow {
                    window,
                    steps,
                    seed,
                    valid_acc: Some(out.report.best_valid_accuracy),
                    test_acc: out.report.test_accuracy,
                    status: "ok".into(),
                }
            }
            Err(e) => {
                log::warn!("D={window} T={steps} seed={seed} failed: {e}");
                SweepRow { window, steps, seed, valid_acc: None, test_acc: None, status: format!("error: {e}") }
            }
        }
    };
    let rows = if parallel {
        points.par_iter().enumerate().map(run).collect()
    } else {
        points.iter().enumerate().map(run).collect()
    };
    Ok(rows)
}

pub fn write_csv<W: std::io::Write>(rows: &[SweepRow], w: W) -> std::result::Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(w);
    for r in rows {
        writer.serialize(r)?;
    }
    if rows.is_empty() {
        writer.write_record(CSV_HEADER)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_csv_file(rows: &[SweepRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(rows, file).map_err(|e| Error::io(path, std::io::Error::other(e)))
}

pub fn read_csv<R: std::io::Read>(r: R) -> std::result::Result<Vec<SweepRow>, csv::Error> {
    let mut reader = csv::Reader::from_reader(r);
    let headers = reader.headers()?.clone();
    if headers.iter().ne(CSV_HEADER) {
        return Err(csv::Error::from(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("unexpected header {headers:?}"),
        )));
    }
    reader.deserialize().collect()
}

/// Mean of the successful accuracies (`valid` or `test`) over rows matching `window`.
pub fn mean_accuracy(rows: &[SweepRow], window: usize, test: bool) -> Option<f64> {
    let vals: Vec<f64> = rows
        .iter()
        .filter(|r| r.window == window)
        .filter_map(|r| if test { r.test_acc } else { r.valid_acc })
        .collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}
