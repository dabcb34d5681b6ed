//! Grid sweeps over starting meta-parameters.

use std::fs;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{io_err, Result};
use crate::harness::artifacts::{run_experiment_with, RunControl};
use crate::harness::config::{Mode, SweepConfig};

pub const COMPARISON_FILE: &str = "comparison.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub gamma: f64,
    pub tauk: f64,
    pub mode: Mode,
    pub dir: PathBuf,
    /// Final-window mean and standard deviation, or the error message.
    pub result: std::result::Result<(f64, f64), String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub dir: PathBuf,
    pub cells: Vec<CellOutcome>,
}

impl SweepOutcome {
    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.result.is_err()).count()
    }

    pub fn comparison_path(&self) -> PathBuf {
        self.dir.join(COMPARISON_FILE)
    }
}

#[derive(Serialize)]
struct ComparisonRow<'a> {
    gamma: f64,
    tauk: f64,
    mode: &'a str,
    mean: Option<f64>,
    stddev: Option<f64>,
    status: &'a str,
}

/// Runs every cell of the grid and writes `comparison.csv`. A failing cell is
/// recorded in the table and does not stop the others.
pub fn run_sweep(sweep: &SweepConfig, progress: bool) -> Result<SweepOutcome> {
    sweep.validate()?;
    let dir = sweep.output_dir();
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let run_cell = |cell: crate::harness::config::SweepCell| {
        let cell_dir = cell.config.output_dir();
        let result = run_experiment_with(&cell.config, RunControl { stop_at: None, progress })
            .and_then(|d| crate::harness::artifacts::summarize(&d))
            .map(|s| (s.final_mean_score, s.final_score_std))
            .map_err(|e| e.to_string());
        if progress {
            if let Err(e) = &result {
                eprintln!("cell {} failed: {e}", cell_dir.display());
            }
        }
        CellOutcome {
            gamma: cell.gamma,
            tauk: cell.tauk,
            mode: cell.mode,
            dir: cell_dir,
            result,
        }
    };
    let cells = sweep.cells();
    let outcomes: Vec<CellOutcome> = if sweep.cell_workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(sweep.cell_workers)
            .build()
            .map_err(|e| crate::Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| cells.into_par_iter().map(run_cell).collect())
    } else {
        cells.into_iter().map(run_cell).collect()
    };

    let path = dir.join(COMPARISON_FILE);
    let mut w = csv::Writer::from_path(&path)?;
    for c in &outcomes {
        let (mean, stddev, status) = match &c.result {
            Ok((m, s)) => (Some(*m), Some(*s), "ok".to_string()),
            Err(e) => (None, None, format!("failed: {e}")),
        };
        w.serialize(ComparisonRow {
            gamma: c.gamma,
            tauk: c.tauk,
            mode: c.mode.as_str(),
            mean,
            stddev,
            status: &status,
        })?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(SweepOutcome { dir, cells: outcomes })
}
