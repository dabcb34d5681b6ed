//! Plot-data export from a finished (or partial) run directory.
//!
//! `curve_scores.csv` holds the mean score per episode, averaged over
//! instances and then over consecutive blocks of `window` generations.
//! `curve_metaparams.csv` holds the matching population means of the
//! meta-parameters and of the inverse temperature.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{io_err, Error, Result};
use crate::harness::artifacts::{read_config, read_generations};

pub const SCORES_FILE: &str = "curve_scores.csv";
pub const METAPARAMS_FILE: &str = "curve_metaparams.csv";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScorePoint {
    /// Last generation in the block.
    pub generation: u64,
    /// Episodes per instance completed at the end of the block.
    pub episodes: u64,
    pub mean_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetaPoint {
    pub generation: u64,
    pub episodes: u64,
    pub beta: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub tau0: f64,
    pub tauk: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExportedCurves {
    pub scores: Vec<ScorePoint>,
    pub metaparams: Vec<MetaPoint>,
    pub files: Vec<PathBuf>,
}

/// Writes the smoothed curves next to the run artifacts. Only complete
/// windows produce points.
pub fn export_curves(dir: &Path, window: u64) -> Result<ExportedCurves> {
    if window == 0 {
        return Err(Error::InvalidArgument("smoothing window must be at least 1".into()));
    }
    let config = read_config(dir)?;
    let rows = read_generations(dir)?;
    let e = config.episodes_per_generation;
    let per_episode = e.max(1) as f64;
    let generations = rows.iter().map(|r| r.generation + 1).max().unwrap_or(0);

    // per-generation population means: score, beta, alpha, gamma, lambda, tau0, tauk
    let mut sums = vec![[0.0f64; 7]; generations as usize];
    let mut counts = vec![0usize; generations as usize];
    for r in &rows {
        let g = r.generation as usize;
        let vals = [r.score / per_episode, r.beta, r.alpha, r.gamma, r.lambda, r.tau0, r.tauk];
        for (s, v) in sums[g].iter_mut().zip(vals) {
            *s += v;
        }
        counts[g] += 1;
    }
    let means: Vec<[f64; 7]> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s.map(|v| v / c.max(1) as f64))
        .collect();

    let mut scores = Vec::new();
    let mut metaparams = Vec::new();
    for block in means.chunks_exact(window as usize).enumerate() {
        let (b, block) = block;
        let mut avg = [0.0f64; 7];
        for m in block {
            for (a, v) in avg.iter_mut().zip(m) {
                *a += v / window as f64;
            }
        }
        let generation = (b as u64 + 1) * window - 1;
        let episodes = (generation + 1) * e;
        scores.push(ScorePoint {
            generation,
            episodes,
            mean_score: avg[0],
        });
        metaparams.push(MetaPoint {
            generation,
            episodes,
            beta: avg[1],
            alpha: avg[2],
            gamma: avg[3],
            lambda: avg[4],
            tau0: avg[5],
            tauk: avg[6],
        });
    }

    let files = vec![dir.join(SCORES_FILE), dir.join(METAPARAMS_FILE)];
    write_csv(&files[0], &scores)?;
    write_csv(&files[1], &metaparams)?;
    Ok(ExportedCurves {
        scores,
        metaparams,
        files,
    })
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}
