//! Run and sweep configuration.
//!
//! Configs are JSON files. Every field is optional in the file; missing
//! values take defaults that depend on the chosen environment. The resolved
//! config (all fields filled in) is what gets written into an artifact
//! directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::{ChainConfig, GridworldConfig};
use crate::error::{io_err, Error, FieldError, Result};
use crate::metaparams::{MetaParams, NoiseConfig};
use crate::neuralnet::Activation;
use crate::ompac::PopulationConfig;
use crate::task::Task;
use crate::tetris::TetrisConfig;

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_VAR: &str = "OMPAC_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Ompac,
    Baseline,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Ompac => "ompac",
            Mode::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EnvironmentKind {
    #[default]
    SzTetris,
    #[serde(rename = "tetris-10x10")]
    Tetris10x10,
    Chain,
    Gridworld,
}

impl EnvironmentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvironmentKind::SzTetris => "sz-tetris",
            EnvironmentKind::Tetris10x10 => "tetris-10x10",
            EnvironmentKind::Chain => "chain",
            EnvironmentKind::Gridworld => "gridworld",
        }
    }

    pub fn default_task(self) -> Task {
        match self {
            EnvironmentKind::SzTetris => Task::Tetris(TetrisConfig::SZ_TETRIS),
            EnvironmentKind::Tetris10x10 => Task::Tetris(TetrisConfig::TETRIS_10X10),
            EnvironmentKind::Chain => Task::Chain(ChainConfig::RANDOM_WALK_19),
            EnvironmentKind::Gridworld => Task::Gridworld(GridworldConfig::default()),
        }
    }

    pub fn default_start(self) -> MetaParams {
        match self {
            EnvironmentKind::SzTetris | EnvironmentKind::Tetris10x10 => MetaParams::TETRIS_START,
            EnvironmentKind::Chain => MetaParams {
                alpha: 0.01,
                gamma: 1.0,
                lambda: 0.8,
                tau0: 1.0,
                tauk: 0.0,
            },
            EnvironmentKind::Gridworld => MetaParams {
                alpha: 0.1,
                gamma: 0.9,
                lambda: 0.5,
                tau0: 0.5,
                tauk: 0.01,
            },
        }
    }

    pub fn default_hidden_units(self) -> usize {
        match self {
            EnvironmentKind::SzTetris => 50,
            EnvironmentKind::Tetris10x10 => 250,
            EnvironmentKind::Chain | EnvironmentKind::Gridworld => 0,
        }
    }

    /// Trailing window (episodes) for the final mean score.
    pub fn default_summary_window(self) -> u64 {
        match self {
            EnvironmentKind::Tetris10x10 => 10_000,
            _ => 1_000,
        }
    }
}

impl std::str::FromStr for EnvironmentKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| format!("unknown environment {s:?}"))
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| format!("unknown mode {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub environment: EnvironmentKind,
    pub seed: u64,
    /// Number of parallel instances (independent runs in baseline mode).
    pub population: usize,
    pub generations: u64,
    pub episodes_per_generation: u64,
    pub start: Option<MetaParams>,
    pub noise: NoiseConfig,
    pub hidden_units: Option<usize>,
    pub activation: Activation,
    /// Replaces the environment's default task (board size, encoding, ...).
    pub task: Option<Task>,
    pub output_dir: Option<PathBuf>,
    /// Generations between checkpoints; 0 writes only the first and last.
    pub checkpoint_interval: u64,
    /// Trailing window, in episodes per instance, for the final mean score.
    pub summary_window: Option<u64>,
    /// Worker threads; defaults to min(population, available cores).
    pub workers: Option<usize>,
    /// Write one CSV row per episode.
    pub log_episodes: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Ompac,
            environment: EnvironmentKind::SzTetris,
            seed: 0,
            population: 12,
            generations: 2000,
            episodes_per_generation: 100,
            start: None,
            noise: NoiseConfig::default(),
            hidden_units: None,
            activation: Activation::Dsil,
            task: None,
            output_dir: None,
            checkpoint_interval: 100,
            summary_window: None,
            workers: None,
            log_episodes: true,
        }
    }
}

impl RunConfig {
    pub fn for_environment(environment: EnvironmentKind) -> Self {
        Self {
            environment,
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(vec![FieldError::new("<file>", e.to_string())]))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&text)
    }

    pub fn start(&self) -> MetaParams {
        self.start.unwrap_or_else(|| self.environment.default_start())
    }

    pub fn hidden_units(&self) -> usize {
        self.hidden_units
            .unwrap_or_else(|| self.environment.default_hidden_units())
    }

    pub fn task(&self) -> Task {
        self.task.unwrap_or_else(|| self.environment.default_task())
    }

    pub fn summary_window(&self) -> u64 {
        self.summary_window
            .unwrap_or_else(|| self.environment.default_summary_window())
    }

    pub fn workers(&self) -> usize {
        self.workers.unwrap_or_else(|| {
            let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
            self.population.min(cores).max(1)
        })
    }

    /// Output directory, falling back to `$OMPAC_OUTPUT_ROOT/<env>-<mode>-seed<seed>`.
    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| {
            let root = std::env::var_os(OUTPUT_ROOT_VAR).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
            root.join(format!(
                "{}-{}-seed{}",
                self.environment.as_str(),
                self.mode.as_str(),
                self.seed
            ))
        })
    }

    pub fn population_config(&self) -> PopulationConfig {
        PopulationConfig {
            size: self.population,
            episodes_per_generation: self.episodes_per_generation,
            noise: self.noise,
            hidden_units: self.hidden_units(),
            activation: self.activation,
            baseline: self.mode == Mode::Baseline,
        }
    }

    /// Copy with every defaulted field made explicit.
    pub fn resolved(&self) -> Self {
        Self {
            start: Some(self.start()),
            hidden_units: Some(self.hidden_units()),
            task: Some(self.task()),
            output_dir: Some(self.output_dir()),
            summary_window: Some(self.summary_window()),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if self.population == 0 {
            errors.push(FieldError::new("population", "must be at least 1"));
        }
        for name in self.start().invalid_fields() {
            errors.push(FieldError::new(format!("start.{name}"), "out of range"));
        }
        if !(0.0..=1.0).contains(&self.noise.p_n) {
            errors.push(FieldError::new("noise.p_n", "must be in [0, 1]"));
        }
        if !(self.noise.eta_n.is_finite() && self.noise.eta_n >= 0.0) {
            errors.push(FieldError::new("noise.eta_n", "must be finite and non-negative"));
        }
        if self.summary_window() == 0 {
            errors.push(FieldError::new("summary_window", "must be at least 1"));
        }
        if self.workers == Some(0) {
            errors.push(FieldError::new("workers", "must be at least 1"));
        }
        if let Err(e) = self.task().validate() {
            errors.push(FieldError::new("task", e.to_string()));
        }
        let task_matches = matches!(
            (self.environment, self.task()),
            (EnvironmentKind::SzTetris | EnvironmentKind::Tetris10x10, Task::Tetris(_))
                | (EnvironmentKind::Chain, Task::Chain(_))
                | (EnvironmentKind::Gridworld, Task::Gridworld(_))
        );
        if !task_matches {
            errors.push(FieldError::new("task", "kind does not match environment"));
        }
        if self.output_dir.as_ref().is_some_and(|p| p.as_os_str().is_empty()) {
            errors.push(FieldError::new("output_dir", "must not be empty"));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }
}

/// Cartesian grid of starting discount and temperature-decay values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub base: RunConfig,
    pub gammas: Vec<f64>,
    pub tauks: Vec<f64>,
    pub modes: Vec<Mode>,
    pub output_dir: Option<PathBuf>,
    /// Cells run concurrently.
    pub cell_workers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            base: RunConfig::default(),
            gammas: vec![0.8, 0.9, 0.99],
            tauks: vec![2.5e-3, 2.5e-4, 2.5e-5],
            modes: vec![Mode::Ompac, Mode::Baseline],
            output_dir: None,
            cell_workers: 1,
        }
    }
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub gamma: f64,
    pub tauk: f64,
    pub mode: Mode,
    pub config: RunConfig,
}

impl SweepConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(vec![FieldError::new("<file>", e.to_string())]))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| {
            let root = std::env::var_os(OUTPUT_ROOT_VAR).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
            root.join(format!("sweep-{}-seed{}", self.base.environment.as_str(), self.base.seed))
        })
    }

    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if self.gammas.is_empty() {
            errors.push(FieldError::new("gammas", "grid must not be empty"));
        }
        if self.tauks.is_empty() {
            errors.push(FieldError::new("tauks", "grid must not be empty"));
        }
        if self.modes.is_empty() {
            errors.push(FieldError::new("modes", "must name at least one mode"));
        }
        if self.cell_workers == 0 {
            errors.push(FieldError::new("cell_workers", "must be at least 1"));
        }
        for cell in self.cells() {
            if let Err(Error::Config(errs)) = cell.config.validate() {
                for e in errs {
                    errors.push(FieldError::new(
                        format!("cell(gamma={}, tauk={}).{}", cell.gamma, cell.tauk, e.field),
                        e.message,
                    ));
                }
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }

    pub fn cells(&self) -> Vec<SweepCell> {
        let root = self.output_dir();
        let mut cells = Vec::new();
        for &gamma in &self.gammas {
            for &tauk in &self.tauks {
                for &mode in &self.modes {
                    let mut config = self.base.clone();
                    config.mode = mode;
                    config.start = Some(MetaParams {
                        gamma,
                        tauk,
                        ..self.base.start()
                    });
                    config.output_dir =
                        Some(root.join(format!("gamma{gamma}_tauk{tauk}_{}", mode.as_str())));
                    cells.push(SweepCell {
                        gamma,
                        tauk,
                        mode,
                        config,
                    });
                }
            }
        }
        cells
    }
}
