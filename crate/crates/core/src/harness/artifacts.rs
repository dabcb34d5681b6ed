//! Artifact directories: CSV logs, checkpoints, summaries.
//!
//! Layout of a run directory:
//!
//! ```text
//! config.json          resolved run configuration
//! episodes.csv         one row per learning episode (optional)
//! generations.csv      one row per instance per generation
//! metaparams.csv       population means per generation
//! curves/run_NN.csv    per-run learning curves (baseline mode)
//! checkpoints/gen_NNNNNN.json
//! summary.json         written when the run completes
//! ```
//!
//! Checkpoints record the byte length of every CSV at the time they were
//! taken; resuming truncates the logs back to those lengths so that an
//! interrupted and resumed run produces the same bytes as an uninterrupted
//! one.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::harness::config::{Mode, RunConfig};
use crate::metaparams::MetaParams;
use crate::ompac::{self, EpisodeRecord, GenerationReport, Population, PopulationSnapshot, RunObserver};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

pub const CONFIG_FILE: &str = "config.json";
pub const EPISODES_FILE: &str = "episodes.csv";
pub const GENERATIONS_FILE: &str = "generations.csv";
pub const METAPARAMS_FILE: &str = "metaparams.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const CURVES_DIR: &str = "curves";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub instance: usize,
    pub generation: u64,
    pub episode: u64,
    pub score: f64,
    #[serde(rename = "return")]
    pub discounted_return: f64,
    pub temperature: f64,
    pub steps: u64,
}

impl From<&EpisodeRecord> for EpisodeRow {
    fn from(r: &EpisodeRecord) -> Self {
        Self {
            instance: r.instance,
            generation: r.generation,
            episode: r.episode,
            score: r.score,
            discounted_return: r.discounted_return,
            temperature: r.temperature,
            steps: r.steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRow {
    pub generation: u64,
    pub instance: usize,
    pub score: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub tau0: f64,
    pub tauk: f64,
    pub beta: f64,
    pub parent: usize,
    pub elite: bool,
}

impl GenerationRow {
    pub fn psi(&self) -> MetaParams {
        MetaParams {
            alpha: self.alpha,
            gamma: self.gamma,
            lambda: self.lambda,
            tau0: self.tau0,
            tauk: self.tauk,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaParamsRow {
    pub generation: u64,
    pub mean_score: f64,
    pub mean_alpha: f64,
    pub mean_gamma: f64,
    pub mean_lambda: f64,
    pub mean_tau0: f64,
    pub mean_tauk: f64,
    pub mean_beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub generation: u64,
    pub episodes: u64,
    pub mean_score: f64,
}

/// Checkpoint file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: RunConfig,
    pub population: PopulationSnapshot,
    /// Byte length of each log (path relative to the run directory).
    pub log_lengths: BTreeMap<String, u64>,
}

impl Checkpoint {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let cp: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Checkpoint {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        if cp.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Checkpoint {
                path: path.to_path_buf(),
                reason: format!("unsupported format version {}", cp.format_version),
            });
        }
        Ok(cp)
    }
}

pub fn checkpoint_path(dir: &Path, generation: u64) -> PathBuf {
    dir.join(CHECKPOINT_DIR).join(format!("gen_{generation:06}.json"))
}

/// Most recent checkpoint in a run directory.
pub fn latest_checkpoint(dir: &Path) -> Result<PathBuf> {
    let cdir = dir.join(CHECKPOINT_DIR);
    let mut names: Vec<PathBuf> = fs::read_dir(&cdir)
        .map_err(io_err(&cdir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("gen_") && n.ends_with(".json"))
        })
        .collect();
    names.sort();
    names.pop().ok_or(Error::MissingArtifact(cdir))
}

struct Log {
    rel: String,
    writer: csv::Writer<File>,
}

impl Log {
    fn create(dir: &Path, rel: &str, header: &[&str]) -> Result<Self> {
        let path = dir.join(rel);
        let file = File::create(&path).map_err(io_err(&path))?;
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        writer.write_record(header)?;
        Ok(Self {
            rel: rel.to_string(),
            writer,
        })
    }

    fn reopen(dir: &Path, rel: &str, len: u64) -> Result<Self> {
        let path = dir.join(rel);
        let file = OpenOptions::new()
            .write(true)
            .open(&path)
            .map_err(io_err(&path))?;
        file.set_len(len).map_err(io_err(&path))?;
        drop(file);
        let file = OpenOptions::new()
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        Ok(Self {
            rel: rel.to_string(),
            writer: csv::WriterBuilder::new().has_headers(false).from_writer(file),
        })
    }

    fn write<T: Serialize>(&mut self, row: &T) -> Result<()> {
        self.writer.serialize(row)?;
        Ok(())
    }

    fn flush(&mut self) -> Result<u64> {
        self.writer.flush().map_err(io_err(&self.rel))?;
        let len = self
            .writer
            .get_ref()
            .metadata()
            .map_err(io_err(&self.rel))?
            .len();
        Ok(len)
    }
}

const EPISODE_HEADER: [&str; 7] = ["instance", "generation", "episode", "score", "return", "temperature", "steps"];
const GENERATION_HEADER: [&str; 11] = [
    "generation", "instance", "score", "alpha", "gamma", "lambda", "tau0", "tauk", "beta", "parent", "elite",
];
const METAPARAMS_HEADER: [&str; 8] = [
    "generation", "mean_score", "mean_alpha", "mean_gamma", "mean_lambda", "mean_tau0", "mean_tauk", "mean_beta",
];
const CURVE_HEADER: [&str; 3] = ["generation", "episodes", "mean_score"];

fn curve_file(instance: usize) -> String {
    format!("{CURVES_DIR}/run_{instance:02}.csv")
}

/// Writes every artifact of a run as the generation loop reports progress.
pub struct ArtifactWriter {
    dir: PathBuf,
    config: RunConfig,
    episodes: Option<Log>,
    generations: Log,
    metaparams: Log,
    curves: Vec<Log>,
    progress: bool,
}

impl ArtifactWriter {
    fn create(dir: &Path, config: &RunConfig) -> Result<Self> {
        for sub in [dir.to_path_buf(), dir.join(CHECKPOINT_DIR)] {
            fs::create_dir_all(&sub).map_err(io_err(&sub))?;
        }
        if config.mode == Mode::Baseline {
            let c = dir.join(CURVES_DIR);
            fs::create_dir_all(&c).map_err(io_err(&c))?;
        }
        let path = dir.join(CONFIG_FILE);
        fs::write(&path, serde_json::to_string_pretty(config)? + "\n").map_err(io_err(&path))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            config: config.clone(),
            episodes: if config.log_episodes {
                Some(Log::create(dir, EPISODES_FILE, &EPISODE_HEADER)?)
            } else {
                None
            },
            generations: Log::create(dir, GENERATIONS_FILE, &GENERATION_HEADER)?,
            metaparams: Log::create(dir, METAPARAMS_FILE, &METAPARAMS_HEADER)?,
            curves: if config.mode == Mode::Baseline {
                (0..config.population)
                    .map(|i| Log::create(dir, &curve_file(i), &CURVE_HEADER))
                    .collect::<Result<_>>()?
            } else {
                Vec::new()
            },
            progress: false,
        })
    }

    fn reopen(dir: &Path, config: &RunConfig, lengths: &BTreeMap<String, u64>) -> Result<Self> {
        let open = |rel: &str| -> Result<Log> {
            let len = *lengths.get(rel).ok_or_else(|| Error::Checkpoint {
                path: dir.to_path_buf(),
                reason: format!("no recorded length for {rel}"),
            })?;
            Log::reopen(dir, rel, len)
        };
        Ok(Self {
            dir: dir.to_path_buf(),
            config: config.clone(),
            episodes: if config.log_episodes {
                Some(open(EPISODES_FILE)?)
            } else {
                None
            },
            generations: open(GENERATIONS_FILE)?,
            metaparams: open(METAPARAMS_FILE)?,
            curves: if config.mode == Mode::Baseline {
                (0..config.population)
                    .map(|i| open(&curve_file(i)))
                    .collect::<Result<_>>()?
            } else {
                Vec::new()
            },
            progress: false,
        })
    }

    fn logs_mut(&mut self) -> impl Iterator<Item = &mut Log> {
        self.episodes
            .iter_mut()
            .chain(std::iter::once(&mut self.generations))
            .chain(std::iter::once(&mut self.metaparams))
            .chain(self.curves.iter_mut())
    }

    fn flush(&mut self) -> Result<BTreeMap<String, u64>> {
        let mut lengths = BTreeMap::new();
        for log in self.logs_mut() {
            let len = log.flush()?;
            lengths.insert(log.rel.clone(), len);
        }
        Ok(lengths)
    }
}

impl RunObserver for ArtifactWriter {
    fn on_generation(
        &mut self,
        _pop: &Population,
        episodes: &[EpisodeRecord],
        report: &GenerationReport,
    ) -> Result<()> {
        if let Some(log) = &mut self.episodes {
            for r in episodes {
                log.write(&EpisodeRow::from(r))?;
            }
        }
        let n = report.instances.len() as f64;
        let per_episode = self.config.episodes_per_generation.max(1) as f64;
        let mut means = [0.0f64; 7];
        for inst in &report.instances {
            let psi = inst.psi;
            let beta = psi.inverse_temperature(inst.episode_index);
            self.generations.write(&GenerationRow {
                generation: report.generation,
                instance: inst.id,
                score: inst.score,
                alpha: psi.alpha,
                gamma: psi.gamma,
                lambda: psi.lambda,
                tau0: psi.tau0,
                tauk: psi.tauk,
                beta,
                parent: inst.parent,
                elite: inst.elite,
            })?;
            for (m, v) in means.iter_mut().zip([
                inst.score / per_episode,
                psi.alpha,
                psi.gamma,
                psi.lambda,
                psi.tau0,
                psi.tauk,
                beta,
            ]) {
                *m += v / n;
            }
        }
        self.metaparams.write(&MetaParamsRow {
            generation: report.generation,
            mean_score: means[0],
            mean_alpha: means[1],
            mean_gamma: means[2],
            mean_lambda: means[3],
            mean_tau0: means[4],
            mean_tauk: means[5],
            mean_beta: means[6],
        })?;
        for (log, inst) in self.curves.iter_mut().zip(&report.instances) {
            log.write(&CurveRow {
                generation: report.generation,
                episodes: inst.episode_index,
                mean_score: inst.score / per_episode,
            })?;
        }
        if self.progress {
            eprintln!(
                "generation {:>6}  mean score/episode {:>10.3}  elite {:>3}{}",
                report.generation,
                means[0],
                report.elite,
                report.note.as_deref().map(|n| format!("  ({n})")).unwrap_or_default()
            );
        }
        Ok(())
    }

    fn on_checkpoint(&mut self, pop: &Population) -> Result<()> {
        let log_lengths = self.flush()?;
        let cp = Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            config: self.config.clone(),
            population: pop.snapshot(),
            log_lengths,
        };
        let path = checkpoint_path(&self.dir, pop.generation);
        let tmp = path.with_extension("json.tmp");
        let write = || -> std::io::Result<()> {
            let mut f = File::create(&tmp)?;
            serde_json::to_writer(&mut f, &cp)?;
            f.write_all(b"\n")?;
            f.sync_all()?;
            fs::rename(&tmp, &path)
        };
        write().map_err(|e| Error::Checkpoint {
            path: path.clone(),
            reason: e.to_string(),
        })
    }
}

/// Options controlling how far a run goes and how chatty it is.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunControl {
    /// Stop after this many generations even if the config asks for more
    /// (used to simulate interruptions).
    pub stop_at: Option<u64>,
    /// Print one progress line per generation to stderr.
    pub progress: bool,
}

fn in_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn drive(
    dir: &Path,
    config: &RunConfig,
    mut pop: Population,
    mut writer: ArtifactWriter,
    control: RunControl,
) -> Result<PathBuf> {
    writer.progress = control.progress;
    let task = config.task();
    let target = control
        .stop_at
        .map_or(config.generations, |s| s.min(config.generations));
    in_pool(config.workers(), || {
        ompac::run(&mut pop, &task, target, config.checkpoint_interval, &mut writer)
    })??;
    writer.flush()?;
    if pop.generation >= config.generations {
        let summary = summarize(dir)?;
        let path = dir.join(SUMMARY_FILE);
        fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n").map_err(io_err(&path))?;
    }
    Ok(dir.to_path_buf())
}

/// Runs one experiment and returns its artifact directory.
pub fn run_experiment(config: &RunConfig) -> Result<PathBuf> {
    run_experiment_with(config, RunControl::default())
}

pub fn run_experiment_with(config: &RunConfig, control: RunControl) -> Result<PathBuf> {
    config.validate()?;
    let config = config.resolved();
    let dir = config.output_dir();
    let task = config.task();
    let pop = Population::new(config.seed, config.population_config(), &config.start(), &task)?;
    let writer = ArtifactWriter::create(&dir, &config)?;
    drive(&dir, &config, pop, writer, control)
}

/// Continues a run from a checkpoint file. `generations` optionally extends
/// the run beyond its configured length.
pub fn resume(checkpoint: &Path, generations: Option<u64>, control: RunControl) -> Result<PathBuf> {
    let cp = Checkpoint::load(checkpoint)?;
    let dir = checkpoint
        .parent()
        .and_then(Path::parent)
        .ok_or_else(|| Error::Checkpoint {
            path: checkpoint.to_path_buf(),
            reason: "checkpoint is not inside a run directory".into(),
        })?
        .to_path_buf();
    if !dir.join(CONFIG_FILE).exists() {
        return Err(Error::MissingArtifact(dir.join(CONFIG_FILE)));
    }
    let mut config = cp.config.clone();
    config.output_dir = Some(dir.clone());
    if let Some(g) = generations {
        config.generations = g;
        let path = dir.join(CONFIG_FILE);
        fs::write(&path, serde_json::to_string_pretty(&config)? + "\n").map_err(io_err(&path))?;
    }
    config.validate()?;
    let pop = Population::from_snapshot(cp.population)?;
    let writer = ArtifactWriter::reopen(&dir, &config, &cp.log_lengths)?;
    drive(&dir, &config, pop, writer, control)
}

/// End-of-run statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub environment: String,
    pub mode: Mode,
    pub population: usize,
    pub generations_completed: u64,
    pub episodes_per_instance: u64,
    /// Episodes per instance actually covered by the final window.
    pub window_episodes: u64,
    /// Mean per-episode score over the final window, averaged over instances.
    pub final_mean_score: f64,
    /// Standard deviation of the per-instance final-window means.
    pub final_score_std: f64,
    pub best_final_instance: usize,
    pub best_final_instance_score: f64,
    /// Highest per-episode mean score of any instance in any generation.
    pub best_generation_score: f64,
    pub best_generation: u64,
    pub final_mean_psi: MetaParams,
}

pub fn read_config(dir: &Path) -> Result<RunConfig> {
    let path = dir.join(CONFIG_FILE);
    if !path.exists() {
        return Err(Error::MissingArtifact(path));
    }
    RunConfig::load(&path)
}

pub fn read_generations(dir: &Path) -> Result<Vec<GenerationRow>> {
    let path = dir.join(GENERATIONS_FILE);
    if !path.exists() {
        return Err(Error::MissingArtifact(path));
    }
    let mut reader = csv::Reader::from_path(&path)?;
    reader
        .deserialize()
        .collect::<std::result::Result<Vec<GenerationRow>, _>>()
        .map_err(Error::from)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Computes the run summary from `config.json` and `generations.csv`.
pub fn summarize(dir: &Path) -> Result<Summary> {
    let config = read_config(dir)?;
    let rows = read_generations(dir)?;
    let n = config.population;
    let e = config.episodes_per_generation;
    let completed = rows.iter().map(|r| r.generation + 1).max().unwrap_or(0);
    let window_gens = if e == 0 {
        completed
    } else {
        config.summary_window().div_ceil(e).min(completed)
    };
    let first = completed - window_gens;
    let per_episode = e.max(1) as f64;

    let mut totals = vec![0.0; n];
    let mut psi_sum = [0.0f64; 5];
    let mut psi_count = 0.0f64;
    let (mut best_score, mut best_gen) = (f64::NEG_INFINITY, 0);
    for r in &rows {
        let s = r.score / per_episode;
        if s > best_score {
            best_score = s;
            best_gen = r.generation;
        }
        if r.generation >= first && r.instance < n {
            totals[r.instance] += r.score;
        }
        if r.generation + 1 == completed {
            for (acc, v) in psi_sum.iter_mut().zip([r.alpha, r.gamma, r.lambda, r.tau0, r.tauk]) {
                *acc += v;
            }
            psi_count += 1.0;
        }
    }
    let window_episodes = window_gens * e;
    let per_instance: Vec<f64> = totals
        .iter()
        .map(|t| if window_episodes == 0 { 0.0 } else { t / window_episodes as f64 })
        .collect();
    let (mean, std) = mean_std(&per_instance);
    let best_final = crate::learner::greedy_index(&per_instance);
    let pc = psi_count.max(1.0);
    Ok(Summary {
        environment: config.environment.as_str().to_string(),
        mode: config.mode,
        population: n,
        generations_completed: completed,
        episodes_per_instance: completed * e,
        window_episodes,
        final_mean_score: mean,
        final_score_std: std,
        best_final_instance: best_final,
        best_final_instance_score: per_instance.get(best_final).copied().unwrap_or(0.0),
        best_generation_score: if rows.is_empty() { 0.0 } else { best_score },
        best_generation: best_gen,
        final_mean_psi: MetaParams {
            alpha: psi_sum[0] / pc,
            gamma: psi_sum[1] / pc,
            lambda: psi_sum[2] / pc,
            tau0: psi_sum[3] / pc,
            tauk: psi_sum[4] / pc,
        },
    })
}
