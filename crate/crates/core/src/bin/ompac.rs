use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ompac_core::harness::{
    self, artifacts, EnvironmentKind, Mode, RunConfig, RunControl, SweepConfig,
};
use ompac_core::Error;

/// Online meta-learning by parallel algorithm competition.
#[derive(Parser)]
#[command(name = "ompac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        /// JSON run configuration; defaults apply when omitted.
        #[arg(long, short)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        /// Suppress per-generation progress lines.
        #[arg(long, short)]
        quiet: bool,
    },
    /// Run a grid of experiments and write a comparison table.
    Sweep {
        #[arg(long, short)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Grid cells run concurrently.
        #[arg(long)]
        cell_workers: Option<usize>,
        #[arg(long, short)]
        quiet: bool,
    },
    /// Continue a run from a checkpoint file or from the latest checkpoint
    /// in a run directory.
    Resume {
        path: PathBuf,
        /// New total generation count.
        #[arg(long)]
        generations: Option<u64>,
        #[arg(long, short)]
        quiet: bool,
    },
    /// Write smoothed learning-curve and meta-parameter series.
    Export {
        dir: PathBuf,
        /// Smoothing window in generations (default 100 for 10x10 Tetris,
        /// otherwise 10).
        #[arg(long, short)]
        window: Option<u64>,
    },
    /// Check a configuration file without running it.
    ValidateConfig {
        path: PathBuf,
        /// Treat the file as a sweep configuration.
        #[arg(long)]
        sweep: bool,
    },
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    generations: Option<u64>,
    #[arg(long)]
    episodes: Option<u64>,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    env: Option<EnvironmentKind>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    checkpoint_interval: Option<u64>,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(env) = self.env {
            cfg.environment = env;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.generations {
            cfg.generations = v;
        }
        if let Some(v) = self.episodes {
            cfg.episodes_per_generation = v;
        }
        if let Some(v) = self.population {
            cfg.population = v;
        }
        if let Some(v) = self.mode {
            cfg.mode = v;
        }
        if let Some(v) = &self.output {
            cfg.output_dir = Some(v.clone());
        }
        if let Some(v) = self.workers {
            cfg.workers = Some(v);
        }
        if let Some(v) = self.checkpoint_interval {
            cfg.checkpoint_interval = v;
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) => 1,
        _ => 2,
    }
}

fn load_run_config(path: Option<&Path>) -> Result<RunConfig, Error> {
    path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run {
            config,
            overrides,
            quiet,
        } => {
            let mut cfg = load_run_config(config.as_deref())?;
            overrides.apply(&mut cfg);
            let dir = harness::run_experiment_with(
                &cfg,
                RunControl {
                    stop_at: None,
                    progress: !quiet,
                },
            )?;
            report_summary(&dir)
        }
        Command::Sweep {
            config,
            overrides,
            cell_workers,
            quiet,
        } => {
            let mut sweep = SweepConfig::load(&config)?;
            if let Some(out) = &overrides.output {
                sweep.output_dir = Some(out.clone());
            }
            let base_overrides = Overrides { output: None, ..overrides };
            base_overrides.apply(&mut sweep.base);
            if let Some(w) = cell_workers {
                sweep.cell_workers = w;
            }
            let outcome = harness::run_sweep(&sweep, !quiet)?;
            println!("{}", outcome.comparison_path().display());
            let failed = outcome.failures();
            if failed > 0 {
                eprintln!("{failed} of {} cells failed", outcome.cells.len());
                return Err(Error::Environment(format!("{failed} sweep cells failed")));
            }
            Ok(())
        }
        Command::Resume {
            path,
            generations,
            quiet,
        } => {
            let checkpoint = if path.is_dir() {
                artifacts::latest_checkpoint(&path)?
            } else {
                path
            };
            let dir = harness::resume(
                &checkpoint,
                generations,
                RunControl {
                    stop_at: None,
                    progress: !quiet,
                },
            )?;
            report_summary(&dir)
        }
        Command::Export { dir, window } => {
            let window = match window {
                Some(w) => w,
                None => match artifacts::read_config(&dir)?.environment {
                    EnvironmentKind::Tetris10x10 => 100,
                    _ => 10,
                },
            };
            let curves = harness::export_curves(&dir, window)?;
            for f in &curves.files {
                println!("{}", f.display());
            }
            Ok(())
        }
        Command::ValidateConfig { path, sweep } => {
            if sweep {
                SweepConfig::load(&path)?.validate()?;
            } else {
                RunConfig::load(&path)?.validate()?;
            }
            println!("{}: ok", path.display());
            Ok(())
        }
    }
}

fn report_summary(dir: &Path) -> Result<(), Error> {
    let path = dir.join(artifacts::SUMMARY_FILE);
    if path.exists() {
        let s = harness::summarize(dir)?;
        println!(
            "{}\nfinal mean score {:.3} (std {:.3}) over {} episodes per instance",
            dir.display(),
            s.final_mean_score,
            s.final_score_std,
            s.window_episodes
        );
    } else {
        println!("{}", dir.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
