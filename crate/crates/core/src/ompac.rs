//! The generation loop: evaluate every instance for a block of episodes,
//! keep the best one untouched, refill the other slots by stochastic
//! universal sampling on generation score, and perturb the copied
//! meta-parameters.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::LearnerState;
use crate::metaparams::{init_population, mutate, MetaParams, NoiseConfig};
use crate::neuralnet::{Activation, Network, NetworkRecord, TraceVector};
use crate::rng::{stream, StreamRng, StreamTag};
use crate::task::EpisodeRunner;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationConfig {
    pub size: usize,
    pub episodes_per_generation: u64,
    pub noise: NoiseConfig,
    pub hidden_units: usize,
    pub activation: Activation,
    /// Skip selection and mutation; instances learn independently.
    pub baseline: bool,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        Self {
            size: 12,
            episodes_per_generation: 100,
            noise: NoiseConfig::default(),
            hidden_units: 50,
            activation: Activation::Dsil,
            baseline: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: usize,
    pub learner: LearnerState,
    /// Score accumulated in the current generation.
    pub score: f64,
    /// Weights went non-finite during the current generation.
    pub failed: bool,
}

impl Instance {
    /// Private stream for generation `generation`.
    pub fn stream(&self, seed: u64, generation: u64) -> StreamRng {
        stream(seed, StreamTag::Episode, self.id as u64, generation)
    }
}

/// One learning episode, as logged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub instance: usize,
    pub generation: u64,
    /// Cumulative index of this episode (the `i` of its temperature).
    pub episode: u64,
    pub score: f64,
    pub discounted_return: f64,
    pub temperature: f64,
    pub steps: u64,
}

/// Per-instance view of one finished generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceReport {
    pub id: usize,
    pub score: f64,
    pub failed: bool,
    /// Meta-parameters used during the generation.
    pub psi: MetaParams,
    /// Cumulative episode count at the end of the generation.
    pub episode_index: u64,
    /// Slot of the previous generation this instance was copied from.
    pub parent: usize,
    /// This instance entered the generation as the unmutated elite.
    pub elite: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub generation: u64,
    pub instances: Vec<InstanceReport>,
    /// Best instance of this generation, carried over unchanged.
    pub elite: usize,
    /// Parent slot for each slot of the next generation.
    pub next_parents: Vec<usize>,
    /// Meta-parameters for the next generation, after mutation.
    pub next_psi: Vec<MetaParams>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub seed: u64,
    pub config: PopulationConfig,
    pub generation: u64,
    pub instances: Vec<Instance>,
    /// Lineage of each slot for the generation about to run.
    parents: Vec<usize>,
    elite: Option<usize>,
}

impl Population {
    /// Fresh population: meta-parameters noised around `start` (exact copies
    /// in baseline mode) and independently initialised networks.
    pub fn new<T: EpisodeRunner + ?Sized>(
        seed: u64,
        config: PopulationConfig,
        start: &MetaParams,
        task: &T,
    ) -> Result<Self> {
        if config.size == 0 {
            return Err(Error::InvalidArgument("population size must be at least 1".into()));
        }
        if !start.is_valid() {
            return Err(Error::InvalidArgument(format!(
                "starting meta-parameters out of range: {:?}",
                start.invalid_fields()
            )));
        }
        let psis = if config.baseline {
            vec![*start; config.size]
        } else {
            init_population(start, config.size, &config.noise, &mut stream(seed, StreamTag::Init, 0, 0))
        };
        let instances = psis
            .into_iter()
            .enumerate()
            .map(|(id, psi)| {
                let mut rng = stream(seed, StreamTag::Network, id as u64, 0);
                let net = Network::random(
                    task.feature_len(),
                    config.hidden_units,
                    task.output_dim(),
                    config.activation,
                    &mut rng,
                );
                Instance {
                    id,
                    learner: LearnerState::new(net, psi),
                    score: 0.0,
                    failed: false,
                }
            })
            .collect();
        Ok(Self {
            seed,
            config,
            generation: 0,
            instances,
            parents: (0..config.size).collect(),
            elite: None,
        })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn snapshot(&self) -> PopulationSnapshot {
        PopulationSnapshot {
            seed: self.seed,
            config: self.config,
            generation: self.generation,
            parents: self.parents.clone(),
            elite: self.elite,
            instances: self
                .instances
                .iter()
                .map(|inst| InstanceSnapshot {
                    id: inst.id,
                    psi: inst.learner.psi,
                    episode_index: inst.learner.episode_index,
                    network: inst.learner.net.to_record(),
                })
                .collect(),
        }
    }

    pub fn from_snapshot(snap: PopulationSnapshot) -> Result<Self> {
        if snap.instances.len() != snap.config.size || snap.parents.len() != snap.config.size {
            return Err(Error::InvalidArgument(
                "snapshot population size does not match its config".into(),
            ));
        }
        let instances = snap
            .instances
            .into_iter()
            .enumerate()
            .map(|(slot, s)| {
                if s.id != slot {
                    return Err(Error::InvalidArgument(format!(
                        "snapshot instance {} stored in slot {slot}",
                        s.id
                    )));
                }
                let net = s.network.into_network()?;
                Ok(Instance {
                    id: s.id,
                    learner: LearnerState {
                        trace: TraceVector::for_network(&net),
                        net,
                        psi: s.psi,
                        episode_index: s.episode_index,
                    },
                    score: 0.0,
                    failed: false,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            seed: snap.seed,
            config: snap.config,
            generation: snap.generation,
            instances,
            parents: snap.parents,
            elite: snap.elite,
        })
    }
}

/// Serializable population state at a generation boundary.
///
/// Random streams are not stored: every stream is derived from the run seed,
/// the instance id and the generation number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSnapshot {
    pub seed: u64,
    pub config: PopulationConfig,
    pub generation: u64,
    pub parents: Vec<usize>,
    pub elite: Option<usize>,
    pub instances: Vec<InstanceSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSnapshot {
    pub id: usize,
    pub psi: MetaParams,
    pub episode_index: u64,
    pub network: NetworkRecord,
}

fn evaluate_instance<T: EpisodeRunner + ?Sized>(
    inst: &mut Instance,
    task: &T,
    seed: u64,
    generation: u64,
    episodes: u64,
) -> Result<Vec<EpisodeRecord>> {
    let mut rng = inst.stream(seed, generation);
    inst.score = 0.0;
    inst.failed = false;
    let mut records = Vec::with_capacity(episodes as usize);
    for _ in 0..episodes {
        let episode = inst.learner.episode_index;
        match task.run_episode(&mut inst.learner, &mut rng) {
            Ok(out) => {
                inst.score += out.score;
                records.push(EpisodeRecord {
                    instance: inst.id,
                    generation,
                    episode,
                    score: out.score,
                    discounted_return: out.discounted_return,
                    temperature: out.temperature,
                    steps: out.steps,
                });
                if !inst.learner.net.is_finite() {
                    inst.failed = true;
                }
            }
            Err(Error::Diverged) => inst.failed = true,
            Err(e) => return Err(e),
        }
        if inst.failed {
            inst.score = 0.0;
            break;
        }
    }
    Ok(records)
}

/// Runs `episodes_per_generation` episodes on every instance, in parallel.
///
/// Each instance uses only its own state and a stream derived from
/// `(seed, id, generation)`, so the result does not depend on scheduling.
/// Records are returned in instance order.
pub fn evaluate_generation<T: EpisodeRunner + ?Sized>(
    pop: &mut Population,
    task: &T,
) -> Result<Vec<EpisodeRecord>> {
    let (seed, generation, episodes) = (pop.seed, pop.generation, pop.config.episodes_per_generation);
    let per_instance: Vec<Result<Vec<EpisodeRecord>>> = pop
        .instances
        .par_iter_mut()
        .map(|inst| evaluate_instance(inst, task, seed, generation, episodes))
        .collect();
    let mut records = Vec::new();
    for r in per_instance {
        records.extend(r?);
    }
    Ok(records)
}

/// Sequential reference for [`evaluate_generation`].
pub fn evaluate_generation_sequential<T: EpisodeRunner + ?Sized>(
    pop: &mut Population,
    task: &T,
) -> Result<Vec<EpisodeRecord>> {
    let (seed, generation, episodes) = (pop.seed, pop.generation, pop.config.episodes_per_generation);
    let mut records = Vec::new();
    for inst in &mut pop.instances {
        records.extend(evaluate_instance(inst, task, seed, generation, episodes)?);
    }
    Ok(records)
}

/// Stochastic universal sampling: one spin of a wheel with `slots` equally
/// spaced pointers. Each index receives the floor or ceiling of its expected
/// copy count `slots * f_i / sum(f)`.
///
/// Negative fitness is shifted up by the minimum; if all fitness is zero the
/// parents are drawn uniformly.
pub fn sus_select<R: Rng + ?Sized>(fitness: &[f64], slots: usize, rng: &mut R) -> Vec<usize> {
    assert!(!fitness.is_empty(), "selection over an empty population");
    assert!(
        fitness.iter().all(|f| f.is_finite()),
        "fitness must be finite"
    );
    let min = fitness.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = if min < 0.0 {
        fitness.iter().map(|f| f - min).collect()
    } else {
        fitness.to_vec()
    };
    let total: f64 = shifted.iter().sum();
    if total <= 0.0 {
        return (0..slots).map(|_| rng.gen_range(0..fitness.len())).collect();
    }
    let spacing = total / slots as f64;
    let start = rng.gen::<f64>() * spacing;
    let last_positive = shifted.iter().rposition(|&f| f > 0.0).unwrap();
    let mut out = Vec::with_capacity(slots);
    let mut index = 0;
    let mut segment_end = shifted[0];
    for k in 0..slots {
        let pointer = start + k as f64 * spacing;
        while pointer >= segment_end && index < last_positive {
            index += 1;
            segment_end += shifted[index];
        }
        out.push(index);
    }
    out
}

/// Describes any repair [`sus_select`] applies to `fitness`.
pub fn selection_warning(fitness: &[f64]) -> Option<String> {
    if fitness.iter().any(|&f| f < 0.0) {
        Some("negative fitness shifted by its minimum before selection".into())
    } else if fitness.iter().all(|&f| f == 0.0) {
        Some("all fitness zero; parents drawn uniformly".into())
    } else {
        None
    }
}

/// Index of the best healthy instance; ties go to the lowest id.
fn elite_index(pop: &Population) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, inst) in pop.instances.iter().enumerate() {
        if inst.failed {
            continue;
        }
        match best {
            Some(b) if pop.instances[b].score >= inst.score => {}
            _ => best = Some(i),
        }
    }
    best
}

fn instance_reports(pop: &Population) -> Vec<InstanceReport> {
    pop.instances
        .iter()
        .enumerate()
        .map(|(slot, inst)| InstanceReport {
            id: inst.id,
            score: inst.score,
            failed: inst.failed,
            psi: inst.learner.psi,
            episode_index: inst.learner.episode_index,
            parent: pop.parents[slot],
            elite: pop.elite == Some(slot),
        })
        .collect()
}

/// Elitism plus SUS selection plus mutation, applied after
/// [`evaluate_generation`]. Advances the generation counter.
pub fn step_generation<R: Rng + ?Sized>(pop: &mut Population, rng: &mut R) -> Result<GenerationReport> {
    let n = pop.len();
    let elite = elite_index(pop).ok_or(Error::PopulationDiverged(n))?;
    let reports = instance_reports(pop);

    let fitness: Vec<f64> = pop
        .instances
        .iter()
        .map(|inst| if inst.failed { 0.0 } else { inst.score })
        .collect();
    let mut note = selection_warning(&fitness);
    let healthy: Vec<usize> = (0..n).filter(|&i| !pop.instances[i].failed).collect();
    let drawn = if fitness.iter().all(|&f| f == 0.0) {
        if healthy.len() < n {
            note = Some("all fitness zero; parents drawn uniformly from healthy instances".into());
        }
        (0..n - 1)
            .map(|_| healthy[rng.gen_range(0..healthy.len())])
            .collect()
    } else {
        sus_select(&fitness, n - 1, rng)
    };

    let mut parents = Vec::with_capacity(n);
    let mut drawn = drawn.into_iter();
    for slot in 0..n {
        parents.push(if slot == elite { elite } else { drawn.next().unwrap() });
    }

    let old: Vec<LearnerState> = pop.instances.iter().map(|i| i.learner.clone()).collect();
    for (slot, inst) in pop.instances.iter_mut().enumerate() {
        if slot != elite {
            let parent = &old[parents[slot]];
            inst.learner.net = parent.net.clone();
            inst.learner.episode_index = parent.episode_index;
            inst.learner.psi = mutate(&parent.psi, &pop.config.noise, rng);
        }
        inst.learner.trace.reset();
        inst.score = 0.0;
        inst.failed = false;
    }

    let report = GenerationReport {
        generation: pop.generation,
        instances: reports,
        elite,
        next_parents: parents.clone(),
        next_psi: pop.instances.iter().map(|i| i.learner.psi).collect(),
        note,
    };
    pop.parents = parents;
    pop.elite = Some(elite);
    pop.generation += 1;
    Ok(report)
}

/// Baseline counterpart of [`step_generation`]: no selection, no mutation.
pub fn advance_without_selection(pop: &mut Population) -> GenerationReport {
    let reports = instance_reports(pop);
    let elite = elite_index(pop).unwrap_or(0);
    for inst in &mut pop.instances {
        inst.learner.trace.reset();
        inst.score = 0.0;
        inst.failed = false;
    }
    let report = GenerationReport {
        generation: pop.generation,
        instances: reports,
        elite,
        next_parents: (0..pop.len()).collect(),
        next_psi: pop.instances.iter().map(|i| i.learner.psi).collect(),
        note: None,
    };
    pop.generation += 1;
    report
}

/// Receives the outputs of [`run`].
pub trait RunObserver {
    fn on_generation(
        &mut self,
        pop: &Population,
        episodes: &[EpisodeRecord],
        report: &GenerationReport,
    ) -> Result<()>;

    /// Called with the population at a generation boundary that should be
    /// checkpointed.
    fn on_checkpoint(&mut self, pop: &Population) -> Result<()>;
}

/// Drives the population until `pop.generation == generations`.
///
/// A checkpoint is requested before the first generation of a fresh run,
/// every `checkpoint_interval` generations and after the last one. Selection
/// uses a coordinator stream derived from `(seed, generation)`.
pub fn run<T, O>(
    pop: &mut Population,
    task: &T,
    generations: u64,
    checkpoint_interval: u64,
    observer: &mut O,
) -> Result<()>
where
    T: EpisodeRunner + ?Sized,
    O: RunObserver + ?Sized,
{
    if pop.generation == 0 {
        observer.on_checkpoint(pop)?;
    }
    while pop.generation < generations {
        let episodes = evaluate_generation(pop, task)?;
        let report = if pop.config.baseline {
            advance_without_selection(pop)
        } else {
            let mut rng = stream(pop.seed, StreamTag::Selection, pop.generation, 0);
            step_generation(pop, &mut rng)?
        };
        observer.on_generation(pop, &episodes, &report)?;
        let g = pop.generation;
        if g == generations || (checkpoint_interval > 0 && g.is_multiple_of(checkpoint_interval)) {
            observer.on_checkpoint(pop)?;
        }
    }
    Ok(())
}
