//! Online meta-parameter adaptation for TD(lambda) and Sarsa(lambda)
//! learners by parallel competition.
//!
//! A population of learners runs in parallel. After every generation of
//! episodes the best instance survives untouched, the rest of the slots are
//! refilled by stochastic universal sampling on task score, and the copied
//! meta-parameters receive small Gaussian perturbations. Learned weights are
//! inherited, so learning never restarts.

pub mod env;
pub mod error;
pub mod harness;
pub mod learner;
pub mod metaparams;
pub mod neuralnet;
pub mod ompac;
pub mod rng;
pub mod task;
pub mod tetris;

pub use error::{Error, FieldError, Result};
pub use learner::{EpisodeOutcome, LearnerState};
pub use metaparams::{MetaParams, NoiseConfig};
pub use neuralnet::{Activation, Network, TraceVector};
