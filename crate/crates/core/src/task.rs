//! Learning tasks an instance can be evaluated on.

use serde::{Deserialize, Serialize};

use crate::env::{ChainConfig, ChainEnv, GridworldConfig, GridworldEnv};
use crate::error::Result;
use crate::learner::{sarsa_lambda_episode, td_lambda_episode, EpisodeOutcome, LearnerState};
use crate::rng::StreamRng;
use crate::tetris::{TetrisConfig, TetrisEnv};

/// Runs single learning episodes for a population member.
///
/// Implementations must be shareable across worker threads; each call gets
/// the instance's own learner state and random stream.
pub trait EpisodeRunner: Sync {
    fn feature_len(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn run_episode(&self, learner: &mut LearnerState, rng: &mut StreamRng) -> Result<EpisodeOutcome>;
}

/// Built-in tasks. Tetris and the chain are learned with TD(lambda) over
/// afterstates, the gridworld with Sarsa(lambda).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Task {
    Tetris(TetrisConfig),
    Chain(ChainConfig),
    Gridworld(GridworldConfig),
}

impl Task {
    pub fn validate(&self) -> Result<()> {
        match self {
            Task::Tetris(c) => TetrisEnv::new(*c).map(|_| ()),
            Task::Chain(c) => c.validate(),
            Task::Gridworld(c) => GridworldEnv::new(*c).map(|_| ()),
        }
    }
}

impl EpisodeRunner for Task {
    fn feature_len(&self) -> usize {
        match self {
            Task::Tetris(c) => c.encoding.len(),
            Task::Chain(c) => c.states,
            Task::Gridworld(c) => c.cells(),
        }
    }

    fn output_dim(&self) -> usize {
        match self {
            Task::Tetris(_) | Task::Chain(_) => 1,
            Task::Gridworld(_) => crate::env::GRID_MOVES.len(),
        }
    }

    fn run_episode(&self, learner: &mut LearnerState, rng: &mut StreamRng) -> Result<EpisodeOutcome> {
        match self {
            Task::Tetris(c) => td_lambda_episode(learner, &mut TetrisEnv::new(*c)?, rng),
            Task::Chain(c) => td_lambda_episode(learner, &mut ChainEnv::new(*c)?, rng),
            Task::Gridworld(c) => sarsa_lambda_episode(learner, &mut GridworldEnv::new(*c)?, rng),
        }
    }
}
