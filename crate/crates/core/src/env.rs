//! Environment interfaces for the two learners, plus the small diagnostic
//! tasks whose exact solutions are known.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A deterministic successor reachable by one action.
#[derive(Debug, Clone, PartialEq)]
pub struct Afterstate {
    pub features: Vec<f64>,
    /// Task score earned by moving into this afterstate.
    pub score: f64,
    /// Choosing this afterstate ends the episode; its value is taken as 0.
    pub terminal: bool,
}

impl Afterstate {
    pub fn terminal() -> Self {
        Self {
            features: Vec::new(),
            score: 0.0,
            terminal: true,
        }
    }
}

/// Environment for state-value learning over afterstates.
///
/// At every decision point the learner sees all candidate afterstates,
/// picks one and commits to it. The returned reward belongs to the
/// committed afterstate; the environment then advances its randomness
/// (next piece, next random-walk step) and presents a new decision point.
pub trait AfterstateEnv {
    fn feature_len(&self) -> usize;
    fn reset(&mut self, rng: &mut dyn RngCore);
    fn candidates(&self) -> Vec<Afterstate>;
    fn commit(&mut self, index: usize, rng: &mut dyn RngCore) -> Result<f64>;
}

/// Result of one action in an [`ActionEnv`].
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub reward: f64,
    pub score: f64,
    /// Features of the next state, `None` when it is terminal.
    pub next: Option<Vec<f64>>,
}

/// Environment for action-value learning.
pub trait ActionEnv {
    fn feature_len(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64>;
    fn step(&mut self, action: usize, rng: &mut dyn RngCore) -> Result<Step>;
}

fn one_hot(len: usize, index: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[index] = 1.0;
    v
}

/// Linear chain of states with exits at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub states: usize,
    pub start: usize,
    /// Probability of stepping right.
    pub p_right: f64,
    pub left_exit_reward: f64,
    pub right_exit_reward: f64,
    /// Reward for every non-exiting step.
    pub step_reward: f64,
}

impl ChainConfig {
    /// 19-state random walk with -1/+1 exit rewards.
    pub const RANDOM_WALK_19: ChainConfig = ChainConfig {
        states: 19,
        start: 9,
        p_right: 0.5,
        left_exit_reward: -1.0,
        right_exit_reward: 1.0,
        step_reward: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        if self.states == 0 || self.start >= self.states || !(0.0..=1.0).contains(&self.p_right)
        {
            return Err(Error::InvalidArgument(format!("invalid chain {self:?}")));
        }
        Ok(())
    }

    /// Exact values of the undiscounted random walk with equal step
    /// probabilities and no step reward: linear in position.
    pub fn random_walk_values(&self) -> Vec<f64> {
        let n = self.states as f64;
        (0..self.states)
            .map(|k| {
                let p = (k as f64 + 1.0) / (n + 1.0);
                p * self.right_exit_reward + (1.0 - p) * self.left_exit_reward
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct ChainEnv {
    cfg: ChainConfig,
    position: Option<usize>,
}

impl ChainEnv {
    pub fn new(cfg: ChainConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            position: Some(cfg.start),
        })
    }

    pub fn features(&self, state: usize) -> Vec<f64> {
        one_hot(self.cfg.states, state)
    }
}

impl AfterstateEnv for ChainEnv {
    fn feature_len(&self) -> usize {
        self.cfg.states
    }

    fn reset(&mut self, _rng: &mut dyn RngCore) {
        self.position = Some(self.cfg.start);
    }

    fn candidates(&self) -> Vec<Afterstate> {
        match self.position {
            Some(k) => vec![Afterstate {
                features: self.features(k),
                score: 0.0,
                terminal: false,
            }],
            None => vec![Afterstate::terminal()],
        }
    }

    fn commit(&mut self, index: usize, rng: &mut dyn RngCore) -> Result<f64> {
        let k = match (index, self.position) {
            (0, Some(k)) => k,
            _ => return Err(Error::Environment("chain has a single live candidate".into())),
        };
        let right = rng.gen::<f64>() < self.cfg.p_right;
        Ok(if right && k + 1 == self.cfg.states {
            self.position = None;
            self.cfg.right_exit_reward
        } else if !right && k == 0 {
            self.position = None;
            self.cfg.left_exit_reward
        } else {
            self.position = Some(if right { k + 1 } else { k - 1 });
            self.cfg.step_reward
        })
    }
}

/// Square gridworld with one absorbing goal cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridworldConfig {
    pub size: usize,
    pub goal: (usize, usize),
    pub goal_reward: f64,
}

impl Default for GridworldConfig {
    fn default() -> Self {
        Self {
            size: 5,
            goal: (4, 4),
            goal_reward: 1.0,
        }
    }
}

/// Moves in action-index order.
pub const GRID_MOVES: [(i64, i64); 4] = [(0, -1), (1, 0), (0, 1), (-1, 0)];

impl GridworldConfig {
    pub fn cells(&self) -> usize {
        self.size * self.size
    }

    pub fn index(&self, (x, y): (usize, usize)) -> usize {
        y * self.size + x
    }

    pub fn position(&self, index: usize) -> (usize, usize) {
        (index % self.size, index / self.size)
    }

    /// Deterministic successor; moves into walls leave the agent in place.
    pub fn successor(&self, (x, y): (usize, usize), action: usize) -> (usize, usize) {
        let (dx, dy) = GRID_MOVES[action];
        let nx = x as i64 + dx;
        let ny = y as i64 + dy;
        let n = self.size as i64;
        if nx < 0 || ny < 0 || nx >= n || ny >= n {
            (x, y)
        } else {
            (nx as usize, ny as usize)
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridworldEnv {
    cfg: GridworldConfig,
    position: (usize, usize),
}

impl GridworldEnv {
    pub fn new(cfg: GridworldConfig) -> Result<Self> {
        if cfg.size < 2 || cfg.goal.0 >= cfg.size || cfg.goal.1 >= cfg.size {
            return Err(Error::InvalidArgument(format!("invalid gridworld {cfg:?}")));
        }
        Ok(Self {
            cfg,
            position: (0, 0),
        })
    }

    pub fn config(&self) -> &GridworldConfig {
        &self.cfg
    }

    pub fn features_at(&self, pos: (usize, usize)) -> Vec<f64> {
        one_hot(self.cfg.cells(), self.cfg.index(pos))
    }

    /// Starts the episode at a fixed non-goal cell.
    pub fn reset_to(&mut self, pos: (usize, usize)) -> Vec<f64> {
        self.position = pos;
        self.features_at(pos)
    }
}

impl ActionEnv for GridworldEnv {
    fn feature_len(&self) -> usize {
        self.cfg.cells()
    }

    fn num_actions(&self) -> usize {
        GRID_MOVES.len()
    }

    /// Uniformly random non-goal start cell.
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        let goal = self.cfg.index(self.cfg.goal);
        let mut k = rng.gen_range(0..self.cfg.cells() - 1);
        if k >= goal {
            k += 1;
        }
        self.reset_to(self.cfg.position(k))
    }

    fn step(&mut self, action: usize, _rng: &mut dyn RngCore) -> Result<Step> {
        if action >= GRID_MOVES.len() {
            return Err(Error::Environment(format!("action {action} out of range")));
        }
        self.position = self.cfg.successor(self.position, action);
        if self.position == self.cfg.goal {
            Ok(Step {
                reward: self.cfg.goal_reward,
                score: 1.0,
                next: None,
            })
        } else {
            Ok(Step {
                reward: 0.0,
                score: 0.0,
                next: Some(self.features_at(self.position)),
            })
        }
    }
}
