//! TD(lambda) over afterstates and Sarsa(lambda), both with Boltzmann
//! (softmax) action selection and a hyperbolically decaying temperature.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::env::{ActionEnv, Afterstate, AfterstateEnv};
use crate::error::{Error, Result};
use crate::metaparams::MetaParams;
use crate::neuralnet::{Network, TraceVector};

/// Everything one learning instance carries across episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    pub net: Network,
    pub trace: TraceVector,
    pub psi: MetaParams,
    /// Cumulative number of completed episodes.
    pub episode_index: u64,
}

impl LearnerState {
    pub fn new(net: Network, psi: MetaParams) -> Self {
        Self {
            trace: TraceVector::for_network(&net),
            net,
            psi,
            episode_index: 0,
        }
    }

    pub fn temperature(&self) -> f64 {
        temperature(&self.psi, self.episode_index)
    }
}

/// Summary of one learning episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    /// Task score (cleared lines in Tetris).
    pub score: f64,
    /// Discounted sum of rewards, for diagnostics only.
    pub discounted_return: f64,
    pub steps: u64,
    /// Temperature used throughout the episode.
    pub temperature: f64,
}

/// `tau0 / (1 + tauk * i)`.
pub fn temperature(psi: &MetaParams, episode: u64) -> f64 {
    psi.tau0 / (1.0 + psi.tauk * episode as f64)
}

/// Boltzmann probabilities `exp(v / tau) / sum exp(v / tau)`.
pub fn softmax_probabilities(values: &[f64], tau: f64) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = values.iter().map(|v| ((v - max) / tau).exp()).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    p
}

/// Samples an index from the Boltzmann distribution over `values`.
///
/// Uses exactly one uniform draw from `rng`.
pub fn softmax_select<R: Rng + ?Sized>(values: &[f64], tau: f64, rng: &mut R) -> usize {
    assert!(!values.is_empty(), "softmax over an empty set");
    assert!(tau > 0.0, "temperature must be positive");
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = values.iter().map(|v| ((v - max) / tau).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    // Rounding can leave u marginally above the last weight.
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(values.len() - 1)
}

/// Index of the largest value; ties go to the lowest index.
pub fn greedy_index(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn finite(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Diverged)
    }
}

fn afterstate_values(net: &Network, candidates: &[Afterstate]) -> Result<Vec<f64>> {
    if candidates.is_empty() {
        return Err(Error::Environment("no candidate afterstates".into()));
    }
    let values: Vec<f64> = candidates
        .iter()
        .map(|c| if c.terminal { 0.0 } else { net.value(&c.features, 0) })
        .collect();
    finite(&values)?;
    Ok(values)
}

/// Runs one TD(lambda) episode over afterstates.
///
/// At each decision point every candidate afterstate is valued by the
/// network and one is sampled by softmax. With `s` the committed afterstate,
/// `r` its reward and `s'` the next chosen afterstate, the update is
/// `delta = r + gamma V(s') - V(s)`, or `r - V(s)` when `s'` is terminal.
pub fn td_lambda_episode<E, R>(
    ls: &mut LearnerState,
    env: &mut E,
    rng: &mut R,
) -> Result<EpisodeOutcome>
where
    E: AfterstateEnv + ?Sized,
    R: RngCore,
{
    if ls.net.output_dim() != 1 || ls.net.input_dim() != env.feature_len() {
        return Err(Error::InvalidArgument(
            "state-value network must map the environment features to one output".into(),
        ));
    }
    let MetaParams {
        alpha,
        gamma,
        lambda,
        ..
    } = ls.psi;
    let tau = ls.temperature();
    ls.trace.reset();
    env.reset(rng);

    let mut grad = vec![0.0; ls.net.len()];
    let mut out = EpisodeOutcome {
        score: 0.0,
        discounted_return: 0.0,
        steps: 0,
        temperature: tau,
    };
    let mut discount = 1.0;

    let mut candidates = env.candidates();
    let mut values = afterstate_values(&ls.net, &candidates)?;
    let mut chosen = softmax_select(&values, tau, rng);

    while !candidates[chosen].terminal {
        let state = std::mem::take(&mut candidates[chosen].features);
        out.score += candidates[chosen].score;
        let r = env.commit(chosen, rng)?;
        out.steps += 1;
        out.discounted_return += discount * r;
        discount *= gamma;

        let v = ls.net.value_and_gradient(&state, 0, &mut grad);
        ls.trace.accumulate(&grad, gamma, lambda);

        candidates = env.candidates();
        values = afterstate_values(&ls.net, &candidates)?;
        chosen = softmax_select(&values, tau, rng);
        let delta = if candidates[chosen].terminal {
            r - v
        } else {
            r + gamma * values[chosen] - v
        };
        ls.net.apply_update(&ls.trace, alpha, delta);
    }

    ls.episode_index += 1;
    Ok(out)
}

fn action_values(net: &Network, s: &[f64]) -> Result<Vec<f64>> {
    let q = net.forward(s).outputs;
    finite(&q)?;
    Ok(q)
}

/// Runs one Sarsa(lambda) episode with the update order of the OMPAC inner
/// loop: act, accumulate the trace for `(s, a)`, then either take the
/// terminal error `r - Q(s, a)` or sample `a'` and use
/// `r + gamma Q(s', a') - Q(s, a)`, and finally update the weights.
pub fn sarsa_lambda_episode<E, R>(
    ls: &mut LearnerState,
    env: &mut E,
    rng: &mut R,
) -> Result<EpisodeOutcome>
where
    E: ActionEnv + ?Sized,
    R: RngCore,
{
    if ls.net.output_dim() != env.num_actions() || ls.net.input_dim() != env.feature_len() {
        return Err(Error::InvalidArgument(
            "action-value network does not match the environment".into(),
        ));
    }
    let MetaParams {
        alpha,
        gamma,
        lambda,
        ..
    } = ls.psi;
    let tau = ls.temperature();
    ls.trace.reset();

    let mut grad = vec![0.0; ls.net.len()];
    let mut out = EpisodeOutcome {
        score: 0.0,
        discounted_return: 0.0,
        steps: 0,
        temperature: tau,
    };
    let mut discount = 1.0;

    let mut state = env.reset(rng);
    let mut action = softmax_select(&action_values(&ls.net, &state)?, tau, rng);
    loop {
        let step = env.step(action, rng)?;
        out.steps += 1;
        out.score += step.score;
        out.discounted_return += discount * step.reward;
        discount *= gamma;

        let q = ls.net.value_and_gradient(&state, action, &mut grad);
        ls.trace.accumulate(&grad, gamma, lambda);
        let done = step.next.is_none();
        let delta = match step.next {
            None => step.reward - q,
            Some(next) => {
                let q_next = action_values(&ls.net, &next)?;
                let next_action = softmax_select(&q_next, tau, rng);
                let delta = step.reward + gamma * q_next[next_action] - q;
                state = next;
                action = next_action;
                delta
            }
        };
        ls.net.apply_update(&ls.trace, alpha, delta);
        if done {
            break;
        }
    }

    ls.episode_index += 1;
    Ok(out)
}
