//! The evolvable meta-parameter vector and its Gaussian mutation operator.
//!
//! Parameters living in `[0, 1]` (learning rate, discount, trace decay) get a
//! noise standard deviation that shrinks towards both ends of the interval;
//! the temperature parameters get noise proportional to their magnitude.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest learning rate / initial temperature a mutation may produce.
pub const POSITIVE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaParams {
    pub alpha: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub tau0: f64,
    pub tauk: f64,
}

/// Identifies one of the five meta-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Alpha,
    Gamma,
    Lambda,
    Tau0,
    TauK,
}

impl Field {
    pub const ALL: [Field; 5] = [
        Field::Alpha,
        Field::Gamma,
        Field::Lambda,
        Field::Tau0,
        Field::TauK,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Field::Alpha => "alpha",
            Field::Gamma => "gamma",
            Field::Lambda => "lambda",
            Field::Tau0 => "tau0",
            Field::TauK => "tauk",
        }
    }

    /// Whether the field lives in the unit interval.
    pub fn is_bounded(self) -> bool {
        matches!(self, Field::Alpha | Field::Gamma | Field::Lambda)
    }

    /// Valid range after mutation.
    pub fn range(self) -> (f64, f64) {
        match self {
            Field::Alpha => (POSITIVE_FLOOR, 1.0),
            Field::Gamma | Field::Lambda => (0.0, 1.0),
            Field::Tau0 => (POSITIVE_FLOOR, f64::INFINITY),
            Field::TauK => (0.0, f64::INFINITY),
        }
    }
}

impl MetaParams {
    /// Starting values used for both Tetris variants.
    pub const TETRIS_START: MetaParams = MetaParams {
        alpha: 0.001,
        gamma: 0.99,
        lambda: 0.55,
        tau0: 0.5,
        tauk: 0.00025,
    };

    pub fn get(&self, field: Field) -> f64 {
        match field {
            Field::Alpha => self.alpha,
            Field::Gamma => self.gamma,
            Field::Lambda => self.lambda,
            Field::Tau0 => self.tau0,
            Field::TauK => self.tauk,
        }
    }

    pub fn set(&mut self, field: Field, value: f64) {
        match field {
            Field::Alpha => self.alpha = value,
            Field::Gamma => self.gamma = value,
            Field::Lambda => self.lambda = value,
            Field::Tau0 => self.tau0 = value,
            Field::TauK => self.tauk = value,
        }
    }

    /// Returns the names of fields that violate their valid range.
    pub fn invalid_fields(&self) -> Vec<&'static str> {
        Field::ALL
            .iter()
            .filter(|&&f| {
                let v = self.get(f);
                let (lo, hi) = f.range();
                !(v.is_finite() && v >= lo && v <= hi)
            })
            .map(|f| f.name())
            .collect()
    }

    pub fn is_valid(&self) -> bool {
        self.invalid_fields().is_empty()
    }

    /// Inverse temperature `(1 + tauk * i) / tau0` at cumulative episode `i`.
    pub fn inverse_temperature(&self, episode: u64) -> f64 {
        (1.0 + self.tauk * episode as f64) / self.tau0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Per-field mutation probability.
    pub p_n: f64,
    /// Noise magnitude factor.
    pub eta_n: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            p_n: 0.1,
            eta_n: 0.05,
        }
    }
}

/// Standard deviation of the mutation noise for a parameter value.
pub fn noise_stddev(psi: f64, bounded: bool, eta_n: f64) -> Result<f64> {
    if bounded {
        if !(0.0..=1.0).contains(&psi) {
            return Err(Error::InvalidArgument(format!(
                "bounded meta-parameter {psi} outside [0, 1]"
            )));
        }
        Ok(if psi <= 0.5 { psi * eta_n } else { (1.0 - psi) * eta_n })
    } else if psi < 0.0 || psi.is_nan() {
        Err(Error::InvalidArgument(format!(
            "unbounded meta-parameter must be non-negative, got {psi}"
        )))
    } else {
        Ok(psi * eta_n)
    }
}

fn perturb_field<R: Rng + ?Sized>(value: f64, field: Field, eta_n: f64, rng: &mut R) -> f64 {
    // Valid inputs always yield Ok; an out-of-range value is repaired by the clamp.
    let (lo, hi) = field.range();
    let sd = noise_stddev(value.clamp(lo.max(0.0), hi), field.is_bounded(), eta_n).unwrap_or(0.0);
    let eps: f64 = rng.sample(StandardNormal);
    (value + sd * eps).clamp(lo, hi)
}

/// Perturbs each field independently with probability `cfg.p_n`.
///
/// Untouched fields are returned bit-identical; perturbed ones are clamped to
/// [`Field::range`].
pub fn mutate<R: Rng + ?Sized>(psi: &MetaParams, cfg: &NoiseConfig, rng: &mut R) -> MetaParams {
    let mut out = *psi;
    for field in Field::ALL {
        if rng.gen::<f64>() < cfg.p_n {
            out.set(field, perturb_field(psi.get(field), field, cfg.eta_n, rng));
        }
    }
    out
}

/// Builds `n` starting vectors by perturbing every field of `start`.
pub fn init_population<R: Rng + ?Sized>(
    start: &MetaParams,
    n: usize,
    cfg: &NoiseConfig,
    rng: &mut R,
) -> Vec<MetaParams> {
    (0..n)
        .map(|_| {
            let mut psi = *start;
            for field in Field::ALL {
                psi.set(field, perturb_field(start.get(field), field, cfg.eta_n, rng));
            }
            psi
        })
        .collect()
}
