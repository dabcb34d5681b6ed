//! Shallow feed-forward value network with SiL or dSiL hidden units.
//!
//! All parameters live in one flat vector so that eligibility traces and
//! gradients share its layout:
//!
//! ```text
//! [ w_in (input-major, I x H) | b_hidden (H) | w_out (output-major, O x H) | b_out (O) ]
//! ```
//!
//! A network with `hidden_dim == 0` bypasses the hidden layer and is a plain
//! linear map `[ w (input-major, I x O) | b_out (O) ]`; it is used for the
//! diagnostic environments where exact linear values are known.
//!
//! Inputs are typically sparse binary feature vectors, so the forward pass
//! skips zero inputs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NETWORK_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sil,
    Dsil,
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Sigmoid-weighted linear unit, `z * sigmoid(z)`.
#[inline]
pub fn sil(z: f64) -> f64 {
    z * sigmoid(z)
}

/// Derivative-shaped unit, `sigmoid(z) * (1 + z * (1 - sigmoid(z)))`.
///
/// This is also exactly the derivative of [`sil`].
#[inline]
pub fn dsil(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 + z * (1.0 - s))
}

/// Derivative of [`dsil`].
#[inline]
pub fn dsil_derivative(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 - s) * (2.0 + z * (1.0 - s) - z * s)
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sil => sil(z),
            Activation::Dsil => dsil(z),
        }
    }

    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Sil => dsil(z),
            Activation::Dsil => dsil_derivative(z),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    input_dim: usize,
    hidden_dim: usize,
    output_dim: usize,
    activation: Activation,
    params: Vec<f64>,
}

/// Result of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub outputs: Vec<f64>,
    pub hidden_pre: Vec<f64>,
}

impl Network {
    pub fn param_count(input_dim: usize, hidden_dim: usize, output_dim: usize) -> usize {
        if hidden_dim == 0 {
            input_dim * output_dim + output_dim
        } else {
            input_dim * hidden_dim + hidden_dim + output_dim * hidden_dim + output_dim
        }
    }

    pub fn zeros(
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
        activation: Activation,
    ) -> Self {
        Self {
            input_dim,
            hidden_dim,
            output_dim,
            activation,
            params: vec![0.0; Self::param_count(input_dim, hidden_dim, output_dim)],
        }
    }

    /// Uniform init in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` per layer.
    pub fn random<R: Rng + ?Sized>(
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let mut net = Self::zeros(input_dim, hidden_dim, output_dim, activation);
        let first_layer = if hidden_dim == 0 {
            input_dim * output_dim
        } else {
            input_dim * hidden_dim + hidden_dim
        };
        let in_bound = 1.0 / (input_dim.max(1) as f64).sqrt();
        let out_bound = 1.0 / (hidden_dim.max(1) as f64).sqrt();
        for (idx, p) in net.params.iter_mut().enumerate() {
            let bound = if hidden_dim == 0 || idx < first_layer {
                in_bound
            } else {
                out_bound
            };
            *p = rng.gen_range(-bound..=bound);
        }
        net
    }

    pub fn from_params(
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
        activation: Activation,
        params: Vec<f64>,
    ) -> Result<Self> {
        let expected = Self::param_count(input_dim, hidden_dim, output_dim);
        if params.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "expected {expected} parameters, got {}",
                params.len()
            )));
        }
        Ok(Self {
            input_dim,
            hidden_dim,
            output_dim,
            activation,
            params,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }
    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }
    pub fn output_dim(&self) -> usize {
        self.output_dim
    }
    pub fn activation(&self) -> Activation {
        self.activation
    }
    pub fn params(&self) -> &[f64] {
        &self.params
    }
    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }
    pub fn len(&self) -> usize {
        self.params.len()
    }
    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    // Offsets into the flat parameter vector (hidden layer present).
    fn b_hidden_off(&self) -> usize {
        self.input_dim * self.hidden_dim
    }
    fn w_out_off(&self) -> usize {
        self.b_hidden_off() + self.hidden_dim
    }
    fn b_out_off(&self) -> usize {
        if self.hidden_dim == 0 {
            self.input_dim * self.output_dim
        } else {
            self.w_out_off() + self.output_dim * self.hidden_dim
        }
    }

    /// Hidden pre-activations `z_k = sum_i w_ik s_i + b_k`.
    fn hidden_pre(&self, s: &[f64]) -> Vec<f64> {
        let h = self.hidden_dim;
        let mut z = self.params[self.b_hidden_off()..self.w_out_off()].to_vec();
        for (i, &x) in s.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let row = &self.params[i * h..(i + 1) * h];
            for (zk, w) in z.iter_mut().zip(row) {
                *zk += w * x;
            }
        }
        z
    }

    fn check_input(&self, s: &[f64]) {
        assert_eq!(
            s.len(),
            self.input_dim,
            "feature vector has {} entries, network expects {}",
            s.len(),
            self.input_dim
        );
    }

    pub fn forward(&self, s: &[f64]) -> Forward {
        self.check_input(s);
        let o = self.output_dim;
        let b_out = self.b_out_off();
        let mut outputs = self.params[b_out..b_out + o].to_vec();
        if self.hidden_dim == 0 {
            for (i, &x) in s.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                for (out, w) in outputs.iter_mut().zip(&self.params[i * o..(i + 1) * o]) {
                    *out += w * x;
                }
            }
            return Forward {
                outputs,
                hidden_pre: Vec::new(),
            };
        }
        let h = self.hidden_dim;
        let hidden_pre = self.hidden_pre(s);
        let act: Vec<f64> = hidden_pre.iter().map(|&z| self.activation.apply(z)).collect();
        let w_out = self.w_out_off();
        for (j, out) in outputs.iter_mut().enumerate() {
            let row = &self.params[w_out + j * h..w_out + (j + 1) * h];
            *out += row.iter().zip(&act).map(|(w, a)| w * a).sum::<f64>();
        }
        Forward {
            outputs,
            hidden_pre,
        }
    }

    /// Single output value; cheaper than [`Network::forward`] for multi-output nets.
    pub fn value(&self, s: &[f64], output: usize) -> f64 {
        self.check_input(s);
        let o = self.output_dim;
        let b = self.params[self.b_out_off() + output];
        if self.hidden_dim == 0 {
            return b + s
                .iter()
                .enumerate()
                .filter(|(_, &x)| x != 0.0)
                .map(|(i, &x)| self.params[i * o + output] * x)
                .sum::<f64>();
        }
        let h = self.hidden_dim;
        let w_out = self.w_out_off() + output * h;
        let z = self.hidden_pre(s);
        b + z
            .iter()
            .zip(&self.params[w_out..w_out + h])
            .map(|(&z, w)| w * self.activation.apply(z))
            .sum::<f64>()
    }

    /// Writes the gradient of output `output` w.r.t. every parameter into
    /// `grad` and returns the output value.
    pub fn value_and_gradient(&self, s: &[f64], output: usize, grad: &mut [f64]) -> f64 {
        self.check_input(s);
        assert!(output < self.output_dim, "output index {output} out of range");
        assert_eq!(grad.len(), self.params.len());
        grad.fill(0.0);
        let o = self.output_dim;
        let b_out = self.b_out_off();
        grad[b_out + output] = 1.0;
        let mut value = self.params[b_out + output];

        if self.hidden_dim == 0 {
            for (i, &x) in s.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                grad[i * o + output] = x;
                value += self.params[i * o + output] * x;
            }
            return value;
        }

        let h = self.hidden_dim;
        let z = self.hidden_pre(s);
        let w_out = self.w_out_off() + output * h;
        let b_hidden = self.b_hidden_off();
        // dV/dz_k, reused for the hidden bias and every input weight.
        let mut dz = vec![0.0; h];
        for k in 0..h {
            let a = self.activation.apply(z[k]);
            let w = self.params[w_out + k];
            value += w * a;
            grad[w_out + k] = a;
            dz[k] = w * self.activation.derivative(z[k]);
            grad[b_hidden + k] = dz[k];
        }
        for (i, &x) in s.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (g, d) in grad[i * h..(i + 1) * h].iter_mut().zip(&dz) {
                *g = d * x;
            }
        }
        value
    }

    pub fn gradient(&self, s: &[f64], output: usize) -> Vec<f64> {
        let mut grad = vec![0.0; self.params.len()];
        self.value_and_gradient(s, output, &mut grad);
        grad
    }

    /// `theta += alpha * delta * e`.
    pub fn apply_update(&mut self, trace: &TraceVector, alpha: f64, delta: f64) {
        assert_eq!(trace.0.len(), self.params.len());
        let step = alpha * delta;
        if step == 0.0 {
            return;
        }
        for (p, e) in self.params.iter_mut().zip(&trace.0) {
            *p += step * e;
        }
    }

    pub fn to_record(&self) -> NetworkRecord {
        NetworkRecord {
            format_version: NETWORK_FORMAT_VERSION,
            network: self.clone(),
        }
    }
}

/// Versioned serialized form of a [`Network`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkRecord {
    pub format_version: u32,
    #[serde(flatten)]
    pub network: Network,
}

impl NetworkRecord {
    pub fn into_network(self) -> Result<Network> {
        if self.format_version != NETWORK_FORMAT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported network format version {}",
                self.format_version
            )));
        }
        let n = self.network;
        Network::from_params(n.input_dim, n.hidden_dim, n.output_dim, n.activation, n.params)
    }
}

/// Eligibility trace, one entry per network parameter.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceVector(pub Vec<f64>);

impl TraceVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn for_network(net: &Network) -> Self {
        Self::zeros(net.len())
    }

    pub fn reset(&mut self) {
        self.0.fill(0.0);
    }

    /// `e = gamma * lambda * e + grad`.
    pub fn accumulate(&mut self, grad: &[f64], gamma: f64, lambda: f64) {
        assert_eq!(grad.len(), self.0.len());
        let decay = gamma * lambda;
        for (e, g) in self.0.iter_mut().zip(grad) {
            *e = decay * *e + g;
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}
