//! ReLU^k ridge neurons and the finite (ω, b) candidate grid.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::BoxDomain;

/// Margin added to `sup ‖x‖` when choosing the bias bound.
pub const BIAS_MARGIN: f64 = 0.05;

#[inline]
pub fn sigma_k(t: f64, k: u32) -> f64 {
    if t > 0.0 {
        t.powi(k as i32)
    } else {
        0.0
    }
}

#[inline]
pub fn sigma_k_prime(t: f64, k: u32) -> f64 {
    if t > 0.0 {
        k as f64 * t.powi(k as i32 - 1)
    } else {
        0.0
    }
}

/// A single ridge unit `x ↦ σ_k(ω·x + b)` with `‖ω‖ = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neuron {
    pub omega: Vec<f64>,
    pub b: f64,
    pub k: u32,
}

impl Neuron {
    pub fn new(omega: Vec<f64>, b: f64, k: u32) -> Self {
        debug_assert!(k >= 1);
        Self { omega, b, k }
    }

    #[inline]
    pub fn pre_activation(&self, x: &[f64]) -> f64 {
        self.omega.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + self.b
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        sigma_k(self.pre_activation(x), self.k)
    }

    /// Value and the scalar `σ_k'(ω·x + b)`; the gradient is that times `ω`.
    #[inline]
    pub fn value_and_slope(&self, x: &[f64]) -> (f64, f64) {
        let t = self.pre_activation(x);
        (sigma_k(t, self.k), sigma_k_prime(t, self.k))
    }

    /// Values and gradients at flat, stride-`d` points.
    pub fn eval(&self, points: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.omega.len();
        let m = points.len() / d;
        let mut values = Vec::with_capacity(m);
        let mut grads = Vec::with_capacity(m * d);
        for x in points.chunks_exact(d) {
            let (v, s) = self.value_and_slope(x);
            values.push(v);
            grads.extend(self.omega.iter().map(|w| s * w));
        }
        (values, grads)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_omega: usize,
    pub n_b: usize,
    /// Bias bound; `None` means `sup ‖x‖ + BIAS_MARGIN`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias_bound: Option<f64>,
}

impl GridConfig {
    pub fn default_for(d: usize) -> Self {
        // In 1D the bias spacing 2.1/2100 = 1e-3 puts every kink on an edge of
        // the default 4000-cell rule, so ReLU integrands are integrated exactly.
        let (n_omega, n_b) = match d {
            1 => (2, 2101),
            2 => (288, 257),
            _ => (1024, 129),
        };
        Self {
            n_omega,
            n_b,
            bias_bound: None,
        }
    }
}

/// Candidate neurons: directions × equispaced biases in `[-B, B]`.
/// Enumeration is ω-major, then b ascending.
#[derive(Debug, Clone)]
pub struct DictionaryGrid {
    pub dim: usize,
    pub k: u32,
    pub bias_bound: f64,
    pub omegas: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl DictionaryGrid {
    pub fn new(dim: usize, k: u32, n_omega: usize, n_b: usize, bias_bound: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("activation power k must be >= 1".into()));
        }
        if !(bias_bound > 0.0) || !bias_bound.is_finite() {
            return Err(Error::Config(format!("bias bound must be positive, got {bias_bound}")));
        }
        if n_b == 0 {
            return Err(Error::Config("n_b must be >= 1".into()));
        }
        let omegas = directions(dim, n_omega)?;
        let biases = if n_b == 1 {
            vec![0.0]
        } else {
            let step = 2.0 * bias_bound / (n_b - 1) as f64;
            (0..n_b)
                .map(|i| if i == n_b - 1 { bias_bound } else { -bias_bound + step * i as f64 })
                .collect()
        };
        Ok(Self {
            dim,
            k,
            bias_bound,
            omegas,
            biases,
        })
    }

    pub fn for_domain(domain: &BoxDomain, k: u32, cfg: &GridConfig) -> Result<Self> {
        let bound = cfg
            .bias_bound
            .unwrap_or_else(|| domain.max_norm() + BIAS_MARGIN);
        Self::new(domain.dim(), k, cfg.n_omega, cfg.n_b, bound)
    }

    pub fn len(&self) -> usize {
        self.omegas.len() * self.biases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn neuron(&self, index: usize) -> Neuron {
        let nb = self.biases.len();
        Neuron::new(self.omegas[index / nb].clone(), self.biases[index % nb], self.k)
    }

    pub fn enumerate(&self) -> impl Iterator<Item = Neuron> + '_ {
        (0..self.len()).map(move |i| self.neuron(i))
    }
}

fn directions(dim: usize, n_omega: usize) -> Result<Vec<Vec<f64>>> {
    match dim {
        1 => {
            if n_omega != 2 {
                return Err(Error::Config(format!(
                    "1D dictionaries have exactly two directions, got n_omega = {n_omega}"
                )));
            }
            Ok(vec![vec![1.0], vec![-1.0]])
        }
        2 => {
            if n_omega == 0 {
                return Err(Error::Config("n_omega must be >= 1".into()));
            }
            Ok((0..n_omega)
                .map(|j| {
                    let theta = 2.0 * PI * j as f64 / n_omega as f64;
                    // Snap quarter turns so axis directions are exact.
                    let (s, c) = theta.sin_cos();
                    vec![snap(c), snap(s)]
                })
                .collect())
        }
        3 => {
            if n_omega == 0 {
                return Err(Error::Config("n_omega must be >= 1".into()));
            }
            let golden = PI * (3.0 - 5f64.sqrt());
            Ok((0..n_omega)
                .map(|i| {
                    let z = 1.0 - (2 * i + 1) as f64 / n_omega as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let (s, c) = (golden * i as f64).sin_cos();
                    let v = [r * c, r * s, z];
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    v.iter().map(|x| x / norm).collect()
                })
                .collect())
        }
        _ => Err(Error::Config(format!("dimension must be 1, 2 or 3, got {dim}"))),
    }
}

fn snap(v: f64) -> f64 {
    if v.abs() < 1e-15 {
        0.0
    } else if (v.abs() - 1.0).abs() < 1e-15 {
        v.signum()
    } else {
        v
    }
}
