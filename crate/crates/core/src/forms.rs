//! Discrete bilinear forms and load functionals.
//!
//! With boundary mass on, the energy form is
//! `a_δ(u,v) = ∫_Ω ∇u·∇v + a0·u·v + (1 + δ⁻¹)·∫_Γ u·v` and the load is
//! `∫_Ω f0·v + (1 + δ⁻¹)·∫_Γ g·v − ∫_Γ λ·v`. With it off, the `1 +` drops
//! out of both.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dictionary::Neuron;
use crate::error::{Error, Result};
use crate::problem::ProblemSpec;
use crate::quadrature::{CompensatedSum, QuadratureSet};

/// Values and gradients of a function at every quadrature node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalSamples {
    pub values: Vec<f64>,
    /// Flat, stride `d`.
    pub grads: Vec<f64>,
    pub boundary: Vec<f64>,
}

pub trait Sampleable {
    fn sample(&self, quad: &QuadratureSet) -> NodalSamples;
}

impl Sampleable for NodalSamples {
    fn sample(&self, _: &QuadratureSet) -> NodalSamples {
        self.clone()
    }
}

impl Sampleable for Neuron {
    fn sample(&self, quad: &QuadratureSet) -> NodalSamples {
        let (values, grads) = self.eval(&quad.interior_nodes);
        let (boundary, _) = self.eval(&quad.boundary_nodes);
        NodalSamples {
            values,
            grads,
            boundary,
        }
    }
}

/// A constant function on `Ω̄`.
#[derive(Debug, Clone, Copy)]
pub struct Constant(pub f64);

impl Sampleable for Constant {
    fn sample(&self, quad: &QuadratureSet) -> NodalSamples {
        NodalSamples {
            values: vec![self.0; quad.n_interior()],
            grads: vec![0.0; quad.n_interior() * quad.dim],
            boundary: vec![self.0; quad.n_boundary()],
        }
    }
}

/// `Σ aᵢ σ_k(ωᵢ·x + bᵢ)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Expansion {
    pub neurons: Vec<Neuron>,
    pub coeffs: Vec<f64>,
}

impl Expansion {
    pub fn new(neurons: Vec<Neuron>, coeffs: Vec<f64>) -> Result<Self> {
        if neurons.len() != coeffs.len() {
            return Err(Error::Contract(format!(
                "{} neurons but {} coefficients",
                neurons.len(),
                coeffs.len()
            )));
        }
        Ok(Self { neurons, coeffs })
    }

    pub fn len(&self) -> usize {
        self.neurons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neurons.is_empty()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.neurons
            .iter()
            .zip(&self.coeffs)
            .map(|(n, a)| a * n.value(x))
            .sum()
    }

    pub fn grad(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (n, a) in self.neurons.iter().zip(&self.coeffs) {
            let (_, s) = n.value_and_slope(x);
            for (o, w) in out.iter_mut().zip(&n.omega) {
                *o += a * s * w;
            }
        }
    }

    /// `Σ |aᵢ|`, the ℓ¹ coefficient mass.
    pub fn coefficient_mass(&self) -> f64 {
        self.coeffs.iter().map(|a| a.abs()).sum()
    }
}

impl Sampleable for Expansion {
    fn sample(&self, quad: &QuadratureSet) -> NodalSamples {
        let d = quad.dim;
        let mut out = NodalSamples {
            values: vec![0.0; quad.n_interior()],
            grads: vec![0.0; quad.n_interior() * d],
            boundary: vec![0.0; quad.n_boundary()],
        };
        for (n, a) in self.neurons.iter().zip(&self.coeffs) {
            for (i, x) in quad.interior_nodes.chunks_exact(d).enumerate() {
                let (v, s) = n.value_and_slope(x);
                out.values[i] += a * v;
                for (g, w) in out.grads[i * d..(i + 1) * d].iter_mut().zip(&n.omega) {
                    *g += a * s * w;
                }
            }
            for (i, x) in quad.boundary_nodes.chunks_exact(d).enumerate() {
                out.boundary[i] += a * n.value(x);
            }
        }
        out
    }
}

/// The penalized energy inner product bound to a problem and quadrature.
#[derive(Debug, Clone)]
pub struct EnergyForm<'a> {
    pub problem: &'a ProblemSpec,
    pub quad: &'a QuadratureSet,
    pub delta: f64,
    pub boundary_mass: bool,
    f0: Vec<f64>,
    g: Vec<f64>,
}

impl<'a> EnergyForm<'a> {
    pub fn new(problem: &'a ProblemSpec, quad: &'a QuadratureSet, delta: f64, boundary_mass: bool) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::Config(format!("penalty delta must be positive, got {delta}")));
        }
        if problem.dim() != quad.dim {
            return Err(Error::Contract("problem and quadrature dimensions differ".into()));
        }
        let d = quad.dim;
        let f0 = quad.interior_nodes.chunks_exact(d).map(|x| (problem.f0)(x)).collect();
        let g = quad.boundary_nodes.chunks_exact(d).map(|x| (problem.g)(x)).collect();
        Ok(Self {
            problem,
            quad,
            delta,
            boundary_mass,
            f0,
            g,
        })
    }

    pub fn a0(&self) -> f64 {
        self.problem.a0
    }

    /// Weight of `∫_Γ u·v` in the form: `δ⁻¹`, plus one with boundary mass.
    pub fn boundary_coeff(&self) -> f64 {
        let base = if self.boundary_mass { 1.0 } else { 0.0 };
        base + 1.0 / self.delta
    }

    /// Dirichlet datum at the boundary nodes.
    pub fn g_samples(&self) -> &[f64] {
        &self.g
    }

    pub fn f0_samples(&self) -> &[f64] {
        &self.f0
    }

    pub fn bilinear_samples(&self, u: &NodalSamples, v: &NodalSamples) -> f64 {
        let d = self.quad.dim;
        let a0 = self.a0();
        let mut interior = CompensatedSum::default();
        for (i, w) in self.quad.interior_weights.iter().enumerate() {
            let gu = &u.grads[i * d..(i + 1) * d];
            let gv = &v.grads[i * d..(i + 1) * d];
            let dot: f64 = gu.iter().zip(gv).map(|(a, b)| a * b).sum();
            interior.add(w * (dot + a0 * u.values[i] * v.values[i]));
        }
        let mut boundary = CompensatedSum::default();
        for (i, w) in self.quad.boundary_weights.iter().enumerate() {
            boundary.add(w * u.boundary[i] * v.boundary[i]);
        }
        interior.value() + self.boundary_coeff() * boundary.value()
    }

    pub fn bilinear(&self, u: &impl Sampleable, v: &impl Sampleable) -> f64 {
        self.bilinear_samples(&u.sample(self.quad), &v.sample(self.quad))
    }

    /// The load functional for the penalized problem with multiplier trace
    /// `lambda` (one value per boundary node; `None` means zero).
    pub fn rhs(&self, lambda: Option<&[f64]>) -> Result<LoadFunctional> {
        let c = self.boundary_coeff();
        let boundary = match lambda {
            None => self.g.iter().map(|g| c * g).collect(),
            Some(l) => {
                if l.len() != self.g.len() {
                    return Err(Error::Contract(format!(
                        "multiplier trace has {} values, boundary has {} nodes",
                        l.len(),
                        self.g.len()
                    )));
                }
                self.g.iter().zip(l).map(|(g, l)| c * g - l).collect()
            }
        };
        Ok(LoadFunctional {
            interior: self.f0.clone(),
            boundary,
        })
    }

    pub fn rhs_functional(&self, lambda: Option<&[f64]>, v: &impl Sampleable) -> Result<f64> {
        Ok(self.rhs(lambda)?.apply(self.quad, &v.sample(self.quad)))
    }
}

/// `v ↦ ∫_Ω interior·v + ∫_Γ boundary·v`, with both densities sampled at nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadFunctional {
    pub interior: Vec<f64>,
    pub boundary: Vec<f64>,
}

impl LoadFunctional {
    pub fn apply(&self, quad: &QuadratureSet, v: &NodalSamples) -> f64 {
        self.apply_parts(quad, &v.values, &v.boundary)
    }

    pub fn apply_parts(&self, quad: &QuadratureSet, values: &[f64], boundary: &[f64]) -> f64 {
        let mut interior = CompensatedSum::default();
        for ((w, f), v) in quad.interior_weights.iter().zip(&self.interior).zip(values) {
            interior.add(w * f * v);
        }
        let mut bd = CompensatedSum::default();
        for ((w, f), v) in quad.boundary_weights.iter().zip(&self.boundary).zip(boundary) {
            bd.add(w * f * v);
        }
        interior.value() + bd.value()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            interior: self.interior.iter().map(|v| c * v).collect(),
            boundary: self.boundary.iter().map(|v| c * v).collect(),
        }
    }
}

/// One basis neuron sampled at the quadrature nodes. Gradients are
/// `slope·ω`, so only the scalar slope is stored.
#[derive(Debug, Clone)]
pub struct CachedNeuron {
    pub neuron: Neuron,
    pub values: Vec<f64>,
    pub slopes: Vec<f64>,
    pub boundary: Vec<f64>,
}

impl CachedNeuron {
    pub fn new(neuron: Neuron, quad: &QuadratureSet) -> Self {
        let d = quad.dim;
        let n = quad.n_interior();
        let mut values = Vec::with_capacity(n);
        let mut slopes = Vec::with_capacity(n);
        for x in quad.interior_nodes.chunks_exact(d) {
            let (v, s) = neuron.value_and_slope(x);
            values.push(v);
            slopes.push(s);
        }
        let boundary = quad.boundary_nodes.chunks_exact(d).map(|x| neuron.value(x)).collect();
        Self {
            neuron,
            values,
            slopes,
            boundary,
        }
    }
}

impl EnergyForm<'_> {
    /// `a_δ(gᵢ, gⱼ)` from cached samples.
    pub fn gram_entry(&self, gi: &CachedNeuron, gj: &CachedNeuron) -> f64 {
        let cos: f64 = gi.neuron.omega.iter().zip(&gj.neuron.omega).map(|(a, b)| a * b).sum();
        let a0 = self.a0();
        let mut interior = CompensatedSum::default();
        for (q, w) in self.quad.interior_weights.iter().enumerate() {
            let si = gi.slopes[q];
            let vi = gi.values[q];
            if si == 0.0 && vi == 0.0 {
                continue;
            }
            interior.add(w * (cos * si * gj.slopes[q] + a0 * vi * gj.values[q]));
        }
        let mut boundary = CompensatedSum::default();
        for (s, w) in self.quad.boundary_weights.iter().enumerate() {
            boundary.add(w * gi.boundary[s] * gj.boundary[s]);
        }
        interior.value() + self.boundary_coeff() * boundary.value()
    }
}

/// Gram matrix `G_ij = a_δ(gᵢ, gⱼ)` and load vector `L_i = rhs(gᵢ)`.
pub fn gram_and_load(form: &EnergyForm, basis: &[Neuron], rhs: &LoadFunctional) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if basis.is_empty() {
        return Err(Error::Contract("Gram assembly needs a nonempty basis".into()));
    }
    let cached: Vec<CachedNeuron> = basis
        .iter()
        .map(|n| CachedNeuron::new(n.clone(), form.quad))
        .collect();
    Ok(gram_and_load_cached(form, &cached, rhs))
}

pub fn gram_and_load_cached(form: &EnergyForm, cached: &[CachedNeuron], rhs: &LoadFunctional) -> (DMatrix<f64>, DVector<f64>) {
    let n = cached.len();
    let mut gram = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = form.gram_entry(&cached[i], &cached[j]);
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let load = DVector::from_iterator(
        n,
        cached
            .iter()
            .map(|c| rhs.apply_parts(form.quad, &c.values, &c.boundary)),
    );
    (gram, load)
}
