//! Orthogonal greedy algorithm in the `a_δ` inner product.
//!
//! Each round scans the dictionary grid for the neuron whose residual
//! correlation `rhs(g) − a_δ(u_k, g)` is largest (optionally normalized by
//! `‖g‖_{a_δ}`), then re-solves the Galerkin system on the span of every
//! neuron picked so far.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::dictionary::{DictionaryGrid, Neuron};
use crate::error::{Error, Result};
use crate::forms::{gram_and_load, CachedNeuron, EnergyForm, Expansion, LoadFunctional, Sampleable};
use crate::linalg::{solve_spd, JITTER_LEVELS};
use crate::scan::{CandidateScanner, ResidualDensity};

#[derive(Debug, Clone, Serialize)]
pub struct GreedyRecord {
    pub iteration: usize,
    pub neuron: Neuron,
    pub score: f64,
    pub correlation: f64,
    /// `½ a_δ(u_k,u_k) − rhs(u_k)`.
    pub objective: f64,
    pub jitter: f64,
    pub pivot_ratio: f64,
    /// `max_i |L_i − (G a)_i| / ‖L‖`.
    pub orthogonality: f64,
    pub coefficient_mass: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct GreedyTrace {
    pub records: Vec<GreedyRecord>,
}

impl GreedyTrace {
    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    /// Largest jitter used by any projection.
    pub fn max_jitter(&self) -> f64 {
        self.records.iter().map(|r| r.jitter).fold(0.0, f64::max)
    }

    /// True when the objective never increases by more than `slack`
    /// relative to its magnitude.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.records.windows(2).all(|w| {
            let (a, b) = (w[0].objective, w[1].objective);
            b <= a + slack * a.abs().max(b.abs())
        })
    }
}

#[derive(Debug, Clone)]
pub struct GreedyResult {
    pub expansion: Expansion,
    pub trace: GreedyTrace,
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub coeffs: Vec<f64>,
    pub jitter: f64,
    pub pivot_ratio: f64,
    pub orthogonality: f64,
    pub objective: f64,
}

fn finish_projection(gram: &DMatrix<f64>, load: &DVector<f64>, iteration: usize) -> Result<Projection> {
    let sol = solve_spd(gram, load).ok_or(Error::Projection {
        iteration,
        jitter: *JITTER_LEVELS.last().unwrap(),
    })?;
    let ga = gram * &sol.x;
    let lnorm = load.norm();
    let resid = (load - &ga).amax();
    let orthogonality = if lnorm > 0.0 { resid / lnorm } else { resid };
    let objective = 0.5 * sol.x.dot(&ga) - sol.x.dot(load);
    Ok(Projection {
        coeffs: sol.x.iter().cloned().collect(),
        jitter: sol.jitter,
        pivot_ratio: sol.pivot_ratio,
        orthogonality,
        objective,
    })
}

/// Galerkin projection onto `span(basis)`: solves `G a = L`.
pub fn project(form: &EnergyForm, rhs: &LoadFunctional, basis: &[Neuron]) -> Result<Projection> {
    let (gram, load) = gram_and_load(form, basis, rhs)?;
    finish_projection(&gram, &load, basis.len())
}

/// `rhs(g) − a_δ(current, g)`, evaluated directly from samples.
pub fn residual_correlation(form: &EnergyForm, rhs: &LoadFunctional, current: &Expansion, g: &Neuron) -> f64 {
    let gs = g.sample(form.quad);
    let load = rhs.apply(form.quad, &gs);
    if current.is_empty() {
        return load;
    }
    load - form.bilinear_samples(&current.sample(form.quad), &gs)
}

/// Current iterate sampled at the nodes.
struct Fields {
    values: Vec<f64>,
    grads: Vec<f64>,
    boundary: Vec<f64>,
}

impl Fields {
    fn zero(form: &EnergyForm) -> Self {
        let q = form.quad;
        Self {
            values: vec![0.0; q.n_interior()],
            grads: vec![0.0; q.n_interior() * q.dim],
            boundary: vec![0.0; q.n_boundary()],
        }
    }

    fn from_basis(form: &EnergyForm, basis: &[CachedNeuron], coeffs: &[f64]) -> Self {
        let d = form.quad.dim;
        let mut f = Self::zero(form);
        for (c, a) in basis.iter().zip(coeffs) {
            for (j, (v, s)) in c.values.iter().zip(&c.slopes).enumerate() {
                if *s == 0.0 && *v == 0.0 {
                    continue;
                }
                f.values[j] += a * v;
                for (g, w) in f.grads[j * d..(j + 1) * d].iter_mut().zip(&c.neuron.omega) {
                    *g += a * s * w;
                }
            }
            for (b, v) in f.boundary.iter_mut().zip(&c.boundary) {
                *b += a * v;
            }
        }
        f
    }

    fn residual(&self, form: &EnergyForm, rhs: &LoadFunctional) -> ResidualDensity {
        let q = form.quad;
        let d = q.dim;
        let a0 = form.a0();
        let c = form.boundary_coeff();
        let value = q
            .interior_weights
            .iter()
            .zip(&rhs.interior)
            .zip(&self.values)
            .map(|((w, f), u)| w * (f - a0 * u))
            .collect();
        let grad = self
            .grads
            .iter()
            .enumerate()
            .map(|(j, g)| -q.interior_weights[j / d] * g)
            .collect();
        let boundary = q
            .boundary_weights
            .iter()
            .zip(&rhs.boundary)
            .zip(&self.boundary)
            .map(|((w, l), u)| w * (l - c * u))
            .collect();
        ResidualDensity {
            value,
            grad,
            boundary,
        }
    }
}

/// Best grid candidate for the current iterate.
pub fn select(form: &EnergyForm, rhs: &LoadFunctional, current: &Expansion, grid: &DictionaryGrid, normalize: bool) -> Result<(Neuron, f64)> {
    let scanner = CandidateScanner::new(form, grid);
    let cached: Vec<CachedNeuron> = current
        .neurons
        .iter()
        .map(|n| CachedNeuron::new(n.clone(), form.quad))
        .collect();
    let fields = Fields::from_basis(form, &cached, &current.coeffs);
    let (idx, score, _) = scanner
        .best(form, &fields.residual(form, rhs), normalize)
        .ok_or(Error::DegenerateDictionary)?;
    Ok((grid.neuron(idx), score))
}

#[derive(Debug, Clone, Copy)]
pub struct GreedyOptions {
    pub n: usize,
    /// Divide correlations by `‖g‖_{a_δ}` when ranking candidates.
    pub normalize: bool,
}

/// Runs `n` select/project rounds from `u_0 = 0`.
pub fn solve(form: &EnergyForm, rhs: &LoadFunctional, scanner: &CandidateScanner, opts: GreedyOptions) -> Result<GreedyResult> {
    solve_from(form, rhs, scanner, opts, &[])
}

/// As [`solve`], but starting from the span of `initial` (warm start). The
/// initial neurons count toward `n`.
pub fn solve_from(
    form: &EnergyForm,
    rhs: &LoadFunctional,
    scanner: &CandidateScanner,
    opts: GreedyOptions,
    initial: &[Neuron],
) -> Result<GreedyResult> {
    if opts.n == 0 {
        return Err(Error::Config("number of neurons must be >= 1".into()));
    }
    let grid = scanner.grid;
    let mut basis: Vec<CachedNeuron> = Vec::with_capacity(opts.n);
    let mut gram = DMatrix::<f64>::zeros(0, 0);
    let mut load = DVector::<f64>::zeros(0);
    let mut coeffs: Vec<f64> = Vec::new();
    let mut fields = Fields::zero(form);
    let mut trace = GreedyTrace::default();

    let mut pending: Vec<Neuron> = initial.iter().take(opts.n).cloned().collect();
    pending.reverse();
    for iteration in 1..=opts.n {
        let start = Instant::now();
        let (neuron, score, correlation) = match pending.pop() {
            Some(n) => {
                let corr = residual_correlation(
                    form,
                    rhs,
                    &Expansion::new(basis.iter().map(|c| c.neuron.clone()).collect(), coeffs.clone())?,
                    &n,
                );
                (n, f64::NAN, corr)
            }
            None => {
                let residual = fields.residual(form, rhs);
                let (idx, score, corr) = scanner
                    .best(form, &residual, opts.normalize)
                    .ok_or(Error::DegenerateDictionary)?;
                (grid.neuron(idx), score, corr)
            }
        };
        let cached = CachedNeuron::new(neuron.clone(), form.quad);
        let row: Vec<f64> = basis
            .par_iter()
            .map(|b| form.gram_entry(&cached, b))
            .collect();
        let diag = form.gram_entry(&cached, &cached);
        let m = basis.len();
        gram = gram.resize(m + 1, m + 1, 0.0);
        for (i, v) in row.iter().enumerate() {
            gram[(m, i)] = *v;
            gram[(i, m)] = *v;
        }
        gram[(m, m)] = diag;
        load = load.resize_vertically(m + 1, 0.0);
        load[m] = rhs.apply_parts(form.quad, &cached.values, &cached.boundary);
        basis.push(cached);

        let proj = finish_projection(&gram, &load, iteration)?;
        coeffs = proj.coeffs;
        fields = Fields::from_basis(form, &basis, &coeffs);
        trace.records.push(GreedyRecord {
            iteration,
            neuron,
            score,
            correlation,
            objective: proj.objective,
            jitter: proj.jitter,
            pivot_ratio: proj.pivot_ratio,
            orthogonality: proj.orthogonality,
            coefficient_mass: coeffs.iter().map(|a| a.abs()).sum(),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    let expansion = Expansion::new(basis.into_iter().map(|c| c.neuron).collect(), coeffs)?;
    Ok(GreedyResult { expansion, trace })
}
