//! Augmented-Lagrangian Uzawa driver.
//!
//! Step ℓ solves the penalized problem
//! `a_δ(u^ℓ, v) = ⟨f, v⟩ + δ⁻¹(g, v)_Γ − (λ^{ℓ−1}, v)_Γ` by greedy
//! selection and then updates `λ^ℓ = λ^{ℓ−1} + δ⁻¹(u^ℓ − g)` on the boundary
//! nodes. Two steps from `λ⁰ = 0` is the default pipeline; one step is the
//! plain penalty method.

use std::time::Instant;

use serde::Serialize;

use crate::dictionary::DictionaryGrid;
use crate::error::{Error, Result};
use crate::forms::{EnergyForm, Expansion, Sampleable};
use crate::metrics::{errors, ErrorRecord};
use crate::oga::{solve, solve_from, GreedyOptions, GreedyResult, GreedyTrace};
use crate::problem::ProblemSpec;
use crate::quadrature::{compensated_sum, QuadratureSet};
use crate::scan::CandidateScanner;

pub const MAX_STEPS: usize = 16;

/// Exponent `1/3 + (2(k−1)+1)/(3d)` of the penalty choice `δ = n^{−e}`.
pub fn delta_exponent(k: u32, d: usize) -> f64 {
    1.0 / 3.0 + (2.0 * (k as f64 - 1.0) + 1.0) / (3.0 * d as f64)
}

pub fn delta_select(n: usize, k: u32, d: usize) -> f64 {
    (n as f64).powf(-delta_exponent(k, d))
}

/// `λ + δ⁻¹(u − g)` node by node.
pub fn lambda_update(lambda: &[f64], u_boundary: &[f64], g: &[f64], delta: f64) -> Vec<f64> {
    lambda
        .iter()
        .zip(u_boundary)
        .zip(g)
        .map(|((l, u), g)| l + (u - g) / delta)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UzawaConfig {
    pub n: usize,
    pub steps: usize,
    pub delta: f64,
    pub normalize: bool,
    pub boundary_mass: bool,
    pub warm_start: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub n: usize,
    pub delta: f64,
    pub errors: Option<ErrorRecord>,
    /// `‖u^ℓ − g‖_{0,Γ}` by boundary quadrature.
    pub boundary_violation: f64,
    pub boundary_violation_max: f64,
    /// `max_Γ |λ^ℓ + ∇u·n|`, when the exact gradient is known.
    pub lambda_diag: Option<f64>,
    pub wall_ms: f64,
    #[serde(skip)]
    pub trace: GreedyTrace,
}

#[derive(Debug, Clone)]
pub struct UzawaState {
    pub delta: f64,
    pub step: usize,
    pub lambda_trace: Vec<f64>,
    pub expansions: Vec<Expansion>,
    pub histories: Vec<StepRecord>,
}

impl UzawaState {
    pub fn new(delta: f64, boundary_nodes: usize) -> Self {
        Self {
            delta,
            step: 0,
            lambda_trace: vec![0.0; boundary_nodes],
            expansions: Vec::new(),
            histories: Vec::new(),
        }
    }

    /// `u^ℓ` for `ℓ ≥ 1`.
    pub fn iterate(&self, step: usize) -> Option<&Expansion> {
        step.checked_sub(1).and_then(|i| self.expansions.get(i))
    }
}

/// Boundary samples of `u − g`: `(L² norm on Γ, max)`.
pub fn boundary_violation(u_boundary: &[f64], g: &[f64], quad: &QuadratureSet) -> (f64, f64) {
    let sq = compensated_sum(
        quad.boundary_weights
            .iter()
            .zip(u_boundary.iter().zip(g))
            .map(|(w, (u, g))| w * (u - g) * (u - g)),
    );
    let max = u_boundary
        .iter()
        .zip(g)
        .map(|(u, g)| (u - g).abs())
        .fold(0.0, f64::max);
    (sq.max(0.0).sqrt(), max)
}

/// `max_Γ |λ + ∇u_exact·n|` over boundary nodes.
pub fn multiplier_diagnostic(lambda: &[f64], problem: &ProblemSpec, quad: &QuadratureSet) -> Result<f64> {
    let exact = problem
        .exact
        .as_ref()
        .ok_or(Error::Unsupported("multiplier diagnostic needs an exact gradient"))?;
    if lambda.len() != quad.n_boundary() {
        return Err(Error::Contract("multiplier trace length differs from boundary node count".into()));
    }
    let mut grad = vec![0.0; quad.dim];
    let mut worst = 0.0_f64;
    for (i, l) in lambda.iter().enumerate() {
        (exact.grad)(quad.boundary_point(i), &mut grad);
        let normal = quad.outward_normal(i);
        let flux: f64 = grad.iter().zip(&normal).map(|(a, b)| a * b).sum();
        worst = worst.max((l + flux).abs());
    }
    Ok(worst)
}

/// The plain penalty solve: greedy approximation of the penalized problem
/// with no multiplier term at all.
pub fn penalty_solve(form: &EnergyForm, scanner: &CandidateScanner, n: usize, normalize: bool) -> Result<GreedyResult> {
    let rhs = form.rhs(None)?;
    solve(form, &rhs, scanner, GreedyOptions { n, normalize })
}

pub struct UzawaRun<'a> {
    pub problem: &'a ProblemSpec,
    pub quad: &'a QuadratureSet,
    pub grid: &'a DictionaryGrid,
    /// Quadrature used for error metrology; defaults to `quad`.
    pub error_quad: Option<&'a QuadratureSet>,
    /// Seed for `λ⁰`; zero when absent.
    pub initial_lambda: Option<Vec<f64>>,
}

impl UzawaRun<'_> {
    pub fn run(&self, cfg: &UzawaConfig) -> Result<UzawaState> {
        let form = EnergyForm::new(self.problem, self.quad, cfg.delta, cfg.boundary_mass)?;
        let scanner = CandidateScanner::new(&form, self.grid);
        self.run_with(&form, &scanner, cfg)
    }

    /// Same as [`run`](Self::run) with a prebuilt form and scanner, so sweeps
    /// over `n` share the candidate norms.
    pub fn run_with(&self, form: &EnergyForm, scanner: &CandidateScanner, cfg: &UzawaConfig) -> Result<UzawaState> {
        if cfg.steps == 0 || cfg.steps > MAX_STEPS {
            return Err(Error::Config(format!("steps must be in 1..={MAX_STEPS}, got {}", cfg.steps)));
        }
        let mut state = UzawaState::new(cfg.delta, self.quad.n_boundary());
        if let Some(seed) = &self.initial_lambda {
            if seed.len() != self.quad.n_boundary() {
                return Err(Error::Contract("seeded multiplier has wrong length".into()));
            }
            state.lambda_trace = seed.clone();
        }
        let opts = GreedyOptions {
            n: cfg.n,
            normalize: cfg.normalize,
        };
        let err_quad = self.error_quad.unwrap_or(self.quad);
        for step in 1..=cfg.steps {
            let start = Instant::now();
            let rhs = form.rhs(Some(&state.lambda_trace))?;
            let result = match (cfg.warm_start, state.expansions.last()) {
                (true, Some(prev)) => solve_from(form, &rhs, scanner, opts, &prev.neurons)?,
                _ => solve(form, &rhs, scanner, opts)?,
            };
            let u_boundary = result.expansion.sample(self.quad).boundary;
            let (viol, viol_max) = boundary_violation(&u_boundary, form.g_samples(), self.quad);
            state.lambda_trace = lambda_update(&state.lambda_trace, &u_boundary, form.g_samples(), cfg.delta);
            state.step = step;
            let errors = match &self.problem.exact {
                Some(ex) => Some(errors(Some(ex), &result.expansion, err_quad)?),
                None => None,
            };
            let lambda_diag = match &self.problem.exact {
                Some(_) => Some(multiplier_diagnostic(&state.lambda_trace, self.problem, self.quad)?),
                None => None,
            };
            state.histories.push(StepRecord {
                step,
                n: cfg.n,
                delta: cfg.delta,
                errors,
                boundary_violation: viol,
                boundary_violation_max: viol_max,
                lambda_diag,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
                trace: result.trace,
            });
            state.expansions.push(result.expansion);
        }
        Ok(state)
    }
}
