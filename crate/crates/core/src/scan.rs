//! Whole-grid evaluation of residual correlations and candidate norms.
//!
//! For a fixed direction ω every candidate `σ_k(ω·x + b)` is a polynomial in
//! `t + b` on the nodes where `t + b > 0`. Nodes are bucketed by the first
//! bias sample that activates them; sweeping biases in ascending order, the
//! running power sums `Σ c·(t + b)^m` are carried from one bias to the next
//! with the binomial shift `(s + h)^m = Σ C(m,l) h^(m-l) s^l`, and each
//! bucket's nodes are added with their exact activation values. A direction
//! costs `O(nodes + n_b·k²)` instead of `O(nodes·n_b)`.

use rayon::prelude::*;

use crate::dictionary::DictionaryGrid;
use crate::forms::EnergyForm;

/// Residual density sampled at the nodes, with weights folded in:
/// `r(g) = Σ value·g + Σ grad·∇g + Σ boundary·g`.
#[derive(Debug, Clone)]
pub struct ResidualDensity {
    pub value: Vec<f64>,
    /// Flat, stride `d`.
    pub grad: Vec<f64>,
    pub boundary: Vec<f64>,
}

fn binomials(max: usize) -> Vec<Vec<f64>> {
    let mut rows = vec![vec![1.0]];
    for m in 1..=max {
        let prev = &rows[m - 1];
        let mut row = vec![1.0; m + 1];
        for l in 1..m {
            row[l] = prev[l - 1] + prev[l];
        }
        rows.push(row);
    }
    rows
}

/// Running power sums `P_m = Σ c·s^m` for `m = 0..=order` in several
/// independent families, stored family-major.
struct PowerSums<'a> {
    order: usize,
    families: usize,
    sums: Vec<f64>,
    binom: &'a [Vec<f64>],
    hpow: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> PowerSums<'a> {
    fn new(order: usize, families: usize, binom: &'a [Vec<f64>]) -> Self {
        Self {
            order,
            families,
            sums: vec![0.0; (order + 1) * families],
            binom,
            hpow: vec![1.0; order + 1],
            scratch: vec![0.0; order + 1],
        }
    }

    fn shift(&mut self, h: f64) {
        for p in 1..=self.order {
            self.hpow[p] = self.hpow[p - 1] * h;
        }
        let stride = self.order + 1;
        for f in 0..self.families {
            let block = &mut self.sums[f * stride..(f + 1) * stride];
            for m in 0..=self.order {
                let mut acc = 0.0;
                for l in 0..=m {
                    acc += self.binom[m][l] * self.hpow[m - l] * block[l];
                }
                self.scratch[m] = acc;
            }
            block.copy_from_slice(&self.scratch);
        }
    }

    fn add_bucket(&mut self, bucket: &[f64]) {
        for (s, b) in self.sums.iter_mut().zip(bucket) {
            *s += b;
        }
    }

    fn get(&self, family: usize, m: usize) -> f64 {
        self.sums[family * (self.order + 1) + m]
    }
}

/// Finds the first bias that activates a pre-activation `t` (`n_b` if none).
/// The grid is equispaced, so an arithmetic guess is corrected against the
/// exact predicate `t + b > 0` in a step or two.
struct BiasLocator<'a> {
    biases: &'a [f64],
    first: f64,
    inv_step: f64,
}

impl<'a> BiasLocator<'a> {
    fn new(biases: &'a [f64]) -> Self {
        let n = biases.len();
        let inv_step = if n > 1 { (n - 1) as f64 / (biases[n - 1] - biases[0]) } else { 0.0 };
        Self {
            biases,
            first: biases[0],
            inv_step,
        }
    }

    #[inline]
    fn bucket(&self, t: f64) -> usize {
        let b = self.biases;
        let n = b.len();
        let guess = ((-t - self.first) * self.inv_step).floor() + 1.0;
        let mut i = if guess.is_nan() || guess <= 0.0 { 0 } else { (guess as usize).min(n) };
        while i > 0 && t + b[i - 1] > 0.0 {
            i -= 1;
        }
        while i < n && !(t + b[i] > 0.0) {
            i += 1;
        }
        i
    }
}

#[inline]
fn accumulate_powers(bucket: &mut [f64], coeff: f64, s: f64, order: usize) {
    let mut p = coeff;
    for slot in bucket.iter_mut().take(order + 1) {
        *slot += p;
        p *= s;
    }
}

/// Precomputed candidate norms for one energy form and grid.
#[derive(Debug, Clone)]
pub struct CandidateScanner<'g> {
    pub grid: &'g DictionaryGrid,
    /// `a_δ(g, g)` per candidate in enumeration order.
    pub norms: Vec<f64>,
    pub max_norm: f64,
}

/// Candidates whose squared norm falls below this fraction of the largest
/// one are treated as zero on `Ω̄`.
pub const ZERO_NORM_FRACTION: f64 = 1e-14;

impl<'g> CandidateScanner<'g> {
    pub fn new(form: &EnergyForm, grid: &'g DictionaryGrid) -> Self {
        let norms: Vec<f64> = (0..grid.omegas.len())
            .into_par_iter()
            .map(|o| direction_norms(form, grid, o))
            .collect::<Vec<_>>()
            .concat();
        let max_norm = norms.iter().cloned().fold(0.0, f64::max);
        Self {
            grid,
            norms,
            max_norm,
        }
    }

    pub fn is_live(&self, index: usize) -> bool {
        self.norms[index] > ZERO_NORM_FRACTION * self.max_norm
    }

    /// `r(g)` for every candidate, in enumeration order.
    pub fn correlations(&self, form: &EnergyForm, residual: &ResidualDensity) -> Vec<f64> {
        (0..self.grid.omegas.len())
            .into_par_iter()
            .map(|o| direction_correlations(form, self.grid, residual, o))
            .collect::<Vec<_>>()
            .concat()
    }

    /// Index, score and correlation of the best live candidate; ties go to
    /// the lowest index. `None` when no candidate is live.
    pub fn best(&self, form: &EnergyForm, residual: &ResidualDensity, normalize: bool) -> Option<(usize, f64, f64)> {
        let nb = self.grid.biases.len();
        let per_direction: Vec<Option<(usize, f64, f64)>> = (0..self.grid.omegas.len())
            .into_par_iter()
            .map(|o| {
                let corr = direction_correlations(form, self.grid, residual, o);
                let mut best: Option<(usize, f64, f64)> = None;
                for (i, r) in corr.into_iter().enumerate() {
                    let idx = o * nb + i;
                    if !self.is_live(idx) {
                        continue;
                    }
                    let score = if normalize {
                        r.abs() / self.norms[idx].sqrt()
                    } else {
                        r.abs()
                    };
                    if best.map_or(true, |(_, s, _)| score > s) {
                        best = Some((idx, score, r));
                    }
                }
                best
            })
            .collect();
        let mut best: Option<(usize, f64, f64)> = None;
        for cand in per_direction.into_iter().flatten() {
            if best.map_or(true, |(_, s, _)| cand.1 > s) {
                best = Some(cand);
            }
        }
        best
    }
}

fn pre_activations<'a>(points: &'a [f64], omega: &[f64]) -> impl Iterator<Item = f64> + 'a {
    let d = omega.len();
    let omega = omega.to_vec();
    points
        .chunks_exact(d)
        .map(move |x| omega.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>())
}

fn direction_norms(form: &EnergyForm, grid: &DictionaryGrid, o: usize) -> Vec<f64> {
    let k = grid.k as usize;
    let order = 2 * k;
    let binom = binomials(order);
    let biases = &grid.biases;
    let locator = BiasLocator::new(biases);
    let nb = biases.len();
    let omega = &grid.omegas[o];
    let quad = form.quad;
    let stride = 2 * (order + 1);
    // Family 0: interior weights; family 1: boundary weights.
    let mut buckets = vec![0.0; (nb + 1) * stride];
    for (t, w) in pre_activations(&quad.interior_nodes, omega).zip(&quad.interior_weights) {
        let i = locator.bucket(t);
        if i < nb {
            let s = t + biases[i];
            accumulate_powers(&mut buckets[i * stride..i * stride + order + 1], *w, s, order);
        }
    }
    for (t, w) in pre_activations(&quad.boundary_nodes, omega).zip(&quad.boundary_weights) {
        let i = locator.bucket(t);
        if i < nb {
            let s = t + biases[i];
            let off = i * stride + order + 1;
            accumulate_powers(&mut buckets[off..off + order + 1], *w, s, order);
        }
    }
    let kf = k as f64;
    let a0 = form.a0();
    let c = form.boundary_coeff();
    let mut sums = PowerSums::new(order, 2, &binom);
    let mut out = Vec::with_capacity(nb);
    for i in 0..nb {
        if i > 0 {
            sums.shift(biases[i] - biases[i - 1]);
        }
        sums.add_bucket(&buckets[i * stride..(i + 1) * stride]);
        let grad = kf * kf * sums.get(0, 2 * k - 2);
        let mass = a0 * sums.get(0, 2 * k);
        let bd = c * sums.get(1, 2 * k);
        out.push(grad + mass + bd);
    }
    out
}

fn direction_correlations(form: &EnergyForm, grid: &DictionaryGrid, residual: &ResidualDensity, o: usize) -> Vec<f64> {
    let k = grid.k as usize;
    let order = k;
    let binom = binomials(order);
    let biases = &grid.biases;
    let locator = BiasLocator::new(biases);
    let nb = biases.len();
    let omega = &grid.omegas[o];
    let d = omega.len();
    let quad = form.quad;
    let stride = 2 * (order + 1);
    // Family 0: value coefficients (interior and boundary); family 1:
    // slope coefficients `grad·ω`.
    let mut buckets = vec![0.0; (nb + 1) * stride];
    for (j, t) in pre_activations(&quad.interior_nodes, omega).enumerate() {
        let i = locator.bucket(t);
        if i >= nb {
            continue;
        }
        let s = t + biases[i];
        let slope_coeff: f64 = residual.grad[j * d..(j + 1) * d]
            .iter()
            .zip(omega)
            .map(|(g, w)| g * w)
            .sum();
        let base = i * stride;
        accumulate_powers(&mut buckets[base..base + order + 1], residual.value[j], s, order);
        accumulate_powers(&mut buckets[base + order + 1..base + stride], slope_coeff, s, order);
    }
    for (j, t) in pre_activations(&quad.boundary_nodes, omega).enumerate() {
        let i = locator.bucket(t);
        if i >= nb {
            continue;
        }
        let s = t + biases[i];
        let base = i * stride;
        accumulate_powers(&mut buckets[base..base + order + 1], residual.boundary[j], s, order);
    }
    let kf = k as f64;
    let mut sums = PowerSums::new(order, 2, &binom);
    let mut out = Vec::with_capacity(nb);
    for i in 0..nb {
        if i > 0 {
            sums.shift(biases[i] - biases[i - 1]);
        }
        sums.add_bucket(&buckets[i * stride..(i + 1) * stride]);
        out.push(sums.get(0, k) + kf * sums.get(1, k - 1));
    }
    out
}
