//! Composite Gauss–Legendre rules on a box and on its boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::BoxDomain;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Gauss–Legendre abscissae and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(points: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(points >= 1, "Gauss rule needs at least one point");
    let n = points;
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Composite rule on `(lo, hi)` with `cells` equal cells and `points` Gauss
/// points per cell.
pub fn composite_1d(lo: f64, hi: f64, cells: usize, points: usize) -> (Vec<f64>, Vec<f64>) {
    let (xi, wi) = gauss_legendre(points);
    let mut nodes = Vec::with_capacity(cells * points);
    let mut weights = Vec::with_capacity(cells * points);
    let len = hi - lo;
    for c in 0..cells {
        let a = lo + len * c as f64 / cells as f64;
        let b = lo + len * (c + 1) as f64 / cells as f64;
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in xi.iter().zip(&wi) {
            nodes.push(mid + half * x);
            weights.push(half * w);
        }
    }
    (nodes, weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    pub cells_per_axis: usize,
    pub gauss_per_axis: usize,
    /// Panels per boundary edge (2D) or per face axis (3D).
    pub boundary_panels: usize,
    /// Points per boundary panel; a perfect square in 3D.
    pub boundary_gauss: usize,
}

impl QuadratureConfig {
    pub fn default_for(d: usize) -> Self {
        match d {
            1 => Self {
                cells_per_axis: 4000,
                gauss_per_axis: 2,
                boundary_panels: 1,
                boundary_gauss: 1,
            },
            2 => Self {
                cells_per_axis: 100,
                gauss_per_axis: 2,
                boundary_panels: 250,
                boundary_gauss: 2,
            },
            _ => Self {
                cells_per_axis: 25,
                gauss_per_axis: 2,
                boundary_panels: 40,
                boundary_gauss: 4,
            },
        }
    }

    /// Same rule with twice as many cells and panels.
    pub fn refined(&self) -> Self {
        Self {
            cells_per_axis: 2 * self.cells_per_axis,
            boundary_panels: 2 * self.boundary_panels,
            ..*self
        }
    }
}

/// Interior and boundary nodes with positive weights. Coordinates are stored
/// flat with stride `dim`.
#[derive(Debug, Clone)]
pub struct QuadratureSet {
    pub dim: usize,
    pub interior_nodes: Vec<f64>,
    pub interior_weights: Vec<f64>,
    pub boundary_nodes: Vec<f64>,
    pub boundary_weights: Vec<f64>,
    /// Face of each boundary node: `2·axis` for the low side, `2·axis + 1`
    /// for the high side.
    pub face_index: Vec<u8>,
}

pub struct InteriorRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

pub struct BoundaryRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub face_index: Vec<u8>,
}

pub fn build_interior(domain: &BoxDomain, cells_per_axis: usize, gauss_per_axis: usize) -> Result<InteriorRule> {
    if cells_per_axis == 0 {
        return Err(Error::Config("cells_per_axis must be >= 1".into()));
    }
    if !(1..=5).contains(&gauss_per_axis) {
        return Err(Error::Config(format!(
            "gauss_per_axis must be in 1..=5, got {gauss_per_axis}"
        )));
    }
    let d = domain.dim();
    let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..d)
        .map(|a| composite_1d(domain.lo[a], domain.hi[a], cells_per_axis, gauss_per_axis))
        .collect();
    let (nodes, weights) = tensor_product(&axes);
    Ok(InteriorRule { nodes, weights })
}

/// Tensor product of 1D rules; the first axis varies slowest.
fn tensor_product(axes: &[(Vec<f64>, Vec<f64>)]) -> (Vec<f64>, Vec<f64>) {
    let d = axes.len();
    let count: usize = axes.iter().map(|(x, _)| x.len()).product();
    let mut nodes = Vec::with_capacity(count * d);
    let mut weights = Vec::with_capacity(count);
    let mut idx = vec![0usize; d];
    for _ in 0..count {
        let mut w = 1.0;
        for a in 0..d {
            nodes.push(axes[a].0[idx[a]]);
            w *= axes[a].1[idx[a]];
        }
        weights.push(w);
        for a in (0..d).rev() {
            idx[a] += 1;
            if idx[a] < axes[a].0.len() {
                break;
            }
            idx[a] = 0;
        }
    }
    (nodes, weights)
}

pub fn build_boundary(domain: &BoxDomain, panels: usize, gauss_pts: usize) -> Result<BoundaryRule> {
    let d = domain.dim();
    if d == 1 {
        return Ok(BoundaryRule {
            nodes: vec![domain.lo[0], domain.hi[0]],
            weights: vec![1.0, 1.0],
            face_index: vec![0, 1],
        });
    }
    if panels == 0 {
        return Err(Error::Config("boundary_panels must be >= 1".into()));
    }
    let per_axis = if d == 3 {
        let r = (gauss_pts as f64).sqrt().round() as usize;
        if r * r != gauss_pts {
            return Err(Error::Config(format!(
                "3D boundary Gauss point count must be a perfect square, got {gauss_pts}"
            )));
        }
        r
    } else {
        gauss_pts
    };
    if !(1..=5).contains(&per_axis) {
        return Err(Error::Config(format!(
            "boundary Gauss points per axis must be in 1..=5, got {per_axis}"
        )));
    }
    let mut rule = BoundaryRule {
        nodes: Vec::new(),
        weights: Vec::new(),
        face_index: Vec::new(),
    };
    for axis in 0..d {
        for side in 0..2 {
            let fixed = if side == 0 { domain.lo[axis] } else { domain.hi[axis] };
            let tangent: Vec<usize> = (0..d).filter(|&a| a != axis).collect();
            let rules: Vec<(Vec<f64>, Vec<f64>)> = tangent
                .iter()
                .map(|&a| composite_1d(domain.lo[a], domain.hi[a], panels, per_axis))
                .collect();
            let (face_nodes, face_weights) = tensor_product(&rules);
            for (j, w) in face_weights.iter().enumerate() {
                let mut t = 0;
                for a in 0..d {
                    if a == axis {
                        rule.nodes.push(fixed);
                    } else {
                        rule.nodes.push(face_nodes[j * (d - 1) + t]);
                        t += 1;
                    }
                }
                rule.weights.push(*w);
                rule.face_index.push((2 * axis + side) as u8);
            }
        }
    }
    Ok(rule)
}

impl QuadratureSet {
    pub fn build(domain: &BoxDomain, cfg: &QuadratureConfig) -> Result<Self> {
        let interior = build_interior(domain, cfg.cells_per_axis, cfg.gauss_per_axis)?;
        let boundary = build_boundary(domain, cfg.boundary_panels, cfg.boundary_gauss)?;
        Ok(Self {
            dim: domain.dim(),
            interior_nodes: interior.nodes,
            interior_weights: interior.weights,
            boundary_nodes: boundary.nodes,
            boundary_weights: boundary.weights,
            face_index: boundary.face_index,
        })
    }

    pub fn n_interior(&self) -> usize {
        self.interior_weights.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary_weights.len()
    }

    #[inline]
    pub fn interior_point(&self, i: usize) -> &[f64] {
        &self.interior_nodes[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn boundary_point(&self, i: usize) -> &[f64] {
        &self.boundary_nodes[i * self.dim..(i + 1) * self.dim]
    }

    /// Outward unit normal at boundary node `i`.
    pub fn outward_normal(&self, i: usize) -> Vec<f64> {
        let face = self.face_index[i] as usize;
        let mut n = vec![0.0; self.dim];
        n[face / 2] = if face % 2 == 0 { -1.0 } else { 1.0 };
        n
    }

    pub fn integrate(&self, field: impl Fn(&[f64]) -> f64) -> f64 {
        compensated_sum(
            self.interior_weights
                .iter()
                .enumerate()
                .map(|(i, w)| w * field(self.interior_point(i))),
        )
    }

    pub fn integrate_boundary(&self, field: impl Fn(&[f64]) -> f64) -> f64 {
        compensated_sum(
            self.boundary_weights
                .iter()
                .enumerate()
                .map(|(i, w)| w * field(self.boundary_point(i))),
        )
    }

    /// Weighted sum of precomputed interior samples.
    pub fn integrate_samples(&self, values: &[f64]) -> f64 {
        compensated_sum(self.interior_weights.iter().zip(values).map(|(w, v)| w * v))
    }

    pub fn integrate_boundary_samples(&self, values: &[f64]) -> f64 {
        compensated_sum(self.boundary_weights.iter().zip(values).map(|(w, v)| w * v))
    }
}
