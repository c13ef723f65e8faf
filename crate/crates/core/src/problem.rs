//! Second-order elliptic Dirichlet model problems.
//!
//! `-Δu + a0·u = f0` in a box `Ω`, `u = g` on `Γ = ∂Ω`. Fields are plain
//! evaluation callbacks over coordinates; every consumer only samples them at
//! quadrature nodes.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Writes the gradient at `x` into the output slice (length `d`).
pub type VectorField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Axis-aligned box `Π (lo_i, hi_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() || lo.len() > 3 {
            return Err(Error::Config(format!(
                "box bounds must have matching length in 1..=3, got {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h)) {
            return Err(Error::Config("box requires lo < hi on every axis".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn unit(d: usize) -> Self {
        Self {
            lo: vec![0.0; d],
            hi: vec![1.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    /// Measure of the boundary. In 1D this is the counting measure of the two
    /// endpoints.
    pub fn boundary_measure(&self) -> f64 {
        let d = self.dim();
        if d == 1 {
            return 2.0;
        }
        let widths: Vec<f64> = self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).collect();
        (0..d)
            .map(|axis| {
                2.0 * widths
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != axis)
                    .map(|(_, w)| w)
                    .product::<f64>()
            })
            .sum()
    }

    /// `sup_{x∈Ω} ‖x‖₂`, attained at a corner.
    pub fn max_norm(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| l.abs().max(h.abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains_strictly(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *l < *v && *v < *h)
    }
}

#[derive(Clone)]
pub struct ExactSolution {
    pub u: ScalarField,
    pub grad: VectorField,
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub domain: BoxDomain,
    pub a0: f64,
    pub f0: ScalarField,
    pub g: ScalarField,
    pub exact: Option<ExactSolution>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("a0", &self.a0)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

impl ProblemSpec {
    pub fn new(
        name: impl Into<String>,
        domain: BoxDomain,
        a0: f64,
        f0: ScalarField,
        g: ScalarField,
        exact: Option<ExactSolution>,
    ) -> Result<Self> {
        if !(a0 >= 0.0) || !a0.is_finite() {
            return Err(Error::Config(format!("reaction coefficient must be >= 0, got {a0}")));
        }
        Ok(Self {
            name: name.into(),
            domain,
            a0,
            f0,
            g,
            exact,
        })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// The homogeneous problem `u ≡ 0`, `f0 ≡ 0`, `g ≡ 0`.
    pub fn zero(domain: BoxDomain, a0: f64) -> Result<Self> {
        let d = domain.dim();
        Self::new(
            "zero",
            domain,
            a0,
            Arc::new(|_| 0.0),
            Arc::new(|_| 0.0),
            Some(ExactSolution {
                u: Arc::new(|_| 0.0),
                grad: Arc::new(move |_, out| out[..d].fill(0.0)),
            }),
        )
    }
}

/// The manufactured benchmark problems: `cos(πx/2)` on `(-1,1)` and the
/// sine products on the unit square and cube, each with `g ≡ 0`.
pub fn make_paper_problem(d: usize, a0: f64) -> Result<ProblemSpec> {
    if a0 != 0.0 && a0 != 1.0 {
        return Err(Error::Config(format!(
            "built-in problems exist for a0 in {{0, 1}}, got {a0}"
        )));
    }
    let zero: ScalarField = Arc::new(|_| 0.0);
    match d {
        1 => {
            let c = PI / 2.0;
            let scale = a0 + c * c;
            ProblemSpec::new(
                format!("cos-1d-a{a0}"),
                BoxDomain::new(vec![-1.0], vec![1.0])?,
                a0,
                Arc::new(move |x| scale * (c * x[0]).cos()),
                zero,
                Some(ExactSolution {
                    u: Arc::new(move |x| (c * x[0]).cos()),
                    grad: Arc::new(move |x, out| out[0] = -c * (c * x[0]).sin()),
                }),
            )
        }
        2 | 3 => {
            let scale = a0 + d as f64 * PI * PI;
            let u = move |x: &[f64]| x[..d].iter().map(|v| (PI * v).sin()).product::<f64>();
            ProblemSpec::new(
                format!("sin-{d}d-a{a0}"),
                BoxDomain::unit(d),
                a0,
                Arc::new(move |x| scale * u(x)),
                zero,
                Some(ExactSolution {
                    u: Arc::new(u),
                    grad: Arc::new(move |x, out| {
                        let s: Vec<f64> = x[..d].iter().map(|v| (PI * v).sin()).collect();
                        for i in 0..d {
                            let others: f64 = (0..d).filter(|&j| j != i).map(|j| s[j]).product();
                            out[i] = PI * (PI * x[i]).cos() * others;
                        }
                    }),
                }),
            )
        }
        _ => Err(Error::Config(format!("built-in problems exist for d in 1..=3, got {d}"))),
    }
}

/// Max over `points` of `|-Δu + a0·u - f0|` with the Laplacian taken by
/// second-order central differences, step `1e-4`.
pub fn residual_check(p: &ProblemSpec, points: &[Vec<f64>]) -> Result<f64> {
    const H: f64 = 1e-4;
    let exact = p
        .exact
        .as_ref()
        .ok_or(Error::Unsupported("residual check needs an exact solution"))?;
    let d = p.dim();
    let mut worst = 0.0_f64;
    let mut shifted = vec![0.0; d];
    for x in points {
        let u0 = (exact.u)(x);
        let mut lap = 0.0;
        for axis in 0..d {
            shifted.copy_from_slice(&x[..d]);
            shifted[axis] = x[axis] + H;
            let up = (exact.u)(&shifted);
            shifted[axis] = x[axis] - H;
            let dn = (exact.u)(&shifted);
            lap += (up - 2.0 * u0 + dn) / (H * H);
        }
        let r = -lap + p.a0 * u0 - (p.f0)(x);
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_points(domain: &BoxDomain, count: usize, mut state: u64) -> Vec<Vec<f64>> {
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        (0..count)
            .map(|_| {
                domain
                    .lo
                    .iter()
                    .zip(&domain.hi)
                    .map(|(l, h)| l + (h - l) * (0.05 + 0.9 * next()))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn source_values() {
        let p = make_paper_problem(1, 1.0).unwrap();
        assert!(((p.f0)(&[0.0]) - (1.0 + PI * PI / 4.0)).abs() < 1e-14);
        assert!(((p.f0)(&[0.0]) - 3.4674).abs() < 1e-4);
        let p = make_paper_problem(2, 0.0).unwrap();
        assert!(((p.f0)(&[0.5, 0.5]) - 2.0 * PI * PI).abs() < 1e-12);
        assert!(((p.f0)(&[0.5, 0.5]) - 19.7392).abs() < 1e-4);
        let p = make_paper_problem(3, 0.0).unwrap();
        assert!(((p.f0)(&[0.5, 0.5, 0.5]) - 3.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn exact_vanishes_on_endpoints() {
        let p = make_paper_problem(1, 0.0).unwrap();
        let u = &p.exact.as_ref().unwrap().u;
        assert!(u(&[-1.0]).abs() < 1e-15);
        assert!(u(&[1.0]).abs() < 1e-15);
        assert_eq!((p.g)(&[1.0]), 0.0);
    }

    #[test]
    fn unsupported_combinations() {
        assert!(matches!(make_paper_problem(4, 0.0), Err(Error::Config(_))));
        assert!(matches!(make_paper_problem(2, 0.5), Err(Error::Config(_))));
        assert!(matches!(make_paper_problem(0, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn residuals_of_builtins() {
        for d in 1..=3 {
            for a0 in [0.0, 1.0] {
                let p = make_paper_problem(d, a0).unwrap();
                let pts = lcg_points(&p.domain, 10, 17 + d as u64);
                let r = residual_check(&p, &pts).unwrap();
                assert!(r <= 1e-5, "d={d} a0={a0} residual {r}");
            }
        }
    }

    #[test]
    fn residual_of_zero_problem() {
        let p = ProblemSpec::zero(BoxDomain::unit(2), 0.0).unwrap();
        let pts = lcg_points(&p.domain, 5, 3);
        assert_eq!(residual_check(&p, &pts).unwrap(), 0.0);
    }

    #[test]
    fn residual_requires_exact() {
        let mut p = make_paper_problem(1, 0.0).unwrap();
        p.exact = None;
        assert!(matches!(residual_check(&p, &[vec![0.0]]), Err(Error::Unsupported(_))));
    }

    #[test]
    fn gradients_match_differences() {
        for d in 1..=3 {
            let p = make_paper_problem(d, 0.0).unwrap();
            let ex = p.exact.as_ref().unwrap();
            for x in lcg_points(&p.domain, 5, 99) {
                let mut g = vec![0.0; d];
                (ex.grad)(&x, &mut g);
                for axis in 0..d {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[axis] += 1e-6;
                    xm[axis] -= 1e-6;
                    let fd = ((ex.u)(&xp) - (ex.u)(&xm)) / 2e-6;
                    assert!((fd - g[axis]).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn rejects_negative_reaction_and_bad_box() {
        assert!(ProblemSpec::zero(BoxDomain::unit(1), -1.0).is_err());
        assert!(BoxDomain::new(vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn box_measures() {
        assert_eq!(BoxDomain::unit(2).boundary_measure(), 4.0);
        assert_eq!(BoxDomain::unit(3).boundary_measure(), 6.0);
        assert_eq!(BoxDomain::unit(1).boundary_measure(), 2.0);
        assert!((BoxDomain::unit(3).max_norm() - 3f64.sqrt()).abs() < 1e-15);
    }
}
