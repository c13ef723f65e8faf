//! L² / H¹ errors against exact solutions and dyadic convergence rates.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forms::Expansion;
use crate::problem::ExactSolution;
use crate::quadrature::{CompensatedSum, QuadratureSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub n: usize,
    pub l2: f64,
    pub h1_semi: f64,
    pub h1_full: f64,
    /// Rate of `h1_full` against the previous (half-size) `n`.
    pub rate_h1: Option<f64>,
}

/// Errors of `approx` against `exact` by interior quadrature.
pub fn errors(exact: Option<&ExactSolution>, approx: &Expansion, quad: &QuadratureSet) -> Result<ErrorRecord> {
    let exact = exact.ok_or(Error::Unsupported("error metrology needs an exact solution"))?;
    let d = quad.dim;
    let mut l2 = CompensatedSum::default();
    let mut semi = CompensatedSum::default();
    let mut ge = vec![0.0; d];
    let mut ga = vec![0.0; d];
    for (i, w) in quad.interior_weights.iter().enumerate() {
        let x = quad.interior_point(i);
        let e = (exact.u)(x) - approx.value(x);
        (exact.grad)(x, &mut ge);
        approx.grad(x, &mut ga);
        let g2: f64 = ge.iter().zip(&ga).map(|(a, b)| (a - b) * (a - b)).sum();
        l2.add(w * e * e);
        semi.add(w * g2);
    }
    let (l2, semi) = (l2.value().max(0.0), semi.value().max(0.0));
    Ok(ErrorRecord {
        n: approx.len(),
        l2: l2.sqrt(),
        h1_semi: semi.sqrt(),
        h1_full: (l2 + semi).sqrt(),
        rate_h1: None,
    })
}

/// `log₂(e_coarse / e_fine)`; `None` unless both errors are positive.
pub fn rate(e_coarse: f64, e_fine: f64) -> Option<f64> {
    if e_coarse > 0.0 && e_fine > 0.0 && e_coarse.is_finite() && e_fine.is_finite() {
        Some((e_coarse / e_fine).log2())
    } else {
        None
    }
}

/// Fills `rate_h1` for consecutive records whose sizes double.
pub fn attach_rates(records: &mut [ErrorRecord]) {
    for i in 1..records.len() {
        if records[i].n == 2 * records[i - 1].n {
            records[i].rate_h1 = rate(records[i - 1].h1_full, records[i].h1_full);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{make_paper_problem, BoxDomain};
    use crate::quadrature::QuadratureConfig;
    use std::f64::consts::PI;

    #[test]
    fn zero_expansion_gives_solution_norms() {
        let p = make_paper_problem(1, 0.0).unwrap();
        let q = QuadratureSet::build(&p.domain, &QuadratureConfig::default_for(1)).unwrap();
        let e = errors(p.exact.as_ref(), &Expansion::default(), &q).unwrap();
        // Oracle: dense midpoint sums of cos² and (π/2)² sin² on (-1, 1).
        let m = 200_000;
        let h = 2.0 / m as f64;
        let (mut c2, mut s2) = (0.0, 0.0);
        for i in 0..m {
            let x = -1.0 + (i as f64 + 0.5) * h;
            c2 += h * (PI * x / 2.0).cos().powi(2);
            s2 += h * (PI / 2.0 * (PI * x / 2.0).sin()).powi(2);
        }
        assert!((e.l2 - c2.sqrt()).abs() < 1e-9);
        assert!((e.h1_semi - s2.sqrt()).abs() < 1e-9);
        assert!((e.l2 - 1.0).abs() < 1e-12);
        assert!((e.h1_semi - PI / 2.0).abs() < 1e-12);
        assert!((e.h1_full.powi(2) - e.l2.powi(2) - e.h1_semi.powi(2)).abs() < 1e-12 * e.h1_full.powi(2));
    }

    #[test]
    fn expansion_equal_to_solution_has_no_error() {
        use crate::dictionary::Neuron;
        use crate::problem::{ExactSolution, ProblemSpec};
        use std::sync::Arc;
        // u = 2 σ₂(x + y − 0.5) − σ₂(0.3 − x), a member of the span itself.
        let target = Expansion::new(
            vec![Neuron::new(vec![1.0, 1.0], -0.5, 2), Neuron::new(vec![-1.0, 0.0], 0.3, 2)],
            vec![2.0, -1.0],
        )
        .unwrap();
        let (tu, tg) = (target.clone(), target.clone());
        let exact = ExactSolution {
            u: Arc::new(move |x| tu.value(x)),
            grad: Arc::new(move |x, out| tg.grad(x, out)),
        };
        let p = ProblemSpec::new("in-span", BoxDomain::unit(2), 0.0, Arc::new(|_| 0.0), Arc::new(|_| 0.0), Some(exact)).unwrap();
        let q = QuadratureSet::build(&p.domain, &QuadratureConfig::default_for(2)).unwrap();
        let e = errors(p.exact.as_ref(), &target, &q).unwrap();
        assert_eq!((e.l2, e.h1_semi), (0.0, 0.0));
    }

    #[test]
    fn rates() {
        assert_eq!(rate(0.08, 0.04), Some(1.0));
        assert!((rate(8.58e-2, 4.10e-2).unwrap() - 1.07).abs() < 0.005);
        assert_eq!(rate(0.3, 0.3), Some(0.0));
        assert_eq!(rate(0.0, 0.1), None);
        assert_eq!(rate(-1.0, 0.1), None);
        let (a, b) = (0.37, 0.021);
        assert_eq!(rate(a, b).unwrap(), -rate(b, a).unwrap());
    }

    #[test]
    fn requires_exact() {
        let q = QuadratureSet::build(&BoxDomain::unit(2), &QuadratureConfig { cells_per_axis: 2, gauss_per_axis: 2, boundary_panels: 1, boundary_gauss: 2 }).unwrap();
        assert!(matches!(errors(None, &Expansion::default(), &q), Err(Error::Unsupported(_))));
    }

    #[test]
    fn rates_only_for_doublings() {
        let mk = |n, h| ErrorRecord { n, l2: 0.0, h1_semi: h, h1_full: h, rate_h1: None };
        let mut recs = vec![mk(16, 0.4), mk(32, 0.2), mk(48, 0.1)];
        attach_rates(&mut recs);
        assert_eq!(recs[0].rate_h1, None);
        assert_eq!(recs[1].rate_h1, Some(1.0));
        assert_eq!(recs[2].rate_h1, None);
    }
}
