//! Dense SPD solves with escalating diagonal jitter.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// Smallest acceptable `min(pivot) / max(pivot)` for an unjittered factor.
pub const PIVOT_RATIO_FLOOR: f64 = 1e-14;
/// Relative jitter levels tried in order, scaled by `mean(diag G)`.
pub const JITTER_LEVELS: [f64; 5] = [1e-14, 1e-13, 1e-12, 1e-11, 1e-10];

#[derive(Debug, Clone)]
pub struct SpdSolution {
    pub x: DVector<f64>,
    /// Relative jitter that was added (0 when none was needed).
    pub jitter: f64,
    pub pivot_ratio: f64,
}

fn pivot_ratio(chol: &Cholesky<f64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for i in 0..l.nrows() {
        let p = l[(i, i)] * l[(i, i)];
        lo = lo.min(p);
        hi = hi.max(p);
    }
    if hi > 0.0 {
        lo / hi
    } else {
        0.0
    }
}

/// Solves `G x = b` for symmetric positive (semi)definite `G`. Returns `None`
/// when even the largest jitter fails to factor.
pub fn solve_spd(gram: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<SpdSolution> {
    if let Some(chol) = Cholesky::new(gram.clone()) {
        let ratio = pivot_ratio(&chol);
        if ratio >= PIVOT_RATIO_FLOOR && ratio.is_finite() {
            return Some(SpdSolution {
                x: chol.solve(rhs),
                jitter: 0.0,
                pivot_ratio: ratio,
            });
        }
    }
    let n = gram.nrows();
    let mean_diag = gram.diagonal().sum() / n as f64;
    for (level, eps) in JITTER_LEVELS.iter().enumerate() {
        let mut shifted = gram.clone();
        for i in 0..n {
            shifted[(i, i)] += eps * mean_diag;
        }
        let Some(chol) = Cholesky::new(shifted) else {
            continue;
        };
        let ratio = pivot_ratio(&chol);
        let last = level + 1 == JITTER_LEVELS.len();
        if !(ratio >= PIVOT_RATIO_FLOOR) && !last {
            continue;
        }
        let x = refine(gram, rhs, &chol, chol.solve(rhs));
        return Some(SpdSolution {
            x,
            jitter: *eps,
            pivot_ratio: ratio,
        });
    }
    None
}

/// A few steps of iterative refinement against the unshifted matrix, kept
/// only while the residual shrinks.
fn refine(gram: &DMatrix<f64>, rhs: &DVector<f64>, chol: &Cholesky<f64, Dyn>, mut x: DVector<f64>) -> DVector<f64> {
    let mut r = rhs - gram * &x;
    let mut rn = r.norm();
    for _ in 0..3 {
        let candidate = &x + chol.solve(&r);
        let rc = rhs - gram * &candidate;
        let rcn = rc.norm();
        if !(rcn < rn) {
            break;
        }
        x = candidate;
        r = rc;
        rn = rcn;
    }
    x
}
