use fnm::dictionary::Neuron;
use fnm::forms::{gram_and_load, CachedNeuron, EnergyForm, Expansion, NodalSamples, Sampleable};
use fnm::oga::project;
use fnm::problem::{make_paper_problem, BoxDomain, ProblemSpec};
use fnm::quadrature::{build_interior, QuadratureConfig, QuadratureSet};
use fnm::uzawa::{delta_exponent, lambda_update};
use proptest::prelude::*;

fn small_quad(p: &ProblemSpec, cells: usize) -> QuadratureSet {
    let mut qc = QuadratureConfig::default_for(p.dim());
    qc.cells_per_axis = cells;
    qc.boundary_panels = qc.boundary_panels.min(20);
    QuadratureSet::build(&p.domain, &qc).unwrap()
}

fn neuron_2d(theta: f64, b: f64, k: u32) -> Neuron {
    Neuron::new(vec![theta.cos(), theta.sin()], b, k)
}

fn neurons_strategy(len: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0..std::f64::consts::TAU, -1.4..1.4f64), len)
}

// b > 0 keeps every atom positive near the origin corner, so none vanishes on the square.
fn live_neurons_strategy(len: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0..std::f64::consts::TAU, 0.05..1.4f64), len)
}

fn add_samples(a: &NodalSamples, b: &NodalSamples, alpha: f64, beta: f64) -> NodalSamples {
    let mix = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(u, v)| alpha * u + beta * v).collect();
    NodalSamples {
        values: mix(&a.values, &b.values),
        grads: mix(&a.grads, &b.grads),
        boundary: mix(&a.boundary, &b.boundary),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gauss_rule_integrates_per_axis_cubics(cells in 1usize..6, pts in 2usize..6, ex in 0u32..4, ey in 0u32..4) {
        let domain = BoxDomain::unit(2);
        let rule = build_interior(&domain, cells, pts).unwrap();
        let got: f64 = rule
            .nodes
            .chunks_exact(2)
            .zip(&rule.weights)
            .map(|(x, w)| w * x[0].powi(ex as i32) * x[1].powi(ey as i32))
            .sum();
        let exact = 1.0 / ((ex + 1) * (ey + 1)) as f64;
        prop_assert!((got - exact).abs() <= 1e-13 * exact);
    }

    #[test]
    fn gram_entries_are_symmetric(atoms in neurons_strategy(2..=6), k in 1u32..3, a0 in 0u32..2) {
        let p = make_paper_problem(2, a0 as f64).unwrap();
        let q = small_quad(&p, 12);
        let form = EnergyForm::new(&p, &q, 0.05, true).unwrap();
        let cached: Vec<CachedNeuron> = atoms.iter().map(|&(t, b)| CachedNeuron::new(neuron_2d(t, b, k), &q)).collect();
        for gi in &cached {
            for gj in &cached {
                let (x, y) = (form.gram_entry(gi, gj), form.gram_entry(gj, gi));
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0));
            }
        }
    }

    #[test]
    fn load_is_linear(t1 in 0.0..6.28f64, b1 in -1.4..1.4f64, t2 in 0.0..6.28f64, b2 in -1.4..1.4f64,
                      alpha in -3.0..3.0f64, beta in -3.0..3.0f64, lam in -2.0..2.0f64) {
        let p = make_paper_problem(2, 1.0).unwrap();
        let q = small_quad(&p, 10);
        let form = EnergyForm::new(&p, &q, 0.1, true).unwrap();
        let lambda = vec![lam; q.n_boundary()];
        let u = neuron_2d(t1, b1, 1).sample(&q);
        let v = neuron_2d(t2, b2, 1).sample(&q);
        let combo = add_samples(&u, &v, alpha, beta);
        let lhs = form.rhs_functional(Some(&lambda), &combo).unwrap();
        let rhs = alpha * form.rhs_functional(Some(&lambda), &u).unwrap()
            + beta * form.rhs_functional(Some(&lambda), &v).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-11 * (1.0 + lhs.abs()));
    }

    #[test]
    fn energy_dominates_boundary_penalty(atoms in neurons_strategy(1..=5), coeffs in prop::collection::vec(-2.0..2.0f64, 5),
                                         delta in 0.01..1.0f64, mass in any::<bool>()) {
        let p = make_paper_problem(2, 0.0).unwrap();
        let q = small_quad(&p, 10);
        let form = EnergyForm::new(&p, &q, delta, mass).unwrap();
        let neurons: Vec<Neuron> = atoms.iter().map(|&(t, b)| neuron_2d(t, b, 1)).collect();
        let v = Expansion::new(neurons.clone(), coeffs[..neurons.len()].to_vec()).unwrap();
        let s = v.sample(&q);
        let energy = form.bilinear_samples(&s, &s);
        let trace: f64 = q.integrate_boundary_samples(&s.boundary.iter().map(|x| x * x).collect::<Vec<_>>());
        prop_assert!(energy >= trace / delta - 1e-12 * energy.abs().max(1.0));
        prop_assert!(energy >= 0.0);
    }

    #[test]
    fn projection_is_galerkin_orthogonal(atoms in live_neurons_strategy(1..=8), delta in 0.02..0.5f64) {
        let p = make_paper_problem(2, 1.0).unwrap();
        let q = small_quad(&p, 12);
        let form = EnergyForm::new(&p, &q, delta, true).unwrap();
        let basis: Vec<Neuron> = atoms.iter().map(|&(t, b)| neuron_2d(t, b, 2)).collect();
        let rhs = form.rhs(None).unwrap();
        let proj = project(&form, &rhs, &basis).unwrap();
        prop_assert!(proj.orthogonality <= 1e-9);
        let (gram, load) = gram_and_load(&form, &basis, &rhs).unwrap();
        let u = Expansion::new(basis.clone(), proj.coeffs.clone()).unwrap();
        for (i, g) in basis.iter().enumerate() {
            let r = form.rhs_functional(None, g).unwrap() - form.bilinear(&u, g);
            prop_assert!(r.abs() <= 1e-9 * load.norm().max(gram[(i, i)]));
        }
    }

    #[test]
    fn multiplier_is_fixed_when_trace_matches(lambda in prop::collection::vec(-5.0..5.0f64, 1..20), delta in 1e-4..1.0f64) {
        let g: Vec<f64> = lambda.iter().map(|l| (l * 1.7).sin()).collect();
        prop_assert_eq!(lambda_update(&lambda, &g, &g, delta), lambda.clone());
        let shifted: Vec<f64> = g.iter().map(|x| x + delta).collect();
        let next = lambda_update(&lambda, &shifted, &g, delta);
        for (a, b) in next.iter().zip(&lambda) {
            prop_assert!((a - b - 1.0).abs() <= 1e-9);
        }
    }
}

#[test]
fn delta_exponent_matches_rate_balance_form() {
    for k in 1..=4u32 {
        for d in 1..=3usize {
            // (2/3)(1/2 + (2k-1)/(2d)) and 1/3 + (2k-1)/(3d) both reduce to (d + 2k - 1)/(3d).
            let (num, den) = (d as u64 + 2 * k as u64 - 1, 3 * d as u64);
            let lhs = (2 * (d as u64 + 2 * k as u64 - 1), 2 * 3 * d as u64);
            assert_eq!(lhs.0 * den, num * lhs.1);
            let e = delta_exponent(k, d);
            assert!((e - num as f64 / den as f64).abs() <= f64::EPSILON * e);
        }
    }
}
