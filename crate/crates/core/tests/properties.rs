use parasemi::mild::{mild_solve, DeterministicProblem, Forcing};
use parasemi::profile::{ModalFunction, ProfileKind, TimeProfile};
use parasemi::spaces::{
    beta_kernel_closed_form, beta_kernel_integral, weighted_holder_norm, HolderParams, PathSample, TimeGrid,
};
use parasemi::spectral::{log_grid, SpectralOperator};
use proptest::prelude::*;

fn params() -> HolderParams {
    HolderParams::new(0.8, 0.3, 1.0).unwrap()
}

prop_compose! {
    fn coeffs(n: usize)(v in prop::collection::vec(-3.0f64..3.0, n)) -> Vec<f64> { v }
}

prop_compose! {
    fn sorted_spectrum()(mut v in prop::collection::vec(0.01f64..1e3, 1..40)) -> Vec<f64> {
        v.sort_by(f64::total_cmp);
        v
    }
}

/// `c₁ t^{β-1} + c₂ t^{β-1+σ} + c₃ sin(3t)` per mode.
fn sample(grid: &TimeGrid, c: &[f64], weights: &[f64]) -> PathSample {
    let (b, s) = (params().beta, params().sigma);
    let n = weights.len();
    PathSample::from_fn(grid.clone(), weights.to_vec(), |t| {
        (0..n)
            .map(|k| c[3 * k] * t.powf(b - 1.0) + c[3 * k + 1] * t.powf(b - 1.0 + s) + c[3 * k + 2] * (3.0 * t).sin())
            .collect()
    })
    .unwrap()
}

fn norm(p: &PathSample) -> f64 {
    weighted_holder_norm(p, &params()).unwrap().total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn holder_norm_is_homogeneous(c in coeffs(6), k in -5.0f64..5.0) {
        let grid = TimeGrid::graded(1.0, 32, 2.0).unwrap();
        let p = sample(&grid, &c, &[1.0, 0.5]);
        let lhs = norm(&p.scaled(k));
        let rhs = k.abs() * norm(&p);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
    }

    #[test]
    fn holder_norm_triangle_inequality(c in coeffs(6), d in coeffs(6)) {
        let grid = TimeGrid::graded(1.0, 32, 2.0).unwrap();
        let w = [1.0, 2.0];
        let (p, q) = (sample(&grid, &c, &w), sample(&grid, &d, &w));
        let sum = norm(&p.add(&q).unwrap());
        prop_assert!(sum <= (norm(&p) + norm(&q)) * (1.0 + 1e-12));
    }

    #[test]
    fn refinement_never_decreases_the_norm(c in coeffs(3), m in 8usize..40) {
        // Every node of the coarse grid is a node of the refined one.
        let coarse = TimeGrid::new((0..=m).map(|i| i as f64 / m as f64).collect()).unwrap();
        let mut fine: Vec<f64> = coarse.nodes().to_vec();
        fine.extend(coarse.nodes().windows(2).map(|w| 0.5 * (w[0] + w[1])));
        fine.sort_by(f64::total_cmp);
        let fine = TimeGrid::new(fine).unwrap();
        let a = norm(&sample(&coarse, &c, &[1.0]));
        let b = norm(&sample(&fine, &c, &[1.0]));
        prop_assert!(b >= a * (1.0 - 1e-12), "{a} > {b}");
    }

    #[test]
    fn holder_norm_invariant_under_mode_permutation(c in coeffs(9), w in prop::collection::vec(0.1f64..4.0, 3)) {
        let grid = TimeGrid::graded(1.0, 24, 2.0).unwrap();
        let p = sample(&grid, &c, &w);
        let perm = [2usize, 0, 1];
        let pw: Vec<f64> = perm.iter().map(|&k| w[k]).collect();
        let data: Vec<f64> = (0..p.len())
            .flat_map(|j| perm.iter().map(|&k| p.value(j)[k]).collect::<Vec<_>>())
            .collect();
        let q = PathSample::from_flat(grid.clone(), pw, data).unwrap();
        let (a, b) = (norm(&p), norm(&q));
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
    }

    #[test]
    fn semigroup_bound_never_violated(eig in sorted_spectrum(), theta in 0.0f64..2.0) {
        let op = SpectralOperator::with_unit_weights(eig).unwrap();
        let p = op.semigroup_bound_profile(theta, &log_grid(1e-4, 1e3, 256)).unwrap();
        prop_assert!(!p.violation);
    }

    #[test]
    fn semigroup_property(eig in sorted_spectrum(), s in 0.0f64..2.0, t in 0.0f64..2.0) {
        let op = SpectralOperator::with_unit_weights(eig.clone()).unwrap();
        let v = vec![1.0; eig.len()];
        let two_step = op.semigroup_apply(t, 0.0, &op.semigroup_apply(s, 0.0, &v).unwrap()).unwrap();
        let one_step = op.semigroup_apply(s + t, 0.0, &v).unwrap();
        for (a, b) in two_step.iter().zip(&one_step) {
            prop_assert!((a - b).abs() <= 1e-14 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn beta_kernel_matches_closed_form(a in 0.01f64..0.99, b in 0.01f64..0.99, s in 0.0f64..3.0, len in 0.001f64..10.0) {
        let q = beta_kernel_integral(a, b, s, s + len).unwrap();
        let c = beta_kernel_closed_form(a, b, s, s + len).unwrap();
        prop_assert!((q - c).abs() <= 1e-8 * c);
    }
}

fn problem(xi: Vec<f64>, f: Vec<f64>, kind: ProfileKind) -> DeterministicProblem {
    let op = SpectralOperator::with_unit_weights(vec![0.5, 2.0, 9.0]).unwrap();
    let p = params();
    let profile = TimeProfile::from_kind(kind, p.beta, p.sigma).unwrap();
    DeterministicProblem::new(op, -0.25, Forcing::Modal(ModalFunction::new(f, profile)), xi, p).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mild_solution_superposition(x1 in coeffs(3), x2 in coeffs(3), f1 in coeffs(3), f2 in coeffs(3)) {
        let grid = TimeGrid::graded(1.0, 32, 2.0).unwrap();
        let kind = ProfileKind::PowerPlusHolder;
        let sum = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<_>>();
        let a = mild_solve(&problem(x1.clone(), f1.clone(), kind), &grid).unwrap();
        let b = mild_solve(&problem(x2.clone(), f2.clone(), kind), &grid).unwrap();
        let c = mild_solve(&problem(sum(&x1, &x2), sum(&f1, &f2), kind), &grid).unwrap();
        for ((u, v), w) in a.x.data().iter().zip(b.x.data()).zip(c.x.data()) {
            prop_assert!((u + v - w).abs() <= 1e-12 * (1.0 + w.abs()));
        }
    }
}
