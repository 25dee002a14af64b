use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

use conewalk::geometry::positively_spans;
use conewalk::laplace::{
    analyze, classify_drift, laplace_eval, minimize_over_dual, tilt_distribution, MinimizeOptions,
};
use conewalk::model::{ConeSpec, Step, StepDistribution};

/// Random positively spanning law on `{-2..2}^d` with integer weights.
fn law(max_dim: usize) -> impl Strategy<Value = StepDistribution> {
    (1..=max_dim)
        .prop_flat_map(|d| {
            let vector = proptest::collection::vec(-2i64..=2, d).prop_filter("nonzero", |v| v.iter().any(|&x| x != 0));
            (Just(d), proptest::collection::btree_map(vector, 1i64..=9, 2..=9))
        })
        .prop_filter("positively spanning", |(d, steps)| {
            positively_spans(&steps.keys().cloned().collect::<Vec<_>>(), *d)
        })
        .prop_map(|(d, steps)| {
            let total: i64 = steps.values().sum();
            let steps = steps
                .into_iter()
                .map(|(v, w)| Step::new(v, BigRational::new(BigInt::from(w), BigInt::from(total))))
                .collect();
            StepDistribution::new(d, steps).unwrap()
        })
}

fn wedge() -> ConeSpec {
    ConeSpec::polyhedral(2, vec![vec![0.0, 1.0], vec![1.0, -1.0]]).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn orthant_minimum_satisfies_kkt(dist in law(3)) {
        let cone = ConeSpec::orthant(dist.dimension());
        let min = minimize_over_dual(&dist, &cone, MinimizeOptions::default()).unwrap();
        let ev = laplace_eval(&dist, &min.t0).unwrap();
        let scale = ev.gradient.iter().fold(1.0f64, |a, g| a.max(g.abs()));
        for (t, g) in min.t0.iter().zip(&ev.gradient) {
            prop_assert!(*t >= 0.0);
            prop_assert!(*g >= -1e-9 * scale, "gradient {g} at t {t}");
            prop_assert!((t * g).abs() <= 1e-9 * scale);
        }
        prop_assert!((ev.value - min.rho).abs() <= 1e-12 * min.rho);
    }

    #[test]
    fn wedge_minimum_satisfies_kkt(dist in law(2).prop_filter("planar", |d| d.dimension() == 2)) {
        let cone = wedge();
        let min = minimize_over_dual(&dist, &cone, MinimizeOptions::default()).unwrap();
        let ev = laplace_eval(&dist, &min.t0).unwrap();
        // The wedge is spanned by (1, 0) and (1, 1); its dual by the normals.
        for ray in [[1.0, 0.0], [1.0, 1.0]] {
            prop_assert!(dot(&min.t0, &ray) >= -1e-9);
        }
        for normal in cone.normals() {
            prop_assert!(dot(normal, &ev.gradient) >= -1e-9);
        }
        prop_assert!(dot(&min.t0, &ev.gradient).abs() <= 1e-9);
    }

    #[test]
    fn rho_is_one_exactly_when_drift_is_in_the_cone(dist in law(3), use_wedge in any::<bool>()) {
        let cone = if use_wedge && dist.dimension() == 2 { wedge() } else { ConeSpec::orthant(dist.dimension()) };
        let analysis = analyze(&dist, &cone, MinimizeOptions::default()).unwrap();
        let in_cone = classify_drift(&dist.drift(), &cone).in_cone();
        prop_assert!(analysis.rho <= 1.0 + 1e-15);
        prop_assert_eq!(in_cone, analysis.rho > 1.0 - 1e-9, "rho {}", analysis.rho);
    }

    #[test]
    fn transform_is_convex(dist in law(3), a in proptest::collection::vec(-1.0f64..1.0, 3), b in proptest::collection::vec(-1.0f64..1.0, 3), s in 0.0f64..1.0) {
        let d = dist.dimension();
        let (a, b) = (&a[..d], &b[..d]);
        let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| s * x + (1.0 - s) * y).collect();
        let la = laplace_eval(&dist, a).unwrap().value;
        let lb = laplace_eval(&dist, b).unwrap().value;
        let ev = laplace_eval(&dist, &mid).unwrap();
        prop_assert!(ev.value <= s * la + (1.0 - s) * lb + 1e-12 * (la + lb));
        let h = nalgebra::DMatrix::from_fn(d, d, |i, j| ev.hessian[i][j]);
        prop_assert!((&h - h.transpose()).amax() <= 1e-12 * h.amax());
        let lowest = h.symmetric_eigenvalues().min();
        prop_assert!(lowest >= -1e-12 * h.amax(), "eigenvalue {lowest}");
    }

    #[test]
    fn derivatives_match_finite_differences(dist in law(3), t in proptest::collection::vec(-1.0f64..1.0, 3)) {
        let d = dist.dimension();
        let t = &t[..d];
        let h = 1e-5;
        let ev = laplace_eval(&dist, t).unwrap();
        for i in 0..d {
            let shifted = |delta: f64| {
                let mut u = t.to_vec();
                u[i] += delta;
                laplace_eval(&dist, &u).unwrap()
            };
            let (plus, minus) = (shifted(h), shifted(-h));
            let fd = (plus.value - minus.value) / (2.0 * h);
            prop_assert!((fd - ev.gradient[i]).abs() <= 1e-6 * ev.value, "gradient {i}: {fd} vs {}", ev.gradient[i]);
            for j in 0..d {
                let fd = (plus.gradient[j] - minus.gradient[j]) / (2.0 * h);
                prop_assert!((fd - ev.hessian[i][j]).abs() <= 1e-6 * ev.value, "hessian {i}{j}");
            }
        }
    }

    #[test]
    fn tilted_law_has_minimum_at_origin(dist in law(3)) {
        let cone = ConeSpec::orthant(dist.dimension());
        let analysis = analyze(&dist, &cone, MinimizeOptions::default()).unwrap();
        let tilted = tilt_distribution(&dist, &analysis.t0).unwrap();
        let again = minimize_over_dual(&tilted, &cone, MinimizeOptions::default()).unwrap();
        prop_assert!(again.t0.iter().all(|t| t.abs() <= 1e-7), "{:?}", again.t0);
        prop_assert!((again.rho - 1.0).abs() <= 1e-10);
        prop_assert!((tilted.rho - analysis.rho).abs() <= 1e-12);
    }
}
