//! Normal-equation fits compared with an independent accelerated
//! gradient-descent minimizer of the same ridge objective.

mod common;

use common::gradient_descent_fit;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relight_core::fitting::ridge_objective;
use relight_core::{fit_transform, Color, FeatureSpec, Patches, Transform};

fn random_patches(rng: &mut ChaCha8Rng) -> Patches {
    Patches::new(
        (0..24)
            .map(|_| Color::new(rng.random_range(0.02..0.98), rng.random_range(0.02..0.98), rng.random_range(0.02..0.98)))
            .collect(),
    )
    .unwrap()
}

#[test]
fn normal_equations_match_gradient_descent() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let spec = FeatureSpec::default();
    for _ in 0..10 {
        let (s, t) = (random_patches(&mut rng), random_patches(&mut rng));
        let fitted = fit_transform(&s, &t, spec, 1e-4).unwrap();
        let oracle = gradient_descent_fit(&s, &t, 1e-4);
        for ch in 0..3 {
            for j in 0..10 {
                let (a, b) = (fitted.entry(ch, j), oracle[ch][j]);
                assert!((a - b).abs() < 1e-5, "entry ({ch},{j}): {a} vs {b}");
            }
        }
    }
}

#[test]
fn fitted_matrix_is_first_order_optimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let spec = FeatureSpec::default();
    for ridge in [0.0, 1e-4, 1e-2] {
        let (s, t) = (random_patches(&mut rng), random_patches(&mut rng));
        let fitted = fit_transform(&s, &t, spec, ridge).unwrap();
        let base = ridge_objective(&fitted, &s, &t, ridge);
        for idx in 0..30 {
            for delta in [1e-3, -1e-3] {
                let mut m = fitted.matrix().to_vec();
                m[idx] += delta;
                let perturbed = Transform::new(m, spec).unwrap();
                assert!(ridge_objective(&perturbed, &s, &t, ridge) >= base);
            }
        }
    }
}

fn patch_strategy() -> impl Strategy<Value = Patches> {
    prop::collection::vec((0.02..0.98f64, 0.02..0.98f64, 0.02..0.98f64), 24)
        .prop_map(|v| Patches::new(v.into_iter().map(|(r, g, b)| Color::new(r, g, b)).collect()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frobenius_norm_shrinks_with_ridge(s in patch_strategy(), t in patch_strategy()) {
        let spec = FeatureSpec::default();
        let mut last = f64::INFINITY;
        for ridge in [0.0, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0] {
            let n = fit_transform(&s, &t, spec, ridge).unwrap().frobenius_norm();
            prop_assert!(n <= last * (1.0 + 1e-9), "ridge {ridge}: {n} > {last}");
            last = n;
        }
    }

    #[test]
    fn self_fit_reproduces_patches(p in patch_strategy()) {
        let t = fit_transform(&p, &p, FeatureSpec::default(), 0.0).unwrap();
        for c in p.iter() {
            let q = t.apply(*c);
            for (a, b) in q.to_array().iter().zip(c.to_array()) {
                prop_assert!((a - b).abs() < 1e-6);
            }
        }
    }
}
