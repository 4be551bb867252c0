mod common;

use common::{round_trip, two_light_rmse, two_light_scene};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use relight_core::transfer::foreground_mae;
use relight_core::{
    builtin_reference_colors, fit_pair, transitive_transfer, Color, FeatureSpec, ForegroundMask,
    Image, Patches, DEFAULT_RIDGE,
};

#[test]
fn relit_foreground_matches_second_render() {
    for seed in 0..5 {
        let s = two_light_scene(seed, 360, 240);
        let rmse = two_light_rmse(&s);
        assert!(rmse < 0.03, "seed {seed}: rmse {rmse}");
    }
}

#[test]
fn self_reference_round_trip() {
    for seed in 100..105 {
        let s = two_light_scene(seed, 300, 200);
        let (mae, intact) = round_trip(&s);
        assert!(mae < 0.02, "seed {seed}: mae {mae}");
        assert!(intact);
    }
}

/// Round-trip error with every image patch perturbed by `sigma` times a fixed
/// set of standard normal draws.
fn noisy_round_trip(s: &common::TwoLightScene, draws: &[f64], sigma: f64) -> f64 {
    let standard = builtin_reference_colors::<f64>();
    let clean = relight_core::sample_patch_colors(&s.under_a, &s.scene.checker).unwrap();
    let noisy = Patches::new(
        clean
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let [r, g, b] = c.to_array();
                Color::new(
                    (r + sigma * draws[3 * i]).max(0.0),
                    (g + sigma * draws[3 * i + 1]).max(0.0),
                    (b + sigma * draws[3 * i + 2]).max(0.0),
                )
            })
            .collect(),
    )
    .unwrap();
    let t = fit_pair(&standard, &noisy, FeatureSpec::default(), DEFAULT_RIDGE).unwrap();
    let mask = s.scene.foreground_mask(0);
    // The perturbed patches stand in for a different checker reading of the
    // same image; the clean pair maps back.
    let tc = fit_pair(&standard, &clean, FeatureSpec::default(), DEFAULT_RIDGE).unwrap();
    let moved = transitive_transfer(&s.under_a, &mask, &t.forward, &tc.inverse).unwrap();
    foreground_mae(&moved, &s.under_a, &mask).unwrap()
}

#[test]
fn error_grows_with_patch_noise() {
    let s = two_light_scene(7, 300, 200);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let draws: Vec<f64> = (0..72).map(|_| normal.sample(&mut rng)).collect();
    let errs: Vec<f64> = [0.0, 0.005, 0.01].iter().map(|&sd| noisy_round_trip(&s, &draws, sd)).collect();
    assert!(errs[0] <= errs[1] && errs[1] <= errs[2], "{errs:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn background_is_never_touched(seed in any::<u64>(), cx in 2u32..30, cy in 2u32..20, r in 1u32..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = Image::from_fn(32, 24, |_, _| {
            use rand::Rng;
            Color::new(rng.random(), rng.random(), rng.random())
        });
        let mask = ForegroundMask::from_fn(32, 24, |x, y| {
            x.abs_diff(cx).pow(2) + y.abs_diff(cy).pow(2) <= r * r
        }).unwrap();
        let standard = builtin_reference_colors::<f64>();
        let other = standard.try_map(|c| c.scale(0.6)).unwrap();
        let t = fit_pair(&standard, &other, FeatureSpec::default(), DEFAULT_RIDGE).unwrap();
        let out = transitive_transfer(&img, &mask, &t.forward, &t.forward).unwrap();
        for ((p, q), fg) in out.pixels().iter().zip(img.pixels()).zip(mask.bits()) {
            if !fg {
                prop_assert_eq!(p.to_array().map(f64::to_bits), q.to_array().map(f64::to_bits));
            } else {
                prop_assert!(p.is_valid() && p.to_array().iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }
}
