mod common;

use common::brute_force_crop;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relight_core::compositing::crop_candidates;
use relight_core::error::Error;
use relight_core::{crop_excluding_checker, PixelRect};

/// Random image on a 20 x 20 lattice with a bbox whose corners sit on it.
fn instance(rng: &mut ChaCha8Rng) -> (u32, u32, PixelRect, u32) {
    let step = rng.random_range(1..=8u32);
    let (w, h) = (20 * step, 20 * step);
    let (a, b) = (rng.random_range(0..20u32), rng.random_range(0..20u32));
    let (c, d) = (rng.random_range(0..20u32), rng.random_range(0..20u32));
    let (x0, x1) = (a.min(b), a.max(b) + 1);
    let (y0, y1) = (c.min(d), c.max(d) + 1);
    (w, h, PixelRect::new(x0 * step, y0 * step, x1 * step, y1 * step), step)
}

#[test]
fn matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut dominated = 0;
    for _ in 0..200 {
        let (w, h, bbox, step) = instance(&mut rng);
        let oracle = brute_force_crop(w, h, bbox, step);
        let best_area = oracle.map_or(0, |r| r.area());
        match crop_excluding_checker(w, h, bbox, 0.25) {
            Ok(r) => {
                assert!(!r.intersects(&bbox));
                assert!(r.fits_within(w, h));
                assert_eq!(r.area(), best_area, "{w}x{h} {bbox:?}");
            }
            Err(Error::CheckerDominates { fraction, .. }) => {
                dominated += 1;
                assert!((best_area as f64) < 0.25 * (w * h) as f64);
                assert!((fraction - best_area as f64 / (w * h) as f64).abs() < 1e-12);
            }
            Err(e) => panic!("{e}"),
        }
    }
    assert!(dominated < 200);
}

proptest! {
    #[test]
    fn never_overlaps_bbox(w in 1u32..3000, h in 1u32..3000, a in 0.0..1.0f64, b in 0.0..1.0f64, c in 0.0..1.0f64, d in 0.0..1.0f64) {
        let (x0, x1) = ((a.min(b) * w as f64) as u32, (a.max(b) * w as f64).ceil() as u32);
        let (y0, y1) = ((c.min(d) * h as f64) as u32, (c.max(d) * h as f64).ceil() as u32);
        let bbox = PixelRect::new(x0, y0, x1.max(x0 + 1).min(w), y1.max(y0 + 1).min(h));
        prop_assume!(!bbox.is_empty());
        if let Ok(r) = crop_excluding_checker(w, h, bbox, 0.0) {
            prop_assert!(!r.intersects(&bbox));
            for cand in crop_candidates(w, h, bbox) {
                prop_assert!(r.area() >= cand.area());
            }
        }
    }
}
