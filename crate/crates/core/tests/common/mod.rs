//! Independent oracles shared by the integration and acceptance suites.
#![allow(dead_code)]

use relight_core::{Color, Patches, PixelRect};

/// Closed-form projective map from the unit square onto a quad
/// (corners in (0,0), (1,0), (1,1), (0,1) order), returned row-major.
pub fn unit_square_to_quad(q: &[(f64, f64); 4]) -> [f64; 9] {
    let [(x0, y0), (x1, y1), (x2, y2), (x3, y3)] = *q;
    let sx = x0 - x1 + x2 - x3;
    let sy = y0 - y1 + y2 - y3;
    if sx.abs() < 1e-12 && sy.abs() < 1e-12 {
        return [x1 - x0, x2 - x1, x0, y1 - y0, y2 - y1, y0, 0.0, 0.0, 1.0];
    }
    let (dx1, dx2, dy1, dy2) = (x1 - x2, x3 - x2, y1 - y2, y3 - y2);
    let den = dx1 * dy2 - dx2 * dy1;
    let g = (sx * dy2 - dx2 * sy) / den;
    let h = (dx1 * sy - sx * dy1) / den;
    [
        x1 - x0 + g * x1,
        x3 - x0 + h * x3,
        x0,
        y1 - y0 + g * y1,
        y3 - y0 + h * y3,
        y0,
        g,
        h,
        1.0,
    ]
}

/// Grid point `(u, v)` in `[0,6] x [0,4]` mapped onto the quad.
pub fn grid_to_quad(q: &[(f64, f64); 4], u: f64, v: f64) -> (f64, f64) {
    let m = unit_square_to_quad(q);
    let (s, t) = (u / 6.0, v / 4.0);
    let w = m[6] * s + m[7] * t + m[8];
    ((m[0] * s + m[1] * t + m[2]) / w, (m[3] * s + m[4] * t + m[5]) / w)
}

/// Degree-2-with-bias features, written out independently of the crate.
pub fn features(c: &Color) -> [f64; 10] {
    [c.r, c.g, c.b, c.r * c.r, c.g * c.g, c.b * c.b, c.r * c.g, c.g * c.b, c.r * c.b, 1.0]
}

/// Accelerated gradient descent (with adaptive restart) on
/// Σ‖M φᵢ − tᵢ‖² + λ‖M‖².
pub fn gradient_descent_fit(source: &Patches, target: &Patches, ridge: f64) -> [[f64; 10]; 3] {
    let phis: Vec<[f64; 10]> = source.iter().map(features).collect();
    let targets: Vec<[f64; 3]> = target.iter().map(|c| c.to_array()).collect();
    // trace(ΦᵀΦ) bounds the largest eigenvalue.
    let trace: f64 = phis.iter().flat_map(|p| p.iter().map(|v| v * v)).sum();
    let step = 1.0 / (2.0 * (trace + ridge));
    let grad = |m: &[[f64; 10]; 3]| {
        let mut g = [[0.0; 10]; 3];
        for (phi, t) in phis.iter().zip(&targets) {
            for ch in 0..3 {
                let pred: f64 = (0..10).map(|j| m[ch][j] * phi[j]).sum();
                let r = pred - t[ch];
                for j in 0..10 {
                    g[ch][j] += 2.0 * r * phi[j];
                }
            }
        }
        for ch in 0..3 {
            for j in 0..10 {
                g[ch][j] += 2.0 * ridge * m[ch][j];
            }
        }
        g
    };
    let mut x = [[0.0; 10]; 3];
    let mut y = x;
    let mut t = 1.0f64;
    for _ in 0..5_000_000 {
        let g = grad(&y);
        let gnorm: f64 = g.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm < 1e-11 {
            return y;
        }
        let mut next = y;
        for ch in 0..3 {
            for j in 0..10 {
                next[ch][j] -= step * g[ch][j];
            }
        }
        let uphill = (0..3).flat_map(|ch| (0..10).map(move |j| (ch, j))).map(|(ch, j)| g[ch][j] * (next[ch][j] - x[ch][j])).sum::<f64>() > 0.0;
        let t_next = if uphill { 1.0 } else { (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0 };
        let beta = if uphill { 0.0 } else { (t - 1.0) / t_next };
        for ch in 0..3 {
            for j in 0..10 {
                y[ch][j] = next[ch][j] + beta * (next[ch][j] - x[ch][j]);
            }
        }
        t = t_next;
        x = next;
    }
    panic!("gradient descent did not converge");
}

/// Largest bbox-free rectangle by exhaustive search over every rectangle
/// whose corners lie on a `step` lattice.
pub fn brute_force_crop(width: u32, height: u32, bbox: PixelRect, step: u32) -> Option<PixelRect> {
    let xs: Vec<u32> = (0..=width).step_by(step as usize).collect();
    let ys: Vec<u32> = (0..=height).step_by(step as usize).collect();
    let mut best: Option<PixelRect> = None;
    for &x0 in &xs {
        for &x1 in xs.iter().filter(|&&x| x > x0) {
            for &y0 in &ys {
                for &y1 in ys.iter().filter(|&&y| y > y0) {
                    let r = PixelRect { x0, y0, x1, y1 };
                    if r.intersects(&bbox) {
                        continue;
                    }
                    if best.is_none_or(|b| r.area() > b.area()) {
                        best = Some(r);
                    }
                }
            }
        }
    }
    best
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relight_core::synth::{random_illuminant, SyntheticScene};
use relight_core::transfer::{foreground_mae, foreground_rmse};
use relight_core::{
    builtin_reference_colors, fit_pair, sample_patch_colors, transitive_transfer, FeatureSpec,
    Image, DEFAULT_RIDGE,
};

/// One scene rendered under two illuminants, both passed through 8-bit sRGB.
pub struct TwoLightScene {
    pub scene: SyntheticScene,
    pub under_a: Image,
    pub under_b: Image,
}

pub fn two_light_scene(seed: u64, width: u32, height: u32) -> TwoLightScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let standard = builtin_reference_colors::<f64>();
    let scene = SyntheticScene::random("scene", width, height, &mut rng);
    let (la, lb) = (random_illuminant(&mut rng), random_illuminant(&mut rng));
    let under_a = Image::from_srgb8(&scene.render_srgb8(la, &standard));
    let under_b = Image::from_srgb8(&scene.render_srgb8(lb, &standard));
    TwoLightScene { scene, under_a, under_b }
}

/// Foreground RMSE between `a` transferred into condition b and the direct
/// render under b, taken over every foreground of the scene.
pub fn two_light_rmse(s: &TwoLightScene) -> f64 {
    let standard = builtin_reference_colors::<f64>();
    let spec = FeatureSpec::default();
    let pa = sample_patch_colors(&s.under_a, &s.scene.checker).unwrap();
    let pb = sample_patch_colors(&s.under_b, &s.scene.checker).unwrap();
    let ta = fit_pair(&standard, &pa, spec, DEFAULT_RIDGE).unwrap();
    let tb = fit_pair(&standard, &pb, spec, DEFAULT_RIDGE).unwrap();
    (0..s.scene.foregrounds.len())
        .map(|i| {
            let mask = s.scene.foreground_mask(i);
            let moved = transitive_transfer(&s.under_a, &mask, &ta.forward, &tb.inverse).unwrap();
            foreground_rmse(&moved, &s.under_b, &mask).unwrap()
        })
        .fold(0.0, f64::max)
}

/// Self-reference transfer of every foreground: worst MAE and whether all
/// background pixels came back bit-identical.
pub fn round_trip(s: &TwoLightScene) -> (f64, bool) {
    let standard = builtin_reference_colors::<f64>();
    let pa = sample_patch_colors(&s.under_a, &s.scene.checker).unwrap();
    let ta = fit_pair(&standard, &pa, FeatureSpec::default(), DEFAULT_RIDGE).unwrap();
    let mut worst = 0.0f64;
    let mut background_intact = true;
    for i in 0..s.scene.foregrounds.len() {
        let mask = s.scene.foreground_mask(i);
        let back = transitive_transfer(&s.under_a, &mask, &ta.forward, &ta.inverse).unwrap();
        worst = worst.max(foreground_mae(&back, &s.under_a, &mask).unwrap());
        background_intact &= back
            .pixels()
            .iter()
            .zip(s.under_a.pixels())
            .zip(mask.bits())
            .filter(|(_, fg)| !**fg)
            .all(|((p, q), _)| p.to_array().map(f64::to_bits) == q.to_array().map(f64::to_bits));
    }
    (worst, background_intact)
}

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Five train images with two foregrounds each and three references per
/// foreground: 30 pairs.
pub fn toy_dataset(dir: &Path, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(0x70e);
    let standard = builtin_reference_colors::<f64>();
    relight_core::synth::write_toy_dataset(dir, 5, 0, 2, 3, seed, &standard, &mut rng).unwrap()
}

/// Every file under `dir`, keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}
