//! Synthetic checker scenes rendered under diagonal illuminants.
//!
//! A scene is an albedo field plus a ColorChecker whose patch albedos are the
//! standard patch colors. Rendering under illuminant `L` multiplies every
//! albedo channel-wise by `L`, so two renders of one scene give a ground
//! truth for re-illumination. Used by the test suites and for demo datasets.

use std::path::{Path, PathBuf};

use image::RgbImage;
use rand::Rng;

use crate::color::{LinearColor, PatchSet, GRID_COLS, GRID_ROWS};
use crate::error::Result;
use crate::io::{create_dir, save_png_gray, save_png_rgb};
use crate::patches::{format_annotation, grid_corners, CheckerAnnotation, Homography, Point};
use crate::pipeline::manifest::{ImageRecord, Manifest, Split};
use crate::raster::Raster;
use crate::transfer::ForegroundMask;

/// Albedo of the separators between patches.
const SEPARATOR_ALBEDO: f64 = 0.03;
/// Half-width of the separator band, in cell units.
const SEPARATOR_HALF_WIDTH: f64 = 0.08;

/// Smooth random albedo: a base color plus a few low-frequency waves.
#[derive(Debug, Clone)]
pub struct AlbedoField {
    base: [f64; 3],
    waves: Vec<([f64; 3], f64, f64, f64)>,
}

impl AlbedoField {
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let base = [
            rng.random_range(0.2..0.6),
            rng.random_range(0.2..0.6),
            rng.random_range(0.2..0.6),
        ];
        let waves = (0..4)
            .map(|_| {
                (
                    [
                        rng.random_range(-0.06..0.06),
                        rng.random_range(-0.06..0.06),
                        rng.random_range(-0.06..0.06),
                    ],
                    rng.random_range(0.01..0.08),
                    rng.random_range(0.01..0.08),
                    rng.random_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        Self { base, waves }
    }

    /// Albedo at pixel position `(x, y)`; always within `[0.02, 0.85]`.
    pub fn at(&self, x: f64, y: f64) -> LinearColor<f64> {
        let mut c = self.base;
        for (amp, kx, ky, phase) in &self.waves {
            let s = (kx * x + ky * y + phase).sin();
            for (ch, a) in c.iter_mut().zip(amp) {
                *ch += a * s;
            }
        }
        LinearColor::from_array(c.map(|v| v.clamp(0.02, 0.85)))
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub width: u32,
    pub height: u32,
    pub albedo: AlbedoField,
    pub checker: CheckerAnnotation<f64>,
    /// Elliptical foregrounds `(cx, cy, rx, ry)` in pixels, clear of the checker.
    pub foregrounds: Vec<(f64, f64, f64, f64)>,
}

impl SyntheticScene {
    /// A `width x height` scene (at least 200 x 140) with a slightly
    /// perspective-distorted checker in the bottom-right corner and two
    /// foreground ellipses in the left part of the frame.
    pub fn random<R: Rng>(id: &str, width: u32, height: u32, rng: &mut R) -> Self {
        assert!(width >= 200 && height >= 140);
        let (w, h) = (width as f64, height as f64);
        let cw = (w * 0.28).round();
        let ch = cw * GRID_ROWS as f64 / GRID_COLS as f64;
        let (x1, y1) = (w - 6.0, h - 6.0);
        let (x0, y0) = (x1 - cw, y1 - ch);
        let mut j = || rng.random_range(-2.5..2.5);
        let corners = [
            Point::new(x0 + j(), y0 + j()),
            Point::new(x1 + j(), y0 + j()),
            Point::new(x1 + j(), y1 + j()),
            Point::new(x0 + j(), y1 + j()),
        ];
        let checker = CheckerAnnotation::new(id, corners).expect("jittered rectangle is convex");
        let albedo = AlbedoField::random(rng);
        // Left strip up to x0 - margin survives the crop; keep foregrounds well inside it.
        let limit = x0 - 20.0;
        let foregrounds = (0..2)
            .map(|i| {
                let rx = rng.random_range(0.08..0.14) * w;
                let ry = rng.random_range(0.10..0.18) * h;
                let cx = rng.random_range(rx + 4.0..(limit - rx).max(rx + 5.0));
                let cy = if i == 0 {
                    rng.random_range(ry + 4.0..h / 2.0)
                } else {
                    rng.random_range(h / 2.0..h - ry - 4.0)
                };
                (cx, cy, rx, ry)
            })
            .collect();
        Self {
            width,
            height,
            albedo,
            checker,
            foregrounds,
        }
    }

    fn grid_map(&self) -> Homography<f64> {
        Homography::from_correspondences(&grid_corners(), self.checker.corners())
            .and_then(|h| h.inverse())
            .expect("checker quad is valid")
    }

    /// Albedo everywhere, with the checker's patches taking `standard` values.
    pub fn albedo_raster(&self, standard: &PatchSet<f64>) -> Raster<f64> {
        let to_grid = self.grid_map();
        Raster::from_fn(self.width, self.height, |x, y| {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let g = to_grid.apply(Point::new(px, py));
            if g.x >= 0.0 && g.x < GRID_COLS as f64 && g.y >= 0.0 && g.y < GRID_ROWS as f64 {
                let (col, row) = (g.x.floor(), g.y.floor());
                let (fu, fv) = (g.x - col, g.y - row);
                let inside = |f: f64| (SEPARATOR_HALF_WIDTH..1.0 - SEPARATOR_HALF_WIDTH).contains(&f);
                if inside(fu) && inside(fv) {
                    standard.get(row as usize * GRID_COLS + col as usize)
                } else {
                    LinearColor::splat(SEPARATOR_ALBEDO)
                }
            } else {
                self.albedo.at(px, py)
            }
        })
    }

    /// Linear render under a diagonal illuminant, clipped to `[0, 1]`.
    pub fn render_linear(&self, illuminant: LinearColor<f64>, standard: &PatchSet<f64>) -> Raster<f64> {
        let mut r = self.albedo_raster(standard);
        for p in r.pixels_mut() {
            *p = p.mul_channels(illuminant).clamp(0.0, 1.0);
        }
        r
    }

    pub fn render_srgb8(&self, illuminant: LinearColor<f64>, standard: &PatchSet<f64>) -> RgbImage {
        self.render_linear(illuminant, standard).to_srgb8()
    }

    pub fn foreground_mask(&self, index: usize) -> ForegroundMask {
        let (cx, cy, rx, ry) = self.foregrounds[index];
        ForegroundMask::from_fn(self.width, self.height, |x, y| {
            let dx = (x as f64 + 0.5 - cx) / rx;
            let dy = (y as f64 + 0.5 - cy) / ry;
            dx * dx + dy * dy <= 1.0
        })
        .expect("ellipse covers pixels")
    }
}

/// A plausible illuminant: channel gains in `[0.45, 1.0]` with the largest at 1.
pub fn random_illuminant<R: Rng>(rng: &mut R) -> LinearColor<f64> {
    let c = [
        rng.random_range(0.45..1.0),
        rng.random_range(0.45..1.0),
        rng.random_range(0.45..1.0),
    ];
    let m = c.iter().cloned().fold(0.0, f64::max);
    LinearColor::from_array(c.map(|v| v / m))
}

/// Writes a complete toy dataset (images, masks, annotation file, manifest)
/// into `dir` and returns the manifest path. The first `n_train` images are
/// assigned to the train split and the rest to test; every image gets
/// `fgs_per_image` (1 or 2) foreground masks.
pub fn write_toy_dataset<R: Rng>(
    dir: &Path,
    n_train: usize,
    n_test: usize,
    fgs_per_image: usize,
    refs_per_fg: usize,
    seed: u64,
    standard: &PatchSet<f64>,
    rng: &mut R,
) -> Result<PathBuf> {
    assert!((1..=2).contains(&fgs_per_image));
    create_dir(&dir.join("images"))?;
    create_dir(&dir.join("masks"))?;
    let mut manifest = Manifest::new(seed);
    manifest.references_per_foreground = refs_per_fg;
    manifest.annotations = Some("annotations.txt".into());
    let mut annotations = String::new();
    for i in 0..n_train + n_test {
        let id = format!("scene{i:02}");
        let scene = SyntheticScene::random(&id, 240, 160, rng);
        let img = scene.render_srgb8(random_illuminant(rng), standard);
        let img_rel = PathBuf::from(format!("images/{id}.png"));
        save_png_rgb(&dir.join(&img_rel), &img)?;
        let mut masks = Vec::new();
        for fg in 0..fgs_per_image {
            let rel = PathBuf::from(format!("masks/{id}_{fg}.png"));
            save_png_gray(&dir.join(&rel), &scene.foreground_mask(fg).to_gray8())?;
            masks.push(rel);
        }
        annotations.push_str(&format_annotation(&scene.checker));
        annotations.push('\n');
        manifest.images.push(ImageRecord {
            id,
            path: img_rel,
            masks,
            split: if i < n_train { Split::Train } else { Split::Test },
            corners: None,
            exclude: Vec::new(),
            reason: None,
        });
    }
    let ann_path = dir.join("annotations.txt");
    std::fs::write(&ann_path, annotations).map_err(|e| crate::error::Error::io(&ann_path, e))?;
    let path = dir.join("manifest.toml");
    manifest.save(&path)?;
    Ok(path)
}
