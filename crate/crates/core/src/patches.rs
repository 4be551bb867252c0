//! Checker annotations, the grid-to-image homography and patch color sampling.
//!
//! The checker is modelled as a 6 x 4 grid in "grid coordinates": column `c`
//! and row `r` of the patch layout occupy `[c, c+1] x [r, r+1]` inside
//! `[0, 6] x [0, 4]`. An annotation gives the image positions of the four
//! outer corners, and the homography carries grid coordinates into pixels.

use std::path::Path;

use crate::color::{LinearColor, PatchSet, GRID_COLS, GRID_ROWS, PATCH_COUNT};
use crate::error::{Error, Result};
use crate::linalg::solve_gaussian;
use crate::raster::{PixelRect, Raster};
use crate::scalar::Real;

/// Sample points per cell along each axis.
pub const SAMPLE_LATTICE: usize = 16;
/// Fraction of a cell skipped on every side before sampling.
pub const CELL_MARGIN: f64 = 0.25;
/// Fraction of samples dropped from each tail, per channel, before averaging.
pub const TRIM_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point<T> {
    pub const fn new(x: T, y: T) -> Self {
        Self { x, y }
    }
}

/// Image-space corners of a checker's outer boundary.
///
/// Corners are ordered top-left, top-right, bottom-right, bottom-left with the
/// checker in canonical orientation: "dark skin" at the top-left corner and
/// "black" at the bottom-right.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckerAnnotation<T> {
    pub image_id: String,
    corners: [Point<T>; 4],
}

impl<T: Real> CheckerAnnotation<T> {
    /// Validates that the corners form a strictly convex quadrilateral with
    /// positive orientation in image coordinates (y pointing down).
    pub fn new(image_id: impl Into<String>, corners: [Point<T>; 4]) -> Result<Self> {
        let image_id = image_id.into();
        if !is_strictly_convex(&corners) {
            return Err(Error::DegenerateQuad { image_id });
        }
        Ok(Self { image_id, corners })
    }

    #[inline]
    pub fn corners(&self) -> &[Point<T>; 4] {
        &self.corners
    }

    /// Checks every corner lies within `[0, width] x [0, height]`.
    pub fn check_bounds(&self, width: u32, height: u32) -> Result<()> {
        let (w, h) = (T::lit(width as f64), T::lit(height as f64));
        for p in &self.corners {
            if !(p.x >= T::zero() && p.x <= w && p.y >= T::zero() && p.y <= h) {
                return Err(Error::CornerOutOfBounds {
                    image_id: self.image_id.clone(),
                    x: p.x.to_f64_lossy(),
                    y: p.y.to_f64_lossy(),
                    width,
                    height,
                });
            }
        }
        Ok(())
    }

    /// Cyclically shifts the corner list: `steps = 2` describes the same
    /// physical checker rotated by a half turn, which reverses patch order.
    pub fn rotated(&self, steps: usize) -> Self {
        let corners = std::array::from_fn(|i| self.corners[(i + steps) % 4]);
        Self {
            image_id: self.image_id.clone(),
            corners,
        }
    }

    pub fn translated(&self, dx: T, dy: T) -> Self {
        Self {
            image_id: self.image_id.clone(),
            corners: self.corners.map(|p| Point::new(p.x + dx, p.y + dy)),
        }
    }

    /// Integer bounding box of the corners grown by `margin` pixels and
    /// clamped to the image.
    pub fn bounding_box(&self, margin: u32, width: u32, height: u32) -> PixelRect {
        let m = T::lit(margin as f64);
        let (mut lo_x, mut lo_y) = (T::infinity(), T::infinity());
        let (mut hi_x, mut hi_y) = (T::neg_infinity(), T::neg_infinity());
        for p in &self.corners {
            lo_x = lo_x.min(p.x);
            lo_y = lo_y.min(p.y);
            hi_x = hi_x.max(p.x);
            hi_y = hi_y.max(p.y);
        }
        let clamp = |v: T, hi: u32| -> u32 {
            v.max(T::zero())
                .min(T::lit(hi as f64))
                .to_u32()
                .unwrap_or(0)
        };
        PixelRect::new(
            clamp((lo_x - m).floor(), width),
            clamp((lo_y - m).floor(), height),
            clamp((hi_x + m).ceil(), width),
            clamp((hi_y + m).ceil(), height),
        )
    }
}

fn is_strictly_convex<T: Real>(c: &[Point<T>; 4]) -> bool {
    if c.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return false;
    }
    let scale = c
        .iter()
        .flat_map(|p| [p.x.abs(), p.y.abs()])
        .fold(T::one(), T::max);
    let tol = scale * scale * T::epsilon() * T::lit(16.0);
    (0..4).all(|i| {
        let (a, b, d) = (c[i], c[(i + 1) % 4], c[(i + 2) % 4]);
        let cross = (b.x - a.x) * (d.y - b.y) - (b.y - a.y) * (d.x - b.x);
        cross > tol
    })
}

/// Projective map, stored row-major with the bottom-right entry fixed to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography<T> {
    m: [T; 9],
}

impl<T: Real> Homography<T> {
    /// Normalizes `m` so that `m[8] == 1` and rejects near-singular matrices.
    pub fn from_matrix(m: [T; 9]) -> Option<Self> {
        if m[8].abs() <= T::epsilon() || m.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let s = m[8];
        let h = Self { m: m.map(|v| v / s) };
        if h.determinant().abs() > T::lit(1e-12) {
            Some(h)
        } else {
            None
        }
    }

    #[inline]
    pub fn matrix(&self) -> &[T; 9] {
        &self.m
    }

    pub fn determinant(&self) -> T {
        let m = &self.m;
        m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
            + m[2] * (m[3] * m[7] - m[4] * m[6])
    }

    pub fn inverse(&self) -> Option<Self> {
        let m = &self.m;
        let adj = [
            m[4] * m[8] - m[5] * m[7],
            m[2] * m[7] - m[1] * m[8],
            m[1] * m[5] - m[2] * m[4],
            m[5] * m[6] - m[3] * m[8],
            m[0] * m[8] - m[2] * m[6],
            m[2] * m[3] - m[0] * m[5],
            m[3] * m[7] - m[4] * m[6],
            m[1] * m[6] - m[0] * m[7],
            m[0] * m[4] - m[1] * m[3],
        ];
        Self::from_matrix(adj)
    }

    #[inline]
    pub fn apply(&self, p: Point<T>) -> Point<T> {
        let m = &self.m;
        let w = m[6] * p.x + m[7] * p.y + m[8];
        Point::new(
            (m[0] * p.x + m[1] * p.y + m[2]) / w,
            (m[3] * p.x + m[4] * p.y + m[5]) / w,
        )
    }

    /// Exact four-point fit `src[i] -> dst[i]`, solved in normalized
    /// destination coordinates for conditioning.
    pub fn from_correspondences(src: &[Point<T>; 4], dst: &[Point<T>; 4]) -> Option<Self> {
        let four = T::lit(4.0);
        let cx = dst.iter().map(|p| p.x).sum::<T>() / four;
        let cy = dst.iter().map(|p| p.y).sum::<T>() / four;
        let mean_dist = dst
            .iter()
            .map(|p| ((p.x - cx).powi(2) + (p.y - cy).powi(2)).sqrt())
            .sum::<T>()
            / four;
        if !(mean_dist > T::zero()) {
            return None;
        }
        let s = T::lit(std::f64::consts::SQRT_2) / mean_dist;

        let mut a = vec![T::zero(); 64];
        let mut b = vec![T::zero(); 8];
        for (i, (p, q)) in src.iter().zip(dst).enumerate() {
            let (u, v) = (p.x, p.y);
            let (x, y) = ((q.x - cx) * s, (q.y - cy) * s);
            let r0 = 2 * i * 8;
            let r1 = r0 + 8;
            a[r0..r0 + 8].copy_from_slice(&[u, v, T::one(), T::zero(), T::zero(), T::zero(), -u * x, -v * x]);
            a[r1..r1 + 8].copy_from_slice(&[T::zero(), T::zero(), T::zero(), u, v, T::one(), -u * y, -v * y]);
            b[2 * i] = x;
            b[2 * i + 1] = y;
        }
        let h = solve_gaussian(a, b, 8, 1)?;
        // Undo the normalization: H = N⁻¹ H', N⁻¹ = [[1/s, 0, cx], [0, 1/s, cy], [0, 0, 1]].
        let inv_s = T::one() / s;
        let (g, k) = (h[6], h[7]);
        let m = [
            h[0] * inv_s + cx * g,
            h[1] * inv_s + cx * k,
            h[2] * inv_s + cx,
            h[3] * inv_s + cy * g,
            h[4] * inv_s + cy * k,
            h[5] * inv_s + cy,
            g,
            k,
            T::one(),
        ];
        Self::from_matrix(m)
    }
}

/// Grid-space corners in annotation order.
pub fn grid_corners<T: Real>() -> [Point<T>; 4] {
    let (w, h) = (T::lit(GRID_COLS as f64), T::lit(GRID_ROWS as f64));
    [
        Point::new(T::zero(), T::zero()),
        Point::new(w, T::zero()),
        Point::new(w, h),
        Point::new(T::zero(), h),
    ]
}

/// Homography from grid coordinates `[0, 6] x [0, 4]` onto the annotated quad.
pub fn quad_to_grid_homography<T: Real>(ann: &CheckerAnnotation<T>) -> Result<Homography<T>> {
    if !is_strictly_convex(&ann.corners) {
        return Err(Error::DegenerateQuad {
            image_id: ann.image_id.clone(),
        });
    }
    Homography::from_correspondences(&grid_corners(), &ann.corners).ok_or_else(|| {
        Error::DegenerateQuad {
            image_id: ann.image_id.clone(),
        }
    })
}

/// Grid coordinates sampled inside cell (`row`, `col`): a regular lattice
/// over the central half of the cell.
pub fn cell_sample_points<T: Real>(row: usize, col: usize) -> impl Iterator<Item = Point<T>> {
    let span = T::one() - T::lit(2.0 * CELL_MARGIN);
    let n = T::lit(SAMPLE_LATTICE as f64);
    let offset = move |i: usize| T::lit(CELL_MARGIN) + span * (T::lit(i as f64) + T::lit(0.5)) / n;
    (0..SAMPLE_LATTICE).flat_map(move |j| {
        (0..SAMPLE_LATTICE).map(move |i| {
            Point::new(
                T::lit(col as f64) + offset(i),
                T::lit(row as f64) + offset(j),
            )
        })
    })
}

/// Mean of `values` after dropping `TRIM_FRACTION` of the samples from each end.
/// Accumulates deviations from the smallest kept value, so constant inputs
/// come back bit-exact.
pub fn trimmed_mean<T: Real>(values: &mut [T]) -> T {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let cut = (values.len() as f64 * TRIM_FRACTION).floor() as usize;
    let kept = &values[cut..values.len() - cut];
    let base = kept[0];
    let dev: T = kept.iter().map(|v| *v - base).sum();
    base + dev / T::lit(kept.len() as f64)
}

/// Extracts the 24 patch colors of an annotated checker.
///
/// Each sample point is read from the pixel that contains it
/// (pixel `(x, y)` covers `[x, x+1) x [y, y+1)`).
pub fn sample_patch_colors<T: Real>(
    image: &Raster<T>,
    ann: &CheckerAnnotation<T>,
) -> Result<PatchSet<T>> {
    let h = quad_to_grid_homography(ann)?;
    let (w, ht) = (T::lit(image.width() as f64), T::lit(image.height() as f64));
    let n = SAMPLE_LATTICE * SAMPLE_LATTICE;
    let mut channels = [
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    ];
    let mut colors = Vec::with_capacity(PATCH_COUNT);
    for patch in 0..PATCH_COUNT {
        let (row, col) = (patch / GRID_COLS, patch % GRID_COLS);
        channels.iter_mut().for_each(Vec::clear);
        for g in cell_sample_points::<T>(row, col) {
            let p = h.apply(g);
            if !(p.x >= T::zero() && p.x < w && p.y >= T::zero() && p.y < ht) {
                return Err(Error::PatchOutOfBounds {
                    patch,
                    x: p.x.to_f64_lossy(),
                    y: p.y.to_f64_lossy(),
                });
            }
            let px = p.x.floor().to_u32().unwrap().min(image.width() - 1);
            let py = p.y.floor().to_u32().unwrap().min(image.height() - 1);
            let c = image.get(px, py);
            channels[0].push(c.r);
            channels[1].push(c.g);
            channels[2].push(c.b);
        }
        let [r, g, b] = &mut channels;
        colors.push(LinearColor::new(
            trimmed_mean(r),
            trimmed_mean(g),
            trimmed_mean(b),
        ));
    }
    PatchSet::new(colors)
}

/// Parses an annotation file: one record per line,
/// `image_id x_tl y_tl x_tr y_tr x_br y_br x_bl y_bl`.
pub fn parse_annotations<T: Real>(text: &str, origin: &Path) -> Result<Vec<CheckerAnnotation<T>>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 9 {
            return Err(Error::parse(
                origin,
                lineno + 1,
                format!("expected an id and 8 coordinates, found {} fields", fields.len()),
            ));
        }
        let mut v = [T::zero(); 8];
        for (slot, f) in v.iter_mut().zip(&fields[1..]) {
            *slot = f
                .parse()
                .map_err(|_| Error::parse(origin, lineno + 1, format!("`{f}` is not a number")))?;
        }
        let corners = [
            Point::new(v[0], v[1]),
            Point::new(v[2], v[3]),
            Point::new(v[4], v[5]),
            Point::new(v[6], v[7]),
        ];
        let ann = CheckerAnnotation::new(fields[0], corners)
            .map_err(|e| Error::parse(origin, lineno + 1, e.to_string()))?;
        out.push(ann);
    }
    Ok(out)
}

pub fn load_annotations<T: Real>(path: &Path) -> Result<Vec<CheckerAnnotation<T>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(&text, path)
}

pub fn format_annotation<T: Real>(ann: &CheckerAnnotation<T>) -> String {
    let c = ann.corners();
    format!(
        "{} {} {} {} {} {} {} {} {}",
        ann.image_id, c[0].x, c[0].y, c[1].x, c[1].y, c[2].x, c[2].y, c[3].x, c[3].y
    )
}
