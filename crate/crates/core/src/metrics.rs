//! Composite-vs-ground-truth error metrics on 8-bit sRGB values (0–255 scale).

use image::RgbImage;

use crate::error::{Error, Result};
use crate::transfer::ForegroundMask;

fn check_dims(a: &RgbImage, b: &RgbImage) -> Result<()> {
    if a.dimensions() == b.dimensions() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: a.dimensions(),
            found: b.dimensions(),
        })
    }
}

fn sq_err(p: &image::Rgb<u8>, q: &image::Rgb<u8>) -> f64 {
    p.0.iter()
        .zip(q.0)
        .map(|(x, y)| (f64::from(*x) - f64::from(y)).powi(2))
        .sum()
}

pub fn mse(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    check_dims(a, b)?;
    let n = a.len();
    if n == 0 {
        return Ok(0.0);
    }
    let sum: f64 = a.pixels().zip(b.pixels()).map(|(p, q)| sq_err(p, q)).sum();
    Ok(sum / n as f64)
}

/// Mean squared error over foreground pixels only.
pub fn fmse(a: &RgbImage, b: &RgbImage, mask: &ForegroundMask) -> Result<f64> {
    check_dims(a, b)?;
    mask.check_dims(a.dimensions())?;
    if mask.count() == 0 {
        return Err(Error::EmptyMask);
    }
    let sum: f64 = a
        .pixels()
        .zip(b.pixels())
        .zip(mask.bits())
        .filter(|(_, fg)| **fg)
        .map(|((p, q), _)| sq_err(p, q))
        .sum();
    Ok(sum / (mask.count() * 3) as f64)
}

/// Peak signal-to-noise ratio in dB; `f64::INFINITY` for identical images.
pub fn psnr(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0f64 * 255.0 / mse).log10()
    }
}
