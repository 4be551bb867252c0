//! Re-illumination of a masked foreground through the standard condition.

use image::GrayImage;
use rayon::prelude::*;

use crate::color::{ColorTransform, LinearColor};
use crate::error::{Error, Result};
use crate::raster::{PixelRect, Raster};
use crate::scalar::Real;

/// Binary foreground mask. Always holds at least one foreground pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForegroundMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
    count: usize,
}

impl ForegroundMask {
    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                found: (bits.len() as u32, 1),
            });
        }
        let count = bits.iter().filter(|b| **b).count();
        if count == 0 {
            return Err(Error::EmptyMask);
        }
        Ok(Self {
            width,
            height,
            bits,
            count,
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Result<Self> {
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self::from_bits(width, height, bits)
    }

    /// Reads a single-channel mask: 0 is background, 255 is foreground,
    /// anything else is rejected.
    pub fn from_gray8(img: &GrayImage) -> Result<Self> {
        let mut bits = Vec::with_capacity(img.len());
        for (x, y, p) in img.enumerate_pixels() {
            match p.0[0] {
                0 => bits.push(false),
                255 => bits.push(true),
                value => return Err(Error::NonBinaryMask { value, x, y }),
            }
        }
        Self::from_bits(img.width(), img.height(), bits)
    }

    pub fn to_gray8(&self) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| {
            image::Luma([if self.get(x, y) { 255 } else { 0 }])
        })
    }

    #[inline]
    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    #[inline]
    pub fn count(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Restricts the mask to `rect`. Fails with `EmptyMask` when no
    /// foreground survives the crop.
    pub fn crop(&self, rect: PixelRect) -> Result<Self> {
        if !rect.fits_within(self.width, self.height) {
            return Err(Error::BboxOutOfBounds {
                width: self.width,
                height: self.height,
            });
        }
        Self::from_fn(rect.width(), rect.height(), |x, y| {
            self.get(rect.x0 + x, rect.y0 + y)
        })
    }

    pub fn check_dims(&self, dims: (u32, u32)) -> Result<()> {
        if self.dims() == dims {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: dims,
                found: self.dims(),
            })
        }
    }
}

fn map_foreground<T: Real>(
    image: &Raster<T>,
    mask: &ForegroundMask,
    f: impl Fn(LinearColor<T>) -> LinearColor<T> + Sync,
) -> Result<Raster<T>> {
    mask.check_dims(image.dims())?;
    let mut out = image.clone();
    out.pixels_mut()
        .par_iter_mut()
        .zip(mask.bits().par_iter())
        .for_each(|(px, &fg)| {
            if fg {
                *px = f(*px);
            }
        });
    Ok(out)
}

/// Replaces every foreground pixel by `t` applied to it. Background pixels
/// are copied unchanged.
pub fn transfer_region<T: Real>(
    image: &Raster<T>,
    mask: &ForegroundMask,
    t: &ColorTransform<T>,
) -> Result<Raster<T>> {
    map_foreground(image, mask, |c| t.apply(c))
}

/// Maps the foreground of `image_a` into the standard condition with
/// `forward_a`, then into condition b with `inverse_b`. The intermediate is
/// clipped only at the transform clip limit; the result's foreground is
/// clipped to `[0, 1]`.
pub fn transitive_transfer<T: Real>(
    image_a: &Raster<T>,
    mask: &ForegroundMask,
    forward_a: &ColorTransform<T>,
    inverse_b: &ColorTransform<T>,
) -> Result<Raster<T>> {
    mask.check_dims(image_a.dims())?;
    map_foreground(image_a, mask, |c| {
        inverse_b
            .apply(forward_a.apply(c))
            .clamp(T::zero(), T::one())
    })
}

/// Mean absolute per-channel difference between two rasters over the mask.
pub fn foreground_mae<T: Real>(a: &Raster<T>, b: &Raster<T>, mask: &ForegroundMask) -> Result<T> {
    mask.check_dims(a.dims())?;
    mask.check_dims(b.dims())?;
    let sum: T = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .zip(mask.bits())
        .filter(|(_, fg)| **fg)
        .map(|((p, q), _)| (p.r - q.r).abs() + (p.g - q.g).abs() + (p.b - q.b).abs())
        .sum();
    Ok(sum / T::lit((mask.count() * 3) as f64))
}

/// Root-mean-square per-channel difference over the mask.
pub fn foreground_rmse<T: Real>(a: &Raster<T>, b: &Raster<T>, mask: &ForegroundMask) -> Result<T> {
    mask.check_dims(a.dims())?;
    mask.check_dims(b.dims())?;
    let sum: T = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .zip(mask.bits())
        .filter(|(_, fg)| **fg)
        .map(|((p, q), _)| (p.r - q.r).powi(2) + (p.g - q.g).powi(2) + (p.b - q.b).powi(2))
        .sum();
    Ok((sum / T::lit((mask.count() * 3) as f64)).sqrt())
}
