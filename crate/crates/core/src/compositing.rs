//! Composite assembly and the checker-free crop.

use crate::error::{Error, Result};
use crate::raster::{PixelRect, Raster};
use crate::scalar::Real;
use crate::transfer::ForegroundMask;

/// Default smallest acceptable crop, as a fraction of the image area.
pub const DEFAULT_MIN_CROP_FRACTION: f64 = 0.25;
/// Default padding added around the annotated checker before cropping.
pub const DEFAULT_CHECKER_MARGIN: u32 = 10;

/// Pixelwise selection: foreground pixels from `foreground_img`, the rest
/// from `background_img`, clipped to `[0, 1]`.
pub fn composite<T: Real>(
    foreground_img: &Raster<T>,
    background_img: &Raster<T>,
    mask: &ForegroundMask,
) -> Result<Raster<T>> {
    if foreground_img.dims() != background_img.dims() {
        return Err(Error::DimensionMismatch {
            expected: background_img.dims(),
            found: foreground_img.dims(),
        });
    }
    mask.check_dims(background_img.dims())?;
    let pixels = foreground_img
        .pixels()
        .iter()
        .zip(background_img.pixels())
        .zip(mask.bits())
        .map(|((f, b), fg)| (if *fg { *f } else { *b }).clamp(T::zero(), T::one()))
        .collect();
    Raster::from_pixels(background_img.width(), background_img.height(), pixels)
}

/// The four full-extent rectangles that avoid `bbox`: left, right, above, below.
pub fn crop_candidates(width: u32, height: u32, bbox: PixelRect) -> [PixelRect; 4] {
    [
        PixelRect::new(0, 0, bbox.x0, height),
        PixelRect::new(bbox.x1, 0, width, height),
        PixelRect::new(0, 0, width, bbox.y0),
        PixelRect::new(0, bbox.y1, width, height),
    ]
}

/// Largest checker-free candidate. Ties go to the wider rectangle, then the
/// topmost, then the leftmost origin.
pub fn best_crop(width: u32, height: u32, bbox: PixelRect) -> Result<PixelRect> {
    if !bbox.fits_within(width, height) {
        return Err(Error::BboxOutOfBounds { width, height });
    }
    let best = crop_candidates(width, height, bbox)
        .into_iter()
        .min_by_key(|r| {
            (
                std::cmp::Reverse(r.area()),
                std::cmp::Reverse(r.width()),
                r.y0,
                r.x0,
            )
        })
        .unwrap();
    Ok(best)
}

/// [`best_crop`], rejecting images where the checker sits so central that
/// the best crop keeps less than `min_fraction` of the image.
pub fn crop_excluding_checker(
    width: u32,
    height: u32,
    bbox: PixelRect,
    min_fraction: f64,
) -> Result<PixelRect> {
    let best = best_crop(width, height, bbox)?;
    let total = u64::from(width) * u64::from(height);
    let fraction = if total == 0 {
        0.0
    } else {
        best.area() as f64 / total as f64
    };
    if fraction < min_fraction {
        return Err(Error::CheckerDominates {
            fraction,
            minimum: min_fraction,
        });
    }
    Ok(best)
}
