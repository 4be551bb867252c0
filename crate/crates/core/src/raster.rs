//! In-memory linear-light images.

use image::RgbImage;

use crate::color::{linear_to_srgb, srgb_channel_to_linear, LinearColor};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Axis-aligned pixel rectangle, half-open: `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct PixelRect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl PixelRect {
    pub const fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> Self {
        Self { x0, y0, x1, y1 }
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.x1.saturating_sub(self.x0)
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.y1.saturating_sub(self.y0)
    }

    #[inline]
    pub fn area(&self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }

    pub fn is_empty(&self) -> bool {
        self.area() == 0
    }

    /// True when the two rectangles share at least one pixel.
    pub fn intersects(&self, other: &PixelRect) -> bool {
        !self.is_empty()
            && !other.is_empty()
            && self.x0 < other.x1
            && other.x0 < self.x1
            && self.y0 < other.y1
            && other.y0 < self.y1
    }

    pub fn fits_within(&self, width: u32, height: u32) -> bool {
        self.x0 <= self.x1 && self.y0 <= self.y1 && self.x1 <= width && self.y1 <= height
    }
}

/// Row-major RGB raster of linear colors.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    width: u32,
    height: u32,
    pixels: Vec<LinearColor<T>>,
}

impl<T: Real> Raster<T> {
    pub fn filled(width: u32, height: u32, color: LinearColor<T>) -> Self {
        Self {
            width,
            height,
            pixels: vec![color; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> LinearColor<T>) -> Self {
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn from_pixels(width: u32, height: u32, pixels: Vec<LinearColor<T>>) -> Result<Self> {
        if pixels.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                found: (pixels.len() as u32, 1),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> LinearColor<T> {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, c: LinearColor<T>) {
        let w = self.width as usize;
        self.pixels[y as usize * w + x as usize] = c;
    }

    pub fn pixels(&self) -> &[LinearColor<T>] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [LinearColor<T>] {
        &mut self.pixels
    }

    pub fn crop(&self, rect: PixelRect) -> Result<Self> {
        if !rect.fits_within(self.width, self.height) {
            return Err(Error::BboxOutOfBounds {
                width: self.width,
                height: self.height,
            });
        }
        Ok(Self::from_fn(rect.width(), rect.height(), |x, y| {
            self.get(rect.x0 + x, rect.y0 + y)
        }))
    }

    /// Decodes an 8-bit sRGB image into linear light.
    pub fn from_srgb8(img: &RgbImage) -> Self {
        let lut: Vec<T> = (0..=255u8).map(srgb_channel_to_linear).collect();
        let pixels = img
            .pixels()
            .map(|p| LinearColor::new(lut[p[0] as usize], lut[p[1] as usize], lut[p[2] as usize]))
            .collect();
        Self {
            width: img.width(),
            height: img.height(),
            pixels,
        }
    }

    /// Encodes to 8-bit sRGB, clipping each channel to `[0, 1]`.
    pub fn to_srgb8(&self) -> RgbImage {
        let mut out = RgbImage::new(self.width, self.height);
        for (dst, src) in out.pixels_mut().zip(&self.pixels) {
            dst.0 = linear_to_srgb(*src);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_geometry() {
        let r = PixelRect::new(2, 3, 10, 7);
        assert_eq!((r.width(), r.height(), r.area()), (8, 4, 32));
        assert!(r.intersects(&PixelRect::new(9, 6, 12, 12)));
        assert!(!r.intersects(&PixelRect::new(10, 0, 12, 12)));
        assert!(!r.intersects(&PixelRect::new(0, 0, 0, 0)));
        assert!(r.fits_within(10, 7));
        assert!(!r.fits_within(9, 7));
    }

    #[test]
    fn srgb8_round_trip_and_crop() {
        let img = RgbImage::from_fn(7, 5, |x, y| image::Rgb([(x * 30) as u8, (y * 50) as u8, 200]));
        let lin = Raster::<f64>::from_srgb8(&img);
        assert_eq!(lin.to_srgb8(), img);
        let c = lin.crop(PixelRect::new(1, 2, 4, 5)).unwrap();
        assert_eq!(c.dims(), (3, 3));
        assert_eq!(c.get(0, 0), lin.get(1, 2));
        assert!(lin.crop(PixelRect::new(0, 0, 8, 1)).is_err());
    }
}
