//! Image file helpers.

use std::path::Path;

use image::{GrayImage, ImageFormat, RgbImage};

use crate::error::{Error, Result};
use crate::transfer::ForegroundMask;

pub fn load_rgb8(path: &Path) -> Result<RgbImage> {
    image::open(path)
        .map(|img| img.to_rgb8())
        .map_err(|e| Error::UnreadableImage {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}

/// Reads only the header to get `(width, height)`.
pub fn image_dimensions(path: &Path) -> Result<(u32, u32)> {
    image::image_dimensions(path).map_err(|e| Error::UnreadableImage {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn load_gray8(path: &Path) -> Result<GrayImage> {
    image::open(path)
        .map(|img| img.to_luma8())
        .map_err(|e| Error::UnreadableImage {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}

pub fn load_mask(path: &Path) -> Result<ForegroundMask> {
    ForegroundMask::from_gray8(&load_gray8(path)?)
}

pub fn save_png_rgb(path: &Path, img: &RgbImage) -> Result<()> {
    img.save_with_format(path, ImageFormat::Png)
        .map_err(|e| Error::ImageWrite {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}

pub fn save_png_gray(path: &Path, img: &GrayImage) -> Result<()> {
    img.save_with_format(path, ImageFormat::Png)
        .map_err(|e| Error::ImageWrite {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}
