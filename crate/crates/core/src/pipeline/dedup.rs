//! Near-duplicate screening with a 64-bit difference hash.

use image::imageops::FilterType;
use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{ExclusionFlag, Manifest};
use crate::error::Result;
use crate::io::load_rgb8;

/// Difference hash: grayscale thumbnail of 9x8, one bit per horizontally
/// adjacent pair set when the left pixel is darker than the right.
pub fn dhash(img: &RgbImage) -> u64 {
    let gray = image::DynamicImage::ImageRgb8(img.clone()).to_luma8();
    let thumb = image::imageops::resize(&gray, 9, 8, FilterType::Triangle);
    let mut hash = 0u64;
    for y in 0..8 {
        for x in 0..8 {
            if thumb.get_pixel(x, y).0[0] < thumb.get_pixel(x + 1, y).0[0] {
                hash |= 1 << (y * 8 + x);
            }
        }
    }
    hash
}

#[inline]
pub fn hamming(a: u64, b: u64) -> u32 {
    (a ^ b).count_ones()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicatePair {
    /// Lexicographically smaller id; kept.
    pub keep: String,
    /// Lexicographically larger id; proposed for exclusion.
    pub duplicate: String,
    pub distance: u32,
}

/// Hashes every image in the manifest and reports each pair within
/// `threshold` bits. Nothing is modified; see [`apply_duplicate_flags`].
pub fn near_duplicate_scan(manifest: &Manifest, threshold: u32) -> Result<Vec<DuplicatePair>> {
    let mut hashes: Vec<(String, u64)> = manifest
        .images
        .par_iter()
        .map(|r| Ok((r.id.clone(), dhash(&load_rgb8(&manifest.resolve(&r.path))?))))
        .collect::<Result<_>>()?;
    hashes.sort_by(|a, b| a.0.cmp(&b.0));
    let mut pairs = Vec::new();
    for (i, (a, ha)) in hashes.iter().enumerate() {
        for (b, hb) in &hashes[i + 1..] {
            let d = hamming(*ha, *hb);
            if d <= threshold {
                pairs.push(DuplicatePair {
                    keep: a.clone(),
                    duplicate: b.clone(),
                    distance: d,
                });
            }
        }
    }
    Ok(pairs)
}

/// Marks the later id of each reported pair as a duplicate. Returns how many
/// records gained the flag.
pub fn apply_duplicate_flags(manifest: &mut Manifest, pairs: &[DuplicatePair]) -> Result<usize> {
    let mut n = 0;
    for p in pairs {
        let reason = format!("near-duplicate of {} (dhash distance {})", p.keep, p.distance);
        if manifest.record_mut(&p.duplicate)?.flag(ExclusionFlag::Duplicate, reason) {
            n += 1;
        }
    }
    Ok(n)
}
