//! Re-checks a finished build directory against its manifest.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::build::{
    composite_name, foreground_stem, load_pairs, source_crop, PairRecord, COMPOSITE_DIR,
};
use super::manifest::{Manifest, Split};
use super::references::select_references;
use crate::error::Result;
use crate::io::{load_gray8, load_rgb8};
use crate::transfer::ForegroundMask;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub pairs_checked: usize,
    pub expected_pairs: usize,
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks file presence, pairing rules, the count law, reference replay,
/// ground-truth identity with the cropped source, mask binarity and
/// background identity of each composite.
pub fn validate_output(manifest: &Manifest, out_dir: &Path) -> Result<ValidationReport> {
    let pairs = load_pairs(out_dir)?;
    let mut report = ValidationReport {
        pairs_checked: pairs.len(),
        expected_pairs: manifest
            .active()
            .map(|r| r.masks.len() * manifest.references_per_foreground)
            .sum(),
        violations: Vec::new(),
    };
    let v = &mut report.violations;

    if pairs.len() != report.expected_pairs {
        v.push(format!(
            "count law: {} pairs present, {} expected",
            pairs.len(),
            report.expected_pairs
        ));
    }

    let mut seen = HashSet::new();
    let mut by_fg: BTreeMap<(String, usize), Vec<&PairRecord>> = BTreeMap::new();
    for p in &pairs {
        if !seen.insert(p.composite.as_str()) {
            v.push(format!("{}: listed twice", p.composite));
        }
        if p.source_id == p.reference_id {
            v.push(format!("{}: self-pair", p.composite));
        }
        let expected_name = format!(
            "{COMPOSITE_DIR}/{}",
            composite_name(&p.source_id, p.fg_index, &p.reference_id)
        );
        if p.composite != expected_name {
            v.push(format!("{}: expected name {expected_name}", p.composite));
        }
        match (manifest.record(&p.source_id), manifest.record(&p.reference_id)) {
            (Ok(a), Ok(b)) => {
                if a.split != b.split || a.split != p.split || a.split == Split::Unassigned {
                    v.push(format!(
                        "{}: split leakage ({} source, {} reference, recorded {})",
                        p.composite,
                        a.split.as_str(),
                        b.split.as_str(),
                        p.split.as_str()
                    ));
                }
                if a.is_excluded() || b.is_excluded() {
                    v.push(format!("{}: uses an excluded image", p.composite));
                }
            }
            _ => v.push(format!("{}: unknown source or reference id", p.composite)),
        }
        for f in [&p.composite, &p.ground_truth, &p.mask] {
            if !out_dir.join(f).is_file() {
                v.push(format!("{}: missing file {f}", p.composite));
            }
        }
        by_fg
            .entry((p.source_id.clone(), p.fg_index))
            .or_default()
            .push(p);
    }

    // Replay reference sampling.
    for ((source, fg), recs) in &by_fg {
        match select_references(manifest, source, *fg) {
            Ok(expected) => {
                let got: Vec<&str> = recs.iter().map(|p| p.reference_id.as_str()).collect();
                if got != expected.iter().map(String::as_str).collect::<Vec<_>>() {
                    v.push(format!(
                        "{}: references {got:?} do not replay to {expected:?}",
                        foreground_stem(source, *fg)
                    ));
                }
            }
            Err(e) => v.push(format!("{}: {e}", foreground_stem(source, *fg))),
        }
    }

    // Pixel-level checks, one source image load per image id.
    let annotations = manifest.load_annotations()?;
    let mut by_source: BTreeMap<&str, Vec<&PairRecord>> = BTreeMap::new();
    for p in &pairs {
        by_source.entry(p.source_id.as_str()).or_default().push(p);
    }
    for (source, recs) in by_source {
        let Ok(rec) = manifest.record(source) else { continue };
        let Some(ann) = annotations.get(source) else {
            v.push(format!("{source}: no checker annotation"));
            continue;
        };
        let img = match load_rgb8(&manifest.resolve(&rec.path)) {
            Ok(i) => i,
            Err(e) => {
                v.push(format!("{source}: {e}"));
                continue;
            }
        };
        let crop = match source_crop(manifest, ann, img.width(), img.height()) {
            Ok(c) => c,
            Err(e) => {
                v.push(format!("{source}: {e}"));
                continue;
            }
        };
        let expected_gt =
            image::imageops::crop_imm(&img, crop.x0, crop.y0, crop.width(), crop.height()).to_image();
        for p in recs {
            check_pixels(out_dir, p, &expected_gt, v);
        }
    }
    Ok(report)
}

fn check_pixels(out_dir: &Path, p: &PairRecord, expected_gt: &RgbImage, v: &mut Vec<String>) {
    let (Ok(gt), Ok(comp), Ok(mask)) = (
        load_rgb8(&out_dir.join(&p.ground_truth)),
        load_rgb8(&out_dir.join(&p.composite)),
        load_gray8(&out_dir.join(&p.mask)),
    ) else {
        return;
    };
    if &gt != expected_gt {
        v.push(format!("{}: ground truth differs from the cropped source", p.ground_truth));
    }
    let mask = match ForegroundMask::from_gray8(&mask) {
        Ok(m) => m,
        Err(e) => {
            v.push(format!("{}: {e}", p.mask));
            return;
        }
    };
    if comp.dimensions() != gt.dimensions() || mask.dims() != gt.dimensions() {
        v.push(format!("{}: dimensions disagree with ground truth", p.composite));
        return;
    }
    let leaked = comp
        .pixels()
        .zip(gt.pixels())
        .zip(mask.bits())
        .filter(|((c, g), fg)| !**fg && c != g)
        .count();
    if leaked > 0 {
        v.push(format!("{}: {leaked} background pixels differ from ground truth", p.composite));
    }
}
