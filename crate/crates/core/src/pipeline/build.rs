//! Pair generation: fit each checker once, then re-illuminate every
//! foreground into each of its sampled references.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{ImageRecord, Manifest, Split};
use super::references::select_references;
use crate::color::{FeatureSpec, PatchSet};
use crate::compositing::{composite, crop_excluding_checker};
use crate::error::{Error, Result};
use crate::fitting::{
    cache_file_name, fit_input_fingerprint, fit_pair, fit_residual, load_cached_transform,
    save_cached_transform, transform_fingerprint, CachedTransform, Direction, TransformPair,
};
use crate::io::{create_dir, load_mask, load_rgb8, save_png_gray, save_png_rgb};
use crate::patches::{sample_patch_colors, CheckerAnnotation};
use crate::raster::{PixelRect, Raster};
use crate::transfer::transitive_transfer;

pub const COMPOSITE_DIR: &str = "composite_images";
pub const REAL_DIR: &str = "real_images";
pub const MASK_DIR: &str = "masks";
pub const TRANSFORM_DIR: &str = "transforms";
pub const PAIRS_FILE: &str = "pairs.json";
pub const SUMMARY_FILE: &str = "summary.json";

/// `{source_id}_{fg_index}`, shared by the ground truth and mask files.
pub fn foreground_stem(source_id: &str, fg_index: usize) -> String {
    format!("{source_id}_{fg_index}")
}

/// Composite file name: `{source_id}_{fg_index}_{reference_id}.png`.
pub fn composite_name(source_id: &str, fg_index: usize, reference_id: &str) -> String {
    format!("{}_{reference_id}.png", foreground_stem(source_id, fg_index))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    /// Paths relative to the output directory.
    pub composite: String,
    pub ground_truth: String,
    pub mask: String,
    pub source_id: String,
    pub reference_id: String,
    pub fg_index: usize,
    pub split: Split,
    pub forward_fingerprint: String,
    pub inverse_fingerprint: String,
    /// Fit RMSE of the source checker's forward transform.
    pub source_residual: f64,
    /// Fit RMSE of the reference checker's inverse transform.
    pub reference_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub item: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitCounts {
    pub images: usize,
    pub foregrounds: usize,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckerReport {
    pub image_id: String,
    pub forward_residual: f64,
    pub inverse_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResidualStats {
    pub checkers: usize,
    pub mean_forward: f64,
    pub max_forward: f64,
    pub mean_inverse: f64,
    pub max_inverse: f64,
    /// Checkers whose fit RMSE exceeds the configured warning level.
    pub review: Vec<CheckerReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub dry_run: bool,
    pub seed: u64,
    pub references_per_foreground: usize,
    pub planned_pairs: usize,
    pub pairs: usize,
    pub train: SplitCounts,
    pub test: SplitCounts,
    pub residuals: Option<ResidualStats>,
    pub failures: Vec<Failure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildReport {
    pub pairs: Vec<PairRecord>,
    pub summary: Summary,
}

impl BuildReport {
    pub fn succeeded(&self) -> bool {
        self.summary.failures.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub out_dir: PathBuf,
    /// Plan pairs and report counts without reading or writing images.
    pub dry_run: bool,
    /// Worker threads; 0 uses the rayon default.
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedPair {
    pub source_id: String,
    pub fg_index: usize,
    pub reference_id: String,
    pub split: Split,
}

/// Every (foreground, reference) pair the manifest calls for, in manifest
/// order. Foregrounds whose reference pool is too small are returned as failures.
pub fn plan_pairs(manifest: &Manifest) -> (Vec<PlannedPair>, Vec<Failure>) {
    let mut plan = Vec::new();
    let mut failures = Vec::new();
    for rec in manifest.active() {
        for fg in 0..rec.masks.len() {
            match select_references(manifest, &rec.id, fg) {
                Ok(refs) => plan.extend(refs.into_iter().map(|reference_id| PlannedPair {
                    source_id: rec.id.clone(),
                    fg_index: fg,
                    reference_id,
                    split: rec.split,
                })),
                Err(e) => failures.push(Failure {
                    item: foreground_stem(&rec.id, fg),
                    message: e.to_string(),
                }),
            }
        }
    }
    (plan, failures)
}

fn split_counts(manifest: &Manifest, plan: &[PlannedPair], split: Split) -> SplitCounts {
    let recs: Vec<&ImageRecord> = manifest.active().filter(|r| r.split == split).collect();
    SplitCounts {
        images: recs.len(),
        foregrounds: recs.iter().map(|r| r.masks.len()).sum(),
        pairs: plan.iter().filter(|p| p.split == split).count(),
    }
}

/// Per-checker state shared by every pair that uses the image.
#[derive(Debug, Clone)]
pub struct PreparedChecker {
    pub patches: PatchSet<f64>,
    pub transforms: TransformPair<f64>,
    pub forward_fingerprint: String,
    pub inverse_fingerprint: String,
    pub forward_residual: f64,
    pub inverse_residual: f64,
    pub dims: (u32, u32),
    pub crop: std::result::Result<PixelRect, String>,
}

/// Checker-free crop of an image with the given annotation.
pub fn source_crop(
    manifest: &Manifest,
    ann: &CheckerAnnotation<f64>,
    width: u32,
    height: u32,
) -> Result<PixelRect> {
    let bbox = ann.bounding_box(manifest.config.checker_margin, width, height);
    crop_excluding_checker(width, height, bbox, manifest.config.min_crop_fraction)
}

/// Reads the source image and extracts its 24 patch colors.
pub fn extract_patches(
    manifest: &Manifest,
    rec: &ImageRecord,
    ann: &CheckerAnnotation<f64>,
) -> Result<(PatchSet<f64>, (u32, u32))> {
    let img = load_rgb8(&manifest.resolve(&rec.path))?;
    ann.check_bounds(img.width(), img.height())?;
    let lin = Raster::<f64>::from_srgb8(&img);
    Ok((sample_patch_colors(&lin, ann)?, img.dimensions()))
}

fn cached_or_fit(
    rec: &ImageRecord,
    standard: &PatchSet<f64>,
    patches: &PatchSet<f64>,
    spec: FeatureSpec,
    ridge: f64,
    cache_dir: Option<&Path>,
) -> Result<TransformPair<f64>> {
    let inputs = fit_input_fingerprint(standard, patches, spec, ridge);
    let paths = cache_dir.map(|d| {
        (
            d.join(cache_file_name(&rec.id, Direction::Forward)),
            d.join(cache_file_name(&rec.id, Direction::Inverse)),
        )
    });
    if let Some((fwd_path, inv_path)) = &paths {
        if let (Ok(f), Ok(i)) = (
            load_cached_transform::<f64>(fwd_path),
            load_cached_transform::<f64>(inv_path),
        ) {
            let fresh = |c: &CachedTransform<f64>, d| {
                c.image_id == rec.id
                    && c.direction == d
                    && c.inputs == inputs
                    && c.transform.feature_spec() == spec
            };
            if fresh(&f, Direction::Forward) && fresh(&i, Direction::Inverse) {
                return Ok(TransformPair {
                    forward: f.transform,
                    inverse: i.transform,
                });
            }
        }
    }
    let pair = fit_pair(standard, patches, spec, ridge)?;
    if let Some((fwd_path, inv_path)) = &paths {
        for (path, direction, t) in [
            (fwd_path, Direction::Forward, &pair.forward),
            (inv_path, Direction::Inverse, &pair.inverse),
        ] {
            save_cached_transform(
                path,
                &CachedTransform {
                    image_id: rec.id.clone(),
                    direction,
                    inputs: inputs.clone(),
                    transform: t.clone(),
                },
            )?;
        }
    }
    Ok(pair)
}

/// Extracts patches, fits (or reloads) both transforms, and computes the crop.
pub fn prepare_checker(
    manifest: &Manifest,
    rec: &ImageRecord,
    ann: &CheckerAnnotation<f64>,
    standard: &PatchSet<f64>,
    cache_dir: Option<&Path>,
) -> Result<PreparedChecker> {
    let spec = manifest.config.feature_spec()?;
    let ridge = manifest.config.ridge;
    let (patches, dims) = extract_patches(manifest, rec, ann)?;
    let transforms = cached_or_fit(rec, standard, &patches, spec, ridge, cache_dir)?;
    let crop = source_crop(manifest, ann, dims.0, dims.1).map_err(|e| e.to_string());
    Ok(PreparedChecker {
        forward_fingerprint: transform_fingerprint(&transforms.forward),
        inverse_fingerprint: transform_fingerprint(&transforms.inverse),
        forward_residual: fit_residual(&transforms.forward, &patches, standard),
        inverse_residual: fit_residual(&transforms.inverse, standard, &patches),
        patches,
        transforms,
        dims,
        crop,
    })
}

fn residual_stats(manifest: &Manifest, prepared: &BTreeMap<String, PreparedChecker>) -> ResidualStats {
    let n = prepared.len();
    if n == 0 {
        return ResidualStats::default();
    }
    let fwd: Vec<f64> = prepared.values().map(|p| p.forward_residual).collect();
    let inv: Vec<f64> = prepared.values().map(|p| p.inverse_residual).collect();
    let warn = manifest.config.residual_warning;
    ResidualStats {
        checkers: n,
        mean_forward: fwd.iter().sum::<f64>() / n as f64,
        max_forward: fwd.iter().cloned().fold(0.0, f64::max),
        mean_inverse: inv.iter().sum::<f64>() / n as f64,
        max_inverse: inv.iter().cloned().fold(0.0, f64::max),
        review: prepared
            .iter()
            .filter(|(_, p)| p.forward_residual > warn || p.inverse_residual > warn)
            .map(|(id, p)| CheckerReport {
                image_id: id.clone(),
                forward_residual: p.forward_residual,
                inverse_residual: p.inverse_residual,
            })
            .collect(),
    }
}

struct ForegroundJob<'a> {
    record: &'a ImageRecord,
    fg_index: usize,
    references: Vec<&'a PlannedPair>,
}

fn crop_rgb(img: &RgbImage, r: PixelRect) -> RgbImage {
    image::imageops::crop_imm(img, r.x0, r.y0, r.width(), r.height()).to_image()
}

fn run_foreground(
    manifest: &Manifest,
    job: &ForegroundJob<'_>,
    prepared: &BTreeMap<String, PreparedChecker>,
    prep_errors: &HashMap<String, String>,
    out_dir: &Path,
) -> (Vec<PairRecord>, Vec<Failure>) {
    let rec = job.record;
    let stem = foreground_stem(&rec.id, job.fg_index);
    let fail_all = |message: String| {
        let failures = job
            .references
            .iter()
            .map(|p| Failure {
                item: composite_name(&rec.id, job.fg_index, &p.reference_id),
                message: message.clone(),
            })
            .collect();
        (Vec::new(), failures)
    };
    let Some(prep_a) = prepared.get(&rec.id) else {
        let msg = prep_errors.get(&rec.id).cloned().unwrap_or_default();
        return fail_all(format!("source checker unusable: {msg}"));
    };
    let crop = match &prep_a.crop {
        Ok(c) => *c,
        Err(e) => return fail_all(format!("source crop: {e}")),
    };

    let setup = || -> Result<(RgbImage, crate::transfer::ForegroundMask)> {
        let img = load_rgb8(&manifest.resolve(&rec.path))?;
        let mask = load_mask(&manifest.resolve(&rec.masks[job.fg_index]))?;
        mask.check_dims(img.dimensions())?;
        let mask = mask.crop(crop)?;
        let gt = crop_rgb(&img, crop);
        save_png_rgb(&out_dir.join(REAL_DIR).join(format!("{stem}.png")), &gt)?;
        save_png_gray(&out_dir.join(MASK_DIR).join(format!("{stem}.png")), &mask.to_gray8())?;
        Ok((gt, mask))
    };
    let (gt, mask) = match setup() {
        Ok(v) => v,
        Err(e) => return fail_all(e.to_string()),
    };
    let lin = Raster::<f64>::from_srgb8(&gt);

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for planned in &job.references {
        let name = composite_name(&rec.id, job.fg_index, &planned.reference_id);
        let result = (|| -> Result<PairRecord> {
            let prep_b = prepared.get(&planned.reference_id).ok_or_else(|| {
                Error::Pipeline(format!(
                    "reference checker unusable: {}",
                    prep_errors.get(&planned.reference_id).cloned().unwrap_or_default()
                ))
            })?;
            let moved = transitive_transfer(&lin, &mask, &prep_a.transforms.forward, &prep_b.transforms.inverse)?;
            let comp = composite(&moved, &lin, &mask)?;
            save_png_rgb(&out_dir.join(COMPOSITE_DIR).join(&name), &comp.to_srgb8())?;
            Ok(PairRecord {
                composite: format!("{COMPOSITE_DIR}/{name}"),
                ground_truth: format!("{REAL_DIR}/{stem}.png"),
                mask: format!("{MASK_DIR}/{stem}.png"),
                source_id: rec.id.clone(),
                reference_id: planned.reference_id.clone(),
                fg_index: job.fg_index,
                split: rec.split,
                forward_fingerprint: prep_a.forward_fingerprint.clone(),
                inverse_fingerprint: prep_b.inverse_fingerprint.clone(),
                source_residual: prep_a.forward_residual,
                reference_residual: prep_b.inverse_residual,
            })
        })();
        match result {
            Ok(r) => records.push(r),
            Err(e) => failures.push(Failure {
                item: name,
                message: e.to_string(),
            }),
        }
    }
    (records, failures)
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Pipeline(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_pairs(out_dir: &Path) -> Result<Vec<PairRecord>> {
    let path = out_dir.join(PAIRS_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(&path, e.line(), e.to_string()))
}

pub fn load_summary(out_dir: &Path) -> Result<Summary> {
    let path = out_dir.join(SUMMARY_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(&path, e.line(), e.to_string()))
}

/// Builds the dataset described by `manifest` into `opts.out_dir`.
///
/// Manifest-level problems abort with an error. Failures of individual
/// images or pairs are recorded in the summary and the rest of the batch
/// continues.
pub fn build_dataset(manifest: &Manifest, opts: &BuildOptions) -> Result<BuildReport> {
    manifest.check_ready_for_build()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| Error::Pipeline(format!("thread pool: {e}")))?;
    pool.install(|| build_inner(manifest, opts))
}

fn build_inner(manifest: &Manifest, opts: &BuildOptions) -> Result<BuildReport> {
    let (plan, mut failures) = plan_pairs(manifest);
    let mut summary = Summary {
        dry_run: opts.dry_run,
        seed: manifest.seed,
        references_per_foreground: manifest.references_per_foreground,
        planned_pairs: plan.len(),
        pairs: plan.len(),
        train: split_counts(manifest, &plan, Split::Train),
        test: split_counts(manifest, &plan, Split::Test),
        residuals: None,
        failures: Vec::new(),
    };
    if opts.dry_run {
        summary.failures = failures;
        return Ok(BuildReport {
            pairs: Vec::new(),
            summary,
        });
    }

    let out = &opts.out_dir;
    for d in [COMPOSITE_DIR, REAL_DIR, MASK_DIR, TRANSFORM_DIR] {
        create_dir(&out.join(d))?;
    }
    let standard = manifest.standard_colors()?;
    let annotations = manifest.load_annotations()?;

    let needed: BTreeSet<&str> = plan
        .iter()
        .flat_map(|p| [p.source_id.as_str(), p.reference_id.as_str()])
        .collect();
    let cache_dir = out.join(TRANSFORM_DIR);
    let results: Vec<(String, Result<PreparedChecker>)> = needed
        .par_iter()
        .map(|id| {
            let res = manifest.record(id).and_then(|rec| {
                let ann = annotations
                    .get(*id)
                    .ok_or_else(|| Error::Manifest(format!("no checker annotation for `{id}`")))?;
                prepare_checker(manifest, rec, ann, &standard, Some(&cache_dir))
            });
            (id.to_string(), res)
        })
        .collect();
    let mut prepared = BTreeMap::new();
    let mut prep_errors = HashMap::new();
    for (id, res) in results {
        match res {
            Ok(p) => {
                prepared.insert(id, p);
            }
            Err(e) => {
                failures.push(Failure {
                    item: id.clone(),
                    message: e.to_string(),
                });
                prep_errors.insert(id, e.to_string());
            }
        }
    }

    // Group planned pairs by foreground, preserving plan order.
    let mut jobs: Vec<ForegroundJob<'_>> = Vec::new();
    for p in &plan {
        match jobs.last_mut() {
            Some(j) if j.record.id == p.source_id && j.fg_index == p.fg_index => j.references.push(p),
            _ => jobs.push(ForegroundJob {
                record: manifest.record(&p.source_id)?,
                fg_index: p.fg_index,
                references: vec![p],
            }),
        }
    }
    let outcomes: Vec<(Vec<PairRecord>, Vec<Failure>)> = jobs
        .par_iter()
        .map(|job| run_foreground(manifest, job, &prepared, &prep_errors, out))
        .collect();
    let mut pairs = Vec::with_capacity(plan.len());
    for (recs, fails) in outcomes {
        pairs.extend(recs);
        failures.extend(fails);
    }

    summary.pairs = pairs.len();
    summary.train.pairs = pairs.iter().filter(|p| p.split == Split::Train).count();
    summary.test.pairs = pairs.iter().filter(|p| p.split == Split::Test).count();
    summary.residuals = Some(residual_stats(manifest, &prepared));
    summary.failures = failures;

    write_json(&out.join(PAIRS_FILE), &pairs)?;
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    for split in [Split::Train, Split::Test] {
        let list: String = pairs
            .iter()
            .filter(|p| p.split == split)
            .map(|p| format!("{}\n", p.composite))
            .collect();
        let path = out.join(format!("{}.txt", split.as_str()));
        std::fs::write(&path, list).map_err(|e| Error::io(&path, e))?;
    }
    Ok(BuildReport { pairs, summary })
}
