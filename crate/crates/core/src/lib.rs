//! Checker-based illumination transfer.
//!
//! Each photograph carries a 24-patch color checker. Fitting a polynomial map
//! from the photographed patches to the canonical patch colors (and back)
//! describes the scene's illumination; chaining one image's forward map with
//! another image's inverse map re-lights a foreground from the first scene
//! into the second. The [`pipeline`] module turns that into paired
//! composite / ground-truth datasets.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar type for common use. The dataset pipeline
//! works in `f64`.

pub mod color;
pub mod compositing;
pub mod error;
pub mod fitting;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod patches;
pub mod pipeline;
pub mod raster;
pub mod scalar;
pub mod synth;
pub mod transfer;

pub use color::{
    apply_transform, builtin_reference_colors, expand_features, linear_to_srgb, srgb_to_linear,
    ColorTransform, FeatureSpec, LinearColor, PatchSet, INTERMEDIATE_CLIP_MAX, PATCH_COUNT,
};
pub use compositing::{best_crop, composite, crop_excluding_checker};
pub use error::{Error, Result};
pub use fitting::{fit_pair, fit_residual, fit_transform, TransformPair, DEFAULT_RIDGE};
pub use patches::{quad_to_grid_homography, sample_patch_colors, CheckerAnnotation, Homography, Point};
pub use raster::{PixelRect, Raster};
pub use scalar::Real;
pub use transfer::{transfer_region, transitive_transfer, ForegroundMask};

pub type Color = LinearColor<f64>;
pub type Color32 = LinearColor<f32>;
pub type Patches = PatchSet<f64>;
pub type Patches32 = PatchSet<f32>;
pub type Transform = ColorTransform<f64>;
pub type Transform32 = ColorTransform<f32>;
pub type Image = Raster<f64>;
pub type Image32 = Raster<f32>;
pub type Annotation = CheckerAnnotation<f64>;
pub type Annotation32 = CheckerAnnotation<f32>;
pub type Homography64 = Homography<f64>;
pub type Homography32 = Homography<f32>;
