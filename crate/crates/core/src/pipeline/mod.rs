//! Manifest-driven dataset construction.

pub mod build;
pub mod dedup;
pub mod manifest;
pub mod references;
pub mod report;
pub mod validate;

pub use build::{
    build_dataset, composite_name, foreground_stem, plan_pairs, prepare_checker, BuildOptions,
    BuildReport, Failure, PairRecord, PlannedPair, PreparedChecker, Summary,
};
pub use dedup::{apply_duplicate_flags, dhash, hamming, near_duplicate_scan, DuplicatePair};
pub use manifest::{ExclusionFlag, ImageRecord, Manifest, PipelineConfig, Split};
pub use references::select_references;
pub use validate::{validate_output, ValidationReport};
