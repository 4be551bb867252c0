use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::color::{builtin_reference_colors, load_reference_colors, FeatureSpec, PatchSet};
use crate::compositing::{DEFAULT_CHECKER_MARGIN, DEFAULT_MIN_CROP_FRACTION};
use crate::error::{Error, Result};
use crate::fitting::DEFAULT_RIDGE;
use crate::patches::{load_annotations, CheckerAnnotation, Point};

pub const DEFAULT_REFERENCES_PER_FOREGROUND: usize = 10;
pub const DEFAULT_DUPLICATE_THRESHOLD: u32 = 8;
pub const DEFAULT_RESIDUAL_WARNING: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    #[default]
    Unassigned,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        }
    }
}

/// Reasons an image is kept out of the dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionFlag {
    Duplicate,
    MisleadingChecker,
    CheckerCentral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    pub path: PathBuf,
    #[serde(default)]
    pub masks: Vec<PathBuf>,
    #[serde(default)]
    pub split: Split,
    /// Inline checker corners `x_tl y_tl x_tr y_tr x_br y_br x_bl y_bl`;
    /// overrides the manifest's annotation file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corners: Option<[f64; 8]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exclude: Vec<ExclusionFlag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl ImageRecord {
    pub fn is_excluded(&self) -> bool {
        !self.exclude.is_empty()
    }

    /// Adds `flag` unless already present, appending `reason` to the notes.
    pub fn flag(&mut self, flag: ExclusionFlag, reason: impl Into<String>) -> bool {
        if self.exclude.contains(&flag) {
            return false;
        }
        self.exclude.push(flag);
        let reason = reason.into();
        self.reason = Some(match self.reason.take() {
            Some(prev) if !prev.is_empty() => format!("{prev}; {reason}"),
            _ => reason,
        });
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub degree: u32,
    pub include_bias: bool,
    pub ridge: f64,
    /// Maximum dHash Hamming distance (of 64 bits) reported as a near duplicate.
    pub duplicate_threshold: u32,
    pub min_crop_fraction: f64,
    pub checker_margin: u32,
    /// Fit RMSE above which a checker is listed for review.
    pub residual_warning: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            degree: 2,
            include_bias: true,
            ridge: DEFAULT_RIDGE,
            duplicate_threshold: DEFAULT_DUPLICATE_THRESHOLD,
            min_crop_fraction: DEFAULT_MIN_CROP_FRACTION,
            checker_margin: DEFAULT_CHECKER_MARGIN,
            residual_warning: DEFAULT_RESIDUAL_WARNING,
        }
    }
}

impl PipelineConfig {
    pub fn feature_spec(&self) -> Result<FeatureSpec> {
        FeatureSpec::new(self.degree, self.include_bias)
    }
}

fn default_refs() -> usize {
    DEFAULT_REFERENCES_PER_FOREGROUND
}

/// Dataset description, stored as TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    #[serde(default = "default_refs")]
    pub references_per_foreground: usize,
    /// Annotation file (`image_id` followed by 8 corner coordinates per line).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations: Option<PathBuf>,
    /// Reference-colors file; the bundled ColorChecker Classic values when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_colors: Option<PathBuf>,
    #[serde(default)]
    pub config: PipelineConfig,
    #[serde(default)]
    pub images: Vec<ImageRecord>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            references_per_foreground: DEFAULT_REFERENCES_PER_FOREGROUND,
            annotations: None,
            reference_colors: None,
            config: PipelineConfig::default(),
            images: Vec::new(),
            base_dir: PathBuf::from("."),
        }
    }

    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut m: Manifest = toml::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
        m.base_dir = base_dir.to_path_buf();
        m.check()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Manifest(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    /// Structural checks that hold for every manifest.
    pub fn check(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.images {
            if r.id.is_empty() || r.id.chars().any(|c| c.is_whitespace() || c == '/' || c == '\\') {
                return Err(Error::Manifest(format!(
                    "image id `{}` must be non-empty without whitespace or path separators",
                    r.id
                )));
            }
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Manifest(format!("duplicate image id `{}`", r.id)));
            }
            if !r.is_excluded() && r.masks.is_empty() {
                return Err(Error::Manifest(format!(
                    "image `{}` is not excluded but lists no foreground masks",
                    r.id
                )));
            }
        }
        if self.references_per_foreground == 0 {
            return Err(Error::Manifest("references_per_foreground must be at least 1".into()));
        }
        if !(self.config.ridge.is_finite() && self.config.ridge >= 0.0) {
            return Err(Error::InvalidRidge(self.config.ridge));
        }
        self.config.feature_spec()?;
        Ok(())
    }

    /// Additional checks required before pairs are generated.
    pub fn check_ready_for_build(&self) -> Result<()> {
        self.check()?;
        if let Some(r) = self.active().find(|r| r.split == Split::Unassigned) {
            return Err(Error::Manifest(format!("image `{}` has no split assigned", r.id)));
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn record(&self, id: &str) -> Result<&ImageRecord> {
        self.images
            .iter()
            .find(|r| r.id == id)
            .ok_or_else(|| Error::UnknownImage(id.to_string()))
    }

    pub fn record_mut(&mut self, id: &str) -> Result<&mut ImageRecord> {
        self.images
            .iter_mut()
            .find(|r| r.id == id)
            .ok_or_else(|| Error::UnknownImage(id.to_string()))
    }

    /// Records that are not excluded.
    pub fn active(&self) -> impl Iterator<Item = &ImageRecord> {
        self.images.iter().filter(|r| !r.is_excluded())
    }

    pub fn standard_colors(&self) -> Result<PatchSet<f64>> {
        match &self.reference_colors {
            Some(p) => load_reference_colors(&self.resolve(p)),
            None => Ok(builtin_reference_colors()),
        }
    }

    /// Checker annotations by image id, merging the annotation file with
    /// inline corners (inline wins).
    pub fn load_annotations(&self) -> Result<HashMap<String, CheckerAnnotation<f64>>> {
        let mut map = HashMap::new();
        if let Some(p) = &self.annotations {
            for ann in load_annotations::<f64>(&self.resolve(p))? {
                map.insert(ann.image_id.clone(), ann);
            }
        }
        for r in &self.images {
            if let Some(c) = r.corners {
                let corners = [
                    Point::new(c[0], c[1]),
                    Point::new(c[2], c[3]),
                    Point::new(c[4], c[5]),
                    Point::new(c[6], c[7]),
                ];
                map.insert(r.id.clone(), CheckerAnnotation::new(r.id.clone(), corners)?);
            }
        }
        Ok(map)
    }
}
