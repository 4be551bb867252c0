//! Ridge-regularized least-squares fitting of polynomial color transforms
//! from 24 patch correspondences, plus the on-disk transform cache.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::color::{ColorTransform, FeatureSpec, PatchSet, MAX_TERMS, PATCH_COUNT};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, spd_condition};
use crate::scalar::Real;

pub const DEFAULT_RIDGE: f64 = 1e-4;

/// Normal-equation condition estimates above this are treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// Fits `M` minimizing `Σ‖M·φ(sourceᵢ) − targetᵢ‖² + ridge·‖M‖²_F` by solving
/// `(ΦᵀΦ + ridge·I) Mᵀ = ΦᵀT` with a Cholesky factorization.
pub fn fit_transform<T: Real>(
    source: &PatchSet<T>,
    target: &PatchSet<T>,
    spec: FeatureSpec,
    ridge: T,
) -> Result<ColorTransform<T>> {
    if !(ridge.is_finite() && ridge >= T::zero()) {
        return Err(Error::InvalidRidge(ridge.to_f64_lossy()));
    }
    let k = spec.term_count();
    let mut gram = vec![T::zero(); k * k];
    let mut rhs = vec![T::zero(); k * 3];
    let mut phi = [T::zero(); MAX_TERMS];
    for (s, t) in source.iter().zip(target.iter()) {
        spec.expand_into(*s, &mut phi);
        let t = t.to_array();
        for i in 0..k {
            for j in 0..k {
                gram[i * k + j] += phi[i] * phi[j];
            }
            for (ch, tv) in t.iter().enumerate() {
                rhs[i * 3 + ch] += phi[i] * *tv;
            }
        }
    }
    for i in 0..k {
        gram[i * k + i] += ridge;
    }

    let condition = spd_condition(&gram, k);
    if !(condition <= T::lit(SINGULAR_CONDITION)) {
        return Err(Error::SingularSystem {
            condition: condition.to_f64_lossy(),
        });
    }
    let l = cholesky(&gram, k).ok_or(Error::SingularSystem {
        condition: f64::INFINITY,
    })?;
    let x = cholesky_solve(&l, &rhs, k, 3);

    let mut matrix = vec![T::zero(); 3 * k];
    for ch in 0..3 {
        for j in 0..k {
            matrix[ch * k + j] = x[j * 3 + ch];
        }
    }
    ColorTransform::new(matrix, spec)
}

/// A forward (image → standard) and inverse (standard → image) transform for one checker.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformPair<T> {
    pub forward: ColorTransform<T>,
    pub inverse: ColorTransform<T>,
}

/// Fits both directions independently. The inverse is a separately fitted
/// reverse map, not an algebraic inverse of the forward polynomial.
pub fn fit_pair<T: Real>(
    standard: &PatchSet<T>,
    image_patches: &PatchSet<T>,
    spec: FeatureSpec,
    ridge: T,
) -> Result<TransformPair<T>> {
    Ok(TransformPair {
        forward: fit_transform(image_patches, standard, spec, ridge)?,
        inverse: fit_transform(standard, image_patches, spec, ridge)?,
    })
}

/// RMSE of the (clipped) transform over all 72 patch channel values.
pub fn fit_residual<T: Real>(t: &ColorTransform<T>, source: &PatchSet<T>, target: &PatchSet<T>) -> T {
    let sq: T = source
        .iter()
        .zip(target.iter())
        .map(|(s, t_)| {
            let p = t.apply(*s);
            (p.r - t_.r).powi(2) + (p.g - t_.g).powi(2) + (p.b - t_.b).powi(2)
        })
        .sum();
    (sq / T::lit((PATCH_COUNT * 3) as f64)).sqrt()
}

/// The objective minimized by [`fit_transform`], evaluated without clipping.
pub fn ridge_objective<T: Real>(
    t: &ColorTransform<T>,
    source: &PatchSet<T>,
    target: &PatchSet<T>,
    ridge: T,
) -> T {
    let data: T = source
        .iter()
        .zip(target.iter())
        .map(|(s, t_)| {
            let p = t.apply_unclipped(*s);
            (p.r - t_.r).powi(2) + (p.g - t_.g).powi(2) + (p.b - t_.b).powi(2)
        })
        .sum();
    data + ridge * t.frobenius_norm().powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Inverse,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Inverse => "inverse",
        }
    }
}

fn short_digest(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..8])
}

/// Stable identifier of a transform's matrix and basis.
pub fn transform_fingerprint<T: Real>(t: &ColorTransform<T>) -> String {
    let spec = t.feature_spec();
    let mut s = format!("{} {}", spec.degree(), spec.include_bias());
    for v in t.matrix() {
        let _ = write!(s, " {v}");
    }
    short_digest(s.as_bytes())
}

/// Identifier of everything a fit depends on; a cached transform is reused
/// only when this matches.
pub fn fit_input_fingerprint<T: Real>(
    standard: &PatchSet<T>,
    image_patches: &PatchSet<T>,
    spec: FeatureSpec,
    ridge: T,
) -> String {
    let mut s = format!("{} {} {ridge}", spec.degree(), spec.include_bias());
    for c in standard.iter().chain(image_patches.iter()) {
        let _ = write!(s, " {} {} {}", c.r, c.g, c.b);
    }
    short_digest(s.as_bytes())
}

/// One transform as stored in the per-image cache.
#[derive(Debug, Clone, PartialEq)]
pub struct CachedTransform<T> {
    pub image_id: String,
    pub direction: Direction,
    pub inputs: String,
    pub transform: ColorTransform<T>,
}

const CACHE_HEADER: &str = "# relight transform v1";

/// Text form: header, `key value` lines, then three `row` lines holding the
/// matrix entries row-major at full precision.
pub fn format_cached_transform<T: Real>(c: &CachedTransform<T>) -> String {
    let spec = c.transform.feature_spec();
    let mut s = String::new();
    let _ = writeln!(s, "{CACHE_HEADER}");
    let _ = writeln!(s, "image_id {}", c.image_id);
    let _ = writeln!(s, "direction {}", c.direction.as_str());
    let _ = writeln!(s, "degree {}", spec.degree());
    let _ = writeln!(s, "bias {}", spec.include_bias());
    let _ = writeln!(s, "inputs {}", c.inputs);
    for r in 0..3 {
        s.push_str("row");
        for v in c.transform.row(r) {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    s
}

pub fn parse_cached_transform<T: Real>(text: &str, origin: &Path) -> Result<CachedTransform<T>> {
    let mut image_id = None;
    let mut direction = None;
    let mut degree = None;
    let mut bias = None;
    let mut inputs = None;
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let err = |m: String| Error::parse(origin, lineno + 1, m);
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
        match key {
            "image_id" => image_id = Some(rest.to_string()),
            "direction" => {
                direction = Some(match rest {
                    "forward" => Direction::Forward,
                    "inverse" => Direction::Inverse,
                    other => return Err(err(format!("unknown direction `{other}`"))),
                })
            }
            "degree" => degree = Some(rest.parse::<u32>().map_err(|e| err(e.to_string()))?),
            "bias" => bias = Some(rest.parse::<bool>().map_err(|e| err(e.to_string()))?),
            "inputs" => inputs = Some(rest.to_string()),
            "row" => {
                let row = rest
                    .split_whitespace()
                    .map(|f| f.parse::<T>().map_err(|_| err(format!("`{f}` is not a number"))))
                    .collect::<Result<Vec<T>>>()?;
                rows.push(row);
            }
            other => return Err(err(format!("unknown key `{other}`"))),
        }
    }
    let missing = |k: &str| Error::parse(origin, 0, format!("missing `{k}`"));
    let spec = FeatureSpec::new(degree.ok_or_else(|| missing("degree"))?, bias.ok_or_else(|| missing("bias"))?)?;
    let rows: [Vec<T>; 3] = rows
        .try_into()
        .map_err(|r: Vec<Vec<T>>| Error::parse(origin, 0, format!("expected 3 rows, found {}", r.len())))?;
    Ok(CachedTransform {
        image_id: image_id.ok_or_else(|| missing("image_id"))?,
        direction: direction.ok_or_else(|| missing("direction"))?,
        inputs: inputs.ok_or_else(|| missing("inputs"))?,
        transform: ColorTransform::from_rows(rows, spec)?,
    })
}

pub fn load_cached_transform<T: Real>(path: &Path) -> Result<CachedTransform<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_cached_transform(&text, path)
}

pub fn save_cached_transform<T: Real>(path: &Path, c: &CachedTransform<T>) -> Result<()> {
    std::fs::write(path, format_cached_transform(c)).map_err(|e| Error::io(path, e))
}

/// Cache file name for one image and direction.
pub fn cache_file_name(image_id: &str, direction: Direction) -> String {
    format!("{image_id}.{}.txt", direction.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::{builtin_reference_colors, LinearColor};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_patches(rng: &mut ChaCha8Rng) -> PatchSet<f64> {
        PatchSet::new(
            (0..24)
                .map(|_| {
                    LinearColor::new(
                        rng.random_range(0.02..0.98),
                        rng.random_range(0.02..0.98),
                        rng.random_range(0.02..0.98),
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    fn assert_close(a: LinearColor<f64>, b: LinearColor<f64>, tol: f64) {
        for (x, y) in a.to_array().iter().zip(b.to_array()) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn self_fit_is_identity_on_patches() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let p = random_patches(&mut rng);
            let t = fit_transform(&p, &p, FeatureSpec::default(), 0.0).unwrap();
            for c in p.iter() {
                assert_close(t.apply(*c), *c, 1e-6);
            }
            assert!(fit_residual(&t, &p, &p) < 1e-6);
        }
    }

    #[test]
    fn scaled_targets_are_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let src = random_patches(&mut rng);
        let dst = src.try_map(|c| c.scale(0.5)).unwrap();
        let t = fit_transform(&src, &dst, FeatureSpec::default(), 0.0).unwrap();
        for (s, d) in src.iter().zip(dst.iter()) {
            assert_close(t.apply(*s), *d, 1e-6);
        }
    }

    #[test]
    fn identical_patches_are_singular_without_ridge() {
        let p = PatchSet::new(vec![LinearColor::new(0.3, 0.4, 0.5); 24]).unwrap();
        assert!(matches!(
            fit_transform(&p, &p, FeatureSpec::default(), 0.0),
            Err(Error::SingularSystem { .. })
        ));
        // The default ridge stabilizes the same data.
        assert!(fit_transform(&p, &p, FeatureSpec::default(), DEFAULT_RIDGE).is_ok());
        assert!(matches!(
            fit_transform(&p, &p, FeatureSpec::default(), -1.0),
            Err(Error::InvalidRidge(_))
        ));
    }

    #[test]
    fn fit_pair_on_scaled_standard() {
        let standard = builtin_reference_colors::<f64>();
        let image = standard.try_map(|c| c.scale(0.5)).unwrap();
        let pair = fit_pair(&standard, &image, FeatureSpec::default(), 0.0).unwrap();
        for (s, i) in standard.iter().zip(image.iter()) {
            assert_close(pair.forward.apply(*i), *s, 1e-6);
            assert_close(pair.inverse.apply(*s), *i, 1e-6);
        }
        let same = fit_pair(&standard, &standard, FeatureSpec::default(), 0.0).unwrap();
        for s in standard.iter() {
            assert_close(same.forward.apply(*s), *s, 1e-6);
            assert_close(same.inverse.apply(*s), *s, 1e-6);
        }
    }

    #[test]
    fn forward_then_inverse_round_trips_on_fitting_points() {
        let standard = builtin_reference_colors::<f64>();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let illum = LinearColor::new(0.9, 0.7, 0.45);
        let image = standard
            .try_map(|c| {
                c.mul_channels(illum)
                    .map(|v| (v + rng.random_range(-0.004..0.004)).max(0.0))
            })
            .unwrap();
        let pair = fit_pair(&standard, &image, FeatureSpec::default(), DEFAULT_RIDGE).unwrap();
        for c in image.iter() {
            assert_close(pair.inverse.apply(pair.forward.apply(*c)), *c, 0.02);
        }
    }

    #[test]
    fn residual_of_zero_transform_is_target_rms() {
        let standard = builtin_reference_colors::<f64>();
        let zero = ColorTransform::zeros(FeatureSpec::default());
        let rms = (standard
            .iter()
            .map(|c| c.r * c.r + c.g * c.g + c.b * c.b)
            .sum::<f64>()
            / 72.0)
            .sqrt();
        assert!((fit_residual(&zero, &standard, &standard) - rms).abs() < 1e-15);
    }

    #[test]
    fn fitting_never_loses_to_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spec = FeatureSpec::default();
        for _ in 0..50 {
            let (a, b) = (random_patches(&mut rng), random_patches(&mut rng));
            let fitted = fit_transform(&a, &b, spec, 0.0).unwrap();
            let ident = ColorTransform::identity(spec);
            assert!(fit_residual(&fitted, &a, &b) <= fit_residual(&ident, &a, &b) + 1e-12);
        }
    }

    #[test]
    fn fits_are_bit_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (a, b) = (random_patches(&mut rng), random_patches(&mut rng));
        let t1 = fit_transform(&a, &b, FeatureSpec::default(), DEFAULT_RIDGE).unwrap();
        let t2 = fit_transform(&a, &b, FeatureSpec::default(), DEFAULT_RIDGE).unwrap();
        assert!(t1.matrix().iter().zip(t2.matrix()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn degree_one_fit_recovers_affine_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let src = random_patches(&mut rng);
        let dst = src
            .try_map(|c| LinearColor::new(0.8 * c.r + 0.1 * c.g + 0.05, 0.9 * c.g + 0.02, 0.2 * c.r + 0.6 * c.b + 0.1))
            .unwrap();
        let spec = FeatureSpec::new(1, true).unwrap();
        let t = fit_transform(&src, &dst, spec, 0.0).unwrap();
        let want = [0.8, 0.1, 0.0, 0.05, 0.0, 0.9, 0.0, 0.02, 0.2, 0.0, 0.6, 0.1];
        for (a, b) in t.matrix().iter().zip(want) {
            assert!((a - b).abs() < 1e-9, "{:?}", t.matrix());
        }
    }

    #[test]
    fn cache_text_round_trips_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (a, b) = (random_patches(&mut rng), random_patches(&mut rng));
        let t = fit_transform(&a, &b, FeatureSpec::default(), DEFAULT_RIDGE).unwrap();
        let cached = CachedTransform {
            image_id: "img_07".into(),
            direction: Direction::Inverse,
            inputs: fit_input_fingerprint(&a, &b, FeatureSpec::default(), DEFAULT_RIDGE),
            transform: t.clone(),
        };
        let text = format_cached_transform(&cached);
        let back: CachedTransform<f64> = parse_cached_transform(&text, Path::new("c")).unwrap();
        assert_eq!(back, cached);
        assert_eq!(transform_fingerprint(&back.transform), transform_fingerprint(&t));
        assert!(parse_cached_transform::<f64>(&text.replace("row", "rho"), Path::new("c")).is_err());
    }

    #[test]
    fn fingerprints_track_inputs() {
        let s = builtin_reference_colors::<f64>();
        let spec = FeatureSpec::default();
        let f1 = fit_input_fingerprint(&s, &s, spec, 1e-4);
        assert_eq!(f1, fit_input_fingerprint(&s, &s, spec, 1e-4));
        assert_ne!(f1, fit_input_fingerprint(&s, &s, spec, 1e-3));
        assert_eq!(f1.len(), 16);
    }
}
