//! Linear-light colors, the 24-patch checker layout, sRGB coding and
//! polynomial color transforms.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Number of patches on a ColorChecker Classic.
pub const PATCH_COUNT: usize = 24;
/// Checker grid columns (patches per row).
pub const GRID_COLS: usize = 6;
/// Checker grid rows.
pub const GRID_ROWS: usize = 4;

/// Upper clip applied when a transform is evaluated. Values in the standard
/// condition may legitimately exceed 1, so only the final composite is
/// clipped to `[0, 1]`.
pub const INTERMEDIATE_CLIP_MAX: f64 = 4.0;

/// Patch names in row-major order, top-left to bottom-right.
pub const PATCH_NAMES: [&str; PATCH_COUNT] = [
    "dark skin",
    "light skin",
    "blue sky",
    "foliage",
    "blue flower",
    "bluish green",
    "orange",
    "purplish blue",
    "moderate red",
    "purple",
    "yellow green",
    "orange yellow",
    "blue",
    "green",
    "red",
    "yellow",
    "magenta",
    "cyan",
    "white",
    "neutral 8",
    "neutral 6.5",
    "neutral 5",
    "neutral 3.5",
    "black",
];

const BUILTIN_REFERENCE_COLORS: &str = include_str!("../data/colorchecker_classic_srgb.txt");

/// A color in linear RGB.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinearColor<T> {
    pub r: T,
    pub g: T,
    pub b: T,
}

impl<T: Real> LinearColor<T> {
    #[inline]
    pub const fn new(r: T, g: T, b: T) -> Self {
        Self { r, g, b }
    }

    /// Builds a color, rejecting non-finite or negative channels.
    pub fn try_new(r: T, g: T, b: T) -> Result<Self> {
        let c = Self { r, g, b };
        if c.is_valid() {
            Ok(c)
        } else {
            Err(Error::InvalidColor {
                r: r.to_f64_lossy(),
                g: g.to_f64_lossy(),
                b: b.to_f64_lossy(),
            })
        }
    }

    #[inline]
    pub fn splat(v: T) -> Self {
        Self { r: v, g: v, b: v }
    }

    #[inline]
    pub fn from_array([r, g, b]: [T; 3]) -> Self {
        Self { r, g, b }
    }

    #[inline]
    pub fn to_array(self) -> [T; 3] {
        [self.r, self.g, self.b]
    }

    #[inline]
    pub fn map(self, mut f: impl FnMut(T) -> T) -> Self {
        Self {
            r: f(self.r),
            g: f(self.g),
            b: f(self.b),
        }
    }

    #[inline]
    pub fn scale(self, k: T) -> Self {
        self.map(|v| v * k)
    }

    /// Channel-wise product, i.e. a diagonal (von Kries style) illuminant.
    #[inline]
    pub fn mul_channels(self, other: Self) -> Self {
        Self {
            r: self.r * other.r,
            g: self.g * other.g,
            b: self.b * other.b,
        }
    }

    #[inline]
    pub fn clamp(self, lo: T, hi: T) -> Self {
        self.map(|v| v.max(lo).min(hi))
    }

    pub fn is_valid(&self) -> bool {
        self.to_array()
            .iter()
            .all(|v| v.is_finite() && *v >= T::zero())
    }

    pub fn cast<U: Real>(self) -> LinearColor<U> {
        LinearColor {
            r: U::lit(self.r.to_f64_lossy()),
            g: U::lit(self.g.to_f64_lossy()),
            b: U::lit(self.b.to_f64_lossy()),
        }
    }
}

/// The 24 patch colors of one checker, row-major over the 6x4 grid:
/// index 0 is "dark skin" at the top-left, index 23 is "black" at the
/// bottom-right.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet<T> {
    colors: [LinearColor<T>; PATCH_COUNT],
}

impl<T: Real> PatchSet<T> {
    pub fn new(colors: Vec<LinearColor<T>>) -> Result<Self> {
        let colors: [LinearColor<T>; PATCH_COUNT] = colors
            .try_into()
            .map_err(|v: Vec<_>| Error::PatchCount(v.len()))?;
        for c in &colors {
            LinearColor::try_new(c.r, c.g, c.b)?;
        }
        Ok(Self { colors })
    }

    #[inline]
    pub fn colors(&self) -> &[LinearColor<T>; PATCH_COUNT] {
        &self.colors
    }

    #[inline]
    pub fn get(&self, index: usize) -> LinearColor<T> {
        self.colors[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = &LinearColor<T>> {
        self.colors.iter()
    }

    /// Applies `f` to every patch. Fails if the result breaks the color invariants.
    pub fn try_map(&self, f: impl FnMut(&LinearColor<T>) -> LinearColor<T>) -> Result<Self> {
        Self::new(self.colors.iter().map(f).collect())
    }

    pub fn to_srgb8(&self) -> Vec<[u8; 3]> {
        self.colors.iter().map(|c| linear_to_srgb(*c)).collect()
    }
}

#[inline]
pub fn srgb_channel_to_linear<T: Real>(byte: u8) -> T {
    let v = T::from_u8(byte).unwrap() / T::lit(255.0);
    if v <= T::lit(0.04045) {
        v / T::lit(12.92)
    } else {
        ((v + T::lit(0.055)) / T::lit(1.055)).powf(T::lit(2.4))
    }
}

#[inline]
pub fn linear_channel_to_srgb<T: Real>(value: T) -> u8 {
    // NaN maps to 0 through max().
    let v = value.max(T::zero()).min(T::one());
    let encoded = if v <= T::lit(0.0031308) {
        v * T::lit(12.92)
    } else {
        T::lit(1.055) * v.powf(T::lit(1.0 / 2.4)) - T::lit(0.055)
    };
    (encoded * T::lit(255.0))
        .round()
        .max(T::zero())
        .min(T::lit(255.0))
        .to_u8()
        .unwrap_or(0)
}

/// Decodes an 8-bit sRGB triple with the standard sRGB transfer function.
#[inline]
pub fn srgb_to_linear<T: Real>(rgb: [u8; 3]) -> LinearColor<T> {
    LinearColor::new(
        srgb_channel_to_linear(rgb[0]),
        srgb_channel_to_linear(rgb[1]),
        srgb_channel_to_linear(rgb[2]),
    )
}

/// Encodes a linear color to 8-bit sRGB, clipping to `[0, 1]` first.
#[inline]
pub fn linear_to_srgb<T: Real>(c: LinearColor<T>) -> [u8; 3] {
    [
        linear_channel_to_srgb(c.r),
        linear_channel_to_srgb(c.g),
        linear_channel_to_srgb(c.b),
    ]
}

/// Maximum number of polynomial terms any [`FeatureSpec`] produces.
pub const MAX_TERMS: usize = 10;

/// Polynomial basis used by a [`ColorTransform`].
///
/// Terms are ordered `r, g, b`, then for degree 2 `r², g², b², rg, gb, rb`,
/// then the constant `1` when `include_bias` is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureSpec {
    degree: u32,
    include_bias: bool,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            degree: 2,
            include_bias: true,
        }
    }
}

impl FeatureSpec {
    pub fn new(degree: u32, include_bias: bool) -> Result<Self> {
        match degree {
            1 | 2 => Ok(Self {
                degree,
                include_bias,
            }),
            d => Err(Error::UnsupportedDegree(d)),
        }
    }

    #[inline]
    pub fn degree(&self) -> u32 {
        self.degree
    }

    #[inline]
    pub fn include_bias(&self) -> bool {
        self.include_bias
    }

    #[inline]
    pub fn term_count(&self) -> usize {
        let poly = if self.degree == 1 { 3 } else { 9 };
        poly + usize::from(self.include_bias)
    }

    /// Writes the feature vector of `c` into the front of `out` and returns its length.
    #[inline]
    pub fn expand_into<T: Real>(&self, c: LinearColor<T>, out: &mut [T; MAX_TERMS]) -> usize {
        let LinearColor { r, g, b } = c;
        out[0] = r;
        out[1] = g;
        out[2] = b;
        let mut n = 3;
        if self.degree == 2 {
            out[3] = r * r;
            out[4] = g * g;
            out[5] = b * b;
            out[6] = r * g;
            out[7] = g * b;
            out[8] = r * b;
            n = 9;
        }
        if self.include_bias {
            out[n] = T::one();
            n += 1;
        }
        n
    }
}

/// Polynomial feature vector of `c`, ordered as documented on [`FeatureSpec`].
pub fn expand_features<T: Real>(c: LinearColor<T>, spec: FeatureSpec) -> Vec<T> {
    let mut buf = [T::zero(); MAX_TERMS];
    let n = spec.expand_into(c, &mut buf);
    buf[..n].to_vec()
}

/// A 3 x `term_count` polynomial color-matching matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorTransform<T> {
    /// Row-major, one row per output channel.
    matrix: Vec<T>,
    spec: FeatureSpec,
}

impl<T: Real> ColorTransform<T> {
    /// `matrix` is row-major with `3 * spec.term_count()` entries.
    pub fn new(matrix: Vec<T>, spec: FeatureSpec) -> Result<Self> {
        let k = spec.term_count();
        if matrix.len() != 3 * k {
            return Err(Error::MatrixShape {
                expected: k,
                found: matrix.len() / 3,
            });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteMatrix);
        }
        Ok(Self { matrix, spec })
    }

    pub fn from_rows(rows: [Vec<T>; 3], spec: FeatureSpec) -> Result<Self> {
        let k = spec.term_count();
        if let Some(bad) = rows.iter().find(|r| r.len() != k) {
            return Err(Error::MatrixShape {
                expected: k,
                found: bad.len(),
            });
        }
        Self::new(rows.concat(), spec)
    }

    pub fn zeros(spec: FeatureSpec) -> Self {
        Self {
            matrix: vec![T::zero(); 3 * spec.term_count()],
            spec,
        }
    }

    /// Linear block set to the identity and every other column zero.
    pub fn identity(spec: FeatureSpec) -> Self {
        let mut t = Self::zeros(spec);
        let k = spec.term_count();
        for i in 0..3 {
            t.matrix[i * k + i] = T::one();
        }
        t
    }

    #[inline]
    pub fn feature_spec(&self) -> FeatureSpec {
        self.spec
    }

    /// Row-major matrix entries.
    #[inline]
    pub fn matrix(&self) -> &[T] {
        &self.matrix
    }

    #[inline]
    pub fn entry(&self, row: usize, col: usize) -> T {
        self.matrix[row * self.spec.term_count() + col]
    }

    pub fn row(&self, row: usize) -> &[T] {
        let k = self.spec.term_count();
        &self.matrix[row * k..(row + 1) * k]
    }

    pub fn frobenius_norm(&self) -> T {
        self.matrix.iter().map(|v| *v * *v).sum::<T>().sqrt()
    }

    /// Matrix times feature vector, without clipping.
    #[inline]
    pub fn apply_unclipped(&self, c: LinearColor<T>) -> LinearColor<T> {
        let mut phi = [T::zero(); MAX_TERMS];
        let k = self.spec.expand_into(c, &mut phi);
        let mut out = [T::zero(); 3];
        for (ch, o) in out.iter_mut().enumerate() {
            let row = &self.matrix[ch * k..(ch + 1) * k];
            *o = row.iter().zip(&phi[..k]).map(|(m, p)| *m * *p).sum();
        }
        LinearColor::from_array(out)
    }

    /// Applies the transform and clips every channel to `[0, INTERMEDIATE_CLIP_MAX]`.
    #[inline]
    pub fn apply(&self, c: LinearColor<T>) -> LinearColor<T> {
        self.apply_unclipped(c)
            .clamp(T::zero(), T::lit(INTERMEDIATE_CLIP_MAX))
    }
}

/// Free-function form of [`ColorTransform::apply`].
#[inline]
pub fn apply_transform<T: Real>(t: &ColorTransform<T>, c: LinearColor<T>) -> LinearColor<T> {
    t.apply(c)
}

/// Parses a reference-colors file: 24 records `index r g b`, with 8-bit sRGB
/// channels, listed in row-major checker order. Blank lines and `#` comments
/// are ignored.
pub fn parse_reference_colors<T: Real>(text: &str, origin: &Path) -> Result<PatchSet<T>> {
    let mut colors = Vec::with_capacity(PATCH_COUNT);
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                origin,
                lineno + 1,
                format!("expected `index r g b`, found {} fields", fields.len()),
            ));
        }
        let index: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(origin, lineno + 1, "index is not an integer"))?;
        if index != colors.len() + 1 {
            return Err(Error::parse(
                origin,
                lineno + 1,
                format!("expected patch index {}, found {index}", colors.len() + 1),
            ));
        }
        let mut rgb = [0u8; 3];
        for (slot, field) in rgb.iter_mut().zip(&fields[1..]) {
            *slot = field.parse().map_err(|_| {
                Error::parse(origin, lineno + 1, format!("`{field}` is not an 8-bit value"))
            })?;
        }
        colors.push(srgb_to_linear(rgb));
    }
    if colors.len() != PATCH_COUNT {
        return Err(Error::parse(
            origin,
            text.lines().count(),
            format!("expected {PATCH_COUNT} patches, found {}", colors.len()),
        ));
    }
    PatchSet::new(colors)
}

pub fn load_reference_colors<T: Real>(path: &Path) -> Result<PatchSet<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_reference_colors(&text, path)
}

/// Canonical ColorChecker Classic patch colors shipped with the crate.
pub fn builtin_reference_colors<T: Real>() -> PatchSet<T> {
    parse_reference_colors(BUILTIN_REFERENCE_COLORS, Path::new("<builtin>"))
        .expect("bundled reference colors are well formed")
}

/// Serializes 8-bit patch colors in the reference-colors format.
pub fn format_reference_colors(colors: &[[u8; 3]]) -> String {
    let mut s = String::new();
    for (i, [r, g, b]) in colors.iter().enumerate() {
        let _ = writeln!(s, "{} {r} {g} {b}", i + 1);
    }
    s
}
