//! Shared domain types: fields, PDE parameters, term labels and feature vectors.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("field shape {nt}x{ny}x{nx} is too small (need nt>=2, ny>=3, nx>=3)")]
    BadShape { nt: usize, ny: usize, nx: usize },
    #[error("field has {got} values, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("field value at flat index {0} is not finite")]
    NonFinite(usize),
    #[error("time step must be positive and finite, got {0}")]
    BadTimeStep(f64),
}

/// Spatiotemporal solution `u(t, y, x)` on a regular grid, stored row-major
/// in `(t, y, x)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    values: Vec<f64>,
    nt: usize,
    ny: usize,
    nx: usize,
    dt: f64,
}

impl GridField {
    pub fn new(
        values: Vec<f64>,
        nt: usize,
        ny: usize,
        nx: usize,
        dt: f64,
    ) -> Result<Self, FieldError> {
        if nt < 2 || ny < 3 || nx < 3 {
            return Err(FieldError::BadShape { nt, ny, nx });
        }
        let expected = nt * ny * nx;
        if values.len() != expected {
            return Err(FieldError::LengthMismatch {
                got: values.len(),
                expected,
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FieldError::NonFinite(i));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(FieldError::BadTimeStep(dt));
        }
        Ok(Self {
            values,
            nt,
            ny,
            nx,
            dt,
        })
    }

    /// Builds a field by evaluating `f(t, y, x)` at every grid point.
    pub fn from_fn(
        nt: usize,
        ny: usize,
        nx: usize,
        dt: f64,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self, FieldError> {
        let mut values = Vec::with_capacity(nt * ny * nx);
        for t in 0..nt {
            for y in 0..ny {
                for x in 0..nx {
                    values.push(f(t, y, x));
                }
            }
        }
        Self::new(values, nt, ny, nx, dt)
    }

    /// Stacks equally shaped frames (each `ny*nx`, row-major) into a field.
    pub fn from_frames(
        frames: &[Vec<f64>],
        ny: usize,
        nx: usize,
        dt: f64,
    ) -> Result<Self, FieldError> {
        let mut values = Vec::with_capacity(frames.len() * ny * nx);
        for frame in frames {
            if frame.len() != ny * nx {
                return Err(FieldError::LengthMismatch {
                    got: frame.len(),
                    expected: ny * nx,
                });
            }
            values.extend_from_slice(frame);
        }
        Self::new(values, frames.len(), ny, nx, dt)
    }

    pub fn nt(&self) -> usize {
        self.nt
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.nt, self.ny, self.nx)
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// One frame as a row-major `ny*nx` slice.
    pub fn frame(&self, t: usize) -> &[f64] {
        let n = self.ny * self.nx;
        &self.values[t * n..(t + 1) * n]
    }

    #[inline]
    pub fn at(&self, t: usize, y: usize, x: usize) -> f64 {
        self.values[(t * self.ny + y) * self.nx + x]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Applies `v -> scale * v + offset` to every entry.
    pub fn affine(&self, scale: f64, offset: f64) -> Result<Self, FieldError> {
        let values = self.values.iter().map(|v| scale * v + offset).collect();
        Self::new(values, self.nt, self.ny, self.nx, self.dt)
    }
}

/// Result of min-max normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedField {
    pub field: GridField,
    /// Set when the input was constant; the field is then all zeros.
    pub constant: bool,
    pub min: f64,
    pub max: f64,
}

/// Min-max normalizes the whole field into `[0, 1]`.
///
/// A constant field maps to zeros and sets [`NormalizedField::constant`].
pub fn normalize_field(field: &GridField) -> NormalizedField {
    let (min, max) = field.min_max();
    let range = max - min;
    let (values, constant) = if range > 0.0 {
        (
            field.values.iter().map(|v| (v - min) / range).collect(),
            false,
        )
    } else {
        (vec![0.0; field.values.len()], true)
    };
    let field = GridField {
        values,
        ..field.clone()
    };
    NormalizedField {
        field,
        constant,
        min,
        max,
    }
}

/// Coefficients and discretization of one PDE instance of the general form
/// `e·u_tt + d·u_t − c·∇²u + bx·u_x + by·u_y = 0` on a square with Dirichlet walls.
///
/// Wall order: `bc[0]` at x-min, `bc[1]` at y-min, `bc[2]` at y-max, `bc[3]` at x-max.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeSpec {
    pub e: f64,
    pub d: f64,
    pub c: f64,
    pub bx: f64,
    pub by: f64,
    pub bc: [f64; 4],
    pub ic: f64,
    pub dt_sim: f64,
    pub nt: usize,
    pub ny: usize,
    pub nx: usize,
    pub domain_len: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("diffusion coefficient must be positive, got {0}")]
    NonPositiveDiffusion(f64),
    #[error("mass coefficient must be 0 or 1, got {0}")]
    BadMass(f64),
    #[error("invalid grid: nt={nt}, ny={ny}, nx={nx}")]
    BadGrid { nt: usize, ny: usize, nx: usize },
    #[error("{name} must be positive and finite, got {value}")]
    BadScalar { name: &'static str, value: f64 },
}

impl PdeSpec {
    pub const STD_DT: f64 = 1e-4;
    pub const STD_NT: usize = 500;
    pub const STD_N: usize = 21;
    pub const STD_IC: f64 = 0.1;

    /// Standard dataset spec (21×21, 500 frames at dt = 1e-4, interior 0.1, unit square).
    pub fn standard(e: f64, d: f64, c: f64, bx: f64, by: f64, bc: [f64; 4]) -> Self {
        Self {
            e,
            d,
            c,
            bx,
            by,
            bc,
            ic: Self::STD_IC,
            dt_sim: Self::STD_DT,
            nt: Self::STD_NT,
            ny: Self::STD_N,
            nx: Self::STD_N,
            domain_len: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(SpecError::NonPositiveDiffusion(self.c));
        }
        if self.e != 0.0 && self.e != 1.0 {
            return Err(SpecError::BadMass(self.e));
        }
        if self.nt < 2 || self.ny < 3 || self.nx < 3 {
            return Err(SpecError::BadGrid {
                nt: self.nt,
                ny: self.ny,
                nx: self.nx,
            });
        }
        for (name, value) in [("dt_sim", self.dt_sim), ("domain_len", self.domain_len)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(SpecError::BadScalar { name, value });
            }
        }
        for (name, value) in [
            ("d", self.d),
            ("bx", self.bx),
            ("by", self.by),
            ("ic", self.ic),
        ] {
            if !value.is_finite() {
                return Err(SpecError::BadScalar { name, value });
            }
        }
        Ok(())
    }

    /// No time derivative present: `(e, d) = (0, 0)`.
    pub fn is_steady(&self) -> bool {
        self.e == 0.0 && self.d == 0.0
    }

    /// Grid spacing (same in x and y).
    pub fn h(&self) -> f64 {
        self.domain_len / (self.nx - 1) as f64
    }

    pub fn labels(&self) -> TermLabels {
        TermLabels::new(
            self.e != 0.0,
            self.d != 0.0,
            self.bx != 0.0 || self.by != 0.0,
        )
    }
}

/// PDE class identifier in `1..=8`, ordered as the rows of the LOEO table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct ClassId(u8);

impl ClassId {
    pub const ALL: [ClassId; 8] = [
        ClassId(1),
        ClassId(2),
        ClassId(3),
        ClassId(4),
        ClassId(5),
        ClassId(6),
        ClassId(7),
        ClassId(8),
    ];

    pub fn new(id: u8) -> Option<Self> {
        (1..=8).contains(&id).then_some(Self(id))
    }
    pub fn get(self) -> u8 {
        self.0
    }
    /// Zero-based index for arrays of length 8.
    pub fn index(self) -> usize {
        (self.0 - 1) as usize
    }
    pub fn from_index(i: usize) -> Option<Self> {
        u8::try_from(i + 1).ok().and_then(Self::new)
    }

    /// Human-readable equation for this class.
    pub fn equation(self) -> &'static str {
        match self.0 {
            1 => "u_t - c*lap(u) = 0",
            2 => "u_t - c*lap(u) + B.grad(u) = 0",
            3 => "-c*lap(u) = 0",
            4 => "-c*lap(u) + B.grad(u) = 0",
            5 => "u_tt - c*lap(u) = 0",
            6 => "u_tt - c*lap(u) + B.grad(u) = 0",
            7 => "u_tt + d*u_t - c*lap(u) = 0",
            _ => "u_tt + d*u_t - c*lap(u) + B.grad(u) = 0",
        }
    }
}

impl TryFrom<u8> for ClassId {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, String> {
        ClassId::new(v).ok_or_else(|| format!("class id {v} outside 1..=8"))
    }
}

impl From<ClassId> for u8 {
    fn from(c: ClassId) -> u8 {
        c.0
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

// (has_utt, has_ut, has_conv) for classes 1..=8.
const CLASS_BITS: [(bool, bool, bool); 8] = [
    (false, true, false),
    (false, true, true),
    (false, false, false),
    (false, false, true),
    (true, false, false),
    (true, false, true),
    (true, true, false),
    (true, true, true),
];

pub fn class_from_bits(has_utt: bool, has_ut: bool, has_conv: bool) -> ClassId {
    let i = CLASS_BITS
        .iter()
        .position(|&b| b == (has_utt, has_ut, has_conv))
        .expect("every bit triple has a class");
    ClassId(i as u8 + 1)
}

pub fn bits_from_class(class: ClassId) -> (bool, bool, bool) {
    CLASS_BITS[class.index()]
}

/// Presence bits for the three detectable terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TermLabels {
    pub has_utt: bool,
    pub has_ut: bool,
    pub has_conv: bool,
}

impl TermLabels {
    pub fn new(has_utt: bool, has_ut: bool, has_conv: bool) -> Self {
        Self {
            has_utt,
            has_ut,
            has_conv,
        }
    }
    pub fn from_class(class: ClassId) -> Self {
        let (a, b, c) = bits_from_class(class);
        Self::new(a, b, c)
    }
    pub fn class_id(&self) -> ClassId {
        class_from_bits(self.has_utt, self.has_ut, self.has_conv)
    }
}

/// Feature families, in vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureFamily {
    Stat,
    Amp,
    Fft,
    Motion,
    Sym,
}

impl FeatureFamily {
    pub const ALL: [FeatureFamily; 5] = [
        FeatureFamily::Stat,
        FeatureFamily::Amp,
        FeatureFamily::Fft,
        FeatureFamily::Motion,
        FeatureFamily::Sym,
    ];

    pub fn prefix(self) -> &'static str {
        match self {
            FeatureFamily::Stat => "stat",
            FeatureFamily::Amp => "amp",
            FeatureFamily::Fft => "fft",
            FeatureFamily::Motion => "motion",
            FeatureFamily::Sym => "sym",
        }
    }

    pub fn size(self) -> usize {
        match self {
            FeatureFamily::Stat => 7,
            FeatureFamily::Amp => 11,
            FeatureFamily::Fft => 20,
            FeatureFamily::Motion => 1,
            FeatureFamily::Sym => 7,
        }
    }

    /// Offset of the family's first entry in the full vector.
    pub fn offset(self) -> usize {
        FeatureFamily::ALL
            .iter()
            .take_while(|&&f| f != self)
            .map(|f| f.size())
            .sum()
    }

    pub fn range(self) -> std::ops::Range<usize> {
        let o = self.offset();
        o..o + self.size()
    }

    /// Family of a feature name, from its prefix.
    pub fn of_name(name: &str) -> Option<Self> {
        let prefix = name.split('_').next()?;
        FeatureFamily::ALL
            .into_iter()
            .find(|f| f.prefix() == prefix)
    }

    pub fn parse(s: &str) -> Option<Self> {
        FeatureFamily::ALL.into_iter().find(|f| f.prefix() == s)
    }
}

impl fmt::Display for FeatureFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.prefix())
    }
}

pub const FEATURE_COUNT: usize = 46;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "stat_mean_50_450",
    "stat_std_50_450",
    "stat_min_350_450",
    "stat_max_350_450",
    "stat_mean_350_450",
    "stat_std_350_450",
    "stat_skew_50_450",
    "amp_max_50_450",
    "amp_argmax_50_450",
    "amp_mean_350_450",
    "amp_std_350_450",
    "amp_skew_350_450",
    "amp_mean_250_450",
    "amp_std_250_450",
    "amp_n_peaks",
    "amp_n_valleys",
    "amp_mean_ratio",
    "amp_max_ratio",
    "fft_b1_mean",
    "fft_b1_std",
    "fft_b1_min",
    "fft_b1_max",
    "fft_b2_mean",
    "fft_b2_std",
    "fft_b2_min",
    "fft_b2_max",
    "fft_b3_mean",
    "fft_b3_std",
    "fft_b3_min",
    "fft_b3_max",
    "fft_b4_mean",
    "fft_b4_std",
    "fft_b4_min",
    "fft_b4_max",
    "fft_b5_mean",
    "fft_b5_std",
    "fft_b5_min",
    "fft_b5_max",
    "motion_magnitude",
    "sym_mean",
    "sym_std",
    "sym_min",
    "sym_max",
    "sym_abs_mean",
    "sym_abs_std",
    "sym_skew",
];

/// The 46 physical features of one sample, in [`FEATURE_NAMES`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: [f64; FEATURE_COUNT],
}

impl FeatureVector {
    pub fn new(values: [f64; FEATURE_COUNT]) -> Self {
        Self { values }
    }

    pub fn from_slice(values: &[f64]) -> Option<Self> {
        Some(Self {
            values: values.try_into().ok()?,
        })
    }

    pub fn names() -> &'static [&'static str] {
        &FEATURE_NAMES
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn family(&self, family: FeatureFamily) -> &[f64] {
        &self.values[family.range()]
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.values[i])
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Values at the given column indices.
    pub fn select(&self, columns: &[usize]) -> Vec<f64> {
        columns.iter().map(|&i| self.values[i]).collect()
    }
}

/// One labelled sample. `spec` is absent when loaded from a feature table.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub labels: TermLabels,
    pub spec: Option<PdeSpec>,
    pub features: FeatureVector,
}

impl Sample {
    pub fn class_id(&self) -> ClassId {
        self.labels.class_id()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub seed: u64,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample counts per class, indexed by [`ClassId::index`].
    pub fn class_counts(&self) -> [usize; 8] {
        let mut counts = [0; 8];
        for s in &self.samples {
            counts[s.class_id().index()] += 1;
        }
        counts
    }

    /// Subset of samples by index, keeping order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            seed: self.seed,
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }
}
