//! Term-level identification of 2D linear PDEs from spatiotemporal data.
//!
//! The crate covers the whole chain: a finite-difference generator for the
//! eight PDE classes of the general form
//! `e·u_tt + d·u_t − c·∇²u + B·∇u = 0`, physically motivated feature
//! extraction (time-signal statistics, envelopes, spectra, block-matching
//! motion, profile symmetry), gradient-boosted tree detectors for each
//! term, the evaluation harness and coefficient estimators.

pub mod coeff;
pub mod eval;
pub mod features;
pub mod gbdt;
pub mod motion;
pub mod par;
pub mod signal;
pub mod solver;
pub mod spatial;
pub mod stats;
pub mod types;

pub use types::{
    bits_from_class, class_from_bits, normalize_field, ClassId, Dataset, FeatureFamily,
    FeatureVector, FieldError, GridField, NormalizedField, PdeSpec, Sample, TermLabels,
    FEATURE_COUNT,
};
