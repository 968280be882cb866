//! Assembly of the 46-entry feature vector and per-task feature masks.

use crate::motion::{motion_magnitude, motion_vectors};
use crate::par::Exec;
use crate::signal::{self, SignalError};
use crate::spatial::spatial_features;
use crate::types::{
    FeatureFamily, FeatureVector, GridField, PdeSpec, FEATURE_COUNT, FEATURE_NAMES,
};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{family} features: {source}")]
pub struct FeatureError {
    pub family: FeatureFamily,
    #[source]
    pub source: SignalError,
}

/// Extracts every feature family from a normalized field.
pub fn extract_all(field: &GridField, spec: &PdeSpec) -> Result<FeatureVector, FeatureError> {
    let tag = |family| move |source| FeatureError { family, source };
    let raw = signal::delta_signal(field);
    let prepared = signal::prepare_signal(&raw).map_err(tag(FeatureFamily::Stat))?;
    let stat = signal::stats_features(&prepared).map_err(tag(FeatureFamily::Stat))?;
    let env = signal::envelopes(&prepared);
    let amp = signal::amplitude_features(&env).map_err(tag(FeatureFamily::Amp))?;
    let fft = signal::fft_features(&prepared.values);
    let motion = motion_magnitude(&motion_vectors(field));
    let sym = spatial_features(field, spec);

    let mut values = [0.0; FEATURE_COUNT];
    let parts: [&[f64]; 5] = [&stat, &amp, &fft, &[motion], &sym];
    for (family, part) in FeatureFamily::ALL.into_iter().zip(parts) {
        values[family.range()].copy_from_slice(part);
    }
    Ok(FeatureVector::new(values))
}

/// Extracts features for many `(field, spec)` pairs, keeping input order.
pub fn extract_batch(
    items: &[(GridField, PdeSpec)],
    exec: Exec,
) -> Result<Vec<FeatureVector>, FeatureError> {
    exec.try_map(items, |(f, s)| extract_all(f, s))
}

/// Learning task a feature mask is tailored to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Utt,
    Ut,
    Conv,
    Multiclass,
}

impl Task {
    pub const DETECTORS: [Task; 3] = [Task::Utt, Task::Ut, Task::Conv];

    pub fn families(self) -> &'static [FeatureFamily] {
        use FeatureFamily::*;
        match self {
            Task::Utt | Task::Ut => &[Stat, Amp, Fft, Motion],
            Task::Conv => &[Motion, Sym],
            Task::Multiclass => &FeatureFamily::ALL,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Utt => "utt",
            Task::Ut => "ut",
            Task::Conv => "conv",
            Task::Multiclass => "multiclass",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "utt" => Ok(Task::Utt),
            "ut" => Ok(Task::Ut),
            "conv" => Ok(Task::Conv),
            "multiclass" => Ok(Task::Multiclass),
            other => Err(format!(
                "unknown task '{other}' (expected utt, ut, conv or multiclass)"
            )),
        }
    }
}

/// Column indices covering the given families, in vector order.
pub fn family_columns(families: &[FeatureFamily]) -> Vec<usize> {
    (0..FEATURE_COUNT)
        .filter(|&i| {
            let fam =
                FeatureFamily::of_name(FEATURE_NAMES[i]).expect("names carry a family prefix");
            families.contains(&fam)
        })
        .collect()
}

/// Feature names used by `task`.
pub fn task_mask(task: Task) -> Vec<&'static str> {
    task_columns(task)
        .into_iter()
        .map(|i| FEATURE_NAMES[i])
        .collect()
}

pub fn task_columns(task: Task) -> Vec<usize> {
    family_columns(task.families())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_sizes() {
        assert_eq!(task_mask(Task::Conv).len(), 8);
        assert_eq!(task_mask(Task::Multiclass).len(), 46);
        assert_eq!(task_mask(Task::Utt).len(), 39);
        assert!(task_mask(Task::Utt).iter().all(|n| !n.starts_with("sym_")));
        assert!(task_mask(Task::Ut).iter().all(|n| !n.starts_with("sym_")));
    }

    #[test]
    fn masks_are_nested_in_multiclass() {
        let all = task_mask(Task::Multiclass);
        for t in Task::DETECTORS {
            assert!(task_mask(t).iter().all(|n| all.contains(n)));
        }
    }

    #[test]
    fn task_parsing() {
        assert_eq!("conv".parse::<Task>().unwrap(), Task::Conv);
        assert!("nope".parse::<Task>().is_err());
    }

    #[test]
    fn constant_field_features() {
        let spec = PdeSpec::standard(0.0, 0.0, 1.0, 0.0, 0.0, [0.1; 4]);
        let field = GridField::from_fn(500, 21, 21, 1e-4, |_, _, _| 0.0).unwrap();
        let fv = extract_all(&field, &spec).unwrap();
        assert!(fv.family(FeatureFamily::Stat).iter().all(|&v| v == 0.0));
        assert!(fv.family(FeatureFamily::Amp).iter().all(|&v| v == 0.0));
        assert!(fv.family(FeatureFamily::Fft).iter().all(|&v| v == 0.0));
        assert!(fv.family(FeatureFamily::Sym).iter().all(|&v| v == 0.0));
        // all-tie search always picks (dy, dx) = (-1, 0)
        assert_eq!(fv.get("motion_magnitude"), Some(1.0));
    }

    #[test]
    fn short_fields_are_rejected_with_family() {
        let spec = PdeSpec::standard(0.0, 1.0, 1.0, 0.0, 0.0, [0.1; 4]);
        let field = GridField::from_fn(100, 5, 5, 1e-4, |t, _, _| t as f64).unwrap();
        let err = extract_all(&field, &spec).unwrap_err();
        assert_eq!(err.family, FeatureFamily::Stat);
    }
}
