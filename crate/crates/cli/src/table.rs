//! Feature table: 46 feature columns, `class_id`, the three term bits and
//! `sample_id`, one row per sample.

use crate::error::{data, CliError, Result};
use pdeid_core::types::FEATURE_NAMES;
use pdeid_core::{Dataset, FeatureVector, Sample, TermLabels, FEATURE_COUNT};
use std::path::Path;

pub const LABEL_COLUMNS: [&str; 5] = ["class_id", "has_utt", "has_ut", "has_conv", "sample_id"];

pub fn header() -> Vec<&'static str> {
    FEATURE_NAMES.iter().copied().chain(LABEL_COLUMNS).collect()
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn write_features(path: &Path, samples: &[Sample]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(data(path.display()))?;
    w.write_record(header()).map_err(data(path.display()))?;
    for s in samples {
        let mut row: Vec<String> = s.features.values().iter().map(|&v| fmt_f64(v)).collect();
        let l = s.labels;
        row.push(l.class_id().to_string());
        row.extend([l.has_utt, l.has_ut, l.has_conv].map(|b| u8::from(b).to_string()));
        row.push(s.id.clone());
        w.write_record(&row).map_err(data(path.display()))?;
    }
    w.flush().map_err(data(path.display()))
}

pub fn read_features(path: &Path) -> Result<Dataset> {
    let mut r = csv::Reader::from_path(path).map_err(data(path.display()))?;
    let head: Vec<String> = r
        .headers()
        .map_err(data(path.display()))?
        .iter()
        .map(str::to_string)
        .collect();
    if head != header() {
        return Err(CliError::Data(format!(
            "{}: unexpected header",
            path.display()
        )));
    }
    let mut samples = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(data(path.display()))?;
        let bad =
            |what: &str| CliError::Data(format!("{}: row {}: {what}", path.display(), line + 1));
        let num = |i: usize| {
            rec[i]
                .parse::<f64>()
                .map_err(|_| bad(&format!("column {} is not a number", head[i])))
        };
        let values = (0..FEATURE_COUNT).map(num).collect::<Result<Vec<f64>>>()?;
        let bit = |i: usize| match &rec[FEATURE_COUNT + i] {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(bad("term bits must be 0 or 1")),
        };
        let labels = TermLabels::new(bit(1)?, bit(2)?, bit(3)?);
        if rec[FEATURE_COUNT] != labels.class_id().to_string() {
            return Err(bad("class_id disagrees with the term bits"));
        }
        samples.push(Sample {
            id: rec[FEATURE_COUNT + 4].to_string(),
            labels,
            spec: None,
            features: FeatureVector::from_slice(&values).expect("46 values"),
        });
    }
    Ok(Dataset { seed: 0, samples })
}
