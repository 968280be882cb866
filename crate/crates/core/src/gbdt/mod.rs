//! Second-order gradient-boosted regression trees.
//!
//! Binary detectors use the logistic loss, the multiclass model uses softmax
//! cross-entropy with one tree per class per round. Splits are exact greedy
//! over sorted feature values, with gain
//! `½[G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ)]` and leaf weight `−η·G/(H+λ)`.

mod train;

pub use train::{fit, fit_with};

use crate::types::FeatureFamily;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MODEL_FORMAT: &str = "pdeid-gbdt/1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GbdtError {
    #[error("labels contain a single class; need at least two")]
    DegenerateLabels,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("label {label} outside 0..{classes}")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(&'static str),
    #[error("model has no split gain to report")]
    UntrainedModel,
    #[error("model document: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Objective {
    BinaryLogistic,
    Softmax { num_class: usize },
}

impl Objective {
    pub fn num_class(self) -> usize {
        match self {
            Objective::BinaryLogistic => 2,
            Objective::Softmax { num_class } => num_class,
        }
    }

    /// Trees grown per boosting round.
    pub fn trees_per_round(self) -> usize {
        match self {
            Objective::BinaryLogistic => 1,
            Objective::Softmax { num_class } => num_class,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_child_weight: f64,
    pub lambda_l2: f64,
    pub subsample: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            rounds: 200,
            max_depth: 4,
            learning_rate: 0.1,
            min_child_weight: 1.0,
            lambda_l2: 1.0,
            subsample: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), GbdtError> {
        if self.rounds < 1 {
            return Err(GbdtError::InvalidConfig("rounds must be >= 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(GbdtError::InvalidConfig("learning_rate must lie in (0, 1]"));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(GbdtError::InvalidConfig("subsample must lie in (0, 1]"));
        }
        if !(self.lambda_l2 >= 0.0 && self.min_child_weight >= 0.0) {
            return Err(GbdtError::InvalidConfig(
                "lambda_l2 and min_child_weight must be >= 0",
            ));
        }
        Ok(())
    }
}

/// Dense row-major feature matrix with column names.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, GbdtError> {
        for r in &rows {
            if r.len() != names.len() {
                return Err(GbdtError::DimensionMismatch {
                    expected: names.len(),
                    got: r.len(),
                });
            }
        }
        Ok(Self { names, rows })
    }
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }
    pub fn n_cols(&self) -> usize {
        self.names.len()
    }
}

/// Tree stored as parallel node arrays; node 0 is the root.
/// `feature[i] < 0` marks a leaf. Rows with `x[feature] < threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub feature: Vec<i64>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    pub value: Vec<f64>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Self {
            feature: vec![-1],
            threshold: vec![0.0],
            left: vec![0],
            right: vec![0],
            value: vec![value],
        }
    }

    pub fn len(&self) -> usize {
        self.feature.len()
    }

    pub fn is_empty(&self) -> bool {
        self.feature.is_empty()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.value[self.leaf_index(x)]
    }

    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        while self.feature[i] >= 0 {
            let f = self.feature[i] as usize;
            i = if x[f] < self.threshold[i] {
                self.left[i]
            } else {
                self.right[i]
            } as usize;
        }
        i
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            if t.feature[i] < 0 {
                0
            } else {
                1 + go(t, t.left[i] as usize).max(go(t, t.right[i] as usize))
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub format: String,
    pub objective: Objective,
    pub config: TrainConfig,
    pub learning_rate: f64,
    /// Initial probability for binary models (margin `logit(base_score)`); unused for softmax.
    pub base_score: f64,
    pub feature_names: Vec<String>,
    /// Round-major; for softmax `trees[round * K + class]`.
    pub trees: Vec<Tree>,
    pub gain_totals: Vec<f64>,
    /// Mean training loss after each round.
    pub train_loss: Vec<f64>,
}

pub(crate) fn sigmoid(m: f64) -> f64 {
    1.0 / (1.0 + (-m).exp())
}

pub(crate) fn softmax_into(margins: &[f64], out: &mut [f64]) {
    let mx = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, m) in out.iter_mut().zip(margins) {
        *o = (m - mx).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

impl GbdtModel {
    /// Untrained model with zero trees.
    pub fn empty(objective: Objective, feature_names: Vec<String>, base_score: f64) -> Self {
        let n = feature_names.len();
        Self {
            format: MODEL_FORMAT.to_string(),
            objective,
            config: TrainConfig::default(),
            learning_rate: TrainConfig::default().learning_rate,
            base_score,
            feature_names,
            trees: Vec::new(),
            gain_totals: vec![0.0; n],
            train_loss: Vec::new(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn rounds(&self) -> usize {
        self.trees.len() / self.objective.trees_per_round()
    }

    pub(crate) fn base_margin(&self) -> f64 {
        match self.objective {
            Objective::BinaryLogistic => {
                let p = self.base_score.clamp(1e-12, 1.0 - 1e-12);
                (p / (1.0 - p)).ln()
            }
            Objective::Softmax { .. } => 0.0,
        }
    }

    /// Raw margins (one per class for softmax, one for binary).
    pub fn predict_margin(&self, x: &[f64]) -> Result<Vec<f64>, GbdtError> {
        if x.len() != self.n_features() {
            return Err(GbdtError::DimensionMismatch {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        let k = self.objective.trees_per_round();
        let mut m = vec![self.base_margin(); k];
        for (i, tree) in self.trees.iter().enumerate() {
            m[i % k] += tree.predict(x);
        }
        Ok(m)
    }

    /// Class probabilities; binary models return `[P(0), P(1)]`.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>, GbdtError> {
        let m = self.predict_margin(x)?;
        Ok(match self.objective {
            Objective::BinaryLogistic => {
                let p = sigmoid(m[0]);
                vec![1.0 - p, p]
            }
            Objective::Softmax { num_class } => {
                let mut p = vec![0.0; num_class];
                softmax_into(&m, &mut p);
                p
            }
        })
    }

    pub fn predict_proba_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, GbdtError> {
        rows.iter().map(|r| self.predict_proba(r)).collect()
    }

    /// Most probable class (lowest index on ties).
    pub fn predict_class(&self, x: &[f64]) -> Result<usize, GbdtError> {
        let p = self.predict_proba(x)?;
        Ok(p.iter()
            .enumerate()
            .fold(0, |best, (i, &v)| if v > p[best] { i } else { best }))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, GbdtError> {
        let m: GbdtModel = serde_json::from_str(s).map_err(|e| GbdtError::Format(e.to_string()))?;
        if m.format != MODEL_FORMAT {
            return Err(GbdtError::Format(format!(
                "unsupported format '{}'",
                m.format
            )));
        }
        if m.gain_totals.len() != m.feature_names.len() {
            return Err(GbdtError::Format(
                "gain_totals length differs from feature count".into(),
            ));
        }
        for t in &m.trees {
            let n = t.feature.len();
            if [
                t.threshold.len(),
                t.left.len(),
                t.right.len(),
                t.value.len(),
            ]
            .iter()
            .any(|&l| l != n)
                || n == 0
            {
                return Err(GbdtError::Format("ragged tree arrays".into()));
            }
            for i in 0..n {
                if t.feature[i] >= 0
                    && (t.feature[i] as usize >= m.feature_names.len()
                        || t.left[i] as usize >= n
                        || t.right[i] as usize >= n
                        || t.left[i] as usize <= i
                        || t.right[i] as usize <= i)
                {
                    return Err(GbdtError::Format(format!("bad split node {i}")));
                }
            }
        }
        Ok(m)
    }
}

/// Gain per feature family, divided by the number of the model's features in
/// that family, as percentages summing to 100. Families absent from the
/// model are omitted.
pub fn feature_importance(model: &GbdtModel) -> Result<Vec<(FeatureFamily, f64)>, GbdtError> {
    let mut per_family: Vec<(FeatureFamily, f64)> = Vec::new();
    for fam in FeatureFamily::ALL {
        let cols: Vec<usize> = model
            .feature_names
            .iter()
            .enumerate()
            .filter(|(_, n)| FeatureFamily::of_name(n) == Some(fam))
            .map(|(i, _)| i)
            .collect();
        if cols.is_empty() {
            continue;
        }
        let total: f64 = cols.iter().map(|&i| model.gain_totals[i]).sum();
        per_family.push((fam, total / cols.len() as f64));
    }
    let sum: f64 = per_family.iter().map(|(_, v)| v).sum();
    if model.trees.is_empty() || !(sum > 0.0) {
        return Err(GbdtError::UntrainedModel);
    }
    Ok(per_family
        .into_iter()
        .map(|(f, v)| (f, 100.0 * v / sum))
        .collect())
}

/// Families sorted by descending importance.
pub fn rank_families(importance: &[(FeatureFamily, f64)]) -> Vec<FeatureFamily> {
    let mut v = importance.to_vec();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    v.into_iter().map(|(f, _)| f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: &[&str]) -> Vec<String> {
        n.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn empty_model_is_uniform() {
        let m = GbdtModel::empty(Objective::BinaryLogistic, names(&["a"]), 0.5);
        assert_eq!(m.predict_proba(&[3.0]).unwrap(), vec![0.5, 0.5]);
        let s = GbdtModel::empty(Objective::Softmax { num_class: 4 }, names(&["a"]), 0.0);
        for p in s.predict_proba(&[0.0]).unwrap() {
            assert!((p - 0.25).abs() < 1e-15);
        }
        assert_eq!(feature_importance(&m), Err(GbdtError::UntrainedModel));
    }

    #[test]
    fn single_split_is_piecewise_constant() {
        let mut m = GbdtModel::empty(Objective::BinaryLogistic, names(&["stat_x", "sym_y"]), 0.5);
        m.trees.push(Tree {
            feature: vec![1, -1, -1],
            threshold: vec![0.5, 0.0, 0.0],
            left: vec![1, 0, 0],
            right: vec![2, 0, 0],
            value: vec![0.0, -2.0, 2.0],
        });
        m.gain_totals = vec![0.0, 3.0];
        let lo = m.predict_proba(&[9.0, 0.1]).unwrap();
        let hi = m.predict_proba(&[9.0, 0.9]).unwrap();
        assert!((lo[1] - sigmoid(-2.0)).abs() < 1e-15);
        assert!((hi[1] - sigmoid(2.0)).abs() < 1e-15);
        assert!((hi[0] + hi[1] - 1.0).abs() < 1e-12);
        assert_eq!(m.trees[0].depth(), 1);
        let imp = feature_importance(&m).unwrap();
        assert_eq!(
            imp,
            vec![(FeatureFamily::Stat, 0.0), (FeatureFamily::Sym, 100.0)]
        );
        assert!(matches!(
            m.predict_proba(&[1.0]),
            Err(GbdtError::DimensionMismatch {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let mut m = GbdtModel::empty(Objective::Softmax { num_class: 3 }, names(&["fft_a"]), 0.0);
        m.trees.push(Tree::leaf(0.25));
        let back = GbdtModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        let bad = m.to_json().replace(MODEL_FORMAT, "other/9");
        assert!(matches!(
            GbdtModel::from_json(&bad),
            Err(GbdtError::Format(_))
        ));
    }
}
