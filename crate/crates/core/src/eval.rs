//! Experiment harness: stratified splits, term-detector pipeline,
//! leave-one-equation-out folds, feature ablation and confusion matrices.

use crate::features::{family_columns, task_columns, task_mask, Task};
use crate::gbdt::{fit_with, FeatureMatrix, GbdtError, GbdtModel, Objective, TrainConfig};
use crate::par::Exec;
use crate::types::{ClassId, Dataset, FeatureFamily, FeatureVector, TermLabels, FEATURE_NAMES};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("{task} detector features do not match its mask")]
    MaskMismatch { task: Task },
    #[error("feature subset is empty")]
    EmptyMask,
    #[error("length mismatch: {truth} truths vs {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("class {0} has no samples")]
    MissingClass(ClassId),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("training {context}: {source}")]
    Train {
        context: String,
        #[source]
        source: GbdtError,
    },
}

/// Mixes a fold index into a seed so each fold draws from its own stream.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stratified split: each class contributes `floor(n_k · ratio)` shuffled
/// samples to train. Both halves keep dataset order.
pub fn split_dataset(ds: &Dataset, ratio: f64, seed: u64) -> (Dataset, Dataset) {
    let ratio = ratio.clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; ds.len()];
    for class in ClassId::ALL {
        let mut idx: Vec<usize> = (0..ds.len())
            .filter(|&i| ds.samples[i].class_id() == class)
            .collect();
        let take = (idx.len() as f64 * ratio + 1e-9).floor() as usize;
        idx.shuffle(&mut rng);
        for &i in &idx[..take.min(idx.len())] {
            in_train[i] = true;
        }
    }
    let (train, test): (Vec<usize>, Vec<usize>) = (0..ds.len()).partition(|&i| in_train[i]);
    (ds.subset(&train), ds.subset(&test))
}

/// Design matrix over the given feature columns.
pub fn design_matrix(ds: &Dataset, columns: &[usize]) -> FeatureMatrix {
    FeatureMatrix {
        names: columns
            .iter()
            .map(|&i| FEATURE_NAMES[i].to_string())
            .collect(),
        rows: ds
            .samples
            .iter()
            .map(|s| s.features.select(columns))
            .collect(),
    }
}

fn task_label(labels: &TermLabels, task: Task) -> usize {
    match task {
        Task::Utt => labels.has_utt as usize,
        Task::Ut => labels.has_ut as usize,
        Task::Conv => labels.has_conv as usize,
        Task::Multiclass => labels.class_id().index(),
    }
}

/// Trains one binary term detector on its task mask.
pub fn train_detector(
    ds: &Dataset,
    task: Task,
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<GbdtModel, EvalError> {
    debug_assert!(task != Task::Multiclass);
    let x = design_matrix(ds, &task_columns(task));
    let y: Vec<usize> = ds
        .samples
        .iter()
        .map(|s| task_label(&s.labels, task))
        .collect();
    fit_with(&x, &y, Objective::BinaryLogistic, cfg, exec).map_err(|source| EvalError::Train {
        context: format!("{task} detector"),
        source,
    })
}

/// Trains an 8-way classifier restricted to `families`.
pub fn train_multiclass(
    ds: &Dataset,
    families: &[FeatureFamily],
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<GbdtModel, EvalError> {
    let columns = family_columns(families);
    if columns.is_empty() {
        return Err(EvalError::EmptyMask);
    }
    let x = design_matrix(ds, &columns);
    let y: Vec<usize> = ds.samples.iter().map(|s| s.class_id().index()).collect();
    fit_with(&x, &y, Objective::Softmax { num_class: 8 }, cfg, exec).map_err(|source| {
        EvalError::Train {
            context: "multiclass model".into(),
            source,
        }
    })
}

/// The three binary detectors behind equation identification.
#[derive(Debug, Clone, PartialEq)]
pub struct Detectors {
    pub utt: GbdtModel,
    pub ut: GbdtModel,
    pub conv: GbdtModel,
}

impl Detectors {
    pub fn train(ds: &Dataset, cfg: &TrainConfig, exec: Exec) -> Result<Self, EvalError> {
        Ok(Detectors {
            utt: train_detector(ds, Task::Utt, cfg, exec)?,
            ut: train_detector(ds, Task::Ut, cfg, exec)?,
            conv: train_detector(ds, Task::Conv, cfg, exec)?,
        })
    }

    pub fn get(&self, task: Task) -> Option<&GbdtModel> {
        match task {
            Task::Utt => Some(&self.utt),
            Task::Ut => Some(&self.ut),
            Task::Conv => Some(&self.conv),
            Task::Multiclass => None,
        }
    }
}

/// Term bits from detector probabilities; a bit is set when `p > 0.5`.
pub fn labels_from_probs(p_utt: f64, p_ut: f64, p_conv: f64) -> TermLabels {
    TermLabels::new(p_utt > 0.5, p_ut > 0.5, p_conv > 0.5)
}

/// Runs each detector on its mask slice of `x` and assembles the term bits.
pub fn identify_equation(det: &Detectors, x: &FeatureVector) -> Result<TermLabels, EvalError> {
    let mut probs = [0.0; 3];
    for (slot, task) in Task::DETECTORS.into_iter().enumerate() {
        let model = det.get(task).expect("detector tasks");
        let mask = task_mask(task);
        if model.feature_names.len() != mask.len()
            || model.feature_names.iter().zip(&mask).any(|(a, b)| a != b)
        {
            return Err(EvalError::MaskMismatch { task });
        }
        let p = model
            .predict_proba(&x.select(&task_columns(task)))
            .map_err(|source| EvalError::Train {
                context: format!("{task} prediction"),
                source,
            })?;
        probs[slot] = p[1];
    }
    Ok(labels_from_probs(probs[0], probs[1], probs[2]))
}

/// Counts indexed `[truth][prediction]` by class index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Confusion {
    pub counts: [[usize; 8]; 8],
    pub accuracy: f64,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// Diagonal over row total, `None` for classes absent from the truth.
    pub fn class_accuracy(&self, class: ClassId) -> Option<f64> {
        let row = &self.counts[class.index()];
        let n: usize = row.iter().sum();
        (n > 0).then(|| row[class.index()] as f64 / n as f64)
    }
}

pub fn confusion_matrix(truth: &[ClassId], pred: &[ClassId]) -> Result<Confusion, EvalError> {
    if truth.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            truth: truth.len(),
            pred: pred.len(),
        });
    }
    let mut counts = [[0usize; 8]; 8];
    for (t, p) in truth.iter().zip(pred) {
        counts[t.index()][p.index()] += 1;
    }
    let correct: usize = (0..8).map(|i| counts[i][i]).sum();
    let accuracy = if truth.is_empty() {
        0.0
    } else {
        correct as f64 / truth.len() as f64
    };
    Ok(Confusion { counts, accuracy })
}

/// Confusion of the detector pipeline on `ds`.
pub fn pipeline_confusion(det: &Detectors, ds: &Dataset) -> Result<Confusion, EvalError> {
    let truth: Vec<ClassId> = ds.samples.iter().map(|s| s.class_id()).collect();
    let pred = ds
        .samples
        .iter()
        .map(|s| identify_equation(det, &s.features).map(|l| l.class_id()))
        .collect::<Result<Vec<_>, _>>()?;
    confusion_matrix(&truth, &pred)
}

pub fn multiclass_predictions(model: &GbdtModel, ds: &Dataset) -> Result<Vec<ClassId>, EvalError> {
    let columns: Vec<usize> = model
        .feature_names
        .iter()
        .map(|n| {
            FEATURE_NAMES
                .iter()
                .position(|m| m == n)
                .ok_or(EvalError::MaskMismatch {
                    task: Task::Multiclass,
                })
        })
        .collect::<Result<_, _>>()?;
    ds.samples
        .iter()
        .map(|s| {
            let k = model
                .predict_class(&s.features.select(&columns))
                .map_err(|source| EvalError::Train {
                    context: "multiclass prediction".into(),
                    source,
                })?;
            Ok(ClassId::from_index(k).expect("softmax over 8 classes"))
        })
        .collect()
}

pub fn multiclass_confusion(model: &GbdtModel, ds: &Dataset) -> Result<Confusion, EvalError> {
    let truth: Vec<ClassId> = ds.samples.iter().map(|s| s.class_id()).collect();
    confusion_matrix(&truth, &multiclass_predictions(model, ds)?)
}

/// Training and test halves of one leave-one-equation-out fold.
pub fn loeo_partition(ds: &Dataset, held_out: ClassId) -> (Dataset, Dataset) {
    let (test, train): (Vec<usize>, Vec<usize>) =
        (0..ds.len()).partition(|&i| ds.samples[i].class_id() == held_out);
    (ds.subset(&train), ds.subset(&test))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoeoFold {
    pub held_out: ClassId,
    /// Predicted-class histogram over the held-out samples.
    pub histogram: [usize; 8],
    pub accuracy: f64,
    pub train_size: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoeoReport {
    pub folds: Vec<LoeoFold>,
    /// Unweighted mean of the per-fold accuracies.
    pub average_accuracy: f64,
}

/// Trains the detectors on seven classes and identifies the eighth, for each class.
pub fn leave_one_equation_out(
    ds: &Dataset,
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<LoeoReport, EvalError> {
    let counts = ds.class_counts();
    if let Some(&missing) = ClassId::ALL.iter().find(|c| counts[c.index()] == 0) {
        return Err(EvalError::MissingClass(missing));
    }
    let folds = exec.map_range(8, |k| -> Result<LoeoFold, EvalError> {
        let held_out = ClassId::ALL[k];
        let (train, test) = loeo_partition(ds, held_out);
        let held: HashSet<&str> = test.samples.iter().map(|s| s.id.as_str()).collect();
        assert!(
            train.samples.iter().all(|s| !held.contains(s.id.as_str())),
            "held-out sample leaked into training"
        );
        let fold_cfg = TrainConfig {
            seed: derive_seed(cfg.seed, k as u64),
            ..*cfg
        };
        // folds already run concurrently; keep the split search sequential
        let det = Detectors::train(&train, &fold_cfg, Exec::Sequential)?;
        let conf = pipeline_confusion(&det, &test)?;
        Ok(LoeoFold {
            held_out,
            histogram: conf.counts[held_out.index()],
            accuracy: conf.class_accuracy(held_out).unwrap_or(0.0),
            train_size: train.len(),
            seed: fold_cfg.seed,
        })
    });
    let folds = folds.into_iter().collect::<Result<Vec<_>, _>>()?;
    let average_accuracy = folds.iter().map(|f| f.accuracy).sum::<f64>() / folds.len() as f64;
    Ok(LoeoReport {
        folds,
        average_accuracy,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub families: Vec<FeatureFamily>,
    pub accuracy: f64,
    /// Agreement of the convection bit implied by the predicted class.
    pub conv_bit_accuracy: f64,
}

/// Multiclass test accuracy for each feature subset plus the full set.
pub fn ablation(
    ds: &Dataset,
    subsets: &[Vec<FeatureFamily>],
    ratio: f64,
    split_seed: u64,
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<Vec<AblationRow>, EvalError> {
    if ds.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    if subsets.iter().any(|s| s.is_empty()) {
        return Err(EvalError::EmptyMask);
    }
    let mut cells: Vec<Vec<FeatureFamily>> = subsets
        .iter()
        .map(|s| {
            let mut s = s.clone();
            s.sort();
            s.dedup();
            s
        })
        .collect();
    let full = FeatureFamily::ALL.to_vec();
    if !cells.contains(&full) {
        cells.push(full);
    }
    let (train, test) = split_dataset(ds, ratio, split_seed);
    let rows = exec.map(&cells, |families| -> Result<AblationRow, EvalError> {
        let model = train_multiclass(&train, families, cfg, Exec::Sequential)?;
        let pred = multiclass_predictions(&model, &test)?;
        let truth: Vec<ClassId> = test.samples.iter().map(|s| s.class_id()).collect();
        let conf = confusion_matrix(&truth, &pred)?;
        let conv_hits = truth
            .iter()
            .zip(&pred)
            .filter(|(t, p)| {
                TermLabels::from_class(**t).has_conv == TermLabels::from_class(**p).has_conv
            })
            .count();
        Ok(AblationRow {
            families: families.clone(),
            accuracy: conf.accuracy,
            conv_bit_accuracy: if truth.is_empty() {
                0.0
            } else {
                conv_hits as f64 / truth.len() as f64
            },
        })
    });
    rows.into_iter().collect()
}
