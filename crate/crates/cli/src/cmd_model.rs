//! Commands that work on a feature table: train, evaluate, loeo, ablation, importance.

use crate::error::{CliError, Result};
use crate::run::{csv_bytes, input_record, OutDir};
use crate::table::{fmt_f64, read_features};
use clap::Args;
use pdeid_core::eval::{
    ablation, leave_one_equation_out, multiclass_confusion, pipeline_confusion, split_dataset,
    train_detector, train_multiclass, Confusion, Detectors,
};
use pdeid_core::features::Task;
use pdeid_core::gbdt::{feature_importance, rank_families, GbdtModel, TrainConfig};
use pdeid_core::par::Exec;
use pdeid_core::{ClassId, Dataset, FeatureFamily};
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 200)]
    pub rounds: usize,
    #[arg(long, default_value_t = 4)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 1.0)]
    pub subsample: f64,
    #[arg(long, default_value_t = 1.0)]
    pub min_child_weight: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl TrainArgs {
    pub fn config(&self) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            rounds: self.rounds,
            max_depth: self.max_depth,
            learning_rate: self.learning_rate,
            min_child_weight: self.min_child_weight,
            lambda_l2: self.lambda,
            subsample: self.subsample,
            seed: self.seed,
        };
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

fn parse_ratio(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err("split ratio must lie strictly between 0 and 1".into())
    }
}

/// `all` or one task name.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TaskSel {
    All,
    One(Task),
}

fn parse_task_sel(s: &str) -> std::result::Result<TaskSel, String> {
    if s == "all" {
        Ok(TaskSel::All)
    } else {
        s.parse().map(TaskSel::One)
    }
}

impl TaskSel {
    fn tasks(self) -> Vec<Task> {
        match self {
            TaskSel::All => vec![Task::Utt, Task::Ut, Task::Conv, Task::Multiclass],
            TaskSel::One(t) => vec![t],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subsets(pub Vec<Vec<FeatureFamily>>);

#[derive(Debug, Clone, PartialEq)]
pub struct Seeds(pub Vec<u64>);

/// Families separated by `+`, subsets by `,`, e.g. `stat,amp+fft`.
pub fn parse_subsets(s: &str) -> std::result::Result<Subsets, String> {
    s.split(',')
        .map(|cell| {
            cell.split('+')
                .map(|f| {
                    FeatureFamily::parse(f.trim())
                        .ok_or_else(|| format!("unknown feature family '{f}'"))
                })
                .collect()
        })
        .collect::<std::result::Result<_, _>>()
        .map(Subsets)
}

fn parse_seeds(s: &str) -> std::result::Result<Seeds, String> {
    s.split(',')
        .map(|v| v.trim().parse().map_err(|_| format!("'{v}' is not a seed")))
        .collect::<std::result::Result<_, _>>()
        .map(Seeds)
}

fn load(path: &Path) -> Result<Dataset> {
    let ds = read_features(path)?;
    if ds.is_empty() {
        return Err(CliError::Data(format!(
            "{}: feature table has no rows",
            path.display()
        )));
    }
    Ok(ds)
}

fn fit_task(ds: &Dataset, task: Task, cfg: &TrainConfig, exec: Exec) -> Result<GbdtModel> {
    Ok(match task {
        Task::Multiclass => train_multiclass(ds, &FeatureFamily::ALL, cfg, exec)?,
        t => train_detector(ds, t, cfg, exec)?,
    })
}

fn families_label(f: &[FeatureFamily]) -> String {
    f.iter().map(|f| f.prefix()).collect::<Vec<_>>().join("+")
}

fn confusion_csv(c: &Confusion) -> Vec<u8> {
    let mut header = vec!["truth".to_string()];
    header.extend(ClassId::ALL.iter().map(|k| format!("pred_{k}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = ClassId::ALL
        .iter()
        .map(|k| {
            std::iter::once(k.to_string())
                .chain(c.counts[k.index()].iter().map(usize::to_string))
                .collect()
        })
        .collect();
    csv_bytes(&header, &rows)
}

#[derive(Debug, Args)]
pub struct TrainCmd {
    /// Feature table written by `featurize`
    #[arg(long)]
    pub features: PathBuf,
    /// utt, ut, conv, multiclass or all
    #[arg(long, default_value = "all", value_parser = parse_task_sel)]
    pub task: TaskSel,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub train: TrainArgs,
}

pub fn train(args: &TrainCmd) -> Result<()> {
    let cfg = args.train.config()?;
    let ds = load(&args.features)?;
    let mut out = OutDir::create(&args.out)?;
    for task in args.task.tasks() {
        let model = fit_task(&ds, task, &cfg, Exec::Sequential)?;
        let mut text = model.to_json();
        text.push('\n');
        out.write(&format!("model_{task}.json"), text.as_bytes())?;
        println!(
            "trained {task} model: {} rounds on {} samples",
            model.rounds(),
            ds.len()
        );
    }
    out.finish("train", cfg, vec![input_record(&args.features)?])
}

#[derive(Debug, Args)]
pub struct EvaluateCmd {
    #[arg(long)]
    pub features: PathBuf,
    /// Training fraction of the stratified split
    #[arg(long, default_value = "0.8", value_parser = parse_ratio)]
    pub split: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub train: TrainArgs,
}

#[derive(Debug, Serialize)]
struct Metrics {
    train_size: usize,
    test_size: usize,
    multiclass_accuracy: f64,
    pipeline_accuracy: f64,
    multiclass_per_class: Vec<Option<f64>>,
    pipeline_per_class: Vec<Option<f64>>,
}

pub fn evaluate(args: &EvaluateCmd) -> Result<()> {
    let cfg = args.train.config()?;
    let ds = load(&args.features)?;
    let (train, test) = split_dataset(&ds, args.split, cfg.seed);
    let model = train_multiclass(&train, &FeatureFamily::ALL, &cfg, Exec::Sequential)?;
    let det = Detectors::train(&train, &cfg, Exec::Sequential)?;
    let mc = multiclass_confusion(&model, &test)?;
    let pc = pipeline_confusion(&det, &test)?;
    let per_class = |c: &Confusion| ClassId::ALL.iter().map(|&k| c.class_accuracy(k)).collect();
    let metrics = Metrics {
        train_size: train.len(),
        test_size: test.len(),
        multiclass_accuracy: mc.accuracy,
        pipeline_accuracy: pc.accuracy,
        multiclass_per_class: per_class(&mc),
        pipeline_per_class: per_class(&pc),
    };
    let mut out = OutDir::create(&args.out)?;
    out.write_json("metrics.json", &metrics)?;
    out.write("confusion_multiclass.csv", &confusion_csv(&mc))?;
    out.write("confusion_pipeline.csv", &confusion_csv(&pc))?;
    println!("multiclass accuracy {:.4}", mc.accuracy);
    println!("pipeline accuracy {:.4}", pc.accuracy);
    #[derive(Serialize)]
    struct Config {
        split: f64,
        train: TrainConfig,
    }
    out.finish(
        "evaluate",
        Config {
            split: args.split,
            train: cfg,
        },
        vec![input_record(&args.features)?],
    )
}

#[derive(Debug, Args)]
pub struct LoeoCmd {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub train: TrainArgs,
}

pub fn loeo(args: &LoeoCmd, exec: Exec) -> Result<()> {
    let cfg = args.train.config()?;
    let ds = load(&args.features)?;
    let report = leave_one_equation_out(&ds, &cfg, exec)?;
    let mut header = vec!["held_out".to_string()];
    header.extend(ClassId::ALL.iter().map(|k| format!("pred_{k}")));
    header.push("accuracy".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = report
        .folds
        .iter()
        .map(|f| {
            let mut r = vec![f.held_out.to_string()];
            r.extend(f.histogram.iter().map(usize::to_string));
            r.push(fmt_f64(f.accuracy));
            r
        })
        .collect();
    let mut out = OutDir::create(&args.out)?;
    out.write("loeo.csv", &csv_bytes(&header, &rows))?;
    out.write_json("loeo.json", &report)?;
    for f in &report.folds {
        println!("held out {}: {:.2}%", f.held_out, 100.0 * f.accuracy);
    }
    println!("average accuracy {:.2}%", 100.0 * report.average_accuracy);
    out.finish("loeo", cfg, vec![input_record(&args.features)?])
}

#[derive(Debug, Args)]
pub struct AblationCmd {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Split seeds; each also seeds training
    #[arg(long, default_value = "0,1,2,3,4", value_parser = parse_seeds)]
    pub seeds: Seeds,
    #[arg(long, default_value = "0.8", value_parser = parse_ratio)]
    pub split: f64,
    /// Comma-separated subsets of `+`-joined families; the full set is always added
    #[arg(long, default_value = "stat,amp,fft,motion,sym", value_parser = parse_subsets)]
    pub subsets: Subsets,
    #[command(flatten)]
    pub train: TrainArgs,
}

pub fn ablation_cmd(args: &AblationCmd) -> Result<()> {
    let base = args.train.config()?;
    let ds = load(&args.features)?;
    let mut rows = Vec::new();
    // per subset label: accuracies in seed order
    let mut by_subset: Vec<(String, Vec<f64>)> = Vec::new();
    for &seed in &args.seeds.0 {
        let cfg = TrainConfig { seed, ..base };
        for r in ablation(
            &ds,
            &args.subsets.0,
            args.split,
            seed,
            &cfg,
            Exec::Sequential,
        )? {
            let label = families_label(&r.families);
            match by_subset.iter_mut().find(|(l, _)| *l == label) {
                Some((_, v)) => v.push(r.accuracy),
                None => by_subset.push((label.clone(), vec![r.accuracy])),
            }
            rows.push(vec![
                seed.to_string(),
                label,
                fmt_f64(r.accuracy),
                fmt_f64(r.conv_bit_accuracy),
            ]);
        }
    }
    let summary: Vec<Vec<String>> = by_subset
        .iter()
        .map(|(l, v)| {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            println!("{l}: mean accuracy {:.4}", mean);
            vec![
                l.clone(),
                fmt_f64(mean),
                fmt_f64(v.iter().copied().fold(f64::INFINITY, f64::min)),
            ]
        })
        .collect();
    let mut out = OutDir::create(&args.out)?;
    out.write(
        "ablation.csv",
        &csv_bytes(
            &["seed", "families", "accuracy", "conv_bit_accuracy"],
            &rows,
        ),
    )?;
    out.write(
        "ablation_summary.csv",
        &csv_bytes(&["families", "mean_accuracy", "min_accuracy"], &summary),
    )?;
    #[derive(Serialize)]
    struct Config<'a> {
        seeds: &'a [u64],
        split: f64,
        subsets: Vec<String>,
        train: TrainConfig,
    }
    let cfg = Config {
        seeds: &args.seeds.0,
        split: args.split,
        subsets: args.subsets.0.iter().map(|s| families_label(s)).collect(),
        train: base,
    };
    out.finish("ablation", cfg, vec![input_record(&args.features)?])
}

#[derive(Debug, Args)]
pub struct ImportanceCmd {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, default_value = "multiclass", value_parser = parse_task_sel)]
    pub task: TaskSel,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub train: TrainArgs,
}

pub fn importance(args: &ImportanceCmd) -> Result<()> {
    let cfg = args.train.config()?;
    let ds = load(&args.features)?;
    let mut fam_rows = Vec::new();
    let mut feat_rows = Vec::new();
    for task in args.task.tasks() {
        let model = fit_task(&ds, task, &cfg, Exec::Sequential)?;
        let imp = feature_importance(&model)
            .map_err(|e| CliError::Numeric(format!("{task} importance: {e}")))?;
        let rank = rank_families(&imp);
        for fam in &rank {
            let pct = imp
                .iter()
                .find(|(f, _)| f == fam)
                .map(|(_, v)| *v)
                .unwrap_or(0.0);
            println!("{task} {fam}: {pct:.2}%");
            fam_rows.push(vec![task.to_string(), fam.to_string(), fmt_f64(pct)]);
        }
        for (name, gain) in model.feature_names.iter().zip(&model.gain_totals) {
            feat_rows.push(vec![task.to_string(), name.clone(), fmt_f64(*gain)]);
        }
    }
    let mut out = OutDir::create(&args.out)?;
    out.write(
        "importance.csv",
        &csv_bytes(&["task", "family", "percent"], &fam_rows),
    )?;
    out.write(
        "importance_features.csv",
        &csv_bytes(&["task", "feature", "gain"], &feat_rows),
    )?;
    out.finish("importance", cfg, vec![input_record(&args.features)?])
}
