//! Commands that work on raw fields: generate, featurize, coeff, series.

use crate::error::{data, CliError, Result};
use crate::run::{csv_bytes, FileRecord, OutDir};
use crate::store::{
    content_hash, file_sha256, load_sample, read_manifest, to_json_bytes, write_sample,
    DatasetManifest, SampleMeta, DATASET_FORMAT, MANIFEST_FILE, SAMPLE_DIR, SAMPLE_FORMAT,
};
use crate::table::{fmt_f64, write_features};
use clap::Args;
use pdeid_core::coeff::{
    damping_estimate, regress_coefficients, wave_speed_estimate, RegressOptions, Term,
};
use pdeid_core::features::extract_all;
use pdeid_core::motion::motion_vectors;
use pdeid_core::par::Exec;
use pdeid_core::signal::{delta_signal, envelopes, magnitude_spectrum, prepare_signal};
use pdeid_core::solver::{enumerate_specs, solve, SolverConfig};
use pdeid_core::spatial::{minmax_normalized, project_profiles, symmetry_from_profile};
use pdeid_core::{normalize_field, ClassId, PdeSpec, Sample};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

/// Class selection parsed from `all` or a comma-separated list of ids.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassList(pub Vec<ClassId>);

pub fn parse_classes(s: &str) -> std::result::Result<ClassList, String> {
    if s.trim() == "all" {
        return Ok(ClassList(ClassId::ALL.to_vec()));
    }
    let mut out = Vec::new();
    for part in s.split(',') {
        let id: u8 = part
            .trim()
            .parse()
            .map_err(|_| format!("'{part}' is not a class id"))?;
        out.push(ClassId::new(id).ok_or_else(|| format!("class id {id} outside 1..=8"))?);
    }
    out.sort();
    out.dedup();
    Ok(ClassList(out))
}

fn numeric<E: std::fmt::Display>(context: impl std::fmt::Display) -> impl FnOnce(E) -> CliError {
    move |e| CliError::Numeric(format!("{context}: {e}"))
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// `all` or a comma-separated list of class ids (1-8)
    #[arg(long, default_value = "all", value_parser = parse_classes)]
    pub classes: ClassList,
    /// Output dataset directory; must be absent or empty
    #[arg(long)]
    pub out: PathBuf,
    /// Recorded in the manifest; generation itself is deterministic
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn generate(args: &GenerateArgs, exec: Exec) -> Result<()> {
    let out = &args.out;
    let existed = out.exists();
    if existed
        && fs::read_dir(out)
            .map_err(data(out.display()))?
            .next()
            .is_some()
    {
        return Err(CliError::Data(format!(
            "{}: output directory is not empty",
            out.display()
        )));
    }
    fs::create_dir_all(out.join(SAMPLE_DIR)).map_err(data(out.display()))?;
    let result = write_dataset(args, exec);
    if result.is_err() {
        // leave nothing half-written behind
        let _ = if existed {
            fs::remove_dir_all(out.join(SAMPLE_DIR)).and_then(|_| {
                match fs::remove_file(out.join(MANIFEST_FILE)) {
                    Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(e),
                    _ => Ok(()),
                }
            })
        } else {
            fs::remove_dir_all(out)
        };
    }
    result
}

fn write_dataset(args: &GenerateArgs, exec: Exec) -> Result<()> {
    let cfg = SolverConfig::default();
    let specs = enumerate_specs(&args.classes.0);
    let entries = exec.try_map(&specs, |s| {
        let field = solve(&s.spec, &cfg).map_err(numeric(format!("sample {}", s.id)))?;
        let meta = SampleMeta {
            format: SAMPLE_FORMAT.into(),
            id: s.id.clone(),
            class_id: s.class,
            spec: s.spec,
            labels: s.spec.labels(),
            shape: [field.nt(), field.ny(), field.nx()],
            dt: field.dt(),
        };
        write_sample(&args.out, &meta, &field)
    })?;
    let manifest = DatasetManifest {
        format: DATASET_FORMAT.into(),
        seed: args.seed,
        classes: args.classes.0.clone(),
        solver: cfg,
        content_hash: content_hash(&entries),
        samples: entries,
    };
    let p = args.out.join(MANIFEST_FILE);
    fs::write(&p, to_json_bytes(&manifest)).map_err(data(p.display()))?;
    println!(
        "wrote {} samples to {}",
        manifest.samples.len(),
        args.out.display()
    );
    println!("content hash {}", manifest.content_hash);
    Ok(())
}

fn dataset_input(dir: &Path) -> Result<FileRecord> {
    Ok(FileRecord {
        name: MANIFEST_FILE.into(),
        sha256: file_sha256(&dir.join(MANIFEST_FILE))?,
    })
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    /// Dataset directory written by `generate`
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for features.csv
    #[arg(long)]
    pub out: PathBuf,
}

pub fn featurize(args: &FeaturizeArgs, exec: Exec) -> Result<()> {
    let m = read_manifest(&args.data)?;
    let samples = exec.try_map(&m.samples, |e| {
        let (meta, field) = load_sample(&args.data, e)?;
        let norm = normalize_field(&field);
        let features =
            extract_all(&norm.field, &meta.spec).map_err(numeric(format!("sample {}", e.id)))?;
        Ok::<_, CliError>(Sample {
            id: meta.id,
            labels: meta.labels,
            spec: Some(meta.spec),
            features,
        })
    })?;
    let mut out = OutDir::create(&args.out)?;
    write_features(&out.path("features.csv"), &samples)?;
    out.track("features.csv");
    println!("featurized {} samples", samples.len());
    #[derive(Serialize)]
    struct Config<'a> {
        dataset_content_hash: &'a str,
    }
    out.finish(
        "featurize",
        Config {
            dataset_content_hash: &m.content_hash,
        },
        vec![dataset_input(&args.data)?],
    )
}

#[derive(Debug, Args)]
pub struct CoeffArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Restrict to these classes (`all` or a comma-separated list)
    #[arg(long, default_value = "all", value_parser = parse_classes)]
    pub classes: ClassList,
    /// Savitzky-Golay smoothing of node series before differencing
    #[arg(long)]
    pub smooth_time: bool,
}

#[derive(Debug, Clone, Serialize)]
struct CoeffRow {
    id: String,
    class_id: ClassId,
    spec: PdeSpec,
    regression: Option<pdeid_core::coeff::Coefficients>,
    regression_error: Option<String>,
    /// `|ĉ·k − c| / c`, with `k` the true coefficient of the normalized term.
    c_rel_err: Option<f64>,
    wave_speed: Option<f64>,
    damping: Option<f64>,
}

#[derive(Debug, Serialize)]
struct SpeedGroup {
    c: f64,
    samples: usize,
    tracked: usize,
    mean_speed: Option<f64>,
}

#[derive(Debug, Serialize)]
struct WaveSummary {
    class_id: ClassId,
    groups: Vec<SpeedGroup>,
    /// Over samples with a tracked front.
    spearman_samples: Option<f64>,
    /// Over per-c mean speeds.
    spearman_means: Option<f64>,
    /// Groups of samples identical except for `c`, all tracked.
    matched_groups: usize,
    /// Of those, groups whose speed strictly increases with `c`.
    matched_increasing: usize,
}

#[derive(Debug, Serialize)]
struct DampingSummary {
    class_id: ClassId,
    /// Samples identical except for `d`, compared lower d vs higher d.
    pairs: usize,
    higher_d_decays_faster: usize,
    negative_rates: usize,
}

#[derive(Debug, Serialize)]
struct RegressionSummary {
    class_id: ClassId,
    fitted: usize,
    max_c_rel_err: Option<f64>,
    mean_c_rel_err: Option<f64>,
}

#[derive(Debug, Serialize)]
struct CoeffSummary {
    wave_speed: Vec<WaveSummary>,
    damping: Vec<DampingSummary>,
    regression: Vec<RegressionSummary>,
}

/// Spearman rank correlation with tied values sharing their mean rank.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            for &k in &idx[i..=j] {
                r[k] = (i + j) as f64 / 2.0;
            }
            i = j + 1;
        }
        r
    }
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}

fn coeff_row(meta: &SampleMeta, field: &pdeid_core::GridField, opts: RegressOptions) -> CoeffRow {
    let spec = meta.spec;
    let (regression, regression_error) =
        match regress_coefficients(field, meta.labels, spec.h(), opts) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
    let c_rel_err = regression.as_ref().and_then(|r| {
        let k = match r.normalized {
            Term::Utt => spec.e,
            Term::Ut => spec.d,
            _ => return None,
        };
        Some((r.c * k - spec.c).abs() / spec.c)
    });
    let wave = spec.e != 0.0;
    CoeffRow {
        id: meta.id.clone(),
        class_id: meta.class_id,
        spec,
        regression,
        regression_error,
        c_rel_err,
        wave_speed: wave
            .then(|| wave_speed_estimate(field, &spec).ok().map(|w| w.speed))
            .flatten(),
        damping: (wave && spec.d != 0.0)
            .then(|| damping_estimate(field).ok())
            .flatten(),
    }
}

fn summarize(rows: &[CoeffRow]) -> CoeffSummary {
    let mut by_class: BTreeMap<ClassId, Vec<&CoeffRow>> = BTreeMap::new();
    for r in rows {
        by_class.entry(r.class_id).or_default().push(r);
    }
    let mut s = CoeffSummary {
        wave_speed: Vec::new(),
        damping: Vec::new(),
        regression: Vec::new(),
    };
    for (&class_id, rs) in &by_class {
        let errs: Vec<f64> = rs.iter().filter_map(|r| r.c_rel_err).collect();
        s.regression.push(RegressionSummary {
            class_id,
            fitted: rs.iter().filter(|r| r.regression.is_some()).count(),
            max_c_rel_err: errs.iter().copied().reduce(f64::max),
            mean_c_rel_err: (!errs.is_empty())
                .then(|| errs.iter().sum::<f64>() / errs.len() as f64),
        });
        if rs[0].spec.e == 0.0 {
            continue;
        }
        let mut cs: Vec<f64> = rs.iter().map(|r| r.spec.c).collect();
        cs.sort_by(f64::total_cmp);
        cs.dedup();
        let groups: Vec<SpeedGroup> = cs
            .iter()
            .map(|&c| {
                let speeds: Vec<f64> = rs
                    .iter()
                    .filter(|r| r.spec.c == c)
                    .filter_map(|r| r.wave_speed)
                    .collect();
                SpeedGroup {
                    c,
                    samples: rs.iter().filter(|r| r.spec.c == c).count(),
                    tracked: speeds.len(),
                    mean_speed: (!speeds.is_empty())
                        .then(|| speeds.iter().sum::<f64>() / speeds.len() as f64),
                }
            })
            .collect();
        let tracked: Vec<(f64, f64)> = rs
            .iter()
            .filter_map(|r| r.wave_speed.map(|v| (r.spec.c, v)))
            .collect();
        let (tc, tv): (Vec<f64>, Vec<f64>) = tracked.into_iter().unzip();
        let means: Vec<(f64, f64)> = groups
            .iter()
            .filter_map(|g| g.mean_speed.map(|m| (g.c, m)))
            .collect();
        let (mc, mv): (Vec<f64>, Vec<f64>) = means.into_iter().unzip();
        let mut matched: BTreeMap<String, Vec<(f64, Option<f64>)>> = BTreeMap::new();
        for r in rs {
            let key = format!("{:?}", (r.spec.d, r.spec.bx, r.spec.by, r.spec.bc));
            matched
                .entry(key)
                .or_default()
                .push((r.spec.c, r.wave_speed));
        }
        let complete: Vec<Vec<(f64, f64)>> = matched
            .into_values()
            .filter_map(|mut g| {
                g.sort_by(|a, b| a.0.total_cmp(&b.0));
                (g.len() > 1)
                    .then(|| {
                        g.into_iter()
                            .map(|(c, v)| v.map(|v| (c, v)))
                            .collect::<Option<Vec<_>>>()
                    })
                    .flatten()
            })
            .collect();
        s.wave_speed.push(WaveSummary {
            class_id,
            groups,
            spearman_samples: spearman(&tc, &tv),
            spearman_means: spearman(&mc, &mv),
            matched_groups: complete.len(),
            matched_increasing: complete
                .iter()
                .filter(|g| g.windows(2).all(|w| w[1].1 > w[0].1))
                .count(),
        });
        if rs.iter().any(|r| r.damping.is_some()) {
            let key = |r: &CoeffRow| format!("{:?}", (r.spec.c, r.spec.bx, r.spec.by, r.spec.bc));
            let mut d = DampingSummary {
                class_id,
                pairs: 0,
                higher_d_decays_faster: 0,
                negative_rates: 0,
            };
            d.negative_rates = rs
                .iter()
                .filter(|r| r.damping.is_some_and(|l| l < 0.0))
                .count();
            for a in rs {
                for b in rs {
                    if a.spec.d < b.spec.d && key(a) == key(b) {
                        if let (Some(la), Some(lb)) = (a.damping, b.damping) {
                            d.pairs += 1;
                            d.higher_d_decays_faster += usize::from(lb > la);
                        }
                    }
                }
            }
            s.damping.push(d);
        }
    }
    s
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn coeff(args: &CoeffArgs, exec: Exec) -> Result<()> {
    let m = read_manifest(&args.data)?;
    let entries: Vec<_> = m
        .samples
        .iter()
        .filter(|e| args.classes.0.contains(&e.class_id))
        .cloned()
        .collect();
    let opts = RegressOptions {
        smooth_time: args.smooth_time,
        ..RegressOptions::default()
    };
    let rows = exec.try_map(&entries, |e| {
        let (meta, field) = load_sample(&args.data, e)?;
        Ok::<_, CliError>(coeff_row(&meta, &field, opts))
    })?;
    let header = [
        "sample_id",
        "class_id",
        "e",
        "d",
        "c",
        "bx",
        "by",
        "normalized",
        "e_hat",
        "d_hat",
        "c_hat",
        "bx_hat",
        "by_hat",
        "relative_residual",
        "c_rel_err",
        "wave_speed",
        "damping",
    ];
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut v = vec![r.id.clone(), r.class_id.to_string()];
            v.extend([r.spec.e, r.spec.d, r.spec.c, r.spec.bx, r.spec.by].map(fmt_f64));
            match &r.regression {
                Some(c) => {
                    v.push(
                        serde_json::to_value(c.normalized)
                            .expect("term")
                            .as_str()
                            .unwrap_or_default()
                            .to_string(),
                    );
                    v.extend([c.e, c.d, c.c, c.bx, c.by, c.relative_residual].map(fmt_f64));
                }
                None => v.extend(std::iter::repeat_n(String::new(), 7)),
            }
            v.extend([r.c_rel_err, r.wave_speed, r.damping].map(opt));
            v
        })
        .collect();
    let summary = summarize(&rows);
    let mut out = OutDir::create(&args.out)?;
    out.write("coeff.csv", &csv_bytes(&header, &table))?;
    out.write_json("coeff_summary.json", &summary)?;
    for w in &summary.wave_speed {
        let means: Vec<String> = w
            .groups
            .iter()
            .map(|g| format!("c={} {}", g.c, opt(g.mean_speed)))
            .collect();
        println!("class {} wave speed: {}", w.class_id, means.join(", "));
        println!(
            "class {} matched groups increasing in c: {}/{}",
            w.class_id, w.matched_increasing, w.matched_groups
        );
    }
    for d in &summary.damping {
        println!(
            "class {} damping: {}/{} pairs decay faster with larger d",
            d.class_id, d.higher_d_decays_faster, d.pairs
        );
    }
    #[derive(Serialize)]
    struct Config<'a> {
        classes: &'a [ClassId],
        regress: RegressOptions,
        dataset_content_hash: &'a str,
    }
    out.finish(
        "coeff",
        Config {
            classes: &args.classes.0,
            regress: opts,
            dataset_content_hash: &m.content_hash,
        },
        vec![dataset_input(&args.data)?],
    )
}

#[derive(Debug, Args)]
pub struct SeriesArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Sample id, e.g. c5_0000
    #[arg(long)]
    pub sample: String,
    #[arg(long)]
    pub out: PathBuf,
}

/// Plot-ready series for one sample: time signal with envelopes, spectrum,
/// final-frame profiles and per-step motion.
pub fn series(args: &SeriesArgs) -> Result<()> {
    let m = read_manifest(&args.data)?;
    let entry = m
        .samples
        .iter()
        .find(|e| e.id == args.sample)
        .ok_or_else(|| CliError::Data(format!("sample {} not in manifest", args.sample)))?;
    let (meta, field) = load_sample(&args.data, entry)?;
    let field = normalize_field(&field).field;
    let raw = delta_signal(&field);
    let prepared = prepare_signal(&raw).map_err(numeric("time signal"))?;
    let env = envelopes(&prepared);

    let mut out = OutDir::create(&args.out)?;
    let rows: Vec<Vec<String>> = (0..raw.len())
        .map(|t| {
            vec![
                t.to_string(),
                fmt_f64(raw.values[t]),
                fmt_f64(prepared.values[t]),
                fmt_f64(env.upper[t]),
                fmt_f64(env.lower[t]),
                fmt_f64(env.amplitude[t]),
            ]
        })
        .collect();
    out.write(
        "signal.csv",
        &csv_bytes(
            &["t", "delta", "prepared", "upper", "lower", "amplitude"],
            &rows,
        ),
    )?;

    let mean = prepared.values.iter().sum::<f64>() / prepared.len() as f64;
    let centered: Vec<f64> = prepared.values.iter().map(|v| v - mean).collect();
    let mag = magnitude_spectrum(&centered);
    let peak = mag.iter().copied().fold(0.0, f64::max);
    let n = prepared.len() as f64;
    let rows: Vec<Vec<String>> = mag
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            vec![
                fmt_f64(k as f64 / n),
                fmt_f64(if peak > 0.0 { v / peak } else { 0.0 }),
            ]
        })
        .collect();
    out.write("spectrum.csv", &csv_bytes(&["f", "magnitude"], &rows))?;

    let last = field.nt() - 1;
    let p = project_profiles(&field, &meta.spec, last);
    let v1n = minmax_normalized(&p.v1);
    let sym = symmetry_from_profile(&v1n);
    let rows: Vec<Vec<String>> = (0..p.v1.len())
        .map(|g| {
            vec![
                g.to_string(),
                fmt_f64(p.v1[g]),
                fmt_f64(p.v2[g]),
                fmt_f64(v1n[g]),
                opt(sym.get(g).copied()),
            ]
        })
        .collect();
    out.write(
        "profiles.csv",
        &csv_bytes(&["g", "v1", "v2", "v1_normalized", "symmetry"], &rows),
    )?;

    let mv = motion_vectors(&field);
    let rows: Vec<Vec<String>> = mv
        .vectors
        .iter()
        .enumerate()
        .map(|(t, (x, y))| vec![t.to_string(), fmt_f64(*x), fmt_f64(*y)])
        .collect();
    out.write("motion.csv", &csv_bytes(&["t", "vx", "vy"], &rows))?;

    #[derive(Serialize)]
    struct Config<'a> {
        sample: &'a str,
    }
    out.finish(
        "series",
        Config {
            sample: &args.sample,
        },
        vec![dataset_input(&args.data)?],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_lists() {
        assert_eq!(parse_classes("all").unwrap().0.len(), 8);
        assert_eq!(
            parse_classes("3, 1,3").unwrap().0,
            vec![ClassId::new(1).unwrap(), ClassId::new(3).unwrap()]
        );
        assert!(parse_classes("9").is_err());
        assert!(parse_classes("x").is_err());
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), None);
        // ties share the mean rank
        let r = spearman(&[1.0, 1.0, 2.0, 2.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((r - 0.894_427_190_999_915_9).abs() < 1e-12);
    }
}
