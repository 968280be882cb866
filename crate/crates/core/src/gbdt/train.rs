use super::{
    sigmoid, softmax_into, FeatureMatrix, GbdtError, GbdtModel, Objective, TrainConfig, Tree,
    MODEL_FORMAT,
};
use crate::par::Exec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MIN_SPLIT_GAIN: f64 = 1e-10;
const MIN_HESS: f64 = 1e-16;

/// Fits a boosted ensemble. `y` holds class indices (`0/1` for binary).
pub fn fit(
    x: &FeatureMatrix,
    y: &[usize],
    objective: Objective,
    cfg: &TrainConfig,
) -> Result<GbdtModel, GbdtError> {
    fit_with(x, y, objective, cfg, Exec::default())
}

pub fn fit_with(
    x: &FeatureMatrix,
    y: &[usize],
    objective: Objective,
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<GbdtModel, GbdtError> {
    cfg.validate()?;
    let n = x.n_rows();
    if y.len() != n {
        return Err(GbdtError::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    let k_classes = objective.num_class();
    if k_classes < 2 {
        return Err(GbdtError::InvalidConfig(
            "softmax needs at least two classes",
        ));
    }
    if let Some(&label) = y.iter().find(|&&l| l >= k_classes) {
        return Err(GbdtError::LabelOutOfRange {
            label,
            classes: k_classes,
        });
    }
    if n == 0 || y.iter().all(|&l| l == y[0]) {
        return Err(GbdtError::DegenerateLabels);
    }

    let n_feat = x.n_cols();
    let cols: Vec<Vec<f64>> = (0..n_feat)
        .map(|f| x.rows.iter().map(|r| r[f]).collect())
        .collect();
    let sorted: Vec<Vec<u32>> = cols
        .iter()
        .map(|c| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]).then(a.cmp(&b)));
            idx
        })
        .collect();
    let data = Columns {
        cols: &cols,
        sorted: &sorted,
    };

    let mut model = GbdtModel::empty(objective, x.names.clone(), 0.5);
    model.config = *cfg;
    model.learning_rate = cfg.learning_rate;
    let per_round = objective.trees_per_round();
    let base = model.base_margin();
    let mut margins = vec![base; n * per_round];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut probs = vec![0.0; k_classes];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];

    for _ in 0..cfg.rounds {
        let in_sample: Vec<bool> = if cfg.subsample < 1.0 {
            (0..n).map(|_| rng.random_bool(cfg.subsample)).collect()
        } else {
            vec![true; n]
        };
        // gradients for every class come from the margins at the start of the round
        let snapshot = margins.clone();
        for k in 0..per_round {
            for i in 0..n {
                let (g, h) = match objective {
                    Objective::BinaryLogistic => {
                        let p = sigmoid(snapshot[i]);
                        (p - y[i] as f64, p * (1.0 - p))
                    }
                    Objective::Softmax { .. } => {
                        softmax_into(&snapshot[i * per_round..(i + 1) * per_round], &mut probs);
                        let p = probs[k];
                        (p - if y[i] == k { 1.0 } else { 0.0 }, p * (1.0 - p))
                    }
                };
                grad[i] = g;
                hess[i] = h.max(MIN_HESS);
            }
            let (tree, gains) = build_tree(&data, &grad, &hess, &in_sample, cfg, exec);
            for (f, g) in gains {
                model.gain_totals[f] += g;
            }
            for i in 0..n {
                margins[i * per_round + k] += tree.predict(&x.rows[i]);
            }
            model.trees.push(tree);
        }
        model.train_loss.push(mean_loss(objective, &margins, y));
    }
    debug_assert_eq!(model.format, MODEL_FORMAT);
    Ok(model)
}

fn mean_loss(objective: Objective, margins: &[f64], y: &[usize]) -> f64 {
    let n = y.len();
    let total: f64 = match objective {
        Objective::BinaryLogistic => margins
            .iter()
            .zip(y)
            .map(|(&m, &l)| {
                // log(1 + e^m) − y·m, evaluated stably
                let softplus = if m > 0.0 {
                    m + (-m).exp().ln_1p()
                } else {
                    m.exp().ln_1p()
                };
                softplus - l as f64 * m
            })
            .sum(),
        Objective::Softmax { num_class } => (0..n)
            .map(|i| {
                let row = &margins[i * num_class..(i + 1) * num_class];
                let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = mx + row.iter().map(|m| (m - mx).exp()).sum::<f64>().ln();
                lse - row[y[i]]
            })
            .sum(),
    };
    total / n as f64
}

struct Columns<'a> {
    cols: &'a [Vec<f64>],
    sorted: &'a [Vec<u32>],
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    gl: f64,
    hl: f64,
}

struct BuildNode {
    g: f64,
    h: f64,
    split: Option<(usize, f64, usize, usize)>,
}

const NO_SLOT: u32 = u32::MAX;

/// Grows one tree level by level. Returns the tree and `(feature, gain)` of every split.
fn build_tree(
    data: &Columns<'_>,
    grad: &[f64],
    hess: &[f64],
    in_sample: &[bool],
    cfg: &TrainConfig,
    exec: Exec,
) -> (Tree, Vec<(usize, f64)>) {
    let n = grad.len();
    let lambda = cfg.lambda_l2;
    let mut node_of: Vec<u32> = (0..n)
        .map(|i| if in_sample[i] { 0 } else { NO_SLOT })
        .collect();
    let (g0, h0) = (0..n)
        .filter(|&i| in_sample[i])
        .fold((0.0, 0.0), |(g, h), i| (g + grad[i], h + hess[i]));
    let mut nodes = vec![BuildNode {
        g: g0,
        h: h0,
        split: None,
    }];
    let mut gains = Vec::new();
    let mut frontier = vec![0usize];

    for _depth in 0..cfg.max_depth {
        if frontier.is_empty() {
            break;
        }
        let mut slot_of_node = vec![NO_SLOT; nodes.len()];
        for (s, &node) in frontier.iter().enumerate() {
            slot_of_node[node] = s as u32;
        }
        let row_slot: Vec<u32> = node_of
            .iter()
            .map(|&nd| {
                if nd == NO_SLOT {
                    NO_SLOT
                } else {
                    slot_of_node[nd as usize]
                }
            })
            .collect();
        let totals: Vec<(f64, f64)> = frontier
            .iter()
            .map(|&nd| (nodes[nd].g, nodes[nd].h))
            .collect();

        let per_feature: Vec<Vec<Option<Candidate>>> = exec.map_range(data.cols.len(), |f| {
            scan_feature(f, data, grad, hess, &row_slot, &totals, cfg)
        });
        let mut best: Vec<Option<Candidate>> = vec![None; frontier.len()];
        for cands in per_feature {
            for (s, c) in cands.into_iter().enumerate() {
                if let Some(c) = c {
                    if best[s].is_none_or(|b| c.gain > b.gain) {
                        best[s] = Some(c);
                    }
                }
            }
        }

        let mut next = Vec::new();
        let mut child_of_slot = vec![(0usize, 0usize); frontier.len()];
        for (s, &node) in frontier.iter().enumerate() {
            if let Some(c) = best[s] {
                let (g, h) = totals[s];
                let l = nodes.len();
                nodes.push(BuildNode {
                    g: c.gl,
                    h: c.hl,
                    split: None,
                });
                nodes.push(BuildNode {
                    g: g - c.gl,
                    h: h - c.hl,
                    split: None,
                });
                nodes[node].split = Some((c.feature, c.threshold, l, l + 1));
                child_of_slot[s] = (l, l + 1);
                gains.push((c.feature, c.gain));
                next.push(l);
                next.push(l + 1);
            }
        }
        for i in 0..n {
            let s = row_slot[i];
            if s == NO_SLOT {
                continue;
            }
            if let Some(c) = best[s as usize] {
                let (l, r) = child_of_slot[s as usize];
                node_of[i] = if data.cols[c.feature][i] < c.threshold {
                    l
                } else {
                    r
                } as u32;
            }
        }
        frontier = next;
    }

    let mut tree = Tree {
        feature: vec![],
        threshold: vec![],
        left: vec![],
        right: vec![],
        value: vec![],
    };
    for nd in &nodes {
        match nd.split {
            Some((f, thr, l, r)) => {
                tree.feature.push(f as i64);
                tree.threshold.push(thr);
                tree.left.push(l as u32);
                tree.right.push(r as u32);
                tree.value.push(0.0);
            }
            None => {
                tree.feature.push(-1);
                tree.threshold.push(0.0);
                tree.left.push(0);
                tree.right.push(0);
                tree.value.push(-nd.g / (nd.h + lambda) * cfg.learning_rate);
            }
        }
    }
    (tree, gains)
}

/// Best split of feature `f` for each frontier slot; ties keep the lowest threshold.
fn scan_feature(
    f: usize,
    data: &Columns<'_>,
    grad: &[f64],
    hess: &[f64],
    row_slot: &[u32],
    totals: &[(f64, f64)],
    cfg: &TrainConfig,
) -> Vec<Option<Candidate>> {
    let lambda = cfg.lambda_l2;
    let k = totals.len();
    let mut gl = vec![0.0; k];
    let mut hl = vec![0.0; k];
    let mut last: Vec<Option<f64>> = vec![None; k];
    let mut best: Vec<Option<Candidate>> = vec![None; k];
    let col = &data.cols[f];
    for &row in &data.sorted[f] {
        let row = row as usize;
        let s = row_slot[row];
        if s == NO_SLOT {
            continue;
        }
        let s = s as usize;
        let v = col[row];
        if let Some(prev) = last[s] {
            if v > prev {
                let (g, h) = totals[s];
                let (gr, hr) = (g - gl[s], h - hl[s]);
                if hl[s] >= cfg.min_child_weight && hr >= cfg.min_child_weight {
                    let gain = 0.5
                        * (gl[s] * gl[s] / (hl[s] + lambda) + gr * gr / (hr + lambda)
                            - g * g / (h + lambda));
                    if gain > MIN_SPLIT_GAIN && best[s].is_none_or(|b| gain > b.gain) {
                        let mut threshold = prev + (v - prev) / 2.0;
                        if !(threshold > prev) {
                            threshold = v;
                        }
                        best[s] = Some(Candidate {
                            gain,
                            feature: f,
                            threshold,
                            gl: gl[s],
                            hl: hl[s],
                        });
                    }
                }
            }
        }
        gl[s] += grad[row];
        hl[s] += hess[row];
        last[s] = Some(v);
    }
    best
}
