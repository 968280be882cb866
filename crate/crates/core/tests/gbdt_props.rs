use pdeid_core::gbdt::{feature_importance, fit, FeatureMatrix, GbdtModel, Objective, TrainConfig};
use pdeid_core::FeatureFamily;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn names(prefixes: &[&str]) -> Vec<String> {
    prefixes
        .iter()
        .enumerate()
        .map(|(i, p)| format!("{p}_{i}"))
        .collect()
}

fn xor_data(n: usize, seed: u64) -> (FeatureMatrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let a: f64 = rng.random_range(-1.0..1.0);
        let b: f64 = rng.random_range(-1.0..1.0);
        y.push(usize::from((a > 0.0) != (b > 0.0)));
        rows.push(vec![a, b]);
    }
    (
        FeatureMatrix::new(names(&["stat", "amp"]), rows).unwrap(),
        y,
    )
}

fn blobs(n: usize, k: usize, seed: u64) -> (FeatureMatrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let c = i % k;
        rows.push(vec![
            c as f64 + rng.random_range(-0.8..0.8),
            rng.random_range(-1.0..1.0),
            (c * c) as f64 * 0.1 + rng.random_range(-0.5..0.5),
        ]);
        y.push(c);
    }
    (
        FeatureMatrix::new(names(&["stat", "fft", "sym"]), rows).unwrap(),
        y,
    )
}

#[test]
fn learns_xor_with_depth_two() {
    let (train, ytr) = xor_data(400, 1);
    let (test, yte) = xor_data(400, 2);
    let cfg = TrainConfig {
        rounds: 100,
        max_depth: 2,
        ..TrainConfig::default()
    };
    let m = fit(&train, &ytr, Objective::BinaryLogistic, &cfg).unwrap();
    let hits = test
        .rows
        .iter()
        .zip(&yte)
        .filter(|(r, &l)| m.predict_class(r).unwrap() == l)
        .count();
    let acc = hits as f64 / yte.len() as f64;
    assert!(acc >= 0.95, "xor accuracy {acc}");
}

#[test]
fn training_loss_never_increases() {
    let (x, y) = xor_data(300, 3);
    let m = fit(
        &x,
        &y,
        Objective::BinaryLogistic,
        &TrainConfig {
            rounds: 60,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    assert_eq!(m.train_loss.len(), 60);
    for w in m.train_loss.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
    }
    let (x, y) = blobs(240, 4, 4);
    let m = fit(
        &x,
        &y,
        Objective::Softmax { num_class: 4 },
        &TrainConfig {
            rounds: 40,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    for w in m.train_loss.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
    }
}

#[test]
fn identical_inputs_give_identical_json() {
    let (x, y) = blobs(150, 3, 5);
    let cfg = TrainConfig {
        rounds: 25,
        subsample: 0.7,
        seed: 99,
        ..TrainConfig::default()
    };
    let a = fit(&x, &y, Objective::Softmax { num_class: 3 }, &cfg)
        .unwrap()
        .to_json();
    let b = fit(&x, &y, Objective::Softmax { num_class: 3 }, &cfg)
        .unwrap()
        .to_json();
    assert_eq!(a.as_bytes(), b.as_bytes());
}

#[test]
fn json_roundtrip_preserves_model() {
    let (x, y) = blobs(150, 3, 6);
    let m = fit(
        &x,
        &y,
        Objective::Softmax { num_class: 3 },
        &TrainConfig {
            rounds: 10,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    let back = GbdtModel::from_json(&m.to_json()).unwrap();
    assert_eq!(back, m);
    for r in &x.rows {
        assert_eq!(back.predict_proba(r).unwrap(), m.predict_proba(r).unwrap());
    }
    assert!(GbdtModel::from_json("{\"format\":\"other\"}").is_err());
}

#[test]
fn monotone_feature_transform_keeps_partitions() {
    let (x, y) = blobs(200, 2, 7);
    let warped = FeatureMatrix::new(
        x.names.clone(),
        x.rows
            .iter()
            .map(|r| r.iter().map(|v| v * v * v + 2.0 * v).collect())
            .collect(),
    )
    .unwrap();
    let cfg = TrainConfig {
        rounds: 20,
        ..TrainConfig::default()
    };
    let a = fit(&x, &y, Objective::BinaryLogistic, &cfg).unwrap();
    let b = fit(&warped, &y, Objective::BinaryLogistic, &cfg).unwrap();
    assert_eq!(a.trees.len(), b.trees.len());
    for (ta, tb) in a.trees.iter().zip(&b.trees) {
        assert_eq!(ta.feature, tb.feature);
        for (ra, rb) in x.rows.iter().zip(&warped.rows) {
            assert_eq!(ta.leaf_index(ra), tb.leaf_index(rb));
        }
    }
}

#[test]
fn importance_of_a_single_family_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let rows: Vec<Vec<f64>> = (0..100)
        .map(|_| vec![rng.random_range(-1.0..1.0)])
        .collect();
    let y: Vec<usize> = rows.iter().map(|r| usize::from(r[0] > 0.2)).collect();
    let x = FeatureMatrix::new(vec!["motion_magnitude".into()], rows).unwrap();
    let m = fit(
        &x,
        &y,
        Objective::BinaryLogistic,
        &TrainConfig {
            rounds: 5,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    assert_eq!(
        feature_importance(&m).unwrap(),
        vec![(FeatureFamily::Motion, 100.0)]
    );
}

#[test]
fn empty_models_predict_the_prior() {
    let m = GbdtModel::empty(Objective::BinaryLogistic, names(&["stat"]), 0.5);
    assert_eq!(m.predict_proba(&[1.0]).unwrap(), vec![0.5, 0.5]);
    let s = GbdtModel::empty(Objective::Softmax { num_class: 8 }, names(&["stat"]), 0.0);
    assert!(s
        .predict_proba(&[1.0])
        .unwrap()
        .iter()
        .all(|&p| (p - 0.125).abs() < 1e-15));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn probabilities_form_a_distribution(seed in 0u64..1000, k in 2usize..6) {
        let (x, y) = blobs(120, k, seed);
        let m = fit(&x, &y, Objective::Softmax { num_class: k }, &TrainConfig { rounds: 8, ..TrainConfig::default() }).unwrap();
        let batch = m.predict_proba_batch(&x.rows).unwrap();
        for (r, pb) in x.rows.iter().zip(&batch) {
            let p = m.predict_proba(r).unwrap();
            prop_assert_eq!(&p, pb);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn importance_sums_to_one_hundred(seed in 0u64..1000) {
        let (x, y) = blobs(120, 3, seed);
        let m = fit(&x, &y, Objective::Softmax { num_class: 3 }, &TrainConfig { rounds: 8, ..TrainConfig::default() }).unwrap();
        let imp = feature_importance(&m).unwrap();
        prop_assert!((imp.iter().map(|(_, v)| v).sum::<f64>() - 100.0).abs() < 1e-9);
        prop_assert!(imp.iter().all(|(_, v)| *v >= 0.0));
    }
}
