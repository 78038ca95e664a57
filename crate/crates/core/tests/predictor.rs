mod common;

use livealloc::domain::DemandVector;
use livealloc::predictor::{
    evaluate, fit_forest, fit_tree, hash_feature, r_squared, tree_rng, Dataset, EncoderConfig,
    ForestParams, ModelFile, TreeNode, TreeParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// chi-squared quantiles at p = 0.999 for 63 and 1 degrees of freedom
const CHI2_63: f64 = 103.442;
const CHI2_1: f64 = 10.828;

#[test]
fn hashing_spreads_strings_evenly() {
    let dim = 64;
    let n = 100_000;
    let mut buckets = vec![0u64; dim];
    let mut positive = 0u64;
    for i in 0..n {
        let h = hash_feature(&format!("broadcaster-{i}"), dim, 0).unwrap();
        buckets[h.index] += 1;
        positive += u64::from(h.value > 0.0);
    }
    let expected = n as f64 / dim as f64;
    let stat: f64 = buckets
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    assert!(stat < CHI2_63, "bucket chi-squared {stat}");
    let half = n as f64 / 2.0;
    let sign_stat = 2.0 * (positive as f64 - half).powi(2) / half;
    assert!(sign_stat < CHI2_1, "sign chi-squared {sign_stat}");
}

#[test]
fn tree_recovers_a_step() {
    let x: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64 / 100.0]).collect();
    let y: Vec<Vec<f64>> = x
        .iter()
        .map(|v| vec![if v[0] < 0.37 { 2.0 } else { 7.0 }])
        .collect();
    let tree = fit_tree(
        &x,
        &y,
        TreeParams::default(),
        &mut ChaCha8Rng::seed_from_u64(0),
    )
    .unwrap();
    assert_eq!(tree.leaves(), 2);
    match &tree {
        TreeNode::Split {
            feature: 0,
            threshold,
            ..
        } => assert!((threshold - 0.365).abs() < 1e-12),
        other => panic!("{other:?}"),
    }
    assert_eq!(tree.predict(&[0.1]), &[2.0]);
    assert_eq!(tree.predict(&[0.9]), &[7.0]);
}

#[test]
fn single_unbagged_tree_is_a_plain_tree() {
    let (x, y) = learnable(200, 1);
    let forest = fit_forest(&x, &y, ForestParams::single_tree(None, 4)).unwrap();
    let params = TreeParams {
        max_depth: None,
        min_samples_leaf: 1,
        feature_subsample: 1.0,
    };
    let tree = fit_tree(&x, &y, params, &mut tree_rng(4, 0)).unwrap();
    assert_eq!(forest.trees, vec![tree]);
}

#[test]
fn forest_output_is_the_tree_mean() {
    let (x, y) = learnable(200, 2);
    let forest = fit_forest(
        &x,
        &y,
        ForestParams {
            n_trees: 7,
            rng_seed: 3,
            ..ForestParams::default()
        },
    )
    .unwrap();
    for row in x.iter().take(20) {
        let raw = forest.predict_raw(row).unwrap();
        let mut mean = vec![0.0; raw.len()];
        for t in &forest.trees {
            for (m, v) in mean.iter_mut().zip(t.predict(row)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= 7.0);
        assert_eq!(raw, mean);
    }
}

/// Two outputs that are noiseless functions of three of six features.
fn learnable(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..6)
                .map(|_| f64::from(rng.random_range(0..4u8)))
                .collect()
        })
        .collect();
    let y = x
        .iter()
        .map(|v| {
            vec![
                10.0 * v[0] + 5.0 * v[1] * v[2],
                if v[1] > 1.0 { 30.0 } else { 3.0 * v[2] },
            ]
        })
        .collect();
    (x, y)
}

#[test]
fn forest_learns_a_noiseless_target() {
    let (x, y) = learnable(1000, 5);
    let forest = fit_forest(
        &x[..800],
        &y[..800],
        ForestParams {
            rng_seed: 1,
            ..ForestParams::default()
        },
    )
    .unwrap();
    let mut actual = vec![];
    let mut predicted = vec![];
    for (row, target) in x[800..].iter().zip(&y[800..]) {
        actual.extend_from_slice(target);
        predicted.extend(forest.predict_raw(row).unwrap());
    }
    let r2 = r_squared(&actual, &predicted).unwrap();
    assert!(r2 > 0.95, "{r2}");
}

#[test]
fn forest_fit_is_seed_deterministic() {
    let (x, y) = learnable(300, 6);
    let p = ForestParams {
        n_trees: 12,
        rng_seed: 77,
        ..ForestParams::default()
    };
    assert_eq!(
        fit_forest(&x, &y, p).unwrap(),
        fit_forest(&x, &y, p).unwrap()
    );
}

#[test]
fn forest_beats_a_single_tree_on_generated_traces() {
    let mut wins = 0;
    for seed in 0..20 {
        let (rf, dt) = common::rf_vs_dt(seed);
        assert!(rf >= 0.8, "seed {seed}: forest R² {rf}");
        wins += usize::from(rf >= dt);
    }
    assert!(wins >= 18, "forest beat the tree in {wins}/20 trials");
}

#[test]
fn model_file_round_trips() {
    let (regions, trace) = common::default_trace(1, 6);
    let encoder = EncoderConfig::new(regions.len());
    let data = Dataset::from_records(&trace.records, &regions.regions, &encoder).unwrap();
    let forest = fit_forest(
        &data.x,
        &data.y,
        ForestParams {
            n_trees: 5,
            ..ForestParams::default()
        },
    )
    .unwrap();
    let model = ModelFile::new(encoder, forest);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    model.save(&path).unwrap();
    let loaded = ModelFile::load(&path).unwrap();
    assert_eq!(loaded, model);
    assert_eq!(
        evaluate(&loaded.forest, &data).unwrap(),
        evaluate(&model.forest, &data).unwrap()
    );
}

#[test]
fn negative_leaf_means_clamp_to_zero() {
    let x = vec![vec![0.0], vec![1.0]];
    let y = vec![vec![-3.0, 2.6], vec![-1.0, 2.6]];
    let forest = fit_forest(&x, &y, ForestParams::single_tree(Some(0), 0)).unwrap();
    let v = livealloc::predictor::FeatureVector(vec![0.0]);
    assert_eq!(forest.predict(&v).unwrap(), DemandVector::new(vec![0, 3]));
}
