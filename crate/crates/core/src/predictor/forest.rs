use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{EncoderConfig, FeatureVector};
use super::tree::{fit_tree_on, TreeNode, TreeParams};
use crate::config::{read_json, write_json};
use crate::domain::DemandVector;
use crate::error::{Error, Result};

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Resample rows with replacement for every tree.
    pub bootstrap: bool,
    /// Fraction of features tried per split; `None` uses `sqrt(width) / width`.
    pub feature_subsample: Option<f64>,
    pub rng_seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            bootstrap: true,
            feature_subsample: None,
            rng_seed: 0,
        }
    }
}

impl ForestParams {
    /// A plain decision tree: one tree, all rows, all features.
    pub fn single_tree(max_depth: Option<usize>, rng_seed: u64) -> Self {
        ForestParams {
            n_trees: 1,
            max_depth,
            min_samples_leaf: 1,
            bootstrap: false,
            feature_subsample: Some(1.0),
            rng_seed,
        }
    }

    fn tree_params(&self, width: usize) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            feature_subsample: self
                .feature_subsample
                .unwrap_or_else(|| (width as f64).sqrt() / width as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    pub width: usize,
    pub n_outputs: usize,
    pub trees: Vec<TreeNode>,
}

/// Seeds tree `i` independently of scheduling.
pub fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(tree as u64))
}

pub fn fit_forest(x: &[Vec<f64>], y: &[Vec<f64>], params: ForestParams) -> Result<ForestModel> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if params.n_trees == 0 {
        return Err(Error::InvalidConfig(
            "forest needs at least one tree".into(),
        ));
    }
    let width = x[0].len();
    let n_outputs = y[0].len();
    let tree_params = params.tree_params(width);
    let n = x.len();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = tree_rng(params.rng_seed, i);
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_tree_on(x, y, &rows, tree_params, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ForestModel {
        params,
        width,
        n_outputs,
        trees,
    })
}

impl ForestModel {
    /// Mean of the tree outputs, before clamping and rounding.
    pub fn predict_raw(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.width {
            return Err(Error::DimensionMismatch {
                what: "feature vector",
                expected: self.width,
                actual: x.len(),
            });
        }
        let mut acc = vec![0.0; self.n_outputs];
        for tree in &self.trees {
            for (a, v) in acc.iter_mut().zip(tree.predict(x)) {
                *a += v;
            }
        }
        let k = self.trees.len() as f64;
        acc.iter_mut().for_each(|a| *a /= k);
        Ok(acc)
    }

    /// Viewer counts: tree mean clamped at zero and rounded to the nearest integer.
    pub fn predict(&self, x: &FeatureVector) -> Result<DemandVector> {
        let raw = self.predict_raw(x.as_slice())?;
        Ok(DemandVector::new(
            raw.into_iter().map(|v| v.max(0.0).round() as u64).collect(),
        ))
    }
}

/// A trained model together with the encoder that produced its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub encoder: EncoderConfig,
    pub forest: ForestModel,
}

impl ModelFile {
    pub fn new(encoder: EncoderConfig, forest: ForestModel) -> Self {
        ModelFile {
            version: MODEL_VERSION,
            encoder,
            forest,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let model: ModelFile = read_json(path)?;
        if model.version != MODEL_VERSION {
            return Err(Error::ModelVersion(model.version));
        }
        if model.forest.width != model.encoder.width() {
            return Err(Error::DimensionMismatch {
                what: "model width",
                expected: model.encoder.width(),
                actual: model.forest.width,
            });
        }
        Ok(model)
    }
}
