//! Per-region viewer-count prediction: feature encoding, regression trees,
//! random forests and R² evaluation.

mod features;
mod forest;
mod metrics;
mod tree;

pub use features::{
    broadcaster_region, cluster_time_period, encode, hash_feature, EncoderConfig, FeatureVector,
    HashedFeature, TIME_PERIODS, WEEKDAYS,
};
pub use forest::{fit_forest, tree_rng, ForestModel, ForestParams, ModelFile, MODEL_VERSION};
pub use metrics::{r_squared, r_squared_report, R2Report};
pub use tree::{fit_tree, TreeNode, TreeParams};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{DemandVector, Region, VideoRecord};
use crate::error::{Error, Result};

/// Encoded inputs and viewer-count targets for a set of records.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub demand: Vec<DemandVector>,
}

impl Dataset {
    pub fn from_records(
        records: &[VideoRecord],
        regions: &[Region],
        encoder: &EncoderConfig,
    ) -> Result<Self> {
        let mut data = Dataset {
            x: vec![],
            y: vec![],
            demand: vec![],
        };
        for rec in records {
            let actual = rec
                .actual_viewers
                .clone()
                .ok_or_else(|| Error::MissingActuals(rec.video_id.clone()))?;
            data.x.push(encode(&rec.features, regions, encoder)?.0);
            data.y
                .push(actual.counts().iter().map(|&c| c as f64).collect());
            data.demand.push(actual);
        }
        Ok(data)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: rows.iter().map(|&i| self.x[i].clone()).collect(),
            y: rows.iter().map(|&i| self.y[i].clone()).collect(),
            demand: rows.iter().map(|&i| self.demand[i].clone()).collect(),
        }
    }

    /// Random split into (train, validation) with `train_frac` of rows in train.
    pub fn split(&self, train_frac: f64, seed: u64) -> (Dataset, Dataset) {
        let mut rows: Vec<usize> = (0..self.len()).collect();
        rows.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let cut = ((self.len() as f64) * train_frac).round() as usize;
        (self.subset(&rows[..cut]), self.subset(&rows[cut..]))
    }
}

/// Validation R² of a forest on `test`.
pub fn evaluate(model: &ForestModel, test: &Dataset) -> Result<R2Report> {
    let predicted = test
        .x
        .iter()
        .map(|x| model.predict_raw(x))
        .collect::<Result<Vec<_>>>()?;
    r_squared_report(&test.demand, &predicted)
}
