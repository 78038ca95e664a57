//! Multi-output CART regression tree.
//!
//! Splits minimise the squared error summed over every output coordinate.
//! Candidate thresholds are midpoints between consecutive distinct feature
//! values; samples with `x[feature] <= threshold` go left.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        value: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, x: &[f64]) -> &[f64] {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaves() + right.leaves(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Fraction of features examined at each split, in (0, 1].
    pub feature_subsample: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_leaf: 1,
            feature_subsample: 1.0,
        }
    }
}

struct Builder<'a, R> {
    x: &'a [Vec<f64>],
    y: &'a [Vec<f64>],
    width: usize,
    outputs: usize,
    params: TreeParams,
    n_features: usize,
    rng: &'a mut R,
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

pub fn fit_tree<R: Rng>(
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    params: TreeParams,
    rng: &mut R,
) -> Result<TreeNode> {
    let rows: Vec<usize> = (0..x.len()).collect();
    fit_tree_on(x, y, &rows, params, rng)
}

/// Fits on the multiset of rows in `rows` (duplicates allowed, for bootstrap).
pub(crate) fn fit_tree_on<R: Rng>(
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    rows: &[usize],
    params: TreeParams,
    rng: &mut R,
) -> Result<TreeNode> {
    if x.is_empty() || rows.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            what: "training targets",
            expected: x.len(),
            actual: y.len(),
        });
    }
    let width = x[0].len();
    let outputs = y[0].len();
    if let Some(bad) = x.iter().find(|r| r.len() != width) {
        return Err(Error::DimensionMismatch {
            what: "feature row",
            expected: width,
            actual: bad.len(),
        });
    }
    if let Some(bad) = y.iter().find(|r| r.len() != outputs) {
        return Err(Error::DimensionMismatch {
            what: "target row",
            expected: outputs,
            actual: bad.len(),
        });
    }
    if !(params.feature_subsample > 0.0 && params.feature_subsample <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "feature_subsample {} must lie in (0, 1]",
            params.feature_subsample
        )));
    }
    let n_features =
        ((params.feature_subsample * width as f64).round() as usize).clamp(1, width.max(1));
    let mut builder = Builder {
        x,
        y,
        width,
        outputs,
        params: TreeParams {
            min_samples_leaf: params.min_samples_leaf.max(1),
            ..params
        },
        n_features,
        rng,
    };
    let mut rows = rows.to_vec();
    Ok(builder.grow(&mut rows, 0))
}

impl<R: Rng> Builder<'_, R> {
    fn grow(&mut self, rows: &mut [usize], depth: usize) -> TreeNode {
        let (sums, sse) = self.moments(rows);
        let value: Vec<f64> = sums.iter().map(|s| s / rows.len() as f64).collect();

        let depth_capped = self.params.max_depth.is_some_and(|d| depth >= d);
        if depth_capped || sse <= 0.0 || rows.len() < 2 * self.params.min_samples_leaf {
            return TreeNode::Leaf { value };
        }
        let Some(split) = self.best_split(rows, &sums, sse) else {
            return TreeNode::Leaf { value };
        };

        // stable partition keeps row order deterministic in the children
        let (mut left, mut right): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| self.x[r][split.feature] <= split.threshold);
        TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(self.grow(&mut left, depth + 1)),
            right: Box::new(self.grow(&mut right, depth + 1)),
        }
    }

    /// Per-output sums and the total sum of squared deviations.
    fn moments(&self, rows: &[usize]) -> (Vec<f64>, f64) {
        let mut sums = vec![0.0; self.outputs];
        for &r in rows {
            for (s, v) in sums.iter_mut().zip(&self.y[r]) {
                *s += v;
            }
        }
        let n = rows.len() as f64;
        let mut sse = 0.0;
        for &r in rows {
            for (s, v) in sums.iter().zip(&self.y[r]) {
                let d = v - s / n;
                sse += d * d;
            }
        }
        (sums, sse)
    }

    /// Every feature in random order; the split search stops after
    /// `n_features` of them have been non-constant at the node.
    fn candidate_features(&mut self) -> Vec<usize> {
        if self.n_features >= self.width {
            (0..self.width).collect()
        } else {
            index::sample(self.rng, self.width, self.width).into_vec()
        }
    }

    fn best_split(&mut self, rows: &[usize], sums: &[f64], sse: f64) -> Option<Split> {
        let n = rows.len();
        let msl = self.params.min_samples_leaf;
        let parent_score: f64 = sums.iter().map(|s| s * s).sum::<f64>() / n as f64;
        // ignore splits whose gain is numerical noise
        let min_gain = sse * 1e-12;

        let mut best: Option<Split> = None;
        let mut order = rows.to_vec();
        let mut left = vec![0.0; self.outputs];
        let mut examined = 0;
        for feature in self.candidate_features() {
            // constant features do not count towards the budget, and the
            // search goes on past it until some valid split has been seen
            if examined >= self.n_features && best.is_some() {
                break;
            }
            order.sort_by(|&a, &b| self.x[a][feature].total_cmp(&self.x[b][feature]));
            let lo = self.x[order[0]][feature];
            let hi = self.x[order[n - 1]][feature];
            if lo == hi {
                continue;
            }
            examined += 1;
            left.iter_mut().for_each(|s| *s = 0.0);
            for i in 0..n - 1 {
                for (s, v) in left.iter_mut().zip(&self.y[order[i]]) {
                    *s += v;
                }
                let n_left = i + 1;
                let n_right = n - n_left;
                if n_left < msl || n_right < msl {
                    continue;
                }
                let here = self.x[order[i]][feature];
                let next = self.x[order[i + 1]][feature];
                if here == next {
                    continue;
                }
                let score: f64 = left
                    .iter()
                    .zip(sums)
                    .map(|(l, t)| l * l / n_left as f64 + (t - l) * (t - l) / n_right as f64)
                    .sum();
                let gain = score - parent_score;
                if gain > min_gain && best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = here + (next - here) / 2.0;
                    if threshold >= next {
                        threshold = here;
                    }
                    best = Some(Split {
                        feature,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }
}
