use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::BaseLearnerError;
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleMode {
    /// Bootstrap rows, best split over a random third of the features.
    RandomForest,
    /// All rows, one uniform random threshold per feature, best of those.
    ExtraTrees,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeEnsembleConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub mode: EnsembleMode,
    pub seed: u64,
}

impl Default for TreeEnsembleConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 8,
            min_leaf: 2,
            mode: EnsembleMode::RandomForest,
            seed: 0,
        }
    }
}

impl TreeEnsembleConfig {
    pub fn validate(&self) -> Result<(), BaseLearnerError> {
        if self.n_trees == 0 || self.max_depth == 0 || self.min_leaf == 0 {
            return Err(BaseLearnerError::InvalidInput(
                "n_trees, max_depth and min_leaf must all be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[feature] <= threshold { left } else { right },
            }
        }
    }
}

struct Grower<'a> {
    x: &'a DMatrix<f64>,
    y: &'a [f64],
    config: &'a TreeEnsembleConfig,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Grower<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let mean = rows.iter().map(|&r| self.y[r]).sum::<f64>() / rows.len() as f64;
        self.nodes.push(Node::Leaf(mean));
        let constant = rows.iter().all(|&r| self.y[r] == self.y[rows[0]]);
        if depth >= self.config.max_depth || rows.len() < 2 * self.config.min_leaf || constant {
            return id;
        }
        let best = match self.config.mode {
            EnsembleMode::RandomForest => self.best_exhaustive(&rows),
            EnsembleMode::ExtraTrees => self.best_random(&rows),
        };
        let Some(best) = best else { return id };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| self.x[(r, best.feature)] <= best.threshold);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    /// Sum of squared errors of both children, up to a constant: `-(S_l^2/n_l + S_r^2/n_r)`.
    fn score(sum_l: f64, n_l: usize, sum_r: f64, n_r: usize) -> f64 {
        -(sum_l * sum_l / n_l as f64 + sum_r * sum_r / n_r as f64)
    }

    fn best_exhaustive(&mut self, rows: &[usize]) -> Option<Candidate> {
        let p = self.x.ncols();
        let k = p.div_ceil(3).max(1);
        let features = sample(&mut self.rng, p, k).into_vec();
        let total: f64 = rows.iter().map(|&r| self.y[r]).sum();
        let min_leaf = self.config.min_leaf;
        let mut best: Option<Candidate> = None;
        for feature in features {
            let mut sorted = rows.to_vec();
            sorted.sort_by(|&a, &b| self.x[(a, feature)].total_cmp(&self.x[(b, feature)]));
            let mut sum_l = 0.0;
            for i in 0..sorted.len() - 1 {
                sum_l += self.y[sorted[i]];
                let n_l = i + 1;
                let n_r = sorted.len() - n_l;
                let (lo, hi) = (self.x[(sorted[i], feature)], self.x[(sorted[i + 1], feature)]);
                if n_l < min_leaf || n_r < min_leaf || lo == hi {
                    continue;
                }
                let score = Self::score(sum_l, n_l, total - sum_l, n_r);
                if best.as_ref().is_none_or(|b| score < b.score) {
                    best = Some(Candidate {
                        feature,
                        threshold: lo + 0.5 * (hi - lo),
                        score,
                    });
                }
            }
        }
        best
    }

    fn best_random(&mut self, rows: &[usize]) -> Option<Candidate> {
        let min_leaf = self.config.min_leaf;
        let mut best: Option<Candidate> = None;
        for feature in 0..self.x.ncols() {
            let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                let v = self.x[(r, feature)];
                (lo.min(v), hi.max(v))
            });
            if lo >= hi {
                continue;
            }
            let threshold = self.rng.random_range(lo..hi);
            let (mut sum_l, mut n_l, mut sum_r, mut n_r) = (0.0, 0, 0.0, 0);
            for &r in rows {
                if self.x[(r, feature)] <= threshold {
                    sum_l += self.y[r];
                    n_l += 1;
                } else {
                    sum_r += self.y[r];
                    n_r += 1;
                }
            }
            if n_l < min_leaf || n_r < min_leaf {
                continue;
            }
            let score = Self::score(sum_l, n_l, sum_r, n_r);
            if best.as_ref().is_none_or(|b| score < b.score) {
                best = Some(Candidate { feature, threshold, score });
            }
        }
        best
    }
}

/// Averaged regression trees. Immutable once fitted.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsemble {
    trees: Vec<Tree>,
    n_features: usize,
}

/// Fits `config.n_trees` trees in parallel; tree `i` draws from its own
/// stream seeded by `(config.seed, i)`.
pub fn fit_tree_ensemble(
    x: &DMatrix<f64>,
    y: &[f64],
    config: &TreeEnsembleConfig,
) -> Result<TreeEnsemble, BaseLearnerError> {
    config.validate()?;
    let n = x.nrows();
    if n != y.len() {
        return Err(BaseLearnerError::InvalidInput(format!("{n} rows for {} targets", y.len())));
    }
    if x.ncols() == 0 {
        return Err(BaseLearnerError::InvalidInput("tree ensemble needs at least one feature".into()));
    }
    if n < 2 * config.min_leaf {
        return Err(BaseLearnerError::InvalidInput(format!(
            "{n} rows is fewer than twice min_leaf = {}",
            config.min_leaf
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(BaseLearnerError::InvalidInput("non-finite training value".into()));
    }
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(config.seed, t as u64);
            let rows: Vec<usize> = match config.mode {
                EnsembleMode::RandomForest => (0..n).map(|_| rng.random_range(0..n)).collect(),
                EnsembleMode::ExtraTrees => (0..n).collect(),
            };
            let mut grower = Grower {
                x,
                y,
                config,
                rng,
                nodes: Vec::new(),
            };
            grower.grow(rows, 0);
            Tree { nodes: grower.nodes }
        })
        .collect();
    Ok(TreeEnsemble {
        trees,
        n_features: x.ncols(),
    })
}

impl TreeEnsemble {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>, BaseLearnerError> {
        if x.ncols() != self.n_features {
            return Err(BaseLearnerError::InvalidInput(format!(
                "ensemble was fitted on {} features, got {}",
                self.n_features,
                x.ncols()
            )));
        }
        Ok((0..x.nrows())
            .map(|i| {
                let row: Vec<f64> = x.row(i).iter().copied().collect();
                self.trees.iter().map(|t| t.predict_row(&row)).sum::<f64>() / self.trees.len() as f64
            })
            .collect())
    }
}
