use rand::Rng;
use serde::{Deserialize, Serialize};

use super::forest::tree_rng;
use super::tree::{grow_tree, Tree, TreeParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostParams {
    pub rounds: usize,
    pub max_depth: Option<usize>,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    /// Row fraction drawn per round without replacement.
    pub subsample: f64,
    /// Feature fraction examined per split.
    pub colsample: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            rounds: 200,
            max_depth: Some(4),
            learning_rate: 0.1,
            min_samples_leaf: 1,
            subsample: 1.0,
            colsample: 1.0,
        }
    }
}

impl BoostParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Param(format!("learning rate must be in (0, 1], got {}", self.learning_rate)));
        }
        for (name, v) in [("subsample", self.subsample), ("colsample", self.colsample)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Param(format!("{name} must be in (0, 1], got {v}")));
            }
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::Param("min_samples_leaf must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boost {
    pub base: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
    /// Training MSE before the first round and after each round.
    pub train_mse: Vec<f64>,
}

impl Boost {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.base + self.learning_rate * self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
    }
}

fn mse(residual: &[f64]) -> f64 {
    residual.iter().map(|r| r * r).sum::<f64>() / residual.len() as f64
}

/// Gradient-boosted regression trees on squared loss.
pub fn train_boost(x: &[f64], p: usize, y: &[f64], params: &BoostParams, seed: u64) -> Result<Boost> {
    params.validate()?;
    let n = y.len();
    if n < 2 || x.len() != n * p {
        return Err(Error::Input(format!("boosting needs at least 2 rows of {p} columns, got {n}")));
    }
    let base = y.iter().sum::<f64>() / n as f64;
    let mut residual: Vec<f64> = y.iter().map(|v| v - base).collect();
    let mut train_mse = vec![mse(&residual)];
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        max_features: ((p as f64 * params.colsample).ceil() as usize).max(1),
        parallel_split_search: true,
    };
    let n_sample = ((n as f64 * params.subsample).ceil() as usize).clamp(1, n);
    let mut trees = Vec::with_capacity(params.rounds);
    for round in 0..params.rounds {
        let mut rng = tree_rng(seed, round);
        let rows: Vec<usize> = if n_sample < n {
            let mut all: Vec<usize> = (0..n).collect();
            for i in 0..n_sample {
                let j = rng.random_range(i..n);
                all.swap(i, j);
            }
            all.truncate(n_sample);
            all.sort_unstable();
            all
        } else {
            (0..n).collect()
        };
        let tree = grow_tree(x, p, &residual, rows, tree_params, &mut rng);
        for (i, r) in residual.iter_mut().enumerate() {
            *r -= params.learning_rate * tree.predict_row(&x[i * p..(i + 1) * p]);
        }
        train_mse.push(mse(&residual));
        trees.push(tree);
    }
    Ok(Boost {
        base,
        learning_rate: params.learning_rate,
        trees,
        train_mse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rounds_is_mean() {
        let params = BoostParams {
            rounds: 0,
            ..Default::default()
        };
        let b = train_boost(&[0.0, 1.0, 2.0], 1, &[1.0, 2.0, 6.0], &params, 0).unwrap();
        assert_eq!(b.predict_row(&[5.0]), 3.0);
    }

    #[test]
    fn full_step_exact_fit() {
        let params = BoostParams {
            rounds: 1,
            max_depth: None,
            learning_rate: 1.0,
            ..Default::default()
        };
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y = [2.0, -3.0, 7.0, 0.5, 1.0];
        let b = train_boost(&x, 1, &y, &params, 0).unwrap();
        assert!(b.train_mse[1] < 1e-24);
    }

    #[test]
    fn loss_non_increasing() {
        let x: Vec<f64> = (0..60).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = (0..60).map(|i| (i as f64 * 0.11).cos() * 4.0 + (i % 5) as f64).collect();
        let b = train_boost(&x, 1, &y, &BoostParams::default(), 0).unwrap();
        assert!(b.train_mse.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn bad_learning_rate() {
        for eta in [0.0, 1.5, f64::NAN] {
            let params = BoostParams {
                learning_rate: eta,
                ..Default::default()
            };
            assert!(matches!(train_boost(&[0.0, 1.0], 1, &[0.0, 1.0], &params, 0), Err(Error::Param(_))));
        }
    }
}
