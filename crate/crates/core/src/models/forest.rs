use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, Tree, TreeParams};
use crate::error::{Error, Result};
use crate::exec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` for unlimited depth.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// `None` means a third, rounded up, of the columns that vary over the
    /// training rows.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: Some(12),
            min_samples_leaf: 2,
            max_features: None,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Param("forest needs at least one tree".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::Param("min_samples_leaf must be at least 1".into()));
        }
        if self.max_features == Some(0) {
            return Err(Error::Param("max_features must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Random stream for tree `index` of a forest seeded with `seed`.
pub fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn varying_columns(x: &[f64], p: usize) -> usize {
    (0..p).filter(|&j| x.iter().skip(j).step_by(p).any(|&v| v != x[j])).count()
}

/// Trees are grown in parallel; each has its own random stream, so the
/// result does not depend on scheduling.
pub fn train_forest(x: &[f64], p: usize, y: &[f64], params: &ForestParams, seed: u64) -> Result<Forest> {
    params.validate()?;
    let n = y.len();
    if n < 2 || x.len() != n * p {
        return Err(Error::Input(format!("forest needs at least 2 rows of {p} columns, got {n}")));
    }
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        max_features: params.max_features.unwrap_or_else(|| varying_columns(x, p).div_ceil(3).max(1)),
        parallel_split_search: false,
    };
    let trees = exec::map_range(params.n_trees, |t| {
        let mut rng = tree_rng(seed, t);
        let rows: Vec<usize> = if params.bootstrap {
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        grow_tree(x, p, y, rows, tree_params, &mut rng)
    });
    Ok(Forest { trees })
}
