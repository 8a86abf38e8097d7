use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest are treated as zero.
const RELATIVE_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coef: Vec<f64>,
}

impl LinearModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(row).map(|(c, x)| c * x).sum::<f64>()
    }
}

/// Least squares with intercept via the minimum-norm SVD solution, so
/// collinear columns still give well-defined predictions.
pub fn train_linear(x: &[f64], p: usize, y: &[f64]) -> Result<LinearModel> {
    let n = y.len();
    if n < 2 || x.len() != n * p {
        return Err(Error::Input(format!("linear fit needs at least 2 rows of {p} columns, got {n}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite value in linear regression input".into()));
    }
    let design = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[i * p + j - 1] });
    let svd = design.svd(true, true);
    let max_sv = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let beta = svd
        .solve(&DVector::from_column_slice(y), max_sv * RELATIVE_CUTOFF)
        .map_err(|e| Error::State(format!("linear solve failed: {e}")))?;
    Ok(LinearModel {
        intercept: beta[0],
        coef: beta.iter().skip(1).copied().collect(),
    })
}
