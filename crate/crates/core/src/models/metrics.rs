use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    /// `None` when the actuals have zero variance.
    pub r2: Option<f64>,
}

pub fn metrics(y: &[f64], yhat: &[f64]) -> Result<Metrics> {
    if y.len() != yhat.len() {
        return Err(Error::Param(format!("length mismatch: {} actuals, {} predictions", y.len(), yhat.len())));
    }
    if y.len() < 2 {
        return Err(Error::Param(format!("need at least 2 points, got {}", y.len())));
    }
    let n = y.len() as f64;
    let (mut abs, mut sq) = (0.0, 0.0);
    for (a, p) in y.iter().zip(yhat) {
        let e = a - p;
        abs += e.abs();
        sq += e * e;
    }
    let mean = y.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|a| (a - mean) * (a - mean)).sum();
    let mse = sq / n;
    Ok(Metrics {
        mae: abs / n,
        mse,
        rmse: mse.sqrt(),
        r2: (ss_tot > 0.0).then(|| 1.0 - sq / ss_tot),
    })
}

/// Elementwise mean of several metric sets; r2 averages the defined values.
pub fn mean_metrics(all: &[Metrics]) -> Option<Metrics> {
    if all.is_empty() {
        return None;
    }
    let n = all.len() as f64;
    let r2s: Vec<f64> = all.iter().filter_map(|m| m.r2).collect();
    Some(Metrics {
        mae: all.iter().map(|m| m.mae).sum::<f64>() / n,
        mse: all.iter().map(|m| m.mse).sum::<f64>() / n,
        rmse: all.iter().map(|m| m.rmse).sum::<f64>() / n,
        r2: (!r2s.is_empty()).then(|| r2s.iter().sum::<f64>() / r2s.len() as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect() {
        let m = metrics(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((m.mae, m.mse, m.rmse, m.r2), (0.0, 0.0, 0.0, Some(1.0)));
    }

    #[test]
    fn hand_computed_zero_r2() {
        let m = metrics(&[0.0, 2.0], &[1.0, 1.0]).unwrap();
        assert_eq!((m.mae, m.mse, m.rmse, m.r2), (1.0, 1.0, 1.0, Some(0.0)));
    }

    #[test]
    fn constant_actuals() {
        let m = metrics(&[5.0, 5.0], &[4.0, 7.0]).unwrap();
        assert_eq!(m.r2, None);
        assert_eq!(m.mae, 1.5);
    }

    #[test]
    fn bad_lengths() {
        assert!(metrics(&[1.0], &[1.0]).is_err());
        assert!(metrics(&[1.0, 2.0], &[1.0]).is_err());
    }
}
