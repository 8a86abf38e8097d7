//! Forecasting models over a [`FeatureMatrix`], plus evaluation.
//!
//! Every model sees min-max scaled numeric columns and a scaled target; the
//! scaler is fitted on the training rows only and stored with the model.
//! The recurrent model additionally gets the previous slot's scaled target
//! as one extra input per step.

pub mod boost;
pub mod eval;
pub mod forest;
pub mod linear;
pub mod lstm;
pub mod metrics;
pub mod tree;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, MinMaxScaler};

pub use boost::{Boost, BoostParams};
pub use forest::{Forest, ForestParams};
pub use linear::LinearModel;
pub use lstm::{Lstm, LstmParams};
pub use metrics::{metrics, Metrics};

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Linear,
    Forest,
    Boost,
    Lstm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Linear, ModelKind::Forest, ModelKind::Boost, ModelKind::Lstm];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Forest => "forest",
            ModelKind::Boost => "boost",
            ModelKind::Lstm => "lstm",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Param(format!("unknown model kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
pub enum ModelParams {
    Linear,
    Forest(ForestParams),
    Boost(BoostParams),
    Lstm(LstmParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub params: ModelParams,
    pub seed: u64,
}

impl ModelSpec {
    pub fn default_for(kind: ModelKind, seed: u64) -> Self {
        let params = match kind {
            ModelKind::Linear => ModelParams::Linear,
            ModelKind::Forest => ModelParams::Forest(ForestParams::default()),
            ModelKind::Boost => ModelParams::Boost(BoostParams::default()),
            ModelKind::Lstm => ModelParams::Lstm(LstmParams::default()),
        };
        ModelSpec { params, seed }
    }

    pub fn kind(&self) -> ModelKind {
        match self.params {
            ModelParams::Linear => ModelKind::Linear,
            ModelParams::Forest(_) => ModelKind::Forest,
            ModelParams::Boost(_) => ModelKind::Boost,
            ModelParams::Lstm(_) => ModelKind::Lstm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.params {
            ModelParams::Linear => Ok(()),
            ModelParams::Forest(p) => p.validate(),
            ModelParams::Boost(p) => p.validate(),
            ModelParams::Lstm(p) => p.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "state", rename_all = "lowercase")]
pub enum ModelState {
    Linear(LinearModel),
    Forest(Forest),
    Boost(Boost),
    Lstm(Lstm),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub rows_used: usize,
    /// Trees, boosting rounds or epochs; 1 for the linear solve.
    pub iterations: usize,
    /// Training MSE in scaled target units.
    pub final_train_loss: Option<f64>,
}

/// A fitted predictor: learned state plus the scaler it was trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub spec: ModelSpec,
    pub width_min: u32,
    pub columns: Vec<String>,
    pub scaler: MinMaxScaler,
    pub state: ModelState,
    pub meta: TrainingMeta,
}

/// Scaled copy of the matrix. For the recurrent model each row gets the
/// previous row's scaled target appended (0 for row 0).
struct Scaled {
    x: Vec<f64>,
    width: usize,
    y: Vec<f64>,
}

fn scale_matrix(m: &FeatureMatrix, scaler: &MinMaxScaler, with_prev_target: bool) -> Result<Scaled> {
    let width = m.n_cols() + usize::from(with_prev_target);
    let mut x = Vec::with_capacity(m.n_rows() * width);
    let mut y = Vec::with_capacity(m.n_rows());
    for i in 0..m.n_rows() {
        x.extend(scaler.transform_row(m.row(i))?);
        if with_prev_target {
            x.push(match i {
                0 => 0.0,
                _ => scaler.transform_target(m.target[i - 1])?,
            });
        }
        y.push(scaler.transform_target(m.target[i])?);
    }
    Ok(Scaled { x, width, y })
}

fn gather(s: &Scaled, rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let x = rows.iter().flat_map(|&i| s.x[i * s.width..(i + 1) * s.width].iter().copied()).collect();
    let y = rows.iter().map(|&i| s.y[i]).collect();
    (x, y)
}

/// Rows `j` of `rows` such that `j - lookback ..= j` are all in `rows`.
pub fn lstm_window_ends(rows: &[usize], lookback: usize) -> Vec<usize> {
    let set: BTreeSet<usize> = rows.iter().copied().collect();
    let mut run = 0usize;
    let mut prev: Option<usize> = None;
    let mut out = Vec::new();
    for &j in &set {
        run = if prev == Some(j.wrapping_sub(1)) { run + 1 } else { 1 };
        prev = Some(j);
        if run > lookback {
            out.push(j);
        }
    }
    out
}

fn mean_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len().max(1) as f64
}

impl TrainedModel {
    /// Fits `spec` on `train_rows` of `m`, including the scaler.
    pub fn fit(m: &FeatureMatrix, train_rows: &[usize], spec: &ModelSpec) -> Result<TrainedModel> {
        spec.validate()?;
        if train_rows.len() < 2 {
            return Err(Error::Input(format!("need at least 2 training rows, got {}", train_rows.len())));
        }
        let mut scaler = MinMaxScaler::new(m.numeric_columns());
        scaler.fit(m, train_rows)?;
        let is_lstm = spec.kind() == ModelKind::Lstm;
        let s = scale_matrix(m, &scaler, is_lstm)?;
        let p = s.width;
        let (state, meta) = match &spec.params {
            ModelParams::Linear => {
                let (x, y) = gather(&s, train_rows);
                let model = linear::train_linear(&x, p, &y)?;
                let fitted: Vec<f64> = (0..y.len()).map(|i| model.predict_row(&x[i * p..(i + 1) * p])).collect();
                let meta = TrainingMeta {
                    rows_used: y.len(),
                    iterations: 1,
                    final_train_loss: Some(mean_sq(&y, &fitted)),
                };
                (ModelState::Linear(model), meta)
            }
            ModelParams::Forest(params) => {
                let (x, y) = gather(&s, train_rows);
                let model = forest::train_forest(&x, p, &y, params, spec.seed)?;
                let fitted: Vec<f64> = (0..y.len()).map(|i| model.predict_row(&x[i * p..(i + 1) * p])).collect();
                let meta = TrainingMeta {
                    rows_used: y.len(),
                    iterations: model.trees.len(),
                    final_train_loss: Some(mean_sq(&y, &fitted)),
                };
                (ModelState::Forest(model), meta)
            }
            ModelParams::Boost(params) => {
                let (x, y) = gather(&s, train_rows);
                let model = boost::train_boost(&x, p, &y, params, spec.seed)?;
                let meta = TrainingMeta {
                    rows_used: y.len(),
                    iterations: model.trees.len(),
                    final_train_loss: model.train_mse.last().copied(),
                };
                (ModelState::Boost(model), meta)
            }
            ModelParams::Lstm(params) => {
                let ends = lstm_window_ends(train_rows, params.lookback);
                let model = lstm::train_lstm(&s.x, p, &s.y, &ends, params, spec.seed)?;
                let meta = TrainingMeta {
                    rows_used: ends.len(),
                    iterations: model.epoch_loss.len(),
                    final_train_loss: model.epoch_loss.last().copied(),
                };
                (ModelState::Lstm(model), meta)
            }
        };
        Ok(TrainedModel {
            format_version: ARTIFACT_VERSION,
            spec: spec.clone(),
            width_min: m.width_min,
            columns: m.column_names.clone(),
            scaler,
            state,
            meta,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.spec.kind()
    }

    /// Predictions in original units for each requested row that the model
    /// can score. The recurrent model skips rows without a full lookback.
    pub fn predict(&self, m: &FeatureMatrix, rows: &[usize]) -> Result<Vec<(usize, f64)>> {
        if m.column_names != self.columns {
            return Err(Error::Schema {
                line: None,
                message: "feature columns differ from those the model was trained on".into(),
            });
        }
        let s = scale_matrix(m, &self.scaler, self.kind() == ModelKind::Lstm)?;
        let p = s.width;
        let mut out = Vec::with_capacity(rows.len());
        for &i in rows {
            let row = &s.x[i * p..(i + 1) * p];
            let scaled = match &self.state {
                ModelState::Linear(model) => Some(model.predict_row(row)),
                ModelState::Forest(model) => Some(model.predict_row(row)),
                ModelState::Boost(model) => Some(model.predict_row(row)),
                ModelState::Lstm(model) => model.predict_at(&s.x, i),
            };
            if let Some(v) = scaled {
                out.push((i, self.scaler.inverse_target(v)?));
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<TrainedModel> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == ARTIFACT_VERSION as u64 => Ok(serde_json::from_value(value)?),
            other => Err(Error::Schema {
                line: None,
                message: format!("unsupported model artifact version {other:?}"),
            }),
        }
    }
}
