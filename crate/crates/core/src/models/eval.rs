//! Blocked cross-validation, held-out testing and feature ablation.

use serde::{Deserialize, Serialize};

use super::metrics::{mean_metrics, metrics, Metrics};
use super::{ModelKind, ModelSpec, TrainedModel, TrainingMeta};
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, SplitPlan, SplitRatio};
use crate::timeutil::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub cross_validate: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { cross_validate: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub rows_scored: usize,
    /// `None` when fewer than two fold rows could be scored.
    pub metrics: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEvaluation {
    pub ratio: SplitRatio,
    pub width_min: u32,
    pub kind: ModelKind,
    pub spec: ModelSpec,
    pub cv_folds: Vec<FoldMetrics>,
    pub cv_mean: Option<Metrics>,
    pub test: Metrics,
    pub test_rows_scored: usize,
    pub training: TrainingMeta,
}

impl ModelEvaluation {
    fn key(&self) -> (SplitRatio, u32, ModelKind) {
        (self.ratio, self.width_min, self.kind)
    }
}

/// Evaluations ordered by (ratio, width, kind).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub entries: Vec<ModelEvaluation>,
}

impl EvalReport {
    /// Adds entries, replacing any with the same key.
    pub fn merge(&mut self, other: EvalReport) {
        for e in other.entries {
            self.entries.retain(|x| x.key() != e.key());
            self.entries.push(e);
        }
        self.entries.sort_by_key(|e| e.key());
    }

    pub fn get(&self, ratio: SplitRatio, width_min: u32, kind: ModelKind) -> Option<&ModelEvaluation> {
        self.entries.iter().find(|e| e.key() == (ratio, width_min, kind))
    }

    /// Entry with the lowest test MAE.
    pub fn best(&self) -> Option<&ModelEvaluation> {
        self.entries.iter().min_by(|a, b| a.test.mae.total_cmp(&b.test.mae))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub slot_start: Instant,
    pub actual: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub kind: ModelKind,
    pub rows: Vec<PredictionRow>,
}

impl Predictions {
    pub fn write_csv<W: std::io::Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["slot_start", "actual", "predicted"])?;
        for r in &self.rows {
            w.write_record([crate::timeutil::format_timestamp(r.slot_start), r.actual.to_string(), r.predicted.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<predictions>", e))?;
        Ok(())
    }
}

fn score(model: &TrainedModel, m: &FeatureMatrix, rows: &[usize]) -> Result<(Vec<PredictionRow>, Option<Metrics>)> {
    let preds = model.predict(m, rows)?;
    let rows: Vec<PredictionRow> = preds
        .iter()
        .map(|&(i, p)| PredictionRow {
            slot_start: m.slot_start[i],
            actual: m.target[i],
            predicted: p,
        })
        .collect();
    let actual: Vec<f64> = rows.iter().map(|r| r.actual).collect();
    let predicted: Vec<f64> = rows.iter().map(|r| r.predicted).collect();
    let met = if rows.len() >= 2 { Some(metrics(&actual, &predicted)?) } else { None };
    Ok((rows, met))
}

/// One model per fold: trained on the other training blocks, scored on the
/// fold.
pub fn cross_validate(m: &FeatureMatrix, plan: &SplitPlan, spec: &ModelSpec) -> Result<Vec<FoldMetrics>> {
    let mut out = Vec::with_capacity(plan.cv_folds.len());
    for (k, fold) in plan.cv_folds.iter().enumerate() {
        let model = TrainedModel::fit(m, &plan.fold_training_rows(k), spec)?;
        let (rows, metrics) = score(&model, m, &fold.clone().collect::<Vec<_>>())?;
        out.push(FoldMetrics {
            fold: k,
            rows_scored: rows.len(),
            metrics,
        });
    }
    Ok(out)
}

pub struct HoldoutResult {
    pub model: TrainedModel,
    pub test: Metrics,
    pub predictions: Predictions,
}

/// Fits on the whole training range and scores the test range.
pub fn holdout_test(m: &FeatureMatrix, plan: &SplitPlan, spec: &ModelSpec) -> Result<HoldoutResult> {
    let train: Vec<usize> = plan.train.clone().collect();
    let model = TrainedModel::fit(m, &train, spec)?;
    let (rows, test) = score(&model, m, &plan.test.clone().collect::<Vec<_>>())?;
    let test = test.ok_or_else(|| Error::Input(format!("{} model scored fewer than 2 test rows", spec.kind())))?;
    Ok(HoldoutResult {
        predictions: Predictions { kind: spec.kind(), rows },
        model,
        test,
    })
}

pub struct EvalRun {
    pub report: EvalReport,
    pub models: Vec<TrainedModel>,
    pub predictions: Vec<Predictions>,
}

pub fn evaluate(m: &FeatureMatrix, plan: &SplitPlan, specs: &[ModelSpec], options: EvalOptions) -> Result<EvalRun> {
    let mut run = EvalRun {
        report: EvalReport::default(),
        models: Vec::new(),
        predictions: Vec::new(),
    };
    for spec in specs {
        let cv_folds = if options.cross_validate { cross_validate(m, plan, spec)? } else { Vec::new() };
        let cv_mean = mean_metrics(&cv_folds.iter().filter_map(|f| f.metrics).collect::<Vec<_>>());
        let h = holdout_test(m, plan, spec)?;
        run.report.merge(EvalReport {
            entries: vec![ModelEvaluation {
                ratio: plan.ratio,
                width_min: m.width_min,
                kind: spec.kind(),
                spec: spec.clone(),
                cv_folds,
                cv_mean,
                test: h.test,
                test_rows_scored: h.predictions.rows.len(),
                training: h.model.meta.clone(),
            }],
        });
        run.models.push(h.model);
        run.predictions.push(h.predictions);
    }
    Ok(run)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PctChange {
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub group: String,
    pub kind: ModelKind,
    pub baseline: Metrics,
    pub ablated: Metrics,
    /// (ablated - baseline) / baseline; positive means removal hurt.
    pub pct_change: PctChange,
}

/// Retrains without the named column group and compares held-out metrics.
pub fn ablate(m: &FeatureMatrix, plan: &SplitPlan, spec: &ModelSpec, group: &str) -> Result<AblationReport> {
    let reduced = m.without_group(group)?;
    let baseline = holdout_test(m, plan, spec)?.test;
    let ablated = holdout_test(&reduced, plan, spec)?.test;
    let pct = |a: f64, b: f64| if b != 0.0 { (a - b) / b } else { 0.0 };
    Ok(AblationReport {
        group: group.to_string(),
        kind: spec.kind(),
        pct_change: PctChange {
            mae: pct(ablated.mae, baseline.mae),
            mse: pct(ablated.mse, baseline.mse),
            rmse: pct(ablated.rmse, baseline.rmse),
        },
        baseline,
        ablated,
    })
}
