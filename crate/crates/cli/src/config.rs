//! Run configuration: TOML file merged under command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Deserialize;
use velotrace::features::{FeatureOptions, HourEncoding, HourHistory, SplitRatio, DEFAULT_CV_FOLDS};
use velotrace::geo::BBox;
use velotrace::models::{BoostParams, ForestParams, LstmParams, ModelKind, ModelParams, ModelSpec};
use velotrace::spatial::{DEFAULT_DENSITY_CELL_M, DEFAULT_DEST_CELL_M};
use velotrace::stats::{DEFAULT_DISTANCE_BIN_M, DEFAULT_DURATION_BIN_S, DEFAULT_SPEED_BIN_MPS};
use velotrace::synth::SynthConfig;

use crate::error::CliError;

pub const DEFAULT_OUT: &str = "velotrace-out";
pub const DEFAULT_SEED: u64 = 2017;
pub const DEFAULT_UTC_OFFSET_MIN: i32 = 120;

/// Raw file contents. Every field is optional so that flags and defaults can
/// fill the gaps.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub points: Option<PathBuf>,
    pub weather: Option<PathBuf>,
    pub pollution: Option<PathBuf>,
    pub calendar: Option<PathBuf>,
    pub hubs: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub utc_offset_min: Option<i32>,
    pub bbox: Option<[f64; 4]>,
    #[serde(default)]
    pub describe: DescribeSection,
    #[serde(default)]
    pub spatial: SpatialSection,
    #[serde(default)]
    pub covariates: CovariatesSection,
    #[serde(default)]
    pub features: FeaturesSection,
    #[serde(default)]
    pub train: TrainSection,
    pub forest: Option<ForestParams>,
    pub boost: Option<BoostParams>,
    pub lstm: Option<LstmParams>,
    pub synth: Option<SynthConfig>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DescribeSection {
    pub distance_bin_m: f64,
    pub duration_bin_s: f64,
    pub speed_bin_mps: f64,
}

impl Default for DescribeSection {
    fn default() -> Self {
        DescribeSection {
            distance_bin_m: DEFAULT_DISTANCE_BIN_M,
            duration_bin_s: DEFAULT_DURATION_BIN_S,
            speed_bin_mps: DEFAULT_SPEED_BIN_MPS,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpatialSection {
    pub density_cell_m: f64,
    pub dest_cell_m: f64,
    pub top_k: usize,
}

impl Default for SpatialSection {
    fn default() -> Self {
        SpatialSection {
            density_cell_m: DEFAULT_DENSITY_CELL_M,
            dest_cell_m: DEFAULT_DEST_CELL_M,
            top_k: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CovariatesSection {
    /// Defaults to the rainiest fully covered week.
    pub week_a: Option<NaiveDate>,
    /// Defaults to seven days after `week_a`.
    pub week_b: Option<NaiveDate>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesSection {
    pub width: u32,
    pub hour_encoding: HourEncoding,
    pub hour_history: HourHistory,
    pub include_wind: bool,
    pub include_pollution: bool,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        let o = FeatureOptions::default();
        FeaturesSection {
            width: 30,
            hour_encoding: o.hour_encoding,
            hour_history: o.hour_history,
            include_wind: o.include_wind,
            include_pollution: o.include_pollution,
        }
    }
}

impl FeaturesSection {
    pub fn options(&self) -> FeatureOptions {
        FeatureOptions {
            hour_encoding: self.hour_encoding,
            hour_history: self.hour_history,
            include_wind: self.include_wind,
            include_pollution: self.include_pollution,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub split: SplitRatio,
    pub models: Vec<ModelKind>,
    pub cross_validate: bool,
    pub cv_folds: usize,
    /// Column groups to drop one at a time for the ablation report.
    pub ablate: Vec<String>,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            split: SplitRatio::R90,
            models: ModelKind::ALL.to_vec(),
            cross_validate: true,
            cv_folds: DEFAULT_CV_FOLDS,
            ablate: Vec::new(),
        }
    }
}

/// Flag values that take precedence over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub utc_offset_min: Option<i32>,
}

/// Fully resolved configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub out: PathBuf,
    pub points: PathBuf,
    pub weather: PathBuf,
    pub pollution: Option<PathBuf>,
    pub calendar: PathBuf,
    pub hubs: PathBuf,
    pub seed: u64,
    pub utc_offset_min: i32,
    pub bbox: Option<BBox>,
    pub describe: DescribeSection,
    pub spatial: SpatialSection,
    pub covariates: CovariatesSection,
    pub features: FeaturesSection,
    pub train: TrainSection,
    pub forest: ForestParams,
    pub boost: BoostParams,
    pub lstm: LstmParams,
    pub synth: SynthConfig,
}

impl RunConfig {
    pub fn resolve(flags: &Overrides) -> Result<RunConfig, CliError> {
        let (file, base) = match &flags.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                let file: FileConfig = toml::from_str(&text).map_err(|e| CliError::schema(format!("{}: {}", path.display(), e.message())))?;
                let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
                (file, base)
            }
            None => (FileConfig::default(), PathBuf::new()),
        };
        let rel = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        let out = match &flags.out {
            Some(o) => o.clone(),
            None => file.out.map(rel).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
        };
        let input = |p: Option<PathBuf>, name: &str| p.map(rel).unwrap_or_else(|| out.join(name));

        let seed = flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
        let utc_offset_min = flags.utc_offset_min.or(file.utc_offset_min).unwrap_or(DEFAULT_UTC_OFFSET_MIN);
        let bbox = file.bbox.map(|b| BBox::new(b[0], b[1], b[2], b[3]));
        if let Some(b) = bbox {
            if !b.is_valid() {
                return Err(CliError::param(format!("bbox {:?} is degenerate", file.bbox.unwrap())));
            }
        }
        let mut synth = file.synth.unwrap_or_default();
        synth.seed = seed;
        synth.utc_offset_min = utc_offset_min;

        Ok(RunConfig {
            points: input(file.points, "points.csv"),
            weather: input(file.weather, "weather.csv"),
            pollution: file.pollution.map(rel),
            calendar: input(file.calendar, "calendar.csv"),
            hubs: input(file.hubs, "hubs.csv"),
            out,
            seed,
            utc_offset_min,
            bbox,
            describe: file.describe,
            spatial: file.spatial,
            covariates: file.covariates,
            features: file.features,
            train: file.train,
            forest: file.forest.unwrap_or_default(),
            boost: file.boost.unwrap_or_default(),
            lstm: file.lstm.unwrap_or_default(),
            synth,
        })
    }

    pub fn model_spec(&self, kind: ModelKind) -> ModelSpec {
        let params = match kind {
            ModelKind::Linear => ModelParams::Linear,
            ModelKind::Forest => ModelParams::Forest(self.forest),
            ModelKind::Boost => ModelParams::Boost(self.boost),
            ModelKind::Lstm => ModelParams::Lstm(self.lstm),
        };
        ModelSpec { params, seed: self.seed }
    }
}
