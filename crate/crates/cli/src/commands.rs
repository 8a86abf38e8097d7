//! One function per subcommand. Each reads its inputs, writes its outputs
//! through [`Outputs`] and updates the manifest.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use chrono::Duration;
use serde::Serialize;
use velotrace::covariates::{
    self, daily_join, event_impact, holiday_impact, hourly_join, rainiest_week, week_contrast, weather_correlations, CalendarEntry,
    DailyRow, PollutionRecord, WeatherRecord,
};
use velotrace::features::{
    aggregate_slots, build_features, check_width, chronological_split_with_folds, day_span, feature_target_correlation,
    read_features, write_features, DroppedRow, FeatureMatrix, SplitPlan, SplitRatio,
};
use velotrace::geo::BBox;
use velotrace::ingest::{assemble_trips, parse_points, read_trips, write_rejections, write_trips, Assembly, TripSummary};
use velotrace::models::eval::{ablate, evaluate, EvalOptions, EvalReport};
use velotrace::models::{ModelKind, TrainedModel};
use velotrace::spatial::{build_density_grid, density_by_month, hub_spread, read_hubs, DensityGrid, HubSpreadParams};
use velotrace::stats::{histogram, monthly_change_from_counts, summarize, temporal_profile, DistributionSummary, Histogram, MonthChange};
use velotrace::timeutil::{self, Instant};
use velotrace::{synth, Error};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::Outputs;

fn read_with<T>(path: &Path, parse: impl FnOnce(BufReader<File>) -> velotrace::Result<T>) -> Result<T, CliError> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    parse(BufReader::new(f)).map_err(|e| CliError::from(e).with_path(path))
}

fn require(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::missing(path))
    }
}

fn load_trips(cfg: &RunConfig) -> Result<Vec<TripSummary>, CliError> {
    read_with(&cfg.out.join("trips.csv"), read_trips)
}

fn load_assembly(cfg: &RunConfig) -> Result<Assembly, CliError> {
    Ok(assemble_trips(read_with(&cfg.points, parse_points)?))
}

fn load_pollution(cfg: &RunConfig) -> Result<Option<Vec<PollutionRecord>>, CliError> {
    cfg.pollution.as_deref().map(|p| read_with(p, covariates::parse_pollution)).transpose()
}

#[derive(Serialize)]
struct IngestSummary {
    input_points: usize,
    kept_points: usize,
    rejected_points: usize,
    trips: usize,
    rejections_by_reason: BTreeMap<&'static str, usize>,
}

pub fn ingest(cfg: &RunConfig) -> Result<(), CliError> {
    let points = read_with(&cfg.points, parse_points)?;
    let input_points = points.len();
    let asm = assemble_trips(points);
    let mut by_reason = BTreeMap::new();
    for r in &asm.rejections {
        *by_reason.entry(r.reason.as_str()).or_default() += 1;
    }
    let mut out = Outputs::create(&cfg.out)?;
    out.csv("trips.csv", |w| write_trips(w, &asm.summaries()))?;
    out.csv("rejections.csv", |w| write_rejections(w, &asm.rejections))?;
    out.json(
        "ingest_summary.json",
        &IngestSummary {
            input_points,
            kept_points: asm.kept_points(),
            rejected_points: asm.rejected_points(),
            trips: asm.trips.len(),
            rejections_by_reason: by_reason,
        },
    )?;
    out.finish()?;
    Ok(())
}

fn histogram_csv(h: &Histogram) -> Vec<u8> {
    let mut s = String::from("bin_lower,bin_upper,count\n");
    for (lo, n) in &h.bins {
        s.push_str(&format!("{lo},{},{n}\n", lo + h.bin_width));
    }
    s.into_bytes()
}

fn monthly_csv(rows: &[MonthChange]) -> Vec<u8> {
    let mut s = String::from("month,count,pct_change,share_of_peak\n");
    for r in rows {
        let pct = r.pct_change.map(|p| p.to_string()).unwrap_or_default();
        s.push_str(&format!("{},{},{pct},{}\n", r.month, r.count, r.share_of_peak));
    }
    s.into_bytes()
}

#[derive(Serialize)]
struct DescribeSummary {
    trips: usize,
    workingday_share: f64,
    distance_m: DistributionSummary,
    duration_s: DistributionSummary,
    speed_mps: DistributionSummary,
}

pub fn describe(cfg: &RunConfig) -> Result<(), CliError> {
    let trips = load_trips(cfg)?;
    let mut out = Outputs::create(&cfg.out)?;
    let mut summaries = Vec::new();
    for (name, width, pick) in [
        ("distance", cfg.describe.distance_bin_m, (|t: &TripSummary| t.distance) as fn(&TripSummary) -> f64),
        ("duration", cfg.describe.duration_bin_s, |t| t.duration),
        ("speed", cfg.describe.speed_bin_mps, |t| t.avg_speed),
    ] {
        let values: Vec<f64> = trips.iter().map(pick).collect();
        let h = histogram(&values, width)?;
        out.bytes(&format!("histogram_{name}.csv"), &histogram_csv(&h))?;
        summaries.push(summarize(&values, &h));
    }
    let profile = temporal_profile(&trips, cfg.utc_offset_min)?;
    let monthly = if profile.monthly_counts.len() >= 2 {
        monthly_change_from_counts(&profile.monthly_counts)?
    } else {
        profile
            .monthly_counts
            .iter()
            .map(|(month, &count)| MonthChange {
                month: month.clone(),
                count,
                pct_change: None,
                share_of_peak: 1.0,
            })
            .collect()
    };
    out.json("profile.json", &profile)?;
    out.bytes("monthly.csv", &monthly_csv(&monthly))?;
    let mut s = summaries.into_iter();
    out.json(
        "describe_summary.json",
        &DescribeSummary {
            trips: trips.len(),
            workingday_share: profile.workingday_share,
            distance_m: s.next().expect("three summaries"),
            duration_s: s.next().expect("three summaries"),
            speed_mps: s.next().expect("three summaries"),
        },
    )?;
    out.finish()?;
    Ok(())
}

fn density_csv(g: &DensityGrid) -> Vec<u8> {
    let mut s = String::from("row,col,count,normalized\n");
    for r in 0..g.n_rows {
        for c in 0..g.n_cols {
            s.push_str(&format!("{r},{c},{},{}\n", g.count(r, c), g.normalized_at(r, c)));
        }
    }
    s.into_bytes()
}

#[derive(Serialize)]
struct GridInfo {
    bbox: BBox,
    cell_size_m: f64,
    n_rows: usize,
    n_cols: usize,
    points_outside: u64,
}

#[derive(Serialize)]
struct SpatialSummary {
    all: GridInfo,
    months: BTreeMap<String, GridInfo>,
}

fn grid_info(g: &DensityGrid) -> GridInfo {
    GridInfo {
        bbox: g.bbox,
        cell_size_m: g.cell_size,
        n_rows: g.n_rows,
        n_cols: g.n_cols,
        points_outside: g.ignored,
    }
}

pub fn spatial(cfg: &RunConfig) -> Result<(), CliError> {
    require(&cfg.hubs)?;
    let asm = load_assembly(cfg)?;
    let hubs = read_with(&cfg.hubs, read_hubs)?;
    let points: Vec<_> = asm.trips.iter().flat_map(|t| t.points.iter().map(|p| p.pos)).collect();
    let bbox = match cfg.bbox {
        Some(b) => b,
        None => BBox::enclosing(points.iter().copied()).ok_or_else(|| CliError::from(Error::Input("no trip points to grid".into())))?,
    };
    let cell = cfg.spatial.density_cell_m;
    let all = build_density_grid(&points, bbox, cell)?;
    let months = density_by_month(&asm.trips, bbox, cell, cfg.utc_offset_min)?;

    let summaries = asm.summaries();
    let params = HubSpreadParams {
        dest_cell_size: cfg.spatial.dest_cell_m,
        top_k: cfg.spatial.top_k,
    };
    let mut by_month: BTreeMap<String, Vec<TripSummary>> = BTreeMap::new();
    for t in &summaries {
        let key = timeutil::month_key(timeutil::local_date(t.start_time, cfg.utc_offset_min));
        by_month.entry(key).or_default().push(t.clone());
    }
    let mut reports = Vec::new();
    for hub in &hubs {
        reports.push(hub_spread(&summaries, hub, params, "all")?);
        for (month, trips) in &by_month {
            reports.push(hub_spread(trips, hub, params, month)?);
        }
    }

    let mut out = Outputs::create(&cfg.out)?;
    out.bytes("density.csv", &density_csv(&all))?;
    for (month, g) in &months {
        out.bytes(&format!("density_{month}.csv"), &density_csv(g))?;
    }
    out.json("hubs.json", &reports)?;
    out.json(
        "spatial_summary.json",
        &SpatialSummary {
            all: grid_info(&all),
            months: months.iter().map(|(k, g)| (k.clone(), grid_info(g))).collect(),
        },
    )?;
    out.finish()?;
    Ok(())
}

fn daily_csv(rows: &[DailyRow]) -> Vec<u8> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut s = String::from("date,trip_count,mean_temp,total_precip,mean_wind,weather_hours,complete\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.date,
            r.trip_count,
            opt(r.mean_temp),
            r.total_precip,
            opt(r.mean_wind),
            r.weather_hours,
            r.complete
        ));
    }
    s.into_bytes()
}

pub fn covariates(cfg: &RunConfig) -> Result<(), CliError> {
    require(&cfg.weather)?;
    require(&cfg.calendar)?;
    let trips = load_trips(cfg)?;
    let weather: Vec<WeatherRecord> = read_with(&cfg.weather, covariates::parse_weather)?;
    let calendar: Vec<CalendarEntry> = read_with(&cfg.calendar, covariates::parse_calendar)?;
    let pollution = load_pollution(cfg)?;

    let daily = daily_join(&trips, &weather, cfg.utc_offset_min);
    let hourly = hourly_join(&trips, &weather);
    let correlations = weather_correlations(&daily, &hourly, pollution.as_deref(), cfg.utc_offset_min);
    let week_a = cfg.covariates.week_a.or_else(|| rainiest_week(&daily));
    let contrast = match week_a {
        Some(a) => {
            let b = cfg.covariates.week_b.unwrap_or(a + Duration::days(7));
            Some(week_contrast(&daily, &weather, a, b, cfg.utc_offset_min)?)
        }
        None => None,
    };

    let mut out = Outputs::create(&cfg.out)?;
    out.bytes("daily.csv", &daily_csv(&daily))?;
    out.json("correlations.json", &correlations)?;
    out.json("week_contrast.json", &contrast)?;
    out.json("holiday_impact.json", &holiday_impact(&daily, &calendar))?;
    out.json("event_impact.json", &event_impact(&daily, &calendar))?;
    out.finish()?;
    Ok(())
}

#[derive(Serialize)]
struct SplitReport<'a> {
    width_min: u32,
    rows: usize,
    plan: &'a SplitPlan,
    train_start: Instant,
    train_end: Instant,
    test_start: Instant,
    test_end: Instant,
}

#[derive(Serialize)]
struct FeaturesSummary<'a> {
    width_min: u32,
    rows: usize,
    columns: &'a [String],
    history_rows_dropped: usize,
    dropped: &'a [DroppedRow],
}

fn split_for(m: &FeatureMatrix, ratio: SplitRatio, folds: usize) -> Result<SplitPlan, CliError> {
    Ok(chronological_split_with_folds(m.n_rows(), ratio, folds)?)
}

pub fn features(cfg: &RunConfig, width: Option<u32>) -> Result<(), CliError> {
    require(&cfg.weather)?;
    require(&cfg.calendar)?;
    let width = width.unwrap_or(cfg.features.width);
    check_width(width)?;
    let options = cfg.features.options();
    if options.include_pollution && cfg.pollution.is_none() {
        return Err(CliError::param("include_pollution is set but no pollution file is configured"));
    }
    let trips = load_trips(cfg)?;
    let weather: Vec<WeatherRecord> = read_with(&cfg.weather, covariates::parse_weather)?;
    let calendar: Vec<CalendarEntry> = read_with(&cfg.calendar, covariates::parse_calendar)?;
    let pollution = load_pollution(cfg)?;

    let (start, end) = day_span(&trips, cfg.utc_offset_min).ok_or_else(|| CliError::from(Error::Input("no trips to aggregate".into())))?;
    let slots = aggregate_slots(&trips, width, start, end)?;
    let m = build_features(&slots, &weather, &calendar, pollution.as_deref(), cfg.utc_offset_min, options)?;
    let plan = split_for(&m, cfg.train.split, cfg.train.cv_folds)?;
    let correlation = feature_target_correlation(&m)?;

    let mut out = Outputs::create(&cfg.out)?;
    out.csv("features.csv", |w| write_features(w, &m))?;
    out.json(
        "splitplan.json",
        &SplitReport {
            width_min: m.width_min,
            rows: m.n_rows(),
            plan: &plan,
            train_start: m.slot_start[plan.train.start],
            train_end: m.slot_start[plan.train.end - 1],
            test_start: m.slot_start[plan.test.start],
            test_end: m.slot_start[plan.test.end - 1],
        },
    )?;
    out.json("feature_correlation.json", &correlation)?;
    out.json(
        "features_summary.json",
        &FeaturesSummary {
            width_min: m.width_min,
            rows: m.n_rows(),
            columns: &m.column_names,
            history_rows_dropped: m.history_rows_dropped,
            dropped: &m.dropped,
        },
    )?;
    out.finish()?;
    Ok(())
}

fn load_features(cfg: &RunConfig, width: Option<u32>) -> Result<FeatureMatrix, CliError> {
    let path = cfg.out.join("features.csv");
    let m = read_with(&path, read_features)?;
    if let Some(w) = width {
        if m.width_min != w {
            return Err(CliError::schema(format!(
                "features.csv holds {}-minute slots; rerun `features --width {w}` first",
                m.width_min
            ))
            .with_path(&path));
        }
    }
    Ok(m)
}

pub fn model_file(kind: ModelKind, width: u32) -> String {
    format!("model_{kind}_{width}.json")
}

pub struct TrainArgs {
    pub width: Option<u32>,
    pub split: Option<SplitRatio>,
    pub models: Option<Vec<ModelKind>>,
    pub no_cv: bool,
    pub ablate: Vec<String>,
}

pub fn train(cfg: &RunConfig, args: TrainArgs) -> Result<(), CliError> {
    let m = load_features(cfg, args.width)?;
    let ratio = args.split.unwrap_or(cfg.train.split);
    let kinds = args.models.unwrap_or_else(|| cfg.train.models.clone());
    if kinds.is_empty() {
        return Err(CliError::param("no models selected"));
    }
    let plan = split_for(&m, ratio, cfg.train.cv_folds)?;
    let specs: Vec<_> = kinds.iter().map(|&k| cfg.model_spec(k)).collect();
    let options = EvalOptions {
        cross_validate: cfg.train.cross_validate && !args.no_cv,
    };
    let run = evaluate(&m, &plan, &specs, options).map_err(CliError::training)?;

    let groups = if args.ablate.is_empty() { &cfg.train.ablate } else { &args.ablate };
    let mut ablations = Vec::new();
    for spec in &specs {
        for g in groups {
            ablations.push(ablate(&m, &plan, spec, g).map_err(CliError::training)?);
        }
    }

    let report_path = cfg.out.join("eval_report.json");
    let mut report: EvalReport = match std::fs::read_to_string(&report_path) {
        Ok(text) => serde_json::from_str(&text).map_err(|e| CliError::schema(e.to_string()).with_path(&report_path))?,
        Err(_) => EvalReport::default(),
    };
    let best = run.report.best().map(|e| e.kind);
    report.merge(run.report);

    let mut out = Outputs::create(&cfg.out)?;
    for model in &run.models {
        let mut text = model.to_json()?;
        text.push('\n');
        out.bytes(&model_file(model.kind(), m.width_min), text.as_bytes())?;
    }
    for p in &run.predictions {
        out.csv(&format!("predictions_{}_{}.csv", p.kind, m.width_min), |w| p.write_csv(w))?;
        if Some(p.kind) == best {
            out.csv("predictions.csv", |w| p.write_csv(w))?;
        }
    }
    out.json("eval_report.json", &report)?;
    if !ablations.is_empty() {
        out.json("ablation.json", &ablations)?;
    }
    out.finish()?;
    Ok(())
}

#[derive(Serialize)]
struct PredictionReport {
    kind: ModelKind,
    width_min: u32,
    slot_start: Instant,
    predicted: f64,
    actual: f64,
}

pub fn predict(cfg: &RunConfig, kind: ModelKind, horizon: Option<u32>, at: Option<Instant>) -> Result<(), CliError> {
    let width = horizon.unwrap_or(cfg.features.width);
    check_width(width)?;
    let model_path = cfg.out.join(model_file(kind, width));
    let text = std::fs::read_to_string(&model_path).map_err(|e| CliError::io(&model_path, e))?;
    let model = TrainedModel::from_json(&text).map_err(|e| CliError::from(e).with_path(&model_path))?;
    let m = load_features(cfg, Some(width))?;
    let row = match at {
        Some(t) => m
            .slot_start
            .iter()
            .position(|&s| s == t)
            .ok_or_else(|| CliError::param(format!("no feature row starts at {}", timeutil::format_timestamp(t))))?,
        None => m.n_rows().checked_sub(1).ok_or_else(|| CliError::param("features.csv has no rows"))?,
    };
    let (_, predicted) = model
        .predict(&m, &[row])?
        .into_iter()
        .next()
        .ok_or_else(|| CliError::param("the model cannot score this slot: not enough preceding rows"))?;
    let mut out = Outputs::create(&cfg.out)?;
    out.json(
        "prediction.json",
        &PredictionReport {
            kind,
            width_min: width,
            slot_start: m.slot_start[row],
            predicted,
            actual: m.target[row],
        },
    )?;
    out.finish()?;
    Ok(())
}

pub fn synth(cfg: &RunConfig) -> Result<(), CliError> {
    let data = synth::generate(&cfg.synth, true)?;
    let mut out = Outputs::create(&cfg.out)?;
    synth::write_dataset(&data, &cfg.out)?;
    for name in synth::DATASET_FILES {
        out.record(name)?;
    }
    out.finish()?;
    Ok(())
}
