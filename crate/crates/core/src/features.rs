//! Model-ready datasets: fixed-width trip-count slots, covariate and dummy
//! columns, the two lag features, chronological splits with blocked CV
//! folds, and min-max scaling.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::ops::Range;

use chrono::{Datelike, Duration, NaiveDate, Timelike};
use serde::{Deserialize, Serialize};

use crate::covariates::{CalendarEntry, CalendarKind, PollutionRecord, WeatherRecord};
use crate::error::{Error, Result};
use crate::ingest::TripSummary;
use crate::timeutil::{self, format_timestamp, parse_timestamp, truncate_hour, Instant};

pub const WEEK_MINUTES: i64 = 7 * 24 * 60;
pub const DEFAULT_CV_FOLDS: usize = 10;

const WEEKDAY_NAMES: [&str; 7] = ["mon", "tue", "wed", "thu", "fri", "sat", "sun"];
const SEASON_NAMES: [&str; 4] = ["spring", "summer", "autumn", "winter"];

/// Contiguous trip counts per fixed-width slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotSeries {
    pub width_min: u32,
    pub start: Instant,
    pub counts: Vec<u64>,
    /// Trips whose start falls outside the span.
    pub out_of_span: u64,
}

impl SlotSeries {
    pub fn slot_start(&self, i: usize) -> Instant {
        self.start + Duration::minutes(i as i64 * self.width_min as i64)
    }

    pub fn end(&self) -> Instant {
        self.slot_start(self.counts.len())
    }

    /// Index of the slot starting at `t`, if `t` is a slot boundary in range.
    pub fn index_at(&self, t: Instant) -> Option<usize> {
        let offset = (t - self.start).num_minutes();
        let w = self.width_min as i64;
        if offset < 0 || offset % w != 0 {
            return None;
        }
        let i = (offset / w) as usize;
        (i < self.counts.len()).then_some(i)
    }
}

pub fn check_width(width_min: u32) -> Result<()> {
    if width_min == 30 || width_min == 60 {
        Ok(())
    } else {
        Err(Error::Param(format!("slot width must be 30 or 60 minutes, got {width_min}")))
    }
}

/// Counts each trip in the slot containing its start time over `[start, end)`.
pub fn aggregate_slots(trips: &[TripSummary], width_min: u32, start: Instant, end: Instant) -> Result<SlotSeries> {
    check_width(width_min)?;
    let w = width_min as i64 * 60;
    if start.timestamp().rem_euclid(w) != 0 {
        return Err(Error::Param(format!("span start {} is not aligned to {width_min} minutes", format_timestamp(start))));
    }
    if end <= start {
        return Err(Error::Param("span end must be after its start".into()));
    }
    let n = ((end - start).num_seconds() + w - 1) / w;
    let mut counts = vec![0u64; n as usize];
    let mut out_of_span = 0;
    for t in trips {
        if t.start_time < start || t.start_time >= end {
            out_of_span += 1;
            continue;
        }
        counts[((t.start_time - start).num_seconds() / w) as usize] += 1;
    }
    Ok(SlotSeries {
        width_min,
        start,
        counts,
        out_of_span,
    })
}

/// Span of whole local days covering every trip, aligned to slot width.
pub fn day_span(trips: &[TripSummary], offset_min: i32) -> Option<(Instant, Instant)> {
    let first = trips.iter().map(|t| t.start_time).min()?;
    let last = trips.iter().map(|t| t.start_time).max()?;
    let start = timeutil::local_midnight_utc(timeutil::local_date(first, offset_min), offset_min);
    let end = timeutil::local_midnight_utc(timeutil::local_date(last, offset_min) + Duration::days(1), offset_min);
    Some((start, end))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HourEncoding {
    #[default]
    OneHot,
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HourHistory {
    /// The single slot starting 60 minutes earlier.
    #[default]
    SingleSlot,
    /// Sum of every slot in the preceding hour.
    PrecedingHourSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureOptions {
    pub hour_encoding: HourEncoding,
    pub hour_history: HourHistory,
    pub include_wind: bool,
    pub include_pollution: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnGroup {
    pub name: String,
    pub start: usize,
    pub len: usize,
    /// Numeric groups are min-max scaled; dummy groups are left as 0/1.
    pub numeric: bool,
}

impl ColumnGroup {
    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.len
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedRow {
    pub slot_start: Instant,
    pub reason: String,
}

/// Row-major feature table with one target per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub width_min: u32,
    pub column_names: Vec<String>,
    pub groups: Vec<ColumnGroup>,
    pub data: Vec<f64>,
    pub target: Vec<f64>,
    pub slot_start: Vec<Instant>,
    pub dropped: Vec<DroppedRow>,
    /// Leading slots without a full week of history.
    pub history_rows_dropped: usize,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_cols();
        &self.data[i * p..(i + 1) * p]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.data[i * self.n_cols() + j]).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    pub fn group(&self, name: &str) -> Option<&ColumnGroup> {
        self.groups.iter().find(|g| g.name == name)
    }

    /// Indices of every numeric (scaled) column.
    pub fn numeric_columns(&self) -> Vec<usize> {
        self.groups.iter().filter(|g| g.numeric).flat_map(|g| g.range()).collect()
    }

    /// Copy without the named group's columns.
    pub fn without_group(&self, name: &str) -> Result<FeatureMatrix> {
        let g = self.group(name).ok_or_else(|| Error::Param(format!("unknown feature group {name:?}")))?.clone();
        let keep: Vec<usize> = (0..self.n_cols()).filter(|j| !g.range().contains(j)).collect();
        let mut out = self.clone();
        out.column_names = keep.iter().map(|&j| self.column_names[j].clone()).collect();
        out.data = (0..self.n_rows()).flat_map(|i| keep.iter().map(move |&j| self.data[i * self.n_cols() + j])).collect();
        out.groups = regroup(&out.column_names);
        Ok(out)
    }

    /// Copy with an extra single-column group appended.
    pub fn with_column(&self, name: &str, values: &[f64], numeric: bool) -> Result<FeatureMatrix> {
        if values.len() != self.n_rows() {
            return Err(Error::Param("column length differs from row count".into()));
        }
        if self.column_index(name).is_some() {
            return Err(Error::Param(format!("column {name:?} already exists")));
        }
        let p = self.n_cols();
        let mut out = self.clone();
        out.data = (0..self.n_rows())
            .flat_map(|i| self.data[i * p..(i + 1) * p].iter().copied().chain(std::iter::once(values[i])))
            .collect();
        out.column_names.push(name.to_string());
        out.groups.push(ColumnGroup {
            name: name.to_string(),
            start: p,
            len: 1,
            numeric,
        });
        Ok(out)
    }

    /// Row subset, keeping column layout.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut out = self.clone();
        out.data = rows.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        out.target = rows.iter().map(|&i| self.target[i]).collect();
        out.slot_start = rows.iter().map(|&i| self.slot_start[i]).collect();
        out
    }
}

fn group_name_of(column: &str) -> (&str, bool) {
    for prefix in ["hour_of_the_day_", "month_", "season_", "day_of_week_"] {
        if column.starts_with(prefix) {
            return (&prefix[..prefix.len() - 1], false);
        }
    }
    (column, column != "holiday")
}

/// Rebuilds column groups from column names.
pub fn regroup(column_names: &[String]) -> Vec<ColumnGroup> {
    let mut groups: Vec<ColumnGroup> = Vec::new();
    for (j, c) in column_names.iter().enumerate() {
        let (name, numeric) = group_name_of(c);
        match groups.last_mut() {
            Some(g) if g.name == name && !numeric => g.len += 1,
            _ => groups.push(ColumnGroup {
                name: name.to_string(),
                start: j,
                len: 1,
                numeric,
            }),
        }
    }
    groups
}

pub fn season_of(month: u32) -> usize {
    match month {
        3..=5 => 0,
        6..=8 => 1,
        9..=11 => 2,
        _ => 3,
    }
}

/// Builds the feature table. Rows without a week of history are dropped, as
/// are rows whose covariates are missing (logged in `dropped`).
pub fn build_features(
    slots: &SlotSeries,
    weather: &[WeatherRecord],
    calendar: &[CalendarEntry],
    pollution: Option<&[PollutionRecord]>,
    offset_min: i32,
    options: FeatureOptions,
) -> Result<FeatureMatrix> {
    check_width(slots.width_min)?;
    if options.include_pollution && pollution.is_none() {
        return Err(Error::Param("pollution columns requested without pollution records".into()));
    }
    let weather: BTreeMap<Instant, &WeatherRecord> = weather.iter().map(|w| (w.hour, w)).collect();
    let pollution: BTreeMap<Instant, &PollutionRecord> = pollution.unwrap_or(&[]).iter().map(|p| (p.hour, p)).collect();
    let holidays: BTreeSet<NaiveDate> = calendar.iter().filter(|c| c.kind == CalendarKind::Holiday).map(|c| c.date).collect();

    let per_slot = slots.width_min as usize;
    let week_lag = (WEEK_MINUTES as usize) / per_slot;
    let hour_lag = 60 / per_slot;

    struct Pending {
        idx: usize,
        covariates: Vec<f64>,
        local: chrono::NaiveDateTime,
    }
    let mut pending = Vec::new();
    let mut dropped = Vec::new();
    for idx in week_lag..slots.counts.len() {
        let t = slots.slot_start(idx);
        let hour = truncate_hour(t);
        let Some(w) = weather.get(&hour) else {
            dropped.push(DroppedRow { slot_start: t, reason: "no weather for slot hour".into() });
            continue;
        };
        let mut covariates = vec![w.temp, w.precip];
        if options.include_wind {
            covariates.push(w.wind);
        }
        if options.include_pollution {
            let vals = pollution.get(&hour).map(|p| [p.pm, p.o3, p.no2, p.so2]);
            match vals {
                Some([Some(a), Some(b), Some(c), Some(d)]) => covariates.extend([a, b, c, d]),
                _ => {
                    dropped.push(DroppedRow { slot_start: t, reason: "missing pollution for slot hour".into() });
                    continue;
                }
            }
        }
        pending.push(Pending {
            idx,
            covariates,
            local: timeutil::local(t, offset_min),
        });
    }

    let months: Vec<u32> = pending.iter().map(|p| p.local.month()).collect::<BTreeSet<_>>().into_iter().collect();

    let mut names: Vec<String> = vec!["temperature".into(), "precipitation".into()];
    if options.include_wind {
        names.push("wind".into());
    }
    if options.include_pollution {
        names.extend(["pm", "o3", "no2", "so2"].map(String::from));
    }
    match options.hour_encoding {
        HourEncoding::OneHot => names.extend((0..24).map(|h| format!("hour_of_the_day_{h:02}"))),
        HourEncoding::Numeric => names.push("hour_of_the_day".into()),
    }
    names.extend(months.iter().map(|m| format!("month_{m:02}")));
    names.extend(SEASON_NAMES.iter().map(|s| format!("season_{s}")));
    names.extend(WEEKDAY_NAMES.iter().map(|d| format!("day_of_week_{d}")));
    names.extend(["holiday", "hour_history", "week_history"].map(String::from));

    let mut data = Vec::with_capacity(pending.len() * names.len());
    let mut target = Vec::with_capacity(pending.len());
    let mut slot_start = Vec::with_capacity(pending.len());
    for p in &pending {
        data.extend_from_slice(&p.covariates);
        let hour = p.local.hour() as usize;
        match options.hour_encoding {
            HourEncoding::OneHot => data.extend((0..24).map(|h| (h == hour) as u8 as f64)),
            HourEncoding::Numeric => data.push(hour as f64),
        }
        let month = p.local.month();
        data.extend(months.iter().map(|&m| (m == month) as u8 as f64));
        let season = season_of(month);
        data.extend((0..4).map(|s| (s == season) as u8 as f64));
        let dow = timeutil::weekday_index(p.local.date());
        data.extend((0..7).map(|d| (d == dow) as u8 as f64));
        data.push(holidays.contains(&p.local.date()) as u8 as f64);
        let hour_history = match options.hour_history {
            HourHistory::SingleSlot => slots.counts[p.idx - hour_lag],
            HourHistory::PrecedingHourSum => (1..=hour_lag).map(|k| slots.counts[p.idx - k]).sum(),
        };
        data.push(hour_history as f64);
        data.push(slots.counts[p.idx - week_lag] as f64);
        target.push(slots.counts[p.idx] as f64);
        slot_start.push(slots.slot_start(p.idx));
    }

    Ok(FeatureMatrix {
        width_min: slots.width_min,
        groups: regroup(&names),
        column_names: names,
        data,
        target,
        slot_start,
        dropped,
        history_rows_dropped: week_lag.min(slots.counts.len()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCorrelation {
    pub column: String,
    pub r: Option<f64>,
}

/// Pearson r of every column with the target, strongest first; undefined
/// (constant) columns come last in column order.
pub fn feature_target_correlation(m: &FeatureMatrix) -> Result<Vec<FeatureCorrelation>> {
    if m.n_rows() < 3 {
        return Err(Error::Param(format!("need at least 3 rows, got {}", m.n_rows())));
    }
    let mut out: Vec<FeatureCorrelation> = (0..m.n_cols())
        .map(|j| FeatureCorrelation {
            column: m.column_names[j].clone(),
            r: crate::covariates::pearson(&m.column(j), &m.target).ok(),
        })
        .collect();
    out.sort_by(|a, b| match (a.r, b.r) {
        (Some(x), Some(y)) => y.abs().total_cmp(&x.abs()),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SplitRatio {
    #[serde(rename = "90/10")]
    R90,
    #[serde(rename = "80/20")]
    R80,
    #[serde(rename = "70/30")]
    R70,
    #[serde(rename = "60/40")]
    R60,
}

impl SplitRatio {
    pub const ALL: [SplitRatio; 4] = [SplitRatio::R90, SplitRatio::R80, SplitRatio::R70, SplitRatio::R60];

    pub fn test_percent(self) -> usize {
        match self {
            SplitRatio::R90 => 10,
            SplitRatio::R80 => 20,
            SplitRatio::R70 => 30,
            SplitRatio::R60 => 40,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SplitRatio::R90 => "90/10",
            SplitRatio::R80 => "80/20",
            SplitRatio::R70 => "70/30",
            SplitRatio::R60 => "60/40",
        }
    }
}

impl std::str::FromStr for SplitRatio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SplitRatio::ALL
            .into_iter()
            .find(|r| r.label() == s)
            .ok_or_else(|| Error::Param(format!("split ratio must be one of 90/10, 80/20, 70/30, 60/40; got {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub ratio: SplitRatio,
    pub train: Range<usize>,
    pub test: Range<usize>,
    pub cv_folds: Vec<Range<usize>>,
}

impl SplitPlan {
    /// Training rows outside `fold`.
    pub fn fold_training_rows(&self, fold: usize) -> Vec<usize> {
        let f = &self.cv_folds[fold];
        self.train.clone().filter(|i| !f.contains(i)).collect()
    }
}

/// Test = the last `floor(n * test%)` rows; the rest trains, cut into
/// `n_folds` contiguous blocks whose sizes differ by at most one.
pub fn chronological_split_with_folds(n_rows: usize, ratio: SplitRatio, n_folds: usize) -> Result<SplitPlan> {
    let n_test = n_rows * ratio.test_percent() / 100;
    let n_train = n_rows - n_test;
    if n_folds == 0 {
        return Err(Error::Param("fold count must be positive".into()));
    }
    if n_test == 0 || n_train < n_folds {
        return Err(Error::Param(format!(
            "{n_rows} rows give {n_train} training rows and {n_test} test rows; need at least {n_folds} training rows and 1 test row"
        )));
    }
    let (base, extra) = (n_train / n_folds, n_train % n_folds);
    let mut folds = Vec::with_capacity(n_folds);
    let mut s = 0;
    for k in 0..n_folds {
        let len = base + usize::from(k < extra);
        folds.push(s..s + len);
        s += len;
    }
    Ok(SplitPlan {
        ratio,
        train: 0..n_train,
        test: n_train..n_rows,
        cv_folds: folds,
    })
}

pub fn chronological_split(n_rows: usize, ratio: SplitRatio) -> Result<SplitPlan> {
    chronological_split_with_folds(n_rows, ratio, DEFAULT_CV_FOLDS)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub min: f64,
    pub max: f64,
}

impl ColumnScale {
    fn fit(values: impl Iterator<Item = f64>) -> Self {
        let (min, max) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        ColumnScale { min, max }
    }

    pub fn apply(&self, v: f64) -> f64 {
        let span = self.max - self.min;
        if span > 0.0 {
            (v - self.min) / span
        } else {
            0.0
        }
    }

    pub fn invert(&self, s: f64) -> f64 {
        let span = self.max - self.min;
        if span > 0.0 {
            s * span + self.min
        } else {
            self.min
        }
    }
}

/// Min-max scaling of the numeric columns and the target, fitted on training
/// rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub columns: Vec<usize>,
    pub column_scales: Option<Vec<ColumnScale>>,
    pub target_scale: Option<ColumnScale>,
}

impl MinMaxScaler {
    pub fn new(columns: Vec<usize>) -> Self {
        MinMaxScaler {
            columns,
            column_scales: None,
            target_scale: None,
        }
    }

    pub fn is_fitted(&self) -> bool {
        self.column_scales.is_some()
    }

    pub fn fit(&mut self, m: &FeatureMatrix, rows: &[usize]) -> Result<()> {
        if rows.is_empty() {
            return Err(Error::Input("cannot fit a scaler on zero rows".into()));
        }
        self.column_scales = Some(
            self.columns
                .iter()
                .map(|&j| ColumnScale::fit(rows.iter().map(|&i| m.row(i)[j])))
                .collect(),
        );
        self.target_scale = Some(ColumnScale::fit(rows.iter().map(|&i| m.target[i])));
        Ok(())
    }

    fn scales(&self) -> Result<(&[ColumnScale], &ColumnScale)> {
        match (&self.column_scales, &self.target_scale) {
            (Some(c), Some(t)) => Ok((c, t)),
            _ => Err(Error::State("scaler used before fit".into())),
        }
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        let (scales, _) = self.scales()?;
        let mut out = row.to_vec();
        for (&j, s) in self.columns.iter().zip(scales) {
            out[j] = s.apply(row[j]);
        }
        Ok(out)
    }

    pub fn inverse_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        let (scales, _) = self.scales()?;
        let mut out = row.to_vec();
        for (&j, s) in self.columns.iter().zip(scales) {
            out[j] = s.invert(row[j]);
        }
        Ok(out)
    }

    pub fn transform_target(&self, y: f64) -> Result<f64> {
        Ok(self.scales()?.1.apply(y))
    }

    pub fn inverse_target(&self, s: f64) -> Result<f64> {
        Ok(self.scales()?.1.invert(s))
    }
}

pub fn write_features<W: Write>(sink: W, m: &FeatureMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = m.column_names.clone();
    header.push("target".into());
    header.push("slot_start".into());
    w.write_record(&header)?;
    for i in 0..m.n_rows() {
        let mut rec: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(m.target[i].to_string());
        rec.push(format_timestamp(m.slot_start[i]));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<features>", e))?;
    Ok(())
}

/// Reads `features.csv`. The slot width is the smallest gap between rows.
pub fn read_features<R: Read>(source: R) -> Result<FeatureMatrix> {
    let mut rdr = csv::Reader::from_reader(source);
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    let n = header.len();
    if n < 3 || header[n - 2] != "target" || header[n - 1] != "slot_start" {
        return Err(Error::schema(Some(1), "features header must end with target,slot_start"));
    }
    let column_names = header[..n - 2].to_vec();
    let mut data = Vec::new();
    let mut target = Vec::new();
    let mut slot_start = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        for j in 0..n - 1 {
            let v: f64 = rec[j].parse().map_err(|_| Error::Parse {
                line,
                message: format!("{}: bad number {:?}", header[j], &rec[j]),
            })?;
            if j < n - 2 {
                data.push(v);
            } else {
                target.push(v);
            }
        }
        slot_start.push(parse_timestamp(&rec[n - 1]).ok_or_else(|| Error::Parse {
            line,
            message: format!("malformed slot_start {:?}", &rec[n - 1]),
        })?);
    }
    let width_min = slot_start
        .windows(2)
        .map(|w| (w[1] - w[0]).num_minutes())
        .filter(|&d| d > 0)
        .min()
        .unwrap_or(60) as u32;
    check_width(width_min)?;
    Ok(FeatureMatrix {
        width_min,
        groups: regroup(&column_names),
        column_names,
        data,
        target,
        slot_start,
        dropped: Vec::new(),
        history_rows_dropped: 0,
    })
}
