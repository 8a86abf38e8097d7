//! Weather, pollution and calendar covariates: parsing, alignment with trip
//! counts, correlation, and rain/holiday/event contrasts.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::TripSummary;
use crate::timeutil::{self, parse_timestamp, truncate_hour, Instant};

/// Days with more missing weather hours than this are incomplete.
pub const MAX_MISSING_WEATHER_HOURS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherRecord {
    pub hour: Instant,
    pub temp: f64,
    pub precip: f64,
    pub wind: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PollutionRecord {
    pub hour: Instant,
    pub pm: Option<f64>,
    pub o3: Option<f64>,
    pub no2: Option<f64>,
    pub so2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalendarKind {
    Holiday,
    Strike,
    Protest,
    Event,
}

impl CalendarKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CalendarKind::Holiday => "holiday",
            CalendarKind::Strike => "strike",
            CalendarKind::Protest => "protest",
            CalendarKind::Event => "event",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "holiday" => CalendarKind::Holiday,
            "strike" => CalendarKind::Strike,
            "protest" => CalendarKind::Protest,
            "event" => CalendarKind::Event,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CalendarEntry {
    pub date: NaiveDate,
    pub kind: CalendarKind,
    pub label: String,
}

fn check_header(rdr: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers()?.clone();
    if header.iter().map(str::trim).ne(expected.iter().copied()) {
        return Err(Error::schema(Some(1), format!("expected header {:?}", expected.join(","))));
    }
    Ok(())
}

fn field_f64(rec: &csv::StringRecord, i: usize, name: &str, line: u64) -> Result<Option<f64>> {
    let raw = rec[i].trim();
    if raw.is_empty() {
        return Ok(None);
    }
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(Error::Parse {
            line,
            message: format!("{name}: bad number {raw:?}"),
        }),
    }
}

fn field_ts(rec: &csv::StringRecord, line: u64) -> Result<Instant> {
    parse_timestamp(rec[0].trim()).ok_or_else(|| Error::Parse {
        line,
        message: format!("malformed timestamp {:?}", &rec[0]),
    })
}

/// Reads `timestamp,temp_c,precip_mm,wind_mps`. Timestamps are truncated to
/// the hour; two rows for one hour are a schema error.
pub fn parse_weather<R: Read>(source: R) -> Result<Vec<WeatherRecord>> {
    let mut rdr = csv::Reader::from_reader(source);
    check_header(&mut rdr, &["timestamp", "temp_c", "precip_mm", "wind_mps"])?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let hour = truncate_hour(field_ts(&rec, line)?);
        let required = |i: usize, name: &str| -> Result<f64> {
            field_f64(&rec, i, name, line)?.ok_or_else(|| Error::schema(Some(line), format!("{name} is required")))
        };
        let temp = required(1, "temp_c")?;
        let precip = required(2, "precip_mm")?;
        let wind = required(3, "wind_mps")?;
        if precip < 0.0 {
            return Err(Error::Range { line, field: "precip_mm", value: precip });
        }
        if wind < 0.0 {
            return Err(Error::Range { line, field: "wind_mps", value: wind });
        }
        if !seen.insert(hour) {
            return Err(Error::schema(Some(line), format!("duplicate weather hour {}", timeutil::format_timestamp(hour))));
        }
        out.push(WeatherRecord { hour, temp, precip, wind });
    }
    out.sort_by_key(|w| w.hour);
    Ok(out)
}

pub fn write_weather<W: std::io::Write>(sink: W, records: &[WeatherRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["timestamp", "temp_c", "precip_mm", "wind_mps"])?;
    for r in records {
        w.write_record([
            timeutil::format_timestamp(r.hour),
            r.temp.to_string(),
            r.precip.to_string(),
            r.wind.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<weather>", e))?;
    Ok(())
}

/// Reads `timestamp,pm,o3,no2,so2`; empty cells are missing.
pub fn parse_pollution<R: Read>(source: R) -> Result<Vec<PollutionRecord>> {
    let mut rdr = csv::Reader::from_reader(source);
    check_header(&mut rdr, &["timestamp", "pm", "o3", "no2", "so2"])?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let hour = truncate_hour(field_ts(&rec, line)?);
        let mut vals = [None; 4];
        for (i, name) in ["pm", "o3", "no2", "so2"].into_iter().enumerate() {
            vals[i] = field_f64(&rec, i + 1, name, line)?;
            if let Some(v) = vals[i] {
                if v < 0.0 {
                    return Err(Error::Range { line, field: "pollutant", value: v });
                }
            }
        }
        out.push(PollutionRecord {
            hour,
            pm: vals[0],
            o3: vals[1],
            no2: vals[2],
            so2: vals[3],
        });
    }
    out.sort_by_key(|p| p.hour);
    Ok(out)
}

/// Reads `date,kind,label`.
pub fn parse_calendar<R: Read>(source: R) -> Result<Vec<CalendarEntry>> {
    let mut rdr = csv::Reader::from_reader(source);
    check_header(&mut rdr, &["date", "kind", "label"])?;
    let mut out = BTreeSet::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let date = NaiveDate::parse_from_str(rec[0].trim(), "%Y-%m-%d").map_err(|_| Error::Parse {
            line,
            message: format!("malformed date {:?}", &rec[0]),
        })?;
        let kind = CalendarKind::parse(rec[1].trim())
            .ok_or_else(|| Error::schema(Some(line), format!("unknown calendar kind {:?}", &rec[1])))?;
        let entry = CalendarEntry {
            date,
            kind,
            label: rec[2].to_string(),
        };
        if !out.insert(entry) {
            return Err(Error::schema(Some(line), "duplicate calendar entry"));
        }
    }
    Ok(out.into_iter().collect())
}

pub fn write_calendar<W: std::io::Write>(sink: W, entries: &[CalendarEntry]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["date", "kind", "label"])?;
    for e in entries {
        w.write_record([e.date.format("%Y-%m-%d").to_string().as_str(), e.kind.as_str(), e.label.as_str()])?;
    }
    w.flush().map_err(|e| Error::io("<calendar>", e))?;
    Ok(())
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Param(format!("series lengths differ: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::Param(format!("pearson needs at least 3 samples, got {}", x.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::UndefinedCorrelation("first series has zero variance"));
    }
    if syy == 0.0 {
        return Err(Error::UndefinedCorrelation("second series has zero variance"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Daily,
    Hourly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub variable: String,
    pub granularity: Granularity,
    /// `None` when undefined (zero variance or fewer than 3 samples).
    pub r: Option<f64>,
    pub n: usize,
}

impl CorrelationReport {
    pub fn compute(variable: &str, granularity: Granularity, x: &[f64], y: &[f64]) -> Self {
        CorrelationReport {
            variable: variable.to_string(),
            granularity,
            r: pearson(x, y).ok(),
            n: x.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyRow {
    pub date: NaiveDate,
    pub trip_count: u64,
    pub mean_temp: Option<f64>,
    pub total_precip: f64,
    pub mean_wind: Option<f64>,
    pub weather_hours: usize,
    pub complete: bool,
}

/// Per-local-date trip counts joined with aggregated weather. The table is
/// contiguous over every date seen on either side; a row is complete when it
/// lies within the trip date range and misses at most
/// [`MAX_MISSING_WEATHER_HOURS`] weather hours.
pub fn daily_join(trips: &[TripSummary], weather: &[WeatherRecord], offset_min: i32) -> Vec<DailyRow> {
    let mut counts: BTreeMap<NaiveDate, u64> = BTreeMap::new();
    for t in trips {
        *counts.entry(timeutil::local_date(t.start_time, offset_min)).or_default() += 1;
    }
    let mut wx: BTreeMap<NaiveDate, Vec<&WeatherRecord>> = BTreeMap::new();
    for w in weather {
        wx.entry(timeutil::local_date(w.hour, offset_min)).or_default().push(w);
    }
    let dates: BTreeSet<NaiveDate> = counts.keys().chain(wx.keys()).copied().collect();
    let (Some(&first), Some(&last)) = (dates.first(), dates.last()) else {
        return Vec::new();
    };
    let trip_range = counts.keys().next().copied().zip(counts.keys().next_back().copied());

    let mut rows = Vec::new();
    let mut d = first;
    while d <= last {
        let hours = wx.get(&d).map(Vec::as_slice).unwrap_or(&[]);
        let n = hours.len();
        let mean = |f: fn(&WeatherRecord) -> f64| (n > 0).then(|| hours.iter().map(|w| f(w)).sum::<f64>() / n as f64);
        let in_trip_range = trip_range.is_some_and(|(a, b)| d >= a && d <= b);
        rows.push(DailyRow {
            date: d,
            trip_count: counts.get(&d).copied().unwrap_or(0),
            mean_temp: mean(|w| w.temp),
            total_precip: hours.iter().fold(0.0, |acc, w| acc + w.precip),
            mean_wind: mean(|w| w.wind),
            weather_hours: n,
            complete: in_trip_range && n + MAX_MISSING_WEATHER_HOURS >= 24,
        });
        d = d.succ_opt().expect("date in range");
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyRow {
    pub hour: Instant,
    pub trip_count: u64,
    pub temp: f64,
    pub precip: f64,
    pub wind: f64,
}

/// Trip counts per UTC hour for every weather hour inside the trip span.
/// Hours without weather are excluded.
pub fn hourly_join(trips: &[TripSummary], weather: &[WeatherRecord]) -> Vec<HourlyRow> {
    let mut counts: BTreeMap<Instant, u64> = BTreeMap::new();
    for t in trips {
        *counts.entry(truncate_hour(t.start_time)).or_default() += 1;
    }
    let (Some(&lo), Some(&hi)) = (counts.keys().next(), counts.keys().next_back()) else {
        return Vec::new();
    };
    weather
        .iter()
        .filter(|w| w.hour >= lo && w.hour <= hi)
        .map(|w| HourlyRow {
            hour: w.hour,
            trip_count: counts.get(&w.hour).copied().unwrap_or(0),
            temp: w.temp,
            precip: w.precip,
            wind: w.wind,
        })
        .collect()
}

/// Correlation of trip counts with each weather variable at both
/// granularities, plus the four pollutants when supplied.
pub fn weather_correlations(
    daily: &[DailyRow],
    hourly: &[HourlyRow],
    pollution: Option<&[PollutionRecord]>,
    offset_min: i32,
) -> Vec<CorrelationReport> {
    let complete: Vec<&DailyRow> = daily.iter().filter(|r| r.complete).collect();
    let dc: Vec<f64> = complete.iter().map(|r| r.trip_count as f64).collect();
    let mut out = vec![
        CorrelationReport::compute("temperature", Granularity::Daily, &complete.iter().map(|r| r.mean_temp.unwrap_or(f64::NAN)).collect::<Vec<_>>(), &dc),
        CorrelationReport::compute("precipitation", Granularity::Daily, &complete.iter().map(|r| r.total_precip).collect::<Vec<_>>(), &dc),
        CorrelationReport::compute("wind", Granularity::Daily, &complete.iter().map(|r| r.mean_wind.unwrap_or(f64::NAN)).collect::<Vec<_>>(), &dc),
    ];
    let hc: Vec<f64> = hourly.iter().map(|r| r.trip_count as f64).collect();
    out.push(CorrelationReport::compute("temperature", Granularity::Hourly, &hourly.iter().map(|r| r.temp).collect::<Vec<_>>(), &hc));
    out.push(CorrelationReport::compute("precipitation", Granularity::Hourly, &hourly.iter().map(|r| r.precip).collect::<Vec<_>>(), &hc));
    out.push(CorrelationReport::compute("wind", Granularity::Hourly, &hourly.iter().map(|r| r.wind).collect::<Vec<_>>(), &hc));

    if let Some(pollution) = pollution {
        let by_hour: BTreeMap<Instant, &PollutionRecord> = pollution.iter().map(|p| (p.hour, p)).collect();
        let pick: [(&str, fn(&PollutionRecord) -> Option<f64>); 4] = [
            ("pm", |p| p.pm),
            ("o3", |p| p.o3),
            ("no2", |p| p.no2),
            ("so2", |p| p.so2),
        ];
        for (name, f) in pick {
            let (mut xs, mut ys) = (Vec::new(), Vec::new());
            for r in hourly {
                if let Some(v) = by_hour.get(&r.hour).and_then(|p| f(p)) {
                    xs.push(v);
                    ys.push(r.trip_count as f64);
                }
            }
            out.push(CorrelationReport::compute(name, Granularity::Hourly, &xs, &ys));

            let mut per_day: BTreeMap<NaiveDate, (f64, usize)> = BTreeMap::new();
            for p in pollution {
                if let Some(v) = f(p) {
                    let e = per_day.entry(timeutil::local_date(p.hour, offset_min)).or_default();
                    e.0 += v;
                    e.1 += 1;
                }
            }
            let (mut xs, mut ys) = (Vec::new(), Vec::new());
            for r in &complete {
                if let Some((s, n)) = per_day.get(&r.date) {
                    xs.push(s / *n as f64);
                    ys.push(r.trip_count as f64);
                }
            }
            out.push(CorrelationReport::compute(name, Granularity::Daily, &xs, &ys));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekdayContrast {
    /// Monday = 0.
    pub weekday: usize,
    pub date_a: NaiveDate,
    pub date_b: NaiveDate,
    pub count_a: u64,
    pub count_b: u64,
    /// `None` when `count_b` is zero.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekContrast {
    pub week_a_start: NaiveDate,
    pub week_b_start: NaiveDate,
    pub days: Vec<WeekdayContrast>,
    /// Hourly precipitation across week A, in local time order.
    pub precip_a: Vec<(Instant, f64)>,
}

/// Day-by-day comparison of two seven-day windows. Rows follow the order of
/// week A, so week starts need not be Mondays but the weekday label is that
/// of week A's date.
pub fn week_contrast(
    daily: &[DailyRow],
    weather: &[WeatherRecord],
    week_a_start: NaiveDate,
    week_b_start: NaiveDate,
    offset_min: i32,
) -> Result<WeekContrast> {
    let table: BTreeMap<NaiveDate, &DailyRow> = daily.iter().map(|r| (r.date, r)).collect();
    let missing: Vec<String> = (0..7)
        .flat_map(|i| [week_a_start + Duration::days(i), week_b_start + Duration::days(i)])
        .filter(|d| !table.contains_key(d))
        .map(|d| d.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Param(format!("week contrast: dates missing from daily table: {}", missing.join(", "))));
    }
    let days = (0..7)
        .map(|i| {
            let (da, db) = (week_a_start + Duration::days(i), week_b_start + Duration::days(i));
            let (ca, cb) = (table[&da].trip_count, table[&db].trip_count);
            WeekdayContrast {
                weekday: timeutil::weekday_index(da),
                date_a: da,
                date_b: db,
                count_a: ca,
                count_b: cb,
                ratio: (cb > 0).then(|| ca as f64 / cb as f64),
            }
        })
        .collect();
    let end = week_a_start + Duration::days(7);
    let precip_a = weather
        .iter()
        .filter(|w| {
            let d = timeutil::local_date(w.hour, offset_min);
            d >= week_a_start && d < end
        })
        .map(|w| (w.hour, w.precip))
        .collect();
    Ok(WeekContrast {
        week_a_start,
        week_b_start,
        days,
        precip_a,
    })
}

/// Monday of the week with the largest total precipitation among weeks whose
/// seven days, and the seven days after, are all in the table.
pub fn rainiest_week(daily: &[DailyRow]) -> Option<NaiveDate> {
    let table: BTreeMap<NaiveDate, &DailyRow> = daily.iter().map(|r| (r.date, r)).collect();
    let mut best: Option<(f64, NaiveDate)> = None;
    for r in daily {
        if timeutil::weekday_index(r.date) != 0 {
            continue;
        }
        let covered = (0..14).all(|i| table.contains_key(&(r.date + Duration::days(i))));
        if !covered {
            continue;
        }
        let total: f64 = (0..7).map(|i| table[&(r.date + Duration::days(i))].total_precip).sum();
        if best.is_none_or(|(b, _)| total > b) {
            best = Some((total, r.date));
        }
    }
    best.filter(|(t, _)| *t > 0.0).map(|(_, d)| d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactRow {
    pub date: NaiveDate,
    pub kind: CalendarKind,
    pub label: String,
    pub count: u64,
    pub baseline: f64,
    /// `1 - count / baseline`; negative means more trips than usual.
    pub drop_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedEntry {
    pub date: NaiveDate,
    pub label: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ImpactReport {
    pub rows: Vec<ImpactRow>,
    pub skipped: Vec<SkippedEntry>,
}

/// Compares each calendar date with the mean of the same weekday one week
/// before and one week after.
fn calendar_impact<'a>(daily: &[DailyRow], entries: impl Iterator<Item = &'a CalendarEntry>) -> ImpactReport {
    let table: BTreeMap<NaiveDate, u64> = daily.iter().map(|r| (r.date, r.trip_count)).collect();
    let mut report = ImpactReport::default();
    for e in entries {
        let skip = |reason: String| SkippedEntry {
            date: e.date,
            label: e.label.clone(),
            reason,
        };
        let (before, after) = (e.date - Duration::days(7), e.date + Duration::days(7));
        let (Some(&count), Some(&cb), Some(&ca)) = (table.get(&e.date), table.get(&before), table.get(&after)) else {
            let missing: Vec<String> = [e.date, before, after]
                .iter()
                .filter(|d| !table.contains_key(d))
                .map(|d| d.to_string())
                .collect();
            report.skipped.push(skip(format!("missing dates: {}", missing.join(", "))));
            continue;
        };
        let baseline = (cb + ca) as f64 / 2.0;
        if baseline == 0.0 {
            report.skipped.push(skip("zero baseline".into()));
            continue;
        }
        report.rows.push(ImpactRow {
            date: e.date,
            kind: e.kind,
            label: e.label.clone(),
            count,
            baseline,
            drop_fraction: 1.0 - count as f64 / baseline,
        });
    }
    report
}

pub fn holiday_impact(daily: &[DailyRow], calendar: &[CalendarEntry]) -> ImpactReport {
    calendar_impact(daily, calendar.iter().filter(|e| e.kind == CalendarKind::Holiday))
}

/// Same baseline rule as [`holiday_impact`] for strikes, protests and events.
pub fn event_impact(daily: &[DailyRow], calendar: &[CalendarEntry]) -> ImpactReport {
    calendar_impact(daily, calendar.iter().filter(|e| e.kind != CalendarKind::Holiday))
}
