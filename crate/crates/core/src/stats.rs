//! Temporal descriptive statistics: value histograms, weekday and hourly
//! usage profiles, and month-over-month change.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::TripSummary;
use crate::timeutil::{self, is_weekend};

pub const DEFAULT_DISTANCE_BIN_M: f64 = 200.0;
pub const DEFAULT_DURATION_BIN_S: f64 = 60.0;
pub const DEFAULT_SPEED_BIN_MPS: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub origin: f64,
    /// Contiguous bins from the lowest to the highest occupied one.
    pub bins: Vec<(f64, u64)>,
    pub total: u64,
}

impl Histogram {
    /// Lower edge and count of the most populated bin; the lowest bin wins ties.
    pub fn mode_bin(&self) -> Option<(f64, u64)> {
        self.bins
            .iter()
            .copied()
            .fold(None, |best: Option<(f64, u64)>, b| match best {
                Some(m) if m.1 >= b.1 => Some(m),
                _ => Some(b),
            })
    }

    pub fn bin_index_of(&self, v: f64) -> i64 {
        ((v - self.origin) / self.bin_width).floor() as i64
    }
}

pub fn histogram(values: &[f64], bin_width: f64) -> Result<Histogram> {
    histogram_with_origin(values, bin_width, 0.0)
}

pub fn histogram_with_origin(values: &[f64], bin_width: f64, origin: f64) -> Result<Histogram> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::Param(format!("bin width must be positive, got {bin_width}")));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Input(format!("non-finite histogram value {v}")));
    }
    let mut counts: BTreeMap<i64, u64> = BTreeMap::new();
    for &v in values {
        *counts.entry(((v - origin) / bin_width).floor() as i64).or_default() += 1;
    }
    let bins = match (counts.keys().next(), counts.keys().next_back()) {
        (Some(&lo), Some(&hi)) => (lo..=hi)
            .map(|k| (origin + k as f64 * bin_width, counts.get(&k).copied().unwrap_or(0)))
            .collect(),
        _ => Vec::new(),
    };
    Ok(Histogram {
        bin_width,
        origin,
        bins,
        total: values.len() as u64,
    })
}

/// Fraction of values strictly below `threshold`; 0 for empty input.
pub fn share_below(values: &[f64], threshold: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().filter(|&&v| v < threshold).count() as f64 / values.len() as f64
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

/// Both candidate "peak" statistics for one trip quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub count: u64,
    pub mode_bin_lower: Option<f64>,
    pub mode_bin_center: Option<f64>,
    pub median: Option<f64>,
    pub mean: Option<f64>,
}

pub fn summarize(values: &[f64], hist: &Histogram) -> DistributionSummary {
    let mode = hist.mode_bin();
    DistributionSummary {
        count: values.len() as u64,
        mode_bin_lower: mode.map(|m| m.0),
        mode_bin_center: mode.map(|m| m.0 + hist.bin_width / 2.0),
        median: median(values),
        mean: (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalProfile {
    /// Monday..Sunday.
    pub weekday_counts: [u64; 7],
    pub hourly_weekday: [u64; 24],
    pub hourly_weekend: [u64; 24],
    /// Keyed `YYYY-MM`.
    pub monthly_counts: BTreeMap<String, u64>,
    pub workingday_share: f64,
    pub total: u64,
}

/// Attributes each trip to the local weekday, hour and month of its start.
pub fn temporal_profile(trips: &[TripSummary], offset_min: i32) -> Result<TemporalProfile> {
    if trips.is_empty() {
        return Err(Error::Input("temporal profile needs at least one trip".into()));
    }
    let mut p = TemporalProfile {
        weekday_counts: [0; 7],
        hourly_weekday: [0; 24],
        hourly_weekend: [0; 24],
        monthly_counts: BTreeMap::new(),
        workingday_share: 0.0,
        total: trips.len() as u64,
    };
    for t in trips {
        let local = timeutil::local(t.start_time, offset_min);
        let date = local.date();
        p.weekday_counts[timeutil::weekday_index(date)] += 1;
        let hour = chrono::Timelike::hour(&local) as usize;
        if is_weekend(date.weekday()) {
            p.hourly_weekend[hour] += 1;
        } else {
            p.hourly_weekday[hour] += 1;
        }
        *p.monthly_counts.entry(timeutil::month_key(date)).or_default() += 1;
    }
    p.workingday_share = p.weekday_counts[..5].iter().sum::<u64>() as f64 / p.total as f64;
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthChange {
    pub month: String,
    pub count: u64,
    /// `None` for the first month and after a zero-count month.
    pub pct_change: Option<f64>,
    pub share_of_peak: f64,
}

fn parse_month(key: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(&format!("{key}-01"), "%Y-%m-%d")
        .map_err(|_| Error::Input(format!("bad month key {key:?}")))
}

/// Month-over-month change. Months between the first and last observed
/// month with no trips appear with a zero count.
pub fn monthly_change(profile: &TemporalProfile) -> Result<Vec<MonthChange>> {
    monthly_change_from_counts(&profile.monthly_counts)
}

pub fn monthly_change_from_counts(counts: &BTreeMap<String, u64>) -> Result<Vec<MonthChange>> {
    if counts.len() < 2 {
        return Err(Error::Param(format!("monthly change needs at least 2 months, got {}", counts.len())));
    }
    let first = parse_month(counts.keys().next().unwrap())?;
    let last = parse_month(counts.keys().next_back().unwrap())?;
    let mut months = Vec::new();
    let mut d = first;
    while d <= last {
        let key = timeutil::month_key(d);
        months.push((key.clone(), counts.get(&key).copied().unwrap_or(0)));
        d = d.checked_add_months(chrono::Months::new(1)).expect("month in range");
    }
    let peak = months.iter().map(|m| m.1).max().unwrap_or(0);
    let mut out = Vec::with_capacity(months.len());
    let mut prev: Option<u64> = None;
    for (month, count) in months {
        let pct_change = match prev {
            Some(p) if p > 0 => Some((count as f64 - p as f64) / p as f64),
            _ => None,
        };
        out.push(MonthChange {
            month,
            count,
            pct_change,
            share_of_peak: if peak > 0 { count as f64 / peak as f64 } else { 0.0 },
        });
        prev = Some(count);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::LatLon;
    use crate::timeutil::parse_timestamp;

    fn trip_at(ts: &str) -> TripSummary {
        let t = parse_timestamp(ts).unwrap();
        TripSummary {
            trip_id: ts.into(),
            start_time: t,
            end_time: t + chrono::Duration::minutes(10),
            start_point: LatLon::new(0.0, 0.0),
            end_point: LatLon::new(0.0, 0.01),
            distance: 1000.0,
            duration: 600.0,
            avg_speed: 1000.0 / 600.0,
            n_points: 2,
        }
    }

    #[test]
    fn direct_binning() {
        let h = histogram(&[100.0, 150.0, 900.0], 500.0).unwrap();
        assert_eq!(h.bins, vec![(0.0, 2), (500.0, 1)]);
        assert_eq!(h.total, 3);
        assert_eq!(h.mode_bin(), Some((0.0, 2)));
    }

    #[test]
    fn share_below_counts_strictly() {
        assert!((share_below(&[1.0, 2.0, 3.0, 4.0, 5.0], 3.5) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn empty_histogram_is_fine() {
        let h = histogram(&[], 10.0).unwrap();
        assert_eq!(h.total, 0);
        assert!(h.bins.is_empty());
        assert!(h.mode_bin().is_none());
    }

    #[test]
    fn histogram_rejects_bad_input() {
        assert!(matches!(histogram(&[1.0], 0.0), Err(Error::Param(_))));
        assert!(matches!(histogram(&[f64::NAN], 1.0), Err(Error::Input(_))));
    }

    #[test]
    fn single_monday_trip() {
        // 2017-05-08 is a Monday; 06:00Z is 08:00 local at +120.
        let p = temporal_profile(&[trip_at("2017-05-08T06:00:00Z")], 120).unwrap();
        assert_eq!(p.weekday_counts[0], 1);
        assert_eq!(p.hourly_weekday[8], 1);
        assert_eq!(p.workingday_share, 1.0);
    }

    #[test]
    fn five_weekdays_two_weekend() {
        let trips: Vec<_> = (8..=14)
            .map(|d| trip_at(&format!("2017-05-{d:02}T10:00:00Z")))
            .collect();
        let p = temporal_profile(&trips, 0).unwrap();
        assert!((p.workingday_share - 5.0 / 7.0).abs() < 1e-12);
        assert_eq!(p.hourly_weekend[10], 2);
        assert_eq!(p.hourly_weekday[10], 5);
    }

    fn counts(entries: &[(&str, u64)]) -> BTreeMap<String, u64> {
        entries.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn flat_months() {
        let m = monthly_change_from_counts(&counts(&[("2017-05", 100), ("2017-06", 100)])).unwrap();
        assert_eq!(m[1].pct_change, Some(0.0));
        assert_eq!(m[1].share_of_peak, 1.0);
        assert_eq!(m[0].pct_change, None);
    }

    #[test]
    fn july_to_august_drop() {
        let m = monthly_change_from_counts(&counts(&[("2017-07", 100), ("2017-08", 60)])).unwrap();
        assert!((m[1].pct_change.unwrap() + 0.40).abs() < 1e-12);
    }

    #[test]
    fn august_to_september_rise() {
        let m = monthly_change_from_counts(&counts(&[("2017-08", 60), ("2017-09", 77)])).unwrap();
        assert!((m[1].pct_change.unwrap() - 17.0 / 60.0).abs() < 1e-12);
        assert!((m[1].pct_change.unwrap() - 0.283).abs() < 1e-3);
    }

    #[test]
    fn zero_previous_month_is_undefined() {
        let m = monthly_change_from_counts(&counts(&[("2017-07", 10), ("2017-09", 5)])).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m[1].count, 0);
        assert_eq!(m[2].pct_change, None);
    }

    #[test]
    fn single_month_is_param_error() {
        assert!(monthly_change_from_counts(&counts(&[("2017-07", 10)])).is_err());
    }
}
