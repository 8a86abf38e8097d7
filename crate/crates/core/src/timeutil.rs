//! Fixed-offset local time. The analyses use a single configured UTC offset
//! rather than a timezone database.

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveDateTime, Timelike, Utc, Weekday};

pub type Instant = DateTime<Utc>;

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

pub fn local(t: Instant, offset_min: i32) -> NaiveDateTime {
    t.naive_utc() + Duration::minutes(offset_min as i64)
}

pub fn local_date(t: Instant, offset_min: i32) -> NaiveDate {
    local(t, offset_min).date()
}

pub fn local_hour(t: Instant, offset_min: i32) -> u32 {
    local(t, offset_min).hour()
}

/// UTC instant of local midnight starting `date`.
pub fn local_midnight_utc(date: NaiveDate, offset_min: i32) -> Instant {
    let naive = date.and_hms_opt(0, 0, 0).expect("midnight exists") - Duration::minutes(offset_min as i64);
    naive.and_utc()
}

pub fn is_weekend(w: Weekday) -> bool {
    matches!(w, Weekday::Sat | Weekday::Sun)
}

/// Monday = 0 .. Sunday = 6.
pub fn weekday_index(date: NaiveDate) -> usize {
    date.weekday().num_days_from_monday() as usize
}

pub fn parse_timestamp(s: &str) -> Option<Instant> {
    NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT)
        .ok()
        .map(|n| n.and_utc())
}

pub fn format_timestamp(t: Instant) -> String {
    t.format(TIMESTAMP_FORMAT).to_string()
}

/// Truncates to the start of the containing UTC hour.
pub fn truncate_hour(t: Instant) -> Instant {
    let secs = t.timestamp();
    DateTime::from_timestamp(secs - secs.rem_euclid(3600), 0).expect("in range")
}

/// Month key `YYYY-MM` used for per-period reports.
pub fn month_key(date: NaiveDate) -> String {
    format!("{:04}-{:02}", date.year(), date.month())
}
