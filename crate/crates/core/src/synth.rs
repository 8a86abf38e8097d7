//! Deterministic synthetic city: GPS traces, hourly weather and a calendar
//! with known ground truth.
//!
//! Trip starts follow a non-homogeneous Poisson process per 30-minute slot.
//! The intensity is the product of a daily base volume, a weekend damping
//! factor, an hourly shape, a temperature comfort curve, rain and calendar
//! suppressions, and an optional latent AR(1) log-level. Global quantities
//! (weather, latent path) come from stream 0 of a ChaCha8 generator seeded
//! with the config seed; each day's trips come from their own stream, so days
//! can be generated in parallel.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::covariates::{write_calendar, write_weather, CalendarEntry, CalendarKind, WeatherRecord};
use crate::error::{Error, Result};
use crate::exec;
use crate::geo::{haversine, meters_per_degree, BBox, LatLon};
use crate::ingest::{write_points, GpsPoint, TripSummary};
use crate::spatial::Hub;
use crate::timeutil::{self, is_weekend, truncate_hour, Instant};

pub const SLOT_MINUTES: i64 = 30;
/// Generator stream for the weekly pattern; day streams start at 1.
const PATTERN_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthHub {
    pub name: String,
    pub lat: f64,
    pub lon: f64,
    /// Relative chance of being the origin of a hub trip.
    pub weight: f64,
    pub radius_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub from: String,
    pub to: String,
    /// Share of the origin hub's trips going to `to`.
    pub share: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TempCurve {
    pub annual_mean_c: f64,
    pub annual_amplitude_c: f64,
    /// Day of year of the annual maximum.
    pub peak_day: f64,
    pub diurnal_amplitude_c: f64,
    /// Standard deviation of a per-day temperature offset.
    pub day_sd_c: f64,
    pub comfort_c: f64,
    pub comfort_width_c: f64,
    pub heat_threshold_c: f64,
    /// Fractional intensity loss per degree above the heat threshold.
    pub heat_penalty_per_c: f64,
}

impl Default for TempCurve {
    fn default() -> Self {
        TempCurve {
            annual_mean_c: 14.0,
            annual_amplitude_c: 10.0,
            peak_day: 200.0,
            diurnal_amplitude_c: 4.0,
            day_sd_c: 2.0,
            comfort_c: 20.0,
            comfort_width_c: 8.0,
            heat_threshold_c: 27.0,
            heat_penalty_per_c: 0.05,
        }
    }
}

impl TempCurve {
    pub fn factor(&self, temp: f64) -> f64 {
        let z = (temp - self.comfort_c) / self.comfort_width_c;
        let heat = (1.0 - self.heat_penalty_per_c * (temp - self.heat_threshold_c).max(0.0)).max(0.0);
        (-0.5 * z * z).exp() * heat
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RainEvent {
    /// Local start time.
    pub start: NaiveDateTime,
    pub hours: u32,
    pub mm_per_h: f64,
    /// Fraction of trips suppressed while it rains.
    pub suppression: f64,
}

impl RainEvent {
    fn end(&self) -> NaiveDateTime {
        self.start + Duration::hours(self.hours as i64)
    }

    fn covers(&self, local: NaiveDateTime) -> bool {
        local >= self.start && local < self.end()
    }

    fn overlaps_commute(&self, hours: (u32, u32)) -> bool {
        let day = self.start.date();
        let from = day.and_hms_opt(hours.0, 0, 0).expect("valid hour");
        let to = day.and_hms_opt(hours.1, 0, 0).expect("valid hour");
        self.start < to && self.end() > from
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomRain {
    pub daily_probability: f64,
    pub mean_mm_per_h: f64,
    pub max_hours: u32,
    pub suppression: f64,
}

impl Default for RandomRain {
    fn default() -> Self {
        RandomRain {
            daily_probability: 0.1,
            mean_mm_per_h: 2.0,
            max_hours: 4,
            suppression: 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaySuppression {
    pub date: NaiveDate,
    pub fraction: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedEvent {
    pub date: NaiveDate,
    pub kind: CalendarKind,
    pub label: String,
    /// Suppression fraction; 0 plants an event with no effect.
    #[serde(default)]
    pub fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormalSpec {
    pub mode: f64,
    pub sigma: f64,
    pub min: f64,
    pub max: f64,
}

impl LogNormalSpec {
    /// Location parameter giving the configured mode.
    pub fn mu(&self) -> f64 {
        self.mode.ln() + self.sigma * self.sigma
    }

    fn dist(&self) -> LogNormal<f64> {
        LogNormal::new(self.mu(), self.sigma).expect("validated sigma")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatentSpec {
    /// Stationary standard deviation of the log-level; 0 disables it.
    pub sd: f64,
    /// Lag-one autocorrelation per step.
    pub rho: f64,
    /// The level changes every `step_minutes` (30 or 60) and is held in
    /// between, so with 60 it is constant within each clock hour.
    pub step_minutes: u32,
}

impl Default for LatentSpec {
    fn default() -> Self {
        LatentSpec {
            sd: 0.15,
            rho: 0.95,
            step_minutes: 30,
        }
    }
}

impl LatentSpec {
    pub fn variance(&self) -> f64 {
        self.sd * self.sd
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    /// First local day.
    pub start: NaiveDate,
    /// Day after the last local day.
    pub end: NaiveDate,
    pub utc_offset_min: i32,
    pub bbox: BBox,
    pub hubs: Vec<SynthHub>,
    pub flows: Vec<Flow>,
    /// Share of all trips that start at a hub with outgoing flows.
    pub hub_trip_fraction: f64,
    /// Destination scatter around the target hub.
    pub dest_jitter_m: f64,
    pub base_trips_per_day: f64,
    /// Weekend intensity relative to weekdays.
    pub weekday_multiplier: f64,
    pub hourly_shape: [f64; 24],
    pub weekend_hourly_shape: [f64; 24],
    pub temp_curve: TempCurve,
    pub wind_mean_mps: f64,
    pub wind_sd_mps: f64,
    pub rain_events: Vec<RainEvent>,
    pub random_rain: RandomRain,
    /// Extra suppression, as a fraction of the rain suppression, for the rest
    /// of a day whose commute window saw rain.
    pub commute_coupling: f64,
    /// Local `[from, to)` hours of the morning commute.
    pub commute_hours: (u32, u32),
    pub holiday_suppressions: Vec<DaySuppression>,
    pub events: Vec<PlannedEvent>,
    pub trip_length: LogNormalSpec,
    pub speed: LogNormalSpec,
    pub latent: LatentSpec,
    /// Log-sd of a fixed multiplicative factor per (weekday, slot of day),
    /// repeated every week; 0 disables it.
    pub weekly_pattern_sd: f64,
    pub point_interval_s: u32,
    /// Fraction of points with a blanked field.
    pub missing_fraction: f64,
}

const WEEKDAY_SHAPE: [f64; 24] = [
    0.2, 0.1, 0.05, 0.05, 0.1, 0.4, 1.5, 4.0, 5.0, 3.0, 2.0, 2.2, 2.8, 2.6, 2.2, 2.4, 3.2, 4.8, 5.0, 3.5, 2.2, 1.5, 0.9, 0.5,
];
const WEEKEND_SHAPE: [f64; 24] = [
    0.4, 0.3, 0.2, 0.1, 0.1, 0.2, 0.4, 0.8, 1.5, 2.5, 3.5, 4.0, 4.0, 3.8, 3.6, 3.6, 3.8, 3.8, 3.4, 2.8, 2.0, 1.4, 1.0, 0.7,
];

impl Default for SynthConfig {
    fn default() -> Self {
        let hub = |name: &str, lat, lon, weight| SynthHub {
            name: name.into(),
            lat,
            lon,
            weight,
            radius_m: 300.0,
        };
        let flow = |from: &str, to: &str, share| Flow {
            from: from.into(),
            to: to.into(),
            share,
        };
        SynthConfig {
            seed: 2017,
            start: NaiveDate::from_ymd_opt(2017, 5, 1).expect("valid date"),
            end: NaiveDate::from_ymd_opt(2017, 6, 1).expect("valid date"),
            utc_offset_min: 120,
            bbox: BBox::new(44.470, 11.300, 44.530, 11.390),
            hubs: vec![
                hub("piazza", 44.4938, 11.3426, 3.0),
                hub("station", 44.5091, 11.3438, 1.0),
                hub("campus", 44.4968, 11.3520, 1.0),
            ],
            flows: vec![flow("piazza", "station", 0.6), flow("piazza", "campus", 0.4)],
            hub_trip_fraction: 0.15,
            dest_jitter_m: 30.0,
            base_trips_per_day: 1000.0,
            weekday_multiplier: 0.476,
            hourly_shape: WEEKDAY_SHAPE,
            weekend_hourly_shape: WEEKEND_SHAPE,
            temp_curve: TempCurve::default(),
            wind_mean_mps: 2.5,
            wind_sd_mps: 1.0,
            rain_events: Vec::new(),
            random_rain: RandomRain::default(),
            commute_coupling: 0.8,
            commute_hours: (7, 9),
            holiday_suppressions: Vec::new(),
            events: Vec::new(),
            trip_length: LogNormalSpec {
                mode: 1600.0,
                sigma: 0.5,
                min: 150.0,
                max: 15_000.0,
            },
            speed: LogNormalSpec {
                mode: 3.9,
                sigma: 0.25,
                min: 1.0,
                max: 12.0,
            },
            latent: LatentSpec::default(),
            weekly_pattern_sd: 0.0,
            point_interval_s: 10,
            missing_fraction: 0.05,
        }
    }
}

fn fraction_ok(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Param(m));
        if self.end <= self.start {
            return bad("synthetic span end must be after start".into());
        }
        if !self.bbox.is_valid() {
            return bad("synthetic bbox is degenerate".into());
        }
        if !(self.base_trips_per_day >= 0.0 && self.base_trips_per_day.is_finite()) {
            return bad("base_trips_per_day must be non-negative".into());
        }
        if !(self.weekday_multiplier >= 0.0) {
            return bad("weekday_multiplier must be non-negative".into());
        }
        for shape in [&self.hourly_shape, &self.weekend_hourly_shape] {
            if shape.iter().any(|w| !(*w >= 0.0)) || shape.iter().sum::<f64>() <= 0.0 {
                return bad("hourly shapes need non-negative weights with a positive sum".into());
            }
        }
        for (name, v) in [
            ("hub_trip_fraction", self.hub_trip_fraction),
            ("commute_coupling", self.commute_coupling),
            ("random_rain.daily_probability", self.random_rain.daily_probability),
            ("random_rain.suppression", self.random_rain.suppression),
        ] {
            if !fraction_ok(v) {
                return bad(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.missing_fraction) {
            return bad("missing_fraction must be in [0, 1)".into());
        }
        if self.rain_events.iter().any(|r| !fraction_ok(r.suppression) || r.mm_per_h < 0.0) {
            return bad("rain events need suppression in [0, 1] and non-negative mm/h".into());
        }
        if self.holiday_suppressions.iter().any(|h| !fraction_ok(h.fraction)) || self.events.iter().any(|e| !fraction_ok(e.fraction)) {
            return bad("calendar suppressions must be in [0, 1]".into());
        }
        if self.events.iter().any(|e| e.kind == CalendarKind::Holiday) {
            return bad("holidays belong in holiday_suppressions".into());
        }
        for d in [&self.trip_length, &self.speed] {
            if !(d.mode > 0.0 && d.sigma > 0.0 && d.min <= d.max && d.max > 0.0) {
                return bad("lognormal specs need positive mode and sigma and min <= max".into());
            }
        }
        if !(self.latent.sd >= 0.0 && (0.0..1.0).contains(&self.latent.rho)) {
            return bad("latent sd must be >= 0 and rho in [0, 1)".into());
        }
        if !(self.weekly_pattern_sd >= 0.0 && self.weekly_pattern_sd.is_finite()) {
            return bad(format!("weekly pattern sd must be >= 0, got {}", self.weekly_pattern_sd));
        }
        if !matches!(self.latent.step_minutes, 30 | 60) {
            return bad(format!("latent step must be 30 or 60 minutes, got {}", self.latent.step_minutes));
        }
        if self.point_interval_s == 0 {
            return bad("point_interval_s must be positive".into());
        }
        if self.commute_hours.0 >= self.commute_hours.1 || self.commute_hours.1 > 23 {
            return bad("commute_hours must be an increasing pair of hours".into());
        }
        for h in &self.hubs {
            if !LatLon::new(h.lat, h.lon).is_valid() || !(h.weight >= 0.0) || !(h.radius_m > 0.0) {
                return bad(format!("hub {:?} has invalid position, weight or radius", h.name));
            }
        }
        for f in &self.flows {
            if self.hub_index(&f.from).is_none() || self.hub_index(&f.to).is_none() {
                return bad(format!("flow {} -> {} names an unknown hub", f.from, f.to));
            }
            if !fraction_ok(f.share) {
                return bad("flow shares must be in [0, 1]".into());
            }
        }
        for h in &self.hubs {
            let total: f64 = self.flows.iter().filter(|f| f.from == h.name).map(|f| f.share).sum();
            if total > 1.0 + 1e-9 {
                return bad(format!("flows from {:?} sum to {total} > 1", h.name));
            }
        }
        Ok(())
    }

    fn hub_index(&self, name: &str) -> Option<usize> {
        self.hubs.iter().position(|h| h.name == name)
    }

    pub fn n_days(&self) -> usize {
        (self.end - self.start).num_days() as usize
    }

    pub fn span_start(&self) -> Instant {
        timeutil::local_midnight_utc(self.start, self.utc_offset_min)
    }

    pub fn span_end(&self) -> Instant {
        timeutil::local_midnight_utc(self.end, self.utc_offset_min)
    }
}

/// A generated trip before sampling into points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTrip {
    pub id: String,
    pub start: Instant,
    pub duration_s: i64,
    pub origin: LatLon,
    pub dest: LatLon,
    pub speed: f64,
    /// Index into the config's flows for hub trips.
    pub flow: Option<usize>,
}

impl SynthTrip {
    pub fn end(&self) -> Instant {
        self.start + Duration::seconds(self.duration_s)
    }

    /// Planted position `tau` seconds after the start.
    pub fn position_at(&self, tau: f64) -> LatLon {
        let f = tau / self.duration_s as f64;
        LatLon::new(self.origin.lat + (self.dest.lat - self.origin.lat) * f, self.origin.lon + (self.dest.lon - self.origin.lon) * f)
    }

    /// Sample offsets in seconds: every interval, plus the end.
    pub fn sample_offsets(&self, interval_s: u32) -> Vec<i64> {
        let mut out: Vec<i64> = (0..).map(|k| k * interval_s as i64).take_while(|&t| t < self.duration_s).collect();
        out.push(self.duration_s);
        out
    }

    /// Summary as ingest would compute it from complete straight-line points.
    pub fn summary(&self, interval_s: u32) -> TripSummary {
        let offsets = self.sample_offsets(interval_s);
        let pts: Vec<LatLon> = offsets.iter().map(|&t| self.position_at(t as f64)).collect();
        let distance: f64 = pts.windows(2).map(|w| haversine(w[0], w[1])).sum();
        let duration = self.duration_s as f64;
        TripSummary {
            trip_id: self.id.clone(),
            start_time: self.start,
            end_time: self.end(),
            start_point: self.origin,
            end_point: self.dest,
            distance,
            duration,
            avg_speed: distance / duration,
            n_points: pts.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayTruth {
    pub date: NaiveDate,
    pub weekday: String,
    /// Sum of the realized slot intensities.
    pub expected_trips: f64,
    pub sampled_trips: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTruth {
    pub from: String,
    pub to: String,
    pub share: f64,
    pub sampled_trips: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuppressionTruth {
    pub kind: String,
    pub date: NaiveDate,
    pub fraction: f64,
    pub label: String,
    /// Local hours `[from, to)` for rain.
    pub hours: Option<(u32, u32)>,
    /// Rest-of-day suppression when rain hit the commute.
    pub rest_of_day_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistTruth {
    pub mode: f64,
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub seed: u64,
    pub utc_offset_min: i32,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub days: Vec<DayTruth>,
    pub total_expected: f64,
    pub total_sampled: u64,
    pub expected_weekday_share: f64,
    pub flows: Vec<FlowTruth>,
    pub suppressions: Vec<SuppressionTruth>,
    pub trip_length: DistTruth,
    pub speed: DistTruth,
    pub points_total: u64,
    pub points_with_missing_field: u64,
}

pub struct SynthOutput {
    pub trips: Vec<SynthTrip>,
    /// Empty when generated without points.
    pub points: Vec<GpsPoint>,
    pub weather: Vec<WeatherRecord>,
    pub calendar: Vec<CalendarEntry>,
    pub hubs: Vec<Hub>,
    pub truth: Truth,
}

impl SynthOutput {
    pub fn trip_summaries(&self, interval_s: u32) -> Vec<TripSummary> {
        self.trips.iter().map(|t| t.summary(interval_s)).collect()
    }
}

fn round1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

struct Globals {
    weather: Vec<WeatherRecord>,
    rain: Vec<RainEvent>,
    latent: Vec<f64>,
    /// `[weekday][slot of day]` log-factors.
    weekly: Vec<[f64; 48]>,
}

fn globals(cfg: &SynthConfig) -> Globals {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_days = cfg.n_days();
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let day_temp: Vec<f64> = (0..n_days).map(|_| cfg.temp_curve.day_sd_c * std_normal.sample(&mut rng)).collect();

    let mut rain = cfg.rain_events.clone();
    let rr = cfg.random_rain;
    for d in 0..n_days {
        if rr.daily_probability > 0.0 && rng.random_bool(rr.daily_probability) {
            let date = cfg.start + Duration::days(d as i64);
            let hour = rng.random_range(5..20u32);
            let hours = rng.random_range(1..=rr.max_hours.max(1));
            rain.push(RainEvent {
                start: date.and_hms_opt(hour, 0, 0).expect("valid hour"),
                hours,
                mm_per_h: round1(rr.mean_mm_per_h * rng.random_range(0.5..1.5)).max(0.1),
                suppression: rr.suppression,
            });
        }
    }
    rain.sort_by_key(|r| r.start);

    let n_slots = n_days * (24 * 60 / SLOT_MINUTES as usize);
    let mut latent = Vec::with_capacity(n_slots);
    let LatentSpec { sd, rho, step_minutes } = cfg.latent;
    let hold = (step_minutes / SLOT_MINUTES as u32) as usize;
    let mut l = sd * std_normal.sample(&mut rng);
    for i in 0..n_slots {
        if i > 0 && i % hold == 0 {
            l = rho * l + (1.0 - rho * rho).sqrt() * sd * std_normal.sample(&mut rng);
        }
        latent.push(l);
    }

    let first_hour = truncate_hour(cfg.span_start());
    let n_hours = ((cfg.span_end() - first_hour).num_minutes() + 59) / 60;
    let tc = cfg.temp_curve;
    let weather = (0..n_hours)
        .map(|h| {
            let hour = first_hour + Duration::hours(h);
            let local = timeutil::local(hour, cfg.utc_offset_min);
            let day = ((local.date() - cfg.start).num_days().clamp(0, n_days as i64 - 1)) as usize;
            let doy = local.ordinal() as f64;
            let hod = local.hour() as f64 + local.minute() as f64 / 60.0;
            let temp = tc.annual_mean_c
                + tc.annual_amplitude_c * (2.0 * PI * (doy - tc.peak_day) / 365.25).cos()
                + tc.diurnal_amplitude_c * (2.0 * PI * (hod - 15.0) / 24.0).cos()
                + day_temp[day];
            let precip = rain.iter().filter(|r| r.covers(local)).fold(0.0, |acc, r| acc + r.mm_per_h);
            let wind = (cfg.wind_mean_mps + cfg.wind_sd_mps * std_normal.sample(&mut rng)).max(0.0);
            WeatherRecord {
                hour,
                temp: round1(temp),
                precip: round1(precip),
                wind: round1(wind),
            }
        })
        .collect();
    let mut prng = ChaCha8Rng::seed_from_u64(cfg.seed);
    prng.set_stream(PATTERN_STREAM);
    let sd = cfg.weekly_pattern_sd;
    let weekly = (0..7)
        .map(|_| {
            let mut row = [0.0; 48];
            if sd > 0.0 {
                for v in row.iter_mut() {
                    *v = sd * std_normal.sample(&mut prng) - sd * sd / 2.0;
                }
            }
            row
        })
        .collect();
    Globals { weather, rain, latent, weekly }
}

/// Intensity (expected trips) of every 30-minute slot.
fn slot_intensities(cfg: &SynthConfig, g: &Globals) -> Vec<f64> {
    let first_hour = truncate_hour(cfg.span_start());
    let shape_sum = |s: &[f64; 24]| s.iter().sum::<f64>();
    let (wd_sum, we_sum) = (shape_sum(&cfg.hourly_shape), shape_sum(&cfg.weekend_hourly_shape));
    let latent_var = cfg.latent.variance();
    (0..g.latent.len())
        .map(|s| {
            let t = cfg.span_start() + Duration::minutes(s as i64 * SLOT_MINUTES);
            let local = timeutil::local(t, cfg.utc_offset_min);
            let date = local.date();
            let hour = local.hour() as usize;
            let weekend = is_weekend(date.weekday());
            let day_mult = if weekend { cfg.weekday_multiplier } else { 1.0 };
            let shape = if weekend {
                cfg.weekend_hourly_shape[hour] / we_sum
            } else {
                cfg.hourly_shape[hour] / wd_sum
            };
            let w = &g.weather[((truncate_hour(t) - first_hour).num_hours()) as usize];
            let mut factor = cfg.temp_curve.factor(w.temp);
            for r in g.rain.iter().filter(|r| r.start.date() == date) {
                if r.covers(local) {
                    factor *= 1.0 - r.suppression;
                } else if local >= r.end() && r.overlaps_commute(cfg.commute_hours) {
                    factor *= 1.0 - cfg.commute_coupling * r.suppression;
                }
            }
            for h in cfg.holiday_suppressions.iter().filter(|h| h.date == date) {
                factor *= 1.0 - h.fraction;
            }
            for e in cfg.events.iter().filter(|e| e.date == date) {
                factor *= 1.0 - e.fraction;
            }
            let slot_share = SLOT_MINUTES as f64 / 60.0;
            let slot_of_day = hour * 2 + (local.minute() / 30) as usize;
            let log_level = g.latent[s] - latent_var / 2.0 + g.weekly[timeutil::weekday_index(date)][slot_of_day];
            cfg.base_trips_per_day * day_mult * shape * slot_share * factor * log_level.exp()
        })
        .collect()
}

struct DayOutput {
    trips: Vec<SynthTrip>,
    points: Vec<GpsPoint>,
    expected: f64,
    missing: u64,
}

fn offset_by(p: LatLon, north_m: f64, east_m: f64) -> LatLon {
    let (m_lat, m_lon) = meters_per_degree(p.lat);
    LatLon::new(p.lat + north_m / m_lat, p.lon + east_m / m_lon)
}

fn jitter(rng: &mut ChaCha8Rng, center: LatLon, radius: f64) -> LatLon {
    let r = radius * rng.random::<f64>().sqrt();
    let a = rng.random_range(0.0..2.0 * PI);
    offset_by(center, r * a.cos(), r * a.sin())
}

fn clamp_into(b: &BBox, p: LatLon) -> LatLon {
    LatLon::new(p.lat.clamp(b.min_lat, b.max_lat), p.lon.clamp(b.min_lon, b.max_lon))
}

fn sample_clamped(rng: &mut ChaCha8Rng, spec: &LogNormalSpec) -> f64 {
    spec.dist().sample(rng).clamp(spec.min, spec.max)
}

fn generate_day(cfg: &SynthConfig, day: usize, intensities: &[f64], with_points: bool) -> DayOutput {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(day as u64 + 1);
    let date = cfg.start + Duration::days(day as i64);
    let slots_per_day = 24 * 60 / SLOT_MINUTES as usize;
    let origin_hubs: Vec<usize> = (0..cfg.hubs.len())
        .filter(|&h| cfg.flows.iter().any(|f| f.from == cfg.hubs[h].name) && cfg.hubs[h].weight > 0.0)
        .collect();
    let hub_weight_total: f64 = origin_hubs.iter().map(|&h| cfg.hubs[h].weight).sum();
    let mut out = DayOutput {
        trips: Vec::new(),
        points: Vec::new(),
        expected: 0.0,
        missing: 0,
    };
    for k in 0..slots_per_day {
        let s = day * slots_per_day + k;
        let lambda = intensities[s];
        out.expected += lambda;
        let n = if lambda > 0.0 {
            Poisson::new(lambda).expect("positive rate").sample(&mut rng) as u64
        } else {
            0
        };
        let slot_start = cfg.span_start() + Duration::minutes(s as i64 * SLOT_MINUTES);
        for _ in 0..n {
            let start = slot_start + Duration::seconds(rng.random_range(0..SLOT_MINUTES * 60));
            let speed = sample_clamped(&mut rng, &cfg.speed);
            let mut flow = None;
            let (origin, dest) = if hub_weight_total > 0.0 && rng.random_bool(cfg.hub_trip_fraction) {
                let mut pick = rng.random_range(0.0..hub_weight_total);
                let mut from = origin_hubs[origin_hubs.len() - 1];
                for &h in &origin_hubs {
                    if pick < cfg.hubs[h].weight {
                        from = h;
                        break;
                    }
                    pick -= cfg.hubs[h].weight;
                }
                let hub = &cfg.hubs[from];
                let origin = jitter(&mut rng, LatLon::new(hub.lat, hub.lon), hub.radius_m * 0.5);
                let mut u = rng.random::<f64>();
                for (fi, f) in cfg.flows.iter().enumerate().filter(|(_, f)| f.from == hub.name) {
                    if u < f.share {
                        flow = Some(fi);
                        break;
                    }
                    u -= f.share;
                }
                let dest = match flow {
                    Some(fi) => {
                        let to = &cfg.hubs[cfg.hub_index(&cfg.flows[fi].to).expect("validated flow")];
                        jitter(&mut rng, LatLon::new(to.lat, to.lon), cfg.dest_jitter_m)
                    }
                    None => free_destination(&mut rng, cfg, origin),
                };
                (origin, dest)
            } else {
                let origin = LatLon::new(
                    rng.random_range(cfg.bbox.min_lat..cfg.bbox.max_lat),
                    rng.random_range(cfg.bbox.min_lon..cfg.bbox.max_lon),
                );
                (origin, free_destination(&mut rng, cfg, origin))
            };
            let duration_s = ((haversine(origin, dest) / speed).round() as i64).max(1);
            let trip = SynthTrip {
                id: format!("{}-{:05}", date.format("%Y%m%d"), out.trips.len()),
                start,
                duration_s,
                origin,
                dest,
                speed,
                flow,
            };
            if with_points {
                for tau in trip.sample_offsets(cfg.point_interval_s) {
                    let mut coord = Some(trip.position_at(tau as f64));
                    let mut accuracy = Some(round1(rng.random_range(3.0..15.0)));
                    let mut point_speed = Some((speed * (1.0 + 0.05 * rng.random_range(-1.0..1.0)) * 100.0).round() / 100.0);
                    if cfg.missing_fraction > 0.0 && rng.random_bool(cfg.missing_fraction) {
                        out.missing += 1;
                        match rng.random_range(0..4) {
                            0 => coord = None,
                            1 => point_speed = None,
                            2 => accuracy = None,
                            _ => (coord, accuracy, point_speed) = (None, None, None),
                        }
                    }
                    out.points.push(GpsPoint {
                        activity_id: trip.id.clone(),
                        timestamp: trip.start + Duration::seconds(tau),
                        coord,
                        accuracy,
                        speed: point_speed,
                    });
                }
            }
            out.trips.push(trip);
        }
    }
    out
}

fn free_destination(rng: &mut ChaCha8Rng, cfg: &SynthConfig, origin: LatLon) -> LatLon {
    let dist = sample_clamped(rng, &cfg.trip_length);
    let mut candidate = origin;
    for _ in 0..8 {
        let a = rng.random_range(0.0..2.0 * PI);
        candidate = offset_by(origin, dist * a.cos(), dist * a.sin());
        if cfg.bbox.contains(candidate) {
            return candidate;
        }
    }
    clamp_into(&cfg.bbox, candidate)
}

/// Generates the whole dataset in memory. Without points only trips,
/// weather, calendar and truth are produced.
pub fn generate(cfg: &SynthConfig, with_points: bool) -> Result<SynthOutput> {
    cfg.validate()?;
    let g = globals(cfg);
    let intensities = slot_intensities(cfg, &g);
    let days = exec::map_range(cfg.n_days(), |d| generate_day(cfg, d, &intensities, with_points));

    let mut trips = Vec::new();
    let mut points = Vec::new();
    let mut day_truth = Vec::new();
    let mut missing = 0;
    let mut flow_counts = vec![0u64; cfg.flows.len()];
    for (d, out) in days.into_iter().enumerate() {
        let date = cfg.start + Duration::days(d as i64);
        day_truth.push(DayTruth {
            date,
            weekday: date.weekday().to_string(),
            expected_trips: out.expected,
            sampled_trips: out.trips.len() as u64,
        });
        for t in &out.trips {
            if let Some(f) = t.flow {
                flow_counts[f] += 1;
            }
        }
        missing += out.missing;
        trips.extend(out.trips);
        points.extend(out.points);
    }

    let total_expected: f64 = day_truth.iter().map(|d| d.expected_trips).sum();
    let weekday_expected: f64 = day_truth.iter().filter(|d| !is_weekend(d.date.weekday())).map(|d| d.expected_trips).sum();

    let mut suppressions: Vec<SuppressionTruth> = g
        .rain
        .iter()
        .map(|r| SuppressionTruth {
            kind: "rain".into(),
            date: r.start.date(),
            fraction: r.suppression,
            label: format!("{} mm/h", r.mm_per_h),
            hours: Some((r.start.hour(), r.start.hour() + r.hours)),
            rest_of_day_fraction: r.overlaps_commute(cfg.commute_hours).then_some(cfg.commute_coupling * r.suppression),
        })
        .collect();
    suppressions.extend(cfg.holiday_suppressions.iter().map(|h| SuppressionTruth {
        kind: "holiday".into(),
        date: h.date,
        fraction: h.fraction,
        label: h.label.clone(),
        hours: None,
        rest_of_day_fraction: None,
    }));
    suppressions.extend(cfg.events.iter().map(|e| SuppressionTruth {
        kind: e.kind.as_str().into(),
        date: e.date,
        fraction: e.fraction,
        label: e.label.clone(),
        hours: None,
        rest_of_day_fraction: None,
    }));

    let mut calendar: Vec<CalendarEntry> = cfg
        .holiday_suppressions
        .iter()
        .map(|h| CalendarEntry {
            date: h.date,
            kind: CalendarKind::Holiday,
            label: h.label.clone(),
        })
        .chain(cfg.events.iter().map(|e| CalendarEntry {
            date: e.date,
            kind: e.kind,
            label: e.label.clone(),
        }))
        .collect();
    calendar.sort();
    calendar.dedup();

    let dist_truth = |d: &LogNormalSpec| DistTruth {
        mode: d.mode,
        mu: d.mu(),
        sigma: d.sigma,
    };
    let truth = Truth {
        seed: cfg.seed,
        utc_offset_min: cfg.utc_offset_min,
        start: cfg.start,
        end: cfg.end,
        total_sampled: trips.len() as u64,
        days: day_truth,
        total_expected,
        expected_weekday_share: if total_expected > 0.0 { weekday_expected / total_expected } else { 0.0 },
        flows: cfg
            .flows
            .iter()
            .zip(&flow_counts)
            .map(|(f, &n)| FlowTruth {
                from: f.from.clone(),
                to: f.to.clone(),
                share: f.share,
                sampled_trips: n,
            })
            .collect(),
        suppressions,
        trip_length: dist_truth(&cfg.trip_length),
        speed: dist_truth(&cfg.speed),
        points_total: points.len() as u64,
        points_with_missing_field: missing,
    };
    Ok(SynthOutput {
        trips,
        points,
        weather: g.weather,
        calendar,
        hubs: cfg
            .hubs
            .iter()
            .map(|h| Hub {
                name: h.name.clone(),
                center: LatLon::new(h.lat, h.lon),
                radius_m: h.radius_m,
            })
            .collect(),
        truth,
    })
}

pub fn write_hubs<W: std::io::Write>(sink: W, hubs: &[Hub]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["name", "lat", "lon", "radius_m"])?;
    for h in hubs {
        w.write_record([h.name.clone(), h.center.lat.to_string(), h.center.lon.to_string(), h.radius_m.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<hubs>", e))?;
    Ok(())
}

pub const DATASET_FILES: [&str; 5] = ["points.csv", "weather.csv", "calendar.csv", "hubs.csv", "truth.json"];

/// Writes the dataset files into `dir`, creating it if needed.
pub fn write_dataset(out: &SynthOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let create = |name: &str| -> Result<(PathBuf, std::io::BufWriter<fs::File>)> {
        let path = dir.join(name);
        let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok((path, std::io::BufWriter::new(f)))
    };
    let mut paths = Vec::new();
    let (p, w) = create("points.csv")?;
    write_points(w, &out.points)?;
    paths.push(p);
    let (p, w) = create("weather.csv")?;
    write_weather(w, &out.weather)?;
    paths.push(p);
    let (p, w) = create("calendar.csv")?;
    write_calendar(w, &out.calendar)?;
    paths.push(p);
    let (p, w) = create("hubs.csv")?;
    write_hubs(w, &out.hubs)?;
    paths.push(p);
    let path = dir.join("truth.json");
    let mut text = serde_json::to_string_pretty(&out.truth)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    paths.push(path);
    Ok(paths)
}
