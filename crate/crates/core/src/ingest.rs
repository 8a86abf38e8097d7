//! GPS point parsing and trip reconstruction.
//!
//! Points are grouped by activity ID, time-ordered, and missing values are
//! repaired by linear interpolation in time between the nearest present
//! neighbours of the same activity. Points missing a coordinate at either end
//! of an activity cannot be repaired and are dropped.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::geo::{haversine, LatLon};
use crate::timeutil::{format_timestamp, parse_timestamp, Instant};

pub const POINTS_HEADER: [&str; 6] = ["activity_id", "timestamp", "lat", "lon", "accuracy", "speed"];
pub const TRIPS_HEADER: [&str; 11] = [
    "trip_id",
    "start_time",
    "end_time",
    "start_lat",
    "start_lon",
    "end_lat",
    "end_lon",
    "distance_m",
    "duration_s",
    "avg_speed_mps",
    "n_points",
];

/// One raw GPS sample. `coord` is whole or absent.
#[derive(Debug, Clone, PartialEq)]
pub struct GpsPoint {
    pub activity_id: String,
    pub timestamp: Instant,
    pub coord: Option<LatLon>,
    pub accuracy: Option<f64>,
    pub speed: Option<f64>,
}

/// A repaired sample belonging to a trip. Accuracy stays absent only when the
/// whole activity never reported it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripPoint {
    pub timestamp: Instant,
    pub pos: LatLon,
    pub accuracy: Option<f64>,
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripMetrics {
    pub distance: f64,
    pub duration: f64,
    pub avg_speed: f64,
}

/// Per-trip aggregates; everything the downstream analyses need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripSummary {
    pub trip_id: String,
    pub start_time: Instant,
    pub end_time: Instant,
    pub start_point: LatLon,
    pub end_point: LatLon,
    pub distance: f64,
    pub duration: f64,
    pub avg_speed: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trip {
    pub summary: TripSummary,
    pub points: Vec<TripPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    BoundaryMissing,
    TooFewPoints,
    ZeroDuration,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::BoundaryMissing => "boundary-missing",
            RejectReason::TooFewPoints => "too-few-points",
            RejectReason::ZeroDuration => "zero-duration",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub activity_id: String,
    pub reason: RejectReason,
    pub detail: String,
    /// Input points discarded by this entry.
    pub points: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Assembly {
    /// Sorted by trip id.
    pub trips: Vec<Trip>,
    pub rejections: Vec<Rejection>,
}

impl Assembly {
    pub fn rejected_points(&self) -> usize {
        self.rejections.iter().map(|r| r.points).sum()
    }

    pub fn kept_points(&self) -> usize {
        self.trips.iter().map(|t| t.points.len()).sum()
    }

    pub fn summaries(&self) -> Vec<TripSummary> {
        self.trips.iter().map(|t| t.summary.clone()).collect()
    }
}

fn parse_optional(raw: &str, line: u64, field: &'static str) -> Result<Option<f64>> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    let v: f64 = raw.parse().map_err(|_| Error::Parse {
        line,
        message: format!("{field}: cannot parse {raw:?} as a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("{field}: non-finite value {raw:?}"),
        });
    }
    Ok(Some(v))
}

/// Parses the point CSV. Rows keep file order.
pub fn parse_points<R: Read>(source: R) -> Result<Vec<GpsPoint>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let header = rdr.headers()?.clone();
    if header.iter().map(str::trim).ne(POINTS_HEADER.iter().copied()) {
        return Err(Error::schema(
            Some(1),
            format!("expected header {:?}, found {:?}", POINTS_HEADER.join(","), header.iter().collect::<Vec<_>>().join(",")),
        ));
    }

    let mut out = Vec::new();
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record)? {
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != POINTS_HEADER.len() {
            return Err(Error::schema(Some(line), format!("expected 6 fields, found {}", record.len())));
        }
        let activity_id = record[0].trim();
        if activity_id.is_empty() {
            return Err(Error::schema(Some(line), "empty activity_id"));
        }
        let timestamp = parse_timestamp(record[1].trim()).ok_or_else(|| Error::Parse {
            line,
            message: format!("malformed timestamp {:?}", &record[1]),
        })?;
        let lat = parse_optional(&record[2], line, "lat")?;
        let lon = parse_optional(&record[3], line, "lon")?;
        let coord = match (lat, lon) {
            (Some(lat), Some(lon)) => {
                if !(-90.0..=90.0).contains(&lat) {
                    return Err(Error::Range { line, field: "lat", value: lat });
                }
                if !(-180.0..=180.0).contains(&lon) {
                    return Err(Error::Range { line, field: "lon", value: lon });
                }
                Some(LatLon::new(lat, lon))
            }
            (None, None) => None,
            _ => return Err(Error::schema(Some(line), "lat and lon must be both present or both empty")),
        };
        let accuracy = parse_optional(&record[4], line, "accuracy")?;
        let speed = parse_optional(&record[5], line, "speed")?;
        for (field, v) in [("accuracy", accuracy), ("speed", speed)] {
            if let Some(v) = v {
                if v < 0.0 {
                    return Err(Error::Range { line, field, value: v });
                }
            }
        }
        out.push(GpsPoint {
            activity_id: activity_id.to_string(),
            timestamp,
            coord,
            accuracy,
            speed,
        });
    }
    Ok(out)
}

/// Fills `None`s strictly between two present values by linear interpolation
/// in time. Leading and trailing gaps are left untouched.
fn interpolate_interior(times: &[i64], values: &mut [Option<f64>]) {
    let mut prev: Option<usize> = None;
    let mut i = 0;
    while i < values.len() {
        if values[i].is_some() {
            if let Some(p) = prev {
                if i > p + 1 {
                    let (t0, t1) = (times[p], times[i]);
                    let (v0, v1) = (values[p].unwrap(), values[i].unwrap());
                    for k in p + 1..i {
                        let frac = if t1 == t0 {
                            0.5
                        } else {
                            (times[k] - t0) as f64 / (t1 - t0) as f64
                        };
                        values[k] = Some(v0 + (v1 - v0) * frac);
                    }
                }
            }
            prev = Some(i);
        }
        i += 1;
    }
}

/// Interior interpolation plus nearest-value carry at the ends.
fn repair_auxiliary(times: &[i64], values: &mut [Option<f64>]) {
    interpolate_interior(times, values);
    if let Some(first) = values.iter().position(Option::is_some) {
        let v = values[first];
        values[..first].iter_mut().for_each(|x| *x = v);
        let last = values.iter().rposition(Option::is_some).unwrap();
        let v = values[last];
        values[last + 1..].iter_mut().for_each(|x| *x = v);
    }
}

/// Distance, duration and average speed of an ordered, repaired point list.
/// Average speed is distance over duration, not a mean of the speed field.
pub fn trip_metrics(points: &[TripPoint]) -> Result<TripMetrics, RejectReason> {
    if points.len() < 2 {
        return Err(RejectReason::TooFewPoints);
    }
    let duration = (points[points.len() - 1].timestamp - points[0].timestamp).num_seconds() as f64;
    if duration <= 0.0 {
        return Err(RejectReason::ZeroDuration);
    }
    let distance: f64 = points.windows(2).map(|w| haversine(w[0].pos, w[1].pos)).sum();
    Ok(TripMetrics {
        distance,
        duration,
        avg_speed: distance / duration,
    })
}

enum GroupOutcome {
    Trip(Trip, Vec<Rejection>),
    Rejected(Vec<Rejection>),
}

fn assemble_group(activity_id: String, mut group: Vec<GpsPoint>) -> GroupOutcome {
    group.sort_by_key(|p| p.timestamp);
    let times: Vec<i64> = group.iter().map(|p| p.timestamp.timestamp()).collect();
    let mut lat: Vec<Option<f64>> = group.iter().map(|p| p.coord.map(|c| c.lat)).collect();
    let mut lon: Vec<Option<f64>> = group.iter().map(|p| p.coord.map(|c| c.lon)).collect();
    let mut speed: Vec<Option<f64>> = group.iter().map(|p| p.speed).collect();
    let mut accuracy: Vec<Option<f64>> = group.iter().map(|p| p.accuracy).collect();

    interpolate_interior(&times, &mut lat);
    interpolate_interior(&times, &mut lon);
    repair_auxiliary(&times, &mut speed);
    repair_auxiliary(&times, &mut accuracy);

    let mut rejections = Vec::new();
    let first = lat.iter().position(Option::is_some);
    let last = lat.iter().rposition(Option::is_some);
    let (first, last) = match (first, last) {
        (Some(f), Some(l)) => (f, l),
        _ => {
            rejections.push(Rejection {
                activity_id,
                reason: RejectReason::BoundaryMissing,
                detail: format!("no point of {} has coordinates", group.len()),
                points: group.len(),
            });
            return GroupOutcome::Rejected(rejections);
        }
    };
    let dropped = first + (group.len() - 1 - last);
    if dropped > 0 {
        rejections.push(Rejection {
            activity_id: activity_id.clone(),
            reason: RejectReason::BoundaryMissing,
            detail: format!("{first} leading and {} trailing points without coordinates", group.len() - 1 - last),
            points: dropped,
        });
    }

    let mut points: Vec<TripPoint> = (first..=last)
        .map(|i| TripPoint {
            timestamp: group[i].timestamp,
            pos: LatLon::new(lat[i].unwrap(), lon[i].unwrap()),
            accuracy: accuracy[i],
            speed: speed[i].unwrap_or(f64::NAN),
        })
        .collect();

    // No speed anywhere in the activity: fall back to segment kinematics.
    if points.iter().any(|p| p.speed.is_nan()) {
        let n = points.len();
        for i in 0..n {
            let (a, b) = if i + 1 < n { (i, i + 1) } else { (i.saturating_sub(1), i) };
            let dt = (points[b].timestamp - points[a].timestamp).num_seconds() as f64;
            points[i].speed = if a != b && dt > 0.0 {
                haversine(points[a].pos, points[b].pos) / dt
            } else {
                0.0
            };
        }
    }

    match trip_metrics(&points) {
        Ok(m) => {
            let summary = TripSummary {
                trip_id: activity_id,
                start_time: points[0].timestamp,
                end_time: points[points.len() - 1].timestamp,
                start_point: points[0].pos,
                end_point: points[points.len() - 1].pos,
                distance: m.distance,
                duration: m.duration,
                avg_speed: m.avg_speed,
                n_points: points.len(),
            };
            GroupOutcome::Trip(Trip { summary, points }, rejections)
        }
        Err(reason) => {
            let detail = match reason {
                RejectReason::TooFewPoints => format!("{} usable point(s)", points.len()),
                _ => format!("all {} points share one timestamp", points.len()),
            };
            rejections.push(Rejection {
                activity_id,
                reason,
                detail,
                points: points.len(),
            });
            GroupOutcome::Rejected(rejections)
        }
    }
}

/// Groups points into trips. Never fails; everything discarded is logged.
pub fn assemble_trips(points: Vec<GpsPoint>) -> Assembly {
    let mut groups: BTreeMap<String, Vec<GpsPoint>> = BTreeMap::new();
    for p in points {
        match groups.get_mut(p.activity_id.as_str()) {
            Some(g) => g.push(p),
            None => {
                groups.insert(p.activity_id.clone(), vec![p]);
            }
        }
    }
    let outcomes = exec::map_vec(groups.into_iter().collect(), |(id, g)| assemble_group(id, g));

    let mut assembly = Assembly::default();
    for outcome in outcomes {
        match outcome {
            GroupOutcome::Trip(trip, rej) => {
                assembly.trips.push(trip);
                assembly.rejections.extend(rej);
            }
            GroupOutcome::Rejected(rej) => assembly.rejections.extend(rej),
        }
    }
    assembly
}

pub fn write_points<W: Write>(sink: W, points: &[GpsPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(POINTS_HEADER)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for p in points {
        w.write_record([
            p.activity_id.clone(),
            format_timestamp(p.timestamp),
            opt(p.coord.map(|c| c.lat)),
            opt(p.coord.map(|c| c.lon)),
            opt(p.accuracy),
            opt(p.speed),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<points>", e))?;
    Ok(())
}

pub fn write_rejections<W: Write>(sink: W, rejections: &[Rejection]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["activity_id", "reason", "detail"])?;
    for r in rejections {
        w.write_record([r.activity_id.as_str(), r.reason.as_str(), r.detail.as_str()])?;
    }
    w.flush().map_err(|e| Error::io("<rejections>", e))?;
    Ok(())
}

pub fn write_trips<W: Write>(sink: W, trips: &[TripSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(TRIPS_HEADER)?;
    for t in trips {
        w.write_record([
            t.trip_id.clone(),
            format_timestamp(t.start_time),
            format_timestamp(t.end_time),
            t.start_point.lat.to_string(),
            t.start_point.lon.to_string(),
            t.end_point.lat.to_string(),
            t.end_point.lon.to_string(),
            t.distance.to_string(),
            t.duration.to_string(),
            t.avg_speed.to_string(),
            t.n_points.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<trips>", e))?;
    Ok(())
}

pub fn read_trips<R: Read>(source: R) -> Result<Vec<TripSummary>> {
    let mut rdr = csv::Reader::from_reader(source);
    let header = rdr.headers()?.clone();
    if header.iter().ne(TRIPS_HEADER.iter().copied()) {
        return Err(Error::schema(Some(1), format!("expected trips header {:?}", TRIPS_HEADER.join(","))));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let num = |i: usize| -> Result<f64> {
            rec[i].parse().map_err(|_| Error::Parse {
                line,
                message: format!("{}: bad number {:?}", TRIPS_HEADER[i], &rec[i]),
            })
        };
        let ts = |i: usize| -> Result<Instant> {
            parse_timestamp(&rec[i]).ok_or_else(|| Error::Parse {
                line,
                message: format!("{}: malformed timestamp {:?}", TRIPS_HEADER[i], &rec[i]),
            })
        };
        out.push(TripSummary {
            trip_id: rec[0].to_string(),
            start_time: ts(1)?,
            end_time: ts(2)?,
            start_point: LatLon::new(num(3)?, num(4)?),
            end_point: LatLon::new(num(5)?, num(6)?),
            distance: num(7)?,
            duration: num(8)?,
            avg_speed: num(9)?,
            n_points: num(10)? as usize,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(s: &str) -> Instant {
        parse_timestamp(s).unwrap()
    }

    fn pt(id: &str, t: &str, coord: Option<(f64, f64)>) -> GpsPoint {
        GpsPoint {
            activity_id: id.into(),
            timestamp: ts(t),
            coord: coord.map(|(a, b)| LatLon::new(a, b)),
            accuracy: Some(5.0),
            speed: Some(3.0),
        }
    }

    #[test]
    fn header_only_is_empty() {
        let pts = parse_points("activity_id,timestamp,lat,lon,accuracy,speed\n".as_bytes()).unwrap();
        assert!(pts.is_empty());
    }

    #[test]
    fn parses_full_row() {
        let src = "activity_id,timestamp,lat,lon,accuracy,speed\nA1,2017-05-09T08:00:00Z,44.4939,11.3428,5.0,3.2\n";
        let pts = parse_points(src.as_bytes()).unwrap();
        assert_eq!(
            pts,
            vec![GpsPoint {
                activity_id: "A1".into(),
                timestamp: ts("2017-05-09T08:00:00Z"),
                coord: Some(LatLon::new(44.4939, 11.3428)),
                accuracy: Some(5.0),
                speed: Some(3.2),
            }]
        );
    }

    #[test]
    fn empty_optionals_become_absent() {
        let src = "activity_id,timestamp,lat,lon,accuracy,speed\nA1,2017-05-09T08:00:00Z,,,,\n";
        let pts = parse_points(src.as_bytes()).unwrap();
        assert_eq!(pts[0].coord, None);
        assert_eq!(pts[0].accuracy, None);
        assert_eq!(pts[0].speed, None);
    }

    #[test]
    fn lat_out_of_range_names_line() {
        let src = "activity_id,timestamp,lat,lon,accuracy,speed\nA1,2017-05-09T08:00:00Z,44.0,11.0,,\nA1,2017-05-09T08:00:10Z,95.0,11.3428,5.0,3.2\n";
        match parse_points(src.as_bytes()) {
            Err(Error::Range { line, field, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(field, "lat");
            }
            other => panic!("expected range error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_timestamp_is_parse_error() {
        let src = "activity_id,timestamp,lat,lon,accuracy,speed\nA1,yesterday,44.0,11.0,,\n";
        assert!(matches!(parse_points(src.as_bytes()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn half_coordinate_is_schema_error() {
        let src = "activity_id,timestamp,lat,lon,accuracy,speed\nA1,2017-05-09T08:00:00Z,44.0,,,\n";
        assert!(matches!(parse_points(src.as_bytes()), Err(Error::Schema { line: Some(2), .. })));
    }

    #[test]
    fn wrong_header_is_schema_error() {
        let src = "id,timestamp,lat,lon,accuracy,speed\n";
        assert!(matches!(parse_points(src.as_bytes()), Err(Error::Schema { .. })));
    }

    #[test]
    fn interpolates_missing_midpoint() {
        let pts = vec![
            pt("A", "2017-05-09T08:00:00Z", Some((0.0, 0.0))),
            pt("A", "2017-05-09T08:00:10Z", None),
            pt("A", "2017-05-09T08:00:20Z", Some((0.0, 0.0002))),
        ];
        let a = assemble_trips(pts);
        assert_eq!(a.trips.len(), 1);
        let mid = a.trips[0].points[1].pos;
        assert!(mid.lat.abs() < 1e-15);
        assert!((mid.lon - 0.0001).abs() < 1e-15);
    }

    #[test]
    fn single_point_is_too_few() {
        let a = assemble_trips(vec![pt("A", "2017-05-09T08:00:00Z", Some((0.0, 0.0)))]);
        assert!(a.trips.is_empty());
        assert_eq!(a.rejections.len(), 1);
        assert_eq!(a.rejections[0].reason, RejectReason::TooFewPoints);
        assert_eq!(a.rejected_points(), 1);
    }

    #[test]
    fn interleaved_activities_split() {
        let pts = vec![
            pt("B", "2017-05-09T08:00:00Z", Some((0.0, 0.0))),
            pt("A", "2017-05-09T08:00:00Z", Some((1.0, 0.0))),
            pt("B", "2017-05-09T08:01:00Z", Some((0.0, 0.001))),
            pt("A", "2017-05-09T08:01:00Z", Some((1.0, 0.001))),
        ];
        let a = assemble_trips(pts);
        let ids: Vec<_> = a.trips.iter().map(|t| t.summary.trip_id.as_str()).collect();
        assert_eq!(ids, ["A", "B"]);
        assert!(a.trips[0].points.iter().all(|p| p.pos.lat == 1.0));
        assert!(a.trips[1].points.iter().all(|p| p.pos.lat == 0.0));
    }

    #[test]
    fn boundary_missing_points_dropped() {
        let pts = vec![
            pt("A", "2017-05-09T08:00:00Z", None),
            pt("A", "2017-05-09T08:00:10Z", Some((0.0, 0.0))),
            pt("A", "2017-05-09T08:00:20Z", Some((0.0, 0.001))),
            pt("A", "2017-05-09T08:00:30Z", None),
        ];
        let a = assemble_trips(pts);
        assert_eq!(a.trips[0].points.len(), 2);
        assert_eq!(a.rejections[0].reason, RejectReason::BoundaryMissing);
        assert_eq!(a.rejected_points(), 2);
        assert_eq!(a.trips[0].summary.start_time, ts("2017-05-09T08:00:10Z"));
    }

    #[test]
    fn zero_duration_rejected() {
        let pts = vec![
            pt("A", "2017-05-09T08:00:00Z", Some((0.0, 0.0))),
            pt("A", "2017-05-09T08:00:00Z", Some((0.0, 0.001))),
        ];
        let a = assemble_trips(pts);
        assert!(a.trips.is_empty());
        assert_eq!(a.rejections[0].reason, RejectReason::ZeroDuration);
        assert_eq!(a.rejected_points(), 2);
    }

    #[test]
    fn stationary_trip_metrics() {
        let p = LatLon::new(44.0, 11.0);
        let pts = [
            TripPoint { timestamp: ts("2017-05-09T08:00:00Z"), pos: p, accuracy: None, speed: 0.0 },
            TripPoint { timestamp: ts("2017-05-09T08:01:40Z"), pos: p, accuracy: None, speed: 0.0 },
        ];
        let m = trip_metrics(&pts).unwrap();
        assert_eq!((m.distance, m.duration, m.avg_speed), (0.0, 100.0, 0.0));
    }

    #[test]
    fn collinear_equator_segment_sum() {
        let mk = |s: &str, lon: f64| TripPoint { timestamp: ts(s), pos: LatLon::new(0.0, lon), accuracy: None, speed: 0.0 };
        let pts = [
            mk("2017-05-09T08:00:00Z", 0.0),
            mk("2017-05-09T08:01:00Z", 0.001),
            mk("2017-05-09T08:02:00Z", 0.002),
        ];
        let m = trip_metrics(&pts).unwrap();
        let single = haversine(LatLon::new(0.0, 0.0), LatLon::new(0.0, 0.001));
        assert!((m.distance - 2.0 * single).abs() < 1e-9);
        assert_eq!(m.duration, 120.0);
    }

    #[test]
    fn unsorted_input_same_metrics() {
        let sorted = vec![
            pt("A", "2017-05-09T08:00:00Z", Some((0.0, 0.0))),
            pt("A", "2017-05-09T08:01:00Z", Some((0.0, 0.001))),
            pt("A", "2017-05-09T08:02:00Z", Some((0.0, 0.003))),
        ];
        let mut shuffled = sorted.clone();
        shuffled.swap(0, 2);
        let a = assemble_trips(sorted);
        let b = assemble_trips(shuffled);
        assert_eq!(a.trips, b.trips);
    }

    #[test]
    fn missing_speed_everywhere_uses_kinematics() {
        let mut pts = vec![
            pt("A", "2017-05-09T08:00:00Z", Some((0.0, 0.0))),
            pt("A", "2017-05-09T08:01:00Z", Some((0.0, 0.001))),
        ];
        pts.iter_mut().for_each(|p| p.speed = None);
        let a = assemble_trips(pts);
        let expected = haversine(LatLon::new(0.0, 0.0), LatLon::new(0.0, 0.001)) / 60.0;
        assert!(a.trips[0].points.iter().all(|p| (p.speed - expected).abs() < 1e-12));
    }

    #[test]
    fn trips_csv_round_trip() {
        let pts = vec![
            pt("A", "2017-05-09T08:00:00Z", Some((44.1, 11.2))),
            pt("A", "2017-05-09T08:03:00Z", Some((44.11, 11.21))),
        ];
        let sums = assemble_trips(pts).summaries();
        let mut buf = Vec::new();
        write_trips(&mut buf, &sums).unwrap();
        assert_eq!(read_trips(buf.as_slice()).unwrap(), sums);
    }
}
