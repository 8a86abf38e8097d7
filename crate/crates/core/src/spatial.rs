//! Usage-density grids and hub destination spread.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::geo::{haversine, meters_per_degree, BBox, LatLon};
use crate::ingest::{Trip, TripSummary};
use crate::timeutil;

pub const DEFAULT_DENSITY_CELL_M: f64 = 50.0;
pub const DEFAULT_HUB_RADIUS_M: f64 = 300.0;
pub const DEFAULT_DEST_CELL_M: f64 = 200.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub bbox: BBox,
    pub cell_size: f64,
    pub n_rows: usize,
    pub n_cols: usize,
    /// Row-major, row 0 at the southern edge.
    pub counts: Vec<u64>,
    pub normalized: Vec<f64>,
    pub ignored: u64,
}

impl DensityGrid {
    pub fn count(&self, row: usize, col: usize) -> u64 {
        self.counts[row * self.n_cols + col]
    }

    pub fn normalized_at(&self, row: usize, col: usize) -> f64 {
        self.normalized[row * self.n_cols + col]
    }

    /// Cell geometry as a standalone value, for reusing the same layout.
    pub fn layout(&self) -> GridLayout {
        GridLayout::new(self.bbox, self.cell_size).expect("grid was built from a valid layout")
    }
}

/// Cell geometry of a density grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridLayout {
    pub bbox: BBox,
    pub cell_size: f64,
    pub n_rows: usize,
    pub n_cols: usize,
    m_lat: f64,
    m_lon: f64,
}

impl GridLayout {
    pub fn new(bbox: BBox, cell_size: f64) -> Result<Self> {
        if !bbox.is_valid() {
            return Err(Error::Param(format!("degenerate bounding box {bbox:?}")));
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::Param(format!("cell size must be positive, got {cell_size}")));
        }
        let (m_lat, m_lon) = meters_per_degree(bbox.center().lat);
        let n_rows = (((bbox.max_lat - bbox.min_lat) * m_lat / cell_size).ceil() as usize).max(1);
        let n_cols = (((bbox.max_lon - bbox.min_lon) * m_lon / cell_size).ceil() as usize).max(1);
        Ok(GridLayout {
            bbox,
            cell_size,
            n_rows,
            n_cols,
            m_lat,
            m_lon,
        })
    }

    /// Flat cell index, or `None` outside the box. Points on the north or east
    /// edge land in the last row or column.
    pub fn cell_of(&self, p: LatLon) -> Option<usize> {
        if !self.bbox.contains(p) {
            return None;
        }
        let row = (((p.lat - self.bbox.min_lat) * self.m_lat / self.cell_size).floor() as usize).min(self.n_rows - 1);
        let col = (((p.lon - self.bbox.min_lon) * self.m_lon / self.cell_size).floor() as usize).min(self.n_cols - 1);
        Some(row * self.n_cols + col)
    }
}

fn normalize(counts: &[u64]) -> Vec<f64> {
    let max = counts.iter().copied().max().unwrap_or(0);
    if max == 0 {
        vec![0.0; counts.len()]
    } else {
        counts.iter().map(|&c| c as f64 / max as f64).collect()
    }
}

pub fn build_density_grid(points: &[LatLon], bbox: BBox, cell_size: f64) -> Result<DensityGrid> {
    let layout = GridLayout::new(bbox, cell_size)?;
    let (counts, ignored) = exec::bin_counts(points, layout.n_rows * layout.n_cols, |p| layout.cell_of(*p));
    Ok(DensityGrid {
        bbox,
        cell_size,
        n_rows: layout.n_rows,
        n_cols: layout.n_cols,
        normalized: normalize(&counts),
        counts,
        ignored,
    })
}

/// One grid per local calendar month over every repaired trip point,
/// each normalized on its own.
pub fn density_by_month(trips: &[Trip], bbox: BBox, cell_size: f64, offset_min: i32) -> Result<BTreeMap<String, DensityGrid>> {
    let mut by_month: BTreeMap<String, Vec<LatLon>> = BTreeMap::new();
    for t in trips {
        for p in &t.points {
            let key = timeutil::month_key(timeutil::local_date(p.timestamp, offset_min));
            by_month.entry(key).or_default().push(p.pos);
        }
    }
    by_month
        .into_iter()
        .map(|(k, pts)| Ok((k, build_density_grid(&pts, bbox, cell_size)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDiff {
    pub n_rows: usize,
    pub n_cols: usize,
    pub values: Vec<f64>,
}

/// `a.normalized - b.normalized`, cell by cell.
pub fn grid_diff(a: &DensityGrid, b: &DensityGrid) -> Result<GridDiff> {
    if a.bbox != b.bbox || a.cell_size != b.cell_size || a.n_rows != b.n_rows || a.n_cols != b.n_cols {
        return Err(Error::Param("grid_diff needs grids of identical layout".into()));
    }
    Ok(GridDiff {
        n_rows: a.n_rows,
        n_cols: a.n_cols,
        values: a.normalized.iter().zip(&b.normalized).map(|(x, y)| x - y).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hub {
    pub name: String,
    pub center: LatLon,
    pub radius_m: f64,
}

/// Reads `name,lat,lon,radius_m`.
pub fn read_hubs<R: std::io::Read>(source: R) -> Result<Vec<Hub>> {
    let mut rdr = csv::Reader::from_reader(source);
    let header = rdr.headers()?.clone();
    if header.iter().ne(["name", "lat", "lon", "radius_m"]) {
        return Err(Error::schema(Some(1), "expected hub header name,lat,lon,radius_m"));
    }
    let mut hubs = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let num = |i: usize| -> Result<f64> {
            rec[i].trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad number {:?}", &rec[i]),
            })
        };
        let center = LatLon::new(num(1)?, num(2)?);
        if !center.is_valid() {
            return Err(Error::Range { line, field: "lat/lon", value: center.lat });
        }
        hubs.push(Hub {
            name: rec[0].to_string(),
            center,
            radius_m: num(3)?,
        });
    }
    Ok(hubs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Destination {
    pub row: i64,
    pub col: i64,
    pub cell_center: LatLon,
    pub trip_count: u64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HubSpreadReport {
    pub hub_name: String,
    pub hub_center: LatLon,
    pub hub_radius: f64,
    pub period: String,
    pub destinations: Vec<Destination>,
    pub total_trips_from_hub: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct HubSpreadParams {
    pub dest_cell_size: f64,
    pub top_k: usize,
}

impl Default for HubSpreadParams {
    fn default() -> Self {
        HubSpreadParams {
            dest_cell_size: DEFAULT_DEST_CELL_M,
            top_k: 10,
        }
    }
}

/// Ranks end cells of trips that start within `hub.radius_m` (closed disk)
/// of the hub. Destination cells are anchored at the hub center.
pub fn hub_spread(trips: &[TripSummary], hub: &Hub, params: HubSpreadParams, period: &str) -> Result<HubSpreadReport> {
    if !(hub.radius_m > 0.0) {
        return Err(Error::Param(format!("hub radius must be positive, got {}", hub.radius_m)));
    }
    if params.top_k == 0 {
        return Err(Error::Param("top_k must be at least 1".into()));
    }
    if !(params.dest_cell_size > 0.0) {
        return Err(Error::Param("destination cell size must be positive".into()));
    }
    let (m_lat, m_lon) = meters_per_degree(hub.center.lat);
    let size = params.dest_cell_size;
    let mut cells: HashMap<(i64, i64), u64> = HashMap::new();
    let mut total = 0u64;
    for t in trips {
        if haversine(t.start_point, hub.center) <= hub.radius_m {
            total += 1;
            let row = ((t.end_point.lat - hub.center.lat) * m_lat / size).floor() as i64;
            let col = ((t.end_point.lon - hub.center.lon) * m_lon / size).floor() as i64;
            *cells.entry((row, col)).or_default() += 1;
        }
    }
    let mut ranked: Vec<((i64, i64), u64)> = cells.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let destinations = ranked
        .into_iter()
        .take(params.top_k)
        .enumerate()
        .map(|(i, ((row, col), n))| Destination {
            row,
            col,
            cell_center: LatLon::new(
                hub.center.lat + (row as f64 + 0.5) * size / m_lat,
                hub.center.lon + (col as f64 + 0.5) * size / m_lon,
            ),
            trip_count: n,
            rank: i + 1,
        })
        .collect();
    Ok(HubSpreadReport {
        hub_name: hub.name.clone(),
        hub_center: hub.center,
        hub_radius: hub.radius_m,
        period: period.to_string(),
        destinations,
        total_trips_from_hub: total,
    })
}
