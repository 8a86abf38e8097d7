//! Spherical geodesy at city scale.

use serde::{Deserialize, Serialize};

/// Mean Earth radius used for every distance in the crate.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub const fn new(lat: f64, lon: f64) -> Self {
        LatLon { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        (-90.0..=90.0).contains(&self.lat) && (-180.0..=180.0).contains(&self.lon)
    }
}

/// Great-circle distance in meters.
pub fn haversine(a: LatLon, b: LatLon) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Meters per degree of latitude and longitude at `lat`, on the same sphere.
pub fn meters_per_degree(lat: f64) -> (f64, f64) {
    let m_lat = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
    (m_lat, m_lat * lat.to_radians().cos())
}

/// Axis-aligned lat/lon box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min_lat: f64,
    pub min_lon: f64,
    pub max_lat: f64,
    pub max_lon: f64,
}

impl BBox {
    pub fn new(min_lat: f64, min_lon: f64, max_lat: f64, max_lon: f64) -> Self {
        BBox {
            min_lat,
            min_lon,
            max_lat,
            max_lon,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.min_lat < self.max_lat
            && self.min_lon < self.max_lon
            && LatLon::new(self.min_lat, self.min_lon).is_valid()
            && LatLon::new(self.max_lat, self.max_lon).is_valid()
    }

    pub fn contains(&self, p: LatLon) -> bool {
        p.lat >= self.min_lat && p.lat <= self.max_lat && p.lon >= self.min_lon && p.lon <= self.max_lon
    }

    pub fn center(&self) -> LatLon {
        LatLon::new(
            (self.min_lat + self.max_lat) / 2.0,
            (self.min_lon + self.max_lon) / 2.0,
        )
    }

    /// Smallest box holding every point, or `None` for an empty or degenerate set.
    pub fn enclosing(points: impl IntoIterator<Item = LatLon>) -> Option<BBox> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut b = BBox::new(first.lat, first.lon, first.lat, first.lon);
        for p in it {
            b.min_lat = b.min_lat.min(p.lat);
            b.max_lat = b.max_lat.max(p.lat);
            b.min_lon = b.min_lon.min(p.lon);
            b.max_lon = b.max_lon.max(p.lon);
        }
        b.is_valid().then_some(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_points_are_zero_apart() {
        let p = LatLon::new(44.4939, 11.3428);
        assert_eq!(haversine(p, p), 0.0);
    }

    #[test]
    fn one_degree_on_equator() {
        let d = haversine(LatLon::new(0.0, 0.0), LatLon::new(0.0, 1.0));
        let expected = std::f64::consts::PI / 180.0 * EARTH_RADIUS_M;
        assert!((d - expected).abs() < 0.01);
        assert!((d - 111_194.93).abs() < 0.01);
    }

    #[test]
    fn antipodes_do_not_nan() {
        let d = haversine(LatLon::new(0.0, 0.0), LatLon::new(0.0, 180.0));
        assert!((d - std::f64::consts::PI * EARTH_RADIUS_M).abs() < 1e-6);
    }

    #[test]
    fn bbox_degenerate() {
        assert!(!BBox::new(1.0, 1.0, 1.0, 2.0).is_valid());
        assert!(BBox::new(1.0, 1.0, 2.0, 2.0).is_valid());
    }
}
