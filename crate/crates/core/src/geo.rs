//! Coordinates, great-circle distance and range admissibility.
//!
//! Locations are stored as signed integer micro-degrees so the canonical
//! message encodings are exact (no float serialization ambiguity); distance
//! math converts to radians internally. Every "not further than the maximum
//! reachable distance" rule in the protocol reduces to [`within_range`].

use thiserror::Error;

/// Mean Earth radius used for great-circle distances, in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Default short-range reach (Bluetooth-class), in meters.
pub const DEFAULT_MAX_RANGE_M: f64 = 100.0;

const MICRODEG: f64 = 1_000_000.0;
const MAX_LAT_MICRODEG: i32 = 90_000_000;
const MAX_LON_MICRODEG: i32 = 180_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeoError {
    #[error("coordinates out of range: lat {lat_microdeg} microdeg, lon {lon_microdeg} microdeg")]
    InvalidCoordinates { lat_microdeg: i32, lon_microdeg: i32 },
    #[error("max_range_m must be positive, got {0}")]
    InvalidRange(f64),
}

/// A geographic position in integer micro-degrees.
///
/// Valid range: latitude in [-90e6, 90e6], longitude in [-180e6, 180e6).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GeoLocation {
    pub lat_microdeg: i32,
    pub lon_microdeg: i32,
}

impl GeoLocation {
    pub fn new(lat_microdeg: i32, lon_microdeg: i32) -> Result<Self, GeoError> {
        let loc = Self { lat_microdeg, lon_microdeg };
        if loc.is_valid() {
            Ok(loc)
        } else {
            Err(GeoError::InvalidCoordinates { lat_microdeg, lon_microdeg })
        }
    }

    /// Builds a location from fractional degrees, rounding to micro-degrees.
    pub fn from_degrees(lat_deg: f64, lon_deg: f64) -> Result<Self, GeoError> {
        let lat = (lat_deg * MICRODEG).round();
        let lon = (lon_deg * MICRODEG).round();
        if !lat.is_finite() || !lon.is_finite() || lat.abs() > i32::MAX as f64 || lon.abs() > i32::MAX as f64 {
            return Err(GeoError::InvalidCoordinates {
                lat_microdeg: i32::MAX,
                lon_microdeg: i32::MAX,
            });
        }
        Self::new(lat as i32, lon as i32)
    }

    pub fn is_valid(&self) -> bool {
        (-MAX_LAT_MICRODEG..=MAX_LAT_MICRODEG).contains(&self.lat_microdeg)
            && (-MAX_LON_MICRODEG..MAX_LON_MICRODEG).contains(&self.lon_microdeg)
    }

    pub fn lat_deg(&self) -> f64 {
        self.lat_microdeg as f64 / MICRODEG
    }

    pub fn lon_deg(&self) -> f64 {
        self.lon_microdeg as f64 / MICRODEG
    }
}

/// Reach of the short-range communication technology.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeParams {
    pub max_range_m: f64,
}

impl RangeParams {
    pub fn new(max_range_m: f64) -> Result<Self, GeoError> {
        if max_range_m.is_finite() && max_range_m > 0.0 {
            Ok(Self { max_range_m })
        } else {
            Err(GeoError::InvalidRange(max_range_m))
        }
    }
}

impl Default for RangeParams {
    fn default() -> Self {
        Self { max_range_m: DEFAULT_MAX_RANGE_M }
    }
}

/// Great-circle (haversine) distance between two locations, in meters.
///
/// Symmetric, zero iff the coordinates are identical, and computed on a
/// sphere of radius [`EARTH_RADIUS_M`].
pub fn distance_m(a: GeoLocation, b: GeoLocation) -> Result<f64, GeoError> {
    for loc in [a, b] {
        if !loc.is_valid() {
            return Err(GeoError::InvalidCoordinates {
                lat_microdeg: loc.lat_microdeg,
                lon_microdeg: loc.lon_microdeg,
            });
        }
    }
    if a == b {
        return Ok(0.0);
    }
    let lat_a = a.lat_deg().to_radians();
    let lat_b = b.lat_deg().to_radians();
    let d_lat = (b.lat_deg() - a.lat_deg()).to_radians();
    let d_lon = (b.lon_deg() - a.lon_deg()).to_radians();
    let h = (d_lat / 2.0).sin().powi(2) + lat_a.cos() * lat_b.cos() * (d_lon / 2.0).sin().powi(2);
    Ok(2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin())
}

/// True iff the two locations are within `r.max_range_m` of each other.
/// The boundary is inclusive: a pair at exactly the maximum distance is
/// admissible ("not further than").
pub fn within_range(a: GeoLocation, b: GeoLocation, r: RangeParams) -> Result<bool, GeoError> {
    Ok(distance_m(a, b)? <= r.max_range_m)
}
