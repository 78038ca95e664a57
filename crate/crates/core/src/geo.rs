//! Great-circle distances, nearest-region mapping and distance-derived RTT.

use serde::{Deserialize, Serialize};

use crate::domain::{Region, RegionId, RegionSet, RttMatrix};
use crate::error::{Error, Result};

pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Delay to serve a viewer from its own region.
pub const DEFAULT_BASE_RTT_MS: f64 = 8.8;

/// Round-trip milliseconds added per great-circle kilometre.
pub const DEFAULT_MS_PER_KM: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        GeoPoint { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        (-90.0..=90.0).contains(&self.lat) && (-180.0..=180.0).contains(&self.lon)
    }
}

impl From<&Region> for GeoPoint {
    fn from(r: &Region) -> Self {
        GeoPoint::new(r.lat, r.lon)
    }
}

pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let half_dlat = (lat2 - lat1) / 2.0;
    let half_dlon = (b.lon - a.lon).to_radians() / 2.0;
    let h = half_dlat.sin().powi(2) + lat1.cos() * lat2.cos() * half_dlon.sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Closest region by great-circle distance; ties go to the lowest id.
pub fn nearest_region(p: GeoPoint, regions: &[Region]) -> Result<RegionId> {
    let mut best: Option<(f64, RegionId)> = None;
    for r in regions {
        let d = haversine_km(p, r.into());
        best = match best {
            Some((bd, bid)) if bd < d || (bd == d && bid < r.id) => Some((bd, bid)),
            _ => Some((d, r.id)),
        };
    }
    best.map(|(_, id)| id).ok_or(Error::EmptyRegionSet)
}

/// RTT matrix from distance: `base_ms + ms_per_km * km`, with `base_ms` on
/// the diagonal.
pub fn synthesize_rtt(regions: &[Region], base_ms: f64, ms_per_km: f64) -> Result<RttMatrix> {
    if !(base_ms > 0.0) || !(ms_per_km >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "rtt synthesis needs base_ms > 0 and ms_per_km >= 0 (got {base_ms}, {ms_per_km})"
        )));
    }
    let n = regions.len();
    let mut d = vec![vec![base_ms; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = base_ms + ms_per_km * haversine_km((&regions[i]).into(), (&regions[j]).into());
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    RttMatrix::new(d)
}

/// Region set with an RTT matrix synthesized from the default constants.
pub fn region_set_with_synthetic_rtt(regions: Vec<Region>) -> Result<RegionSet> {
    let rtt = synthesize_rtt(&regions, DEFAULT_BASE_RTT_MS, DEFAULT_MS_PER_KM)?;
    RegionSet::new(regions, rtt)
}
