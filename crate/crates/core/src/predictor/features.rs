//! Turning raw video metadata into a fixed-width numeric vector.
//!
//! Layout, in order:
//!
//! | block                   | width         | encoding               |
//! |-------------------------|---------------|------------------------|
//! | broadcaster name        | `name_dim`    | signed feature hashing |
//! | content category        | `category_dim`| signed feature hashing |
//! | time-of-day period      | 6             | one-hot                |
//! | day of week (Mon = 0)   | 7             | one-hot                |
//! | broadcaster region      | n             | one-hot                |

use chrono::{NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};
use twox_hash::XxHash64;

use crate::domain::{BroadcasterLocation, RawFeatures, Region, RegionId};
use crate::error::{Error, Result};
use crate::geo::{nearest_region, GeoPoint};

pub const TIME_PERIODS: usize = 6;
pub const WEEKDAYS: usize = 7;

const SIGN_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Four-hour bucket of the hour of day: 00-04 is 0, ..., 20-24 is 5.
pub fn cluster_time_period(ts: &NaiveDateTime) -> usize {
    ts.hour() as usize / 4
}

/// One non-zero coordinate of a hashed feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HashedFeature {
    pub index: usize,
    pub value: f64,
}

/// Signed hashing trick: the bucket comes from one seeded hash, the sign from
/// an independently seeded one.
pub fn hash_feature(text: &str, dim: usize, seed: u64) -> Result<HashedFeature> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::InvalidHashDim(dim));
    }
    let bytes = text.as_bytes();
    let index = (XxHash64::oneshot(seed, bytes) & (dim as u64 - 1)) as usize;
    let sign = XxHash64::oneshot(seed ^ SIGN_SEED_SALT, bytes) & 1;
    Ok(HashedFeature {
        index,
        value: if sign == 0 { 1.0 } else { -1.0 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub name_dim: usize,
    pub category_dim: usize,
    pub n_regions: usize,
    #[serde(default)]
    pub hash_seed: u64,
}

impl EncoderConfig {
    pub fn new(n_regions: usize) -> Self {
        EncoderConfig {
            name_dim: 64,
            category_dim: 32,
            n_regions,
            hash_seed: 0,
        }
    }

    pub fn width(&self) -> usize {
        self.name_dim + self.category_dim + TIME_PERIODS + WEEKDAYS + self.n_regions
    }

    pub fn time_offset(&self) -> usize {
        self.name_dim + self.category_dim
    }

    pub fn day_offset(&self) -> usize {
        self.time_offset() + TIME_PERIODS
    }

    pub fn region_offset(&self) -> usize {
        self.day_offset() + WEEKDAYS
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn broadcaster_region(loc: &BroadcasterLocation, regions: &[Region]) -> Result<RegionId> {
    match *loc {
        BroadcasterLocation::Point { lat, lon } => {
            let p = GeoPoint::new(lat, lon);
            if !p.is_valid() {
                return Err(Error::InvalidConfig(format!(
                    "broadcaster location ({lat}, {lon}) out of range"
                )));
            }
            nearest_region(p, regions)
        }
        BroadcasterLocation::Region { region } if region < regions.len() => Ok(region),
        BroadcasterLocation::Region { region } => Err(Error::UnknownRegion {
            id: region,
            n: regions.len(),
        }),
    }
}

pub fn encode(
    features: &RawFeatures,
    regions: &[Region],
    cfg: &EncoderConfig,
) -> Result<FeatureVector> {
    if regions.len() != cfg.n_regions {
        return Err(Error::DimensionMismatch {
            what: "encoder regions",
            expected: cfg.n_regions,
            actual: regions.len(),
        });
    }
    let mut x = vec![0.0; cfg.width()];

    let name = hash_feature(&features.broadcaster_name, cfg.name_dim, cfg.hash_seed)?;
    x[name.index] += name.value;
    let cat = hash_feature(&features.content_category, cfg.category_dim, cfg.hash_seed)?;
    x[cfg.name_dim + cat.index] += cat.value;

    x[cfg.time_offset() + cluster_time_period(&features.created_time)] = 1.0;
    x[cfg.day_offset() + features.created_day.num_days_from_monday() as usize] = 1.0;

    let region = broadcaster_region(&features.broadcaster_location, regions)?;
    x[cfg.region_offset() + region] = 1.0;

    Ok(FeatureVector(x))
}
