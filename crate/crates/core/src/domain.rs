//! Core value types: regions, delay matrix, prices, videos, demand, placement
//! decisions and per-period bookkeeping.
//!
//! Sizes are in GB everywhere. Trace files and configs that speak in Gbit are
//! converted with [`gbit_to_gb`] at ingestion.

use std::collections::BTreeMap;

use chrono::{NaiveDateTime, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type RegionId = usize;

/// Default live video size: 0.738 Gbit.
pub const DEFAULT_VIDEO_SIZE_GB: f64 = 0.738 / 8.0;

/// Maximum live video duration, in hourly periods.
pub const DEFAULT_DURATION_PERIODS: u32 = 4;

/// Hours in an average month, used to prorate monthly storage list prices.
pub const HOURS_PER_MONTH: f64 = 730.0;

pub fn gbit_to_gb(gbit: f64) -> f64 {
    gbit * 0.125
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: RegionId,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
}

/// Round-trip delay between cloud sites, in milliseconds. Row index is the
/// serving (allocation) site, column index the viewer region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RttMatrix(Vec<Vec<f64>>);

impl RttMatrix {
    pub fn new(d: Vec<Vec<f64>>) -> Result<Self> {
        let n = d.len();
        for (i, row) in d.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "rtt row",
                    expected: n,
                    actual: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "rtt[{i}][{j}] = {v} must be finite and non-negative"
                    )));
                }
                if i == j && v <= 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "rtt[{i}][{i}] must be positive"
                    )));
                }
                if v != d[j][i] {
                    return Err(Error::InvalidConfig(format!(
                        "rtt is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(RttMatrix(d))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, from: RegionId, to: RegionId) -> f64 {
        self.0[from][to]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSet {
    pub regions: Vec<Region>,
    pub rtt: RttMatrix,
}

impl RegionSet {
    pub fn new(regions: Vec<Region>, rtt: RttMatrix) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::EmptyRegionSet);
        }
        for (i, r) in regions.iter().enumerate() {
            if r.id != i {
                return Err(Error::InvalidConfig(format!(
                    "region ids must be dense and ordered: position {i} has id {}",
                    r.id
                )));
            }
            if !(-90.0..=90.0).contains(&r.lat) || !(-180.0..=180.0).contains(&r.lon) {
                return Err(Error::InvalidConfig(format!(
                    "region {} has out-of-range coordinates ({}, {})",
                    r.name, r.lat, r.lon
                )));
            }
        }
        if rtt.len() != regions.len() {
            return Err(Error::DimensionMismatch {
                what: "rtt matrix",
                expected: regions.len(),
                actual: rtt.len(),
            });
        }
        Ok(RegionSet { regions, rtt })
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn check_id(&self, id: RegionId) -> Result<()> {
        if id < self.len() {
            Ok(())
        } else {
            Err(Error::UnknownRegion { id, n: self.len() })
        }
    }

    pub fn by_name(&self, name: &str) -> Option<&Region> {
        self.regions
            .iter()
            .find(|r| r.name.eq_ignore_ascii_case(name))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceTier {
    /// Cumulative usage (GB) at which this price starts to apply.
    pub from_gb: f64,
    pub price: f64,
}

/// Per-region unit prices. `alpha` is per GB per period; `eta` and `omega`
/// are per GB transferred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub alpha: Vec<f64>,
    pub eta: Vec<f64>,
    pub omega: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tiers: Option<Vec<Vec<PriceTier>>>,
    /// Charge migration for the broadcaster's own copy, as the cost formula
    /// reads literally. Off by default: no transfer happens for that copy.
    #[serde(default)]
    pub charge_broadcaster_migration: bool,
}

impl CostParams {
    pub fn validate(&self, n: usize) -> Result<()> {
        for (what, v) in [
            ("alpha", &self.alpha),
            ("eta", &self.eta),
            ("omega", &self.omega),
        ] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    actual: v.len(),
                });
            }
            if let Some(bad) = v.iter().find(|p| !p.is_finite() || **p < 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{what} price {bad} must be >= 0"
                )));
            }
        }
        if let Some(tiers) = &self.tiers {
            if tiers.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "price tiers",
                    expected: n,
                    actual: tiers.len(),
                });
            }
            for (r, table) in tiers.iter().enumerate() {
                for w in table.windows(2) {
                    if w[1].from_gb <= w[0].from_gb || w[1].price > w[0].price {
                        return Err(Error::InvalidConfig(format!(
                            "tier table for region {r} must have increasing thresholds and non-increasing prices"
                        )));
                    }
                }
                if table.iter().any(|t| t.price < 0.0 || t.from_gb < 0.0) {
                    return Err(Error::InvalidConfig(format!("negative tier in region {r}")));
                }
            }
        }
        Ok(())
    }

    /// Multiplies every price by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let scale = |v: &Vec<f64>| v.iter().map(|p| p * c).collect();
        CostParams {
            alpha: scale(&self.alpha),
            eta: scale(&self.eta),
            omega: scale(&self.omega),
            tiers: self.tiers.as_ref().map(|t| {
                t.iter()
                    .map(|table| {
                        table
                            .iter()
                            .map(|tier| PriceTier {
                                from_gb: tier.from_gb,
                                price: tier.price * c,
                            })
                            .collect()
                    })
                    .collect()
            }),
            charge_broadcaster_migration: self.charge_broadcaster_migration,
        }
    }

    /// Storage cost of holding `gb` at `region` for one period under the
    /// volume tier table. Falls back to the flat `alpha` when no tiers exist.
    pub fn tiered_storage_cost(&self, region: RegionId, gb: f64) -> f64 {
        let Some(table) = self
            .tiers
            .as_ref()
            .map(|t| &t[region])
            .filter(|t| !t.is_empty())
        else {
            return self.alpha[region] * gb;
        };
        let mut cost = 0.0;
        for (i, tier) in table.iter().enumerate() {
            if gb <= tier.from_gb {
                break;
            }
            let upper = table.get(i + 1).map_or(gb, |next| next.from_gb.min(gb));
            cost += (upper - tier.from_gb) * tier.price;
        }
        cost
    }
}

/// Where the broadcaster is: raw coordinates or an already-mapped region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BroadcasterLocation {
    Point { lat: f64, lon: f64 },
    Region { region: RegionId },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawFeatures {
    pub broadcaster_name: String,
    pub content_category: String,
    pub created_time: NaiveDateTime,
    pub created_day: Weekday,
    pub broadcaster_location: BroadcasterLocation,
}

/// Viewer count per region. The existence indicator is `count(r) > 0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DemandVector(Vec<u64>);

impl DemandVector {
    pub fn new(counts: Vec<u64>) -> Self {
        DemandVector(counts)
    }

    pub fn zeros(n: usize) -> Self {
        DemandVector(vec![0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn counts(&self) -> &[u64] {
        &self.0
    }

    pub fn get(&self, r: RegionId) -> u64 {
        self.0[r]
    }

    pub fn exists(&self, r: RegionId) -> bool {
        self.0[r] > 0
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    /// Regions with at least one viewer, ascending.
    pub fn viewer_regions(&self) -> impl Iterator<Item = RegionId> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(r, _)| r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub video_id: String,
    pub broadcaster_region: RegionId,
    pub start_period: u32,
    #[serde(default = "default_duration")]
    pub duration_periods: u32,
    #[serde(default = "default_size")]
    pub size_gb: f64,
    pub features: RawFeatures,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actual_viewers: Option<DemandVector>,
}

fn default_duration() -> u32 {
    DEFAULT_DURATION_PERIODS
}

fn default_size() -> f64 {
    DEFAULT_VIDEO_SIZE_GB
}

/// Allocation sites and the serving map for one video.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacementDecision {
    pub allocate: Vec<bool>,
    /// viewer region -> serving region
    pub serve: BTreeMap<RegionId, RegionId>,
}

impl PlacementDecision {
    /// Broadcaster-only allocation with no serving assignments.
    pub fn broadcaster_only(n: usize, broadcaster: RegionId) -> Self {
        let mut allocate = vec![false; n];
        allocate[broadcaster] = true;
        PlacementDecision {
            allocate,
            serve: BTreeMap::new(),
        }
    }

    pub fn allocated(&self) -> impl Iterator<Item = RegionId> + '_ {
        self.allocate
            .iter()
            .enumerate()
            .filter(|(_, &a)| a)
            .map(|(r, _)| r)
    }

    /// (viewer regions served locally, total served viewer regions)
    pub fn hits(&self) -> (usize, usize) {
        let local = self.serve.iter().filter(|(w, a)| w == a).count();
        (local, self.serve.len())
    }
}

/// Checks the structural placement constraints: the broadcaster copy exists,
/// every serving site is allocated, and each viewer region is served by
/// exactly one site iff it has viewers. The delay bound is checked separately
/// by [`crate::optimizer::check_delay`].
pub fn validate_decision(
    dec: &PlacementDecision,
    demand: &DemandVector,
    broadcaster: RegionId,
) -> Result<bool> {
    let n = dec.allocate.len();
    if demand.len() != n {
        return Err(Error::DimensionMismatch {
            what: "demand vector",
            expected: n,
            actual: demand.len(),
        });
    }
    if broadcaster >= n {
        return Err(Error::UnknownRegion { id: broadcaster, n });
    }
    if !dec.allocate[broadcaster] {
        return Ok(false);
    }
    for (&w, &a) in &dec.serve {
        if w >= n || a >= n || !dec.allocate[a] || !demand.exists(w) {
            return Ok(false);
        }
    }
    Ok(demand.viewer_regions().all(|w| dec.serve.contains_key(&w)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveVideo {
    pub decision: PlacementDecision,
    pub size_gb: f64,
    /// First period in which the video no longer holds storage.
    pub expires_at: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodLedger {
    pub period: u32,
    pub storage_used: Vec<f64>,
    pub active: BTreeMap<String, ActiveVideo>,
}

impl PeriodLedger {
    pub fn new(n: usize) -> Self {
        PeriodLedger {
            period: 0,
            storage_used: vec![0.0; n],
            active: BTreeMap::new(),
        }
    }

    /// Storage per region implied by the active registry, summed in video-id
    /// order.
    pub fn registry_storage(&self) -> Vec<f64> {
        let mut su = vec![0.0; self.storage_used.len()];
        for v in self.active.values() {
            for r in v.decision.allocated() {
                su[r] += v.size_gb;
            }
        }
        su
    }

    pub(crate) fn resync_storage(&mut self) {
        self.storage_used = self.registry_storage();
    }

    /// Drops videos whose lifetime ended before `period` and returns their ids.
    pub(crate) fn expire(&mut self, period: u32) -> Vec<String> {
        let ended: Vec<String> = self
            .active
            .iter()
            .filter(|(_, v)| v.expires_at <= period)
            .map(|(id, _)| id.clone())
            .collect();
        for id in &ended {
            self.active.remove(id);
        }
        self.resync_storage();
        ended
    }
}

/// Cost and quality figures for one simulated period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodMetrics {
    pub period: u32,
    pub storage_cost: f64,
    pub migration_cost: f64,
    pub serving_cost: f64,
    pub network_cost: f64,
    /// Storage charge for videos that arrived in earlier periods and are still live.
    pub carried_storage_cost: f64,
    pub hourly_total: f64,
    /// Share of viewer-region assignments served from the viewers' own
    /// region, in percent. `None` when no video had viewers.
    pub hits_pct: Option<f64>,
    pub avg_latency_predicted: Option<f64>,
    pub avg_latency_actual: Option<f64>,
    pub arrivals: usize,
    pub infeasible: usize,
}

impl PeriodMetrics {
    pub fn empty(period: u32) -> Self {
        PeriodMetrics {
            period,
            storage_cost: 0.0,
            migration_cost: 0.0,
            serving_cost: 0.0,
            network_cost: 0.0,
            carried_storage_cost: 0.0,
            hourly_total: 0.0,
            hits_pct: None,
            avg_latency_predicted: None,
            avg_latency_actual: None,
            arrivals: 0,
            infeasible: 0,
        }
    }
}
