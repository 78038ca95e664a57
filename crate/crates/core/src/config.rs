//! Built-in defaults and loaders for `regions.json`, `rtt.json` and
//! `prices.json`.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::domain::{CostParams, PriceTier, Region, RegionSet, RttMatrix, HOURS_PER_MONTH};
use crate::error::{Error, Result};
use crate::geo;

const DEFAULT_REGIONS_JSON: &str = include_str!("../config/regions.json");
const DEFAULT_PRICES_JSON: &str = include_str!("../config/prices.json");

/// Latency thresholds swept by the simulator, in ms.
pub const DEFAULT_THRESHOLDS_MS: [f64; 6] = [8.8, 60.0, 120.0, 171.0, 220.0, 371.0];

pub const DEFAULT_PERIODS: u32 = 24;

/// The ten cloud sites with public city coordinates.
pub fn default_regions() -> Vec<Region> {
    serde_json::from_str(DEFAULT_REGIONS_JSON).expect("bundled regions.json is valid")
}

/// Ten default regions with a distance-derived RTT matrix.
pub fn default_region_set() -> RegionSet {
    geo::region_set_with_synthetic_rtt(default_regions()).expect("bundled regions are valid")
}

/// Price sheet as published: storage per GB-month, transfer per GB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSheet {
    pub storage_monthly_per_gb: Vec<f64>,
    pub migration_per_gb: Vec<f64>,
    pub serving_per_gb: Vec<f64>,
    #[serde(default)]
    pub storage_tiers_monthly: Option<Vec<Vec<PriceTier>>>,
    #[serde(default)]
    pub charge_broadcaster_migration: bool,
}

impl PriceSheet {
    /// Prorates storage prices to a period of `period_hours`.
    pub fn to_cost_params(&self, period_hours: f64) -> CostParams {
        let factor = period_hours / HOURS_PER_MONTH;
        CostParams {
            alpha: self
                .storage_monthly_per_gb
                .iter()
                .map(|p| p * factor)
                .collect(),
            eta: self.migration_per_gb.clone(),
            omega: self.serving_per_gb.clone(),
            tiers: self.storage_tiers_monthly.as_ref().map(|tiers| {
                tiers
                    .iter()
                    .map(|t| {
                        t.iter()
                            .map(|tier| PriceTier {
                                from_gb: tier.from_gb,
                                price: tier.price * factor,
                            })
                            .collect()
                    })
                    .collect()
            }),
            charge_broadcaster_migration: self.charge_broadcaster_migration,
        }
    }
}

pub fn default_price_sheet() -> PriceSheet {
    serde_json::from_str(DEFAULT_PRICES_JSON).expect("bundled prices.json is valid")
}

/// Default prices for one-hour periods.
pub fn default_cost_params() -> CostParams {
    default_price_sheet().to_cost_params(1.0)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Resolves the region universe: explicit files win over built-ins, and a
/// measured RTT matrix wins over distance synthesis.
pub fn load_region_set(regions: Option<&Path>, rtt: Option<&Path>) -> Result<RegionSet> {
    let regions = match regions {
        Some(p) => read_json::<Vec<Region>>(p)?,
        None => default_regions(),
    };
    match rtt {
        Some(p) => {
            let rows: Vec<Vec<f64>> = read_json(p)?;
            RegionSet::new(regions, RttMatrix::new(rows)?)
        }
        None => geo::region_set_with_synthetic_rtt(regions),
    }
}

/// Loads a [`PriceSheet`], or a ready [`CostParams`] object when the file
/// carries `alpha`/`eta`/`omega` directly.
pub fn load_cost_params(path: Option<&Path>, period_hours: f64, n: usize) -> Result<CostParams> {
    let params = match path {
        None => default_price_sheet().to_cost_params(period_hours),
        Some(p) => {
            let value: serde_json::Value = read_json(p)?;
            if value.get("alpha").is_some() {
                serde_json::from_value(value)?
            } else {
                serde_json::from_value::<PriceSheet>(value)?.to_cost_params(period_hours)
            }
        }
    };
    params.validate(n)?;
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_region_list_has_the_ten_sites() {
        let names: Vec<String> = default_regions().into_iter().map(|r| r.name).collect();
        assert_eq!(
            names,
            [
                "Mumbai",
                "Seoul",
                "Singapore",
                "Ningxia",
                "Frankfurt",
                "Paris",
                "Sao Paulo",
                "Ohio",
                "Virginia",
                "California"
            ]
        );
    }

    #[test]
    fn default_prices_are_valid_and_prorated() {
        let params = default_cost_params();
        params.validate(10).unwrap();
        // Virginia: 0.023 $/GB-month
        assert!((params.alpha[8] - 0.023 / 730.0).abs() < 1e-18);
        assert_eq!(params.omega[8], 0.09);
        assert!(!params.charge_broadcaster_migration);
    }

    #[test]
    fn default_rtt_max_is_within_sweep() {
        let set = default_region_set();
        let max = set.rtt.rows().iter().flatten().copied().fold(0.0, f64::max);
        assert!(max > 220.0 && max < 400.0, "max rtt {max}");
    }
}
