#![allow(dead_code)]

use livealloc::config::default_region_set;
use livealloc::domain::RegionSet;
use livealloc::predictor::{evaluate, fit_forest, Dataset, EncoderConfig, ForestParams};
use livealloc::workload::{generate, GeneratorConfig, Trace};

pub fn default_trace(seed: u64, periods: u32) -> (RegionSet, Trace) {
    let regions = default_region_set();
    let cfg = GeneratorConfig::new(regions.len(), seed);
    let trace = generate(&cfg, periods, &regions.regions).unwrap();
    (regions, trace)
}

/// Held-out pooled R² of the default forest and of a single full tree on a
/// default generated trace.
pub fn rf_vs_dt(seed: u64) -> (f64, f64) {
    let (regions, trace) = default_trace(seed, 24);
    let encoder = EncoderConfig::new(regions.len());
    let data = Dataset::from_records(&trace.records, &regions.regions, &encoder).unwrap();
    let (train, test) = data.split(0.8, seed);
    let rf = fit_forest(
        &train.x,
        &train.y,
        ForestParams {
            rng_seed: seed,
            ..ForestParams::default()
        },
    )
    .unwrap();
    let dt = fit_forest(&train.x, &train.y, ForestParams::single_tree(None, seed)).unwrap();
    (
        evaluate(&rf, &test).unwrap().pooled,
        evaluate(&dt, &test).unwrap().pooled,
    )
}

use livealloc::domain::CostParams;
use livealloc::optimizer::{video_cost, VideoInstance};
use livealloc::simulator::SimResult;

/// Checks the per-period cost identities of `result` exactly, recomputing
/// every term from the committed decisions. Storage held over from earlier
/// periods is rebuilt from start periods and durations, in video-id order.
pub fn check_accounting(
    result: &SimResult,
    trace: &Trace,
    prices: &CostParams,
) -> Result<(), String> {
    let n = prices.alpha.len();
    let by_id: std::collections::BTreeMap<&str, _> = trace
        .records
        .iter()
        .map(|r| (r.video_id.as_str(), r))
        .collect();
    let mut total = 0.0;
    for m in &result.periods {
        let t = m.period;
        let (mut s, mut mig, mut rq) = (0.0, 0.0, 0.0);
        for o in result.videos.iter().filter(|o| o.period == t) {
            let rec = by_id[o.video_id.as_str()];
            let inst = VideoInstance {
                broadcaster_region: o.broadcaster_region,
                demand: o.predicted.clone(),
                size_gb: rec.size_gb,
            };
            let c = video_cost(&inst, &o.decision, prices).map_err(|e| e.to_string())?;
            s += c.storage;
            mig += c.migration;
            rq += c.serving;
        }
        if (s, mig, rq) != (m.storage_cost, m.migration_cost, m.serving_cost) {
            return Err(format!(
                "period {t}: cost terms differ from the committed decisions"
            ));
        }
        if m.network_cost != s + mig + rq {
            return Err(format!("period {t}: C != S + M + Rq"));
        }

        let mut carried: Vec<_> = result
            .videos
            .iter()
            .filter(|o| {
                let rec = by_id[o.video_id.as_str()];
                o.period < t && o.period + rec.duration_periods > t
            })
            .collect();
        carried.sort_by(|a, b| a.video_id.cmp(&b.video_id));
        let mut su = vec![0.0; n];
        for o in carried {
            for r in o.decision.allocated() {
                su[r] += by_id[o.video_id.as_str()].size_gb;
            }
        }
        let held: f64 = su.iter().zip(&prices.alpha).map(|(u, a)| a * u).sum();
        if held != m.carried_storage_cost {
            return Err(format!(
                "period {t}: carried storage {} vs registry {held}",
                m.carried_storage_cost
            ));
        }
        if m.hourly_total != m.network_cost + held {
            return Err(format!("period {t}: hourly total != C + sum(alpha * SU)"));
        }
        total += m.hourly_total;
    }
    if total != result.system_total_cost {
        return Err(format!(
            "system total {} vs sum of hours {total}",
            result.system_total_cost
        ));
    }
    Ok(())
}
