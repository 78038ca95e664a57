//! Hour-by-hour proactive allocation: predict demand for arriving videos,
//! solve their placements, hold replicas for each video's lifetime and
//! account costs and serving quality per period.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{
    ActiveVideo, CostParams, DemandVector, PeriodLedger, PeriodMetrics, PlacementDecision,
    RegionId, RegionSet, RttMatrix, VideoRecord,
};
use crate::error::{Error, Result};
use crate::optimizer::{average_delay, solve_period, video_cost, SolveOptions, VideoInstance};
use crate::predictor::{encode, ModelFile};
use crate::workload::Trace;

/// Where arriving videos' demand comes from.
#[derive(Debug, Clone)]
pub enum DemandSource {
    /// Use the recorded actual viewers as the prediction.
    Oracle,
    Model(Box<ModelFile>),
}

impl DemandSource {
    pub fn predict(&self, rec: &VideoRecord, regions: &RegionSet) -> Result<DemandVector> {
        match self {
            DemandSource::Oracle => rec
                .actual_viewers
                .clone()
                .ok_or_else(|| Error::MissingActuals(rec.video_id.clone())),
            DemandSource::Model(model) => {
                let x = encode(&rec.features, &regions.regions, &model.encoder)?;
                model.forest.predict(&x)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub periods: u32,
    pub thresholds_ms: Vec<f64>,
    pub prices: CostParams,
    pub solve: SolveOptions,
}

impl SimConfig {
    pub fn new(prices: CostParams) -> Self {
        SimConfig {
            periods: crate::config::DEFAULT_PERIODS,
            thresholds_ms: crate::config::DEFAULT_THRESHOLDS_MS.to_vec(),
            prices,
            solve: SolveOptions::default(),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.periods < 1 {
            return Err(Error::InvalidConfig("need at least one period".into()));
        }
        if let Some(d) = self.thresholds_ms.iter().find(|d| !(**d > 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "threshold {d} must be positive"
            )));
        }
        self.prices.validate(n)
    }
}

/// What the system decided for one arriving video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoOutcome {
    pub video_id: String,
    pub period: u32,
    pub broadcaster_region: RegionId,
    pub predicted: DemandVector,
    pub decision: PlacementDecision,
    /// No placement met the threshold; the video was kept at the
    /// broadcaster site and served from there.
    pub infeasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub threshold_ms: f64,
    pub periods: Vec<PeriodMetrics>,
    pub videos: Vec<VideoOutcome>,
    pub system_total_cost: f64,
}

/// Serving map for a realised demand: viewer regions the prediction covered
/// keep their planned site, any others go to the closest allocated site.
pub fn serve_actual(
    decision: &PlacementDecision,
    actual: &DemandVector,
    rtt: &RttMatrix,
) -> BTreeMap<RegionId, RegionId> {
    actual
        .viewer_regions()
        .map(|w| {
            let site = decision.serve.get(&w).copied().unwrap_or_else(|| {
                decision
                    .allocated()
                    .min_by(|&a, &b| rtt.get(a, w).total_cmp(&rtt.get(b, w)).then(a.cmp(&b)))
                    .expect("broadcaster site is always allocated")
            });
            (w, site)
        })
        .collect()
}

/// Pooled viewer-weighted delay over several (demand, serving map) pairs.
fn pooled_latency<'a>(
    items: impl Iterator<Item = (&'a DemandVector, BTreeMap<RegionId, RegionId>)>,
    rtt: &RttMatrix,
) -> Option<f64> {
    let mut weighted = 0.0;
    let mut viewers = 0u64;
    for (demand, serve) in items {
        let total = demand.total();
        if total == 0 {
            continue;
        }
        weighted += average_delay(demand, &serve, rtt) * total as f64;
        viewers += total;
    }
    (viewers > 0).then(|| weighted / viewers as f64)
}

/// Advances the ledger by one period with `arrivals` starting in it.
pub fn step(
    mut ledger: PeriodLedger,
    arrivals: &[VideoRecord],
    source: &DemandSource,
    regions: &RegionSet,
    cfg: &SimConfig,
    threshold_ms: f64,
) -> Result<(PeriodLedger, PeriodMetrics, Vec<VideoOutcome>)> {
    let period = ledger.period + 1;
    if let Some(bad) = arrivals.iter().find(|r| r.start_period != period) {
        return Err(Error::InvalidConfig(format!(
            "video {} starts in period {}, expected {period}",
            bad.video_id, bad.start_period
        )));
    }
    ledger.expire(period);
    ledger.period = period;
    let prices = &cfg.prices;
    let n = regions.len();

    let carried_storage_cost: f64 = ledger
        .storage_used
        .iter()
        .zip(&prices.alpha)
        .map(|(su, a)| a * su)
        .sum();

    let predicted = arrivals
        .par_iter()
        .map(|rec| source.predict(rec, regions))
        .collect::<Result<Vec<_>>>()?;
    let instances: Vec<VideoInstance> = arrivals
        .iter()
        .zip(&predicted)
        .map(|(rec, demand)| VideoInstance {
            broadcaster_region: rec.broadcaster_region,
            demand: demand.clone(),
            size_gb: rec.size_gb,
        })
        .collect();
    let solved = solve_period(&instances, regions, prices, threshold_ms, &cfg.solve);

    let mut metrics = PeriodMetrics::empty(period);
    metrics.arrivals = arrivals.len();
    let mut outcomes = Vec::with_capacity(arrivals.len());
    for ((rec, inst), report) in arrivals.iter().zip(&instances).zip(solved) {
        let (decision, infeasible) = match report {
            Ok(r) => (r.decision, false),
            Err(Error::Infeasible { .. }) => {
                let b = rec.broadcaster_region;
                let mut dec = PlacementDecision::broadcaster_only(n, b);
                dec.serve = inst.demand.viewer_regions().map(|w| (w, b)).collect();
                (dec, true)
            }
            Err(e) => return Err(e),
        };
        let cost = video_cost(inst, &decision, prices)?;
        metrics.storage_cost += cost.storage;
        metrics.migration_cost += cost.migration;
        metrics.serving_cost += cost.serving;
        metrics.infeasible += usize::from(infeasible);

        if ledger.active.contains_key(&rec.video_id) {
            return Err(Error::InvalidConfig(format!(
                "video {} is already active",
                rec.video_id
            )));
        }
        ledger.active.insert(
            rec.video_id.clone(),
            ActiveVideo {
                decision: decision.clone(),
                size_gb: rec.size_gb,
                expires_at: period + rec.duration_periods,
            },
        );
        outcomes.push(VideoOutcome {
            video_id: rec.video_id.clone(),
            period,
            broadcaster_region: rec.broadcaster_region,
            predicted: inst.demand.clone(),
            decision,
            infeasible,
        });
    }
    ledger.resync_storage();

    metrics.network_cost = metrics.storage_cost + metrics.migration_cost + metrics.serving_cost;
    metrics.carried_storage_cost = carried_storage_cost;
    metrics.hourly_total = metrics.network_cost + carried_storage_cost;

    let (local, assigned) = outcomes
        .iter()
        .filter(|o| !o.infeasible)
        .map(|o| o.decision.hits())
        .fold((0, 0), |(l, t), (a, b)| (l + a, t + b));
    metrics.hits_pct = (assigned > 0).then(|| 100.0 * local as f64 / assigned as f64);

    let rtt = &regions.rtt;
    let feasible = || outcomes.iter().zip(arrivals).filter(|(o, _)| !o.infeasible);
    metrics.avg_latency_predicted = pooled_latency(
        feasible().map(|(o, _)| (&o.predicted, o.decision.serve.clone())),
        rtt,
    );
    if arrivals.iter().all(|r| r.actual_viewers.is_some()) {
        metrics.avg_latency_actual = pooled_latency(
            feasible().map(|(o, r)| {
                let actual = r.actual_viewers.as_ref().expect("checked above");
                (actual, serve_actual(&o.decision, actual, rtt))
            }),
            rtt,
        );
    }
    Ok((ledger, metrics, outcomes))
}

/// Runs periods `1..=cfg.periods` of `trace` at one delay threshold. Records
/// starting after the last period are ignored.
pub fn run(
    trace: &Trace,
    source: &DemandSource,
    regions: &RegionSet,
    cfg: &SimConfig,
    threshold_ms: f64,
) -> Result<SimResult> {
    cfg.validate(regions.len())?;
    if trace.header.region_count != regions.len() {
        return Err(Error::DimensionMismatch {
            what: "trace regions",
            expected: regions.len(),
            actual: trace.header.region_count,
        });
    }
    if trace
        .records
        .windows(2)
        .any(|w| w[1].start_period < w[0].start_period)
    {
        return Err(Error::InvalidConfig(
            "trace is not sorted by start_period".into(),
        ));
    }
    let mut ledger = PeriodLedger::new(regions.len());
    let mut periods = Vec::with_capacity(cfg.periods as usize);
    let mut videos = Vec::new();
    for t in 1..=cfg.periods {
        let (next, metrics, outcomes) = step(
            ledger,
            trace.arrivals(t),
            source,
            regions,
            cfg,
            threshold_ms,
        )?;
        ledger = next;
        periods.push(metrics);
        videos.extend(outcomes);
    }
    let system_total_cost = periods.iter().map(|m| m.hourly_total).sum();
    Ok(SimResult {
        threshold_ms,
        periods,
        videos,
        system_total_cost,
    })
}

/// One [`run`] per configured threshold, in configuration order.
pub fn run_sweep(
    trace: &Trace,
    source: &DemandSource,
    regions: &RegionSet,
    cfg: &SimConfig,
) -> Result<Vec<SimResult>> {
    cfg.thresholds_ms
        .iter()
        .map(|&d| run(trace, source, regions, cfg, d))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyGap {
    pub period: u32,
    pub predicted_ms: Option<f64>,
    pub actual_ms: Option<f64>,
    pub threshold_ms: f64,
    /// Pooled actual latency above the threshold.
    pub exceeded: bool,
    /// Videos whose own actual average delay is above the threshold.
    pub videos_over_threshold: usize,
}

/// Replays committed decisions against the recorded actual viewers.
pub fn latency_gap_report(
    result: &SimResult,
    trace: &Trace,
    regions: &RegionSet,
) -> Result<Vec<LatencyGap>> {
    let by_id: BTreeMap<&str, &VideoRecord> = trace
        .records
        .iter()
        .map(|r| (r.video_id.as_str(), r))
        .collect();
    let rtt = &regions.rtt;
    let mut gaps = Vec::with_capacity(result.periods.len());
    for m in &result.periods {
        let outcomes: Vec<&VideoOutcome> = result
            .videos
            .iter()
            .filter(|o| o.period == m.period && !o.infeasible)
            .collect();
        let mut pairs = Vec::with_capacity(outcomes.len());
        let mut over = 0;
        for o in &outcomes {
            let actual = by_id
                .get(o.video_id.as_str())
                .and_then(|r| r.actual_viewers.as_ref())
                .ok_or_else(|| Error::MissingActuals(o.video_id.clone()))?;
            let serve = serve_actual(&o.decision, actual, rtt);
            if actual.total() > 0
                && average_delay(actual, &serve, rtt)
                    > result.threshold_ms + crate::optimizer::DELAY_SLACK_MS
            {
                over += 1;
            }
            pairs.push((actual, serve));
        }
        let predicted_ms = pooled_latency(
            outcomes
                .iter()
                .map(|o| (&o.predicted, o.decision.serve.clone())),
            rtt,
        );
        let actual_ms = pooled_latency(pairs.into_iter(), rtt);
        gaps.push(LatencyGap {
            period: m.period,
            predicted_ms,
            actual_ms,
            threshold_ms: result.threshold_ms,
            exceeded: actual_ms
                .is_some_and(|a| a > result.threshold_ms + crate::optimizer::DELAY_SLACK_MS),
            videos_over_threshold: over,
        });
    }
    Ok(gaps)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_metrics_csv(path: &Path, results: &[SimResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "threshold_ms",
        "period",
        "storage_cost",
        "migration_cost",
        "serving_cost",
        "network_cost",
        "carried_storage_cost",
        "hourly_total",
        "hits_pct",
        "pred_latency_ms",
        "actual_latency_ms",
        "arrivals",
        "infeasible",
    ])?;
    for r in results {
        for m in &r.periods {
            w.write_record([
                r.threshold_ms.to_string(),
                m.period.to_string(),
                m.storage_cost.to_string(),
                m.migration_cost.to_string(),
                m.serving_cost.to_string(),
                m.network_cost.to_string(),
                m.carried_storage_cost.to_string(),
                m.hourly_total.to_string(),
                opt(m.hits_pct),
                opt(m.avg_latency_predicted),
                opt(m.avg_latency_actual),
                m.arrivals.to_string(),
                m.infeasible.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_latency_csv(path: &Path, gaps: &[LatencyGap]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "threshold_ms",
        "period",
        "pred_latency_ms",
        "actual_latency_ms",
        "exceeded",
        "videos_over_threshold",
    ])?;
    for g in gaps {
        w.write_record([
            g.threshold_ms.to_string(),
            g.period.to_string(),
            opt(g.predicted_ms),
            opt(g.actual_ms),
            g.exceeded.to_string(),
            g.videos_over_threshold.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Per-threshold totals written to `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSummary {
    pub threshold_ms: f64,
    pub system_total_cost: f64,
    pub network_cost: f64,
    pub carried_storage_cost: f64,
    pub mean_hits_pct: Option<f64>,
    pub videos: usize,
    pub infeasible_videos: usize,
    pub max_pred_latency_ms: Option<f64>,
    pub max_actual_latency_ms: Option<f64>,
}

impl ThresholdSummary {
    pub fn from_result(r: &SimResult) -> Self {
        let max =
            |f: fn(&PeriodMetrics) -> Option<f64>| r.periods.iter().filter_map(f).reduce(f64::max);
        let hits: Vec<f64> = r.periods.iter().filter_map(|m| m.hits_pct).collect();
        ThresholdSummary {
            threshold_ms: r.threshold_ms,
            system_total_cost: r.system_total_cost,
            network_cost: r.periods.iter().map(|m| m.network_cost).sum(),
            carried_storage_cost: r.periods.iter().map(|m| m.carried_storage_cost).sum(),
            mean_hits_pct: (!hits.is_empty()).then(|| hits.iter().sum::<f64>() / hits.len() as f64),
            videos: r.videos.len(),
            infeasible_videos: r.videos.iter().filter(|v| v.infeasible).count(),
            max_pred_latency_ms: max(|m| m.avg_latency_predicted),
            max_actual_latency_ms: max(|m| m.avg_latency_actual),
        }
    }
}
