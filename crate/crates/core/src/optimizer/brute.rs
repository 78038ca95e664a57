use rand::Rng;

use super::{
    check_delay, finish, min_achievable_delay, SolveReport, VideoInstance, DELAY_SLACK_MS,
};
use crate::domain::{
    validate_decision, CostParams, DemandVector, PlacementDecision, Region, RegionId, RegionSet,
    RttMatrix,
};
use crate::error::{Error, Result};

pub const MAX_BRUTE_REGIONS: usize = 6;
pub const MAX_BRUTE_VIEWER_REGIONS: usize = 5;

/// Exhaustive search over every allocation subset containing the broadcaster
/// site and every serving map into it, with exact delays. Exists to check
/// [`super::solve_video`]; cost and delay are computed here from the raw
/// prices rather than through the solver's tables.
pub fn brute_force_solve(
    inst: &VideoInstance,
    regions: &RegionSet,
    prices: &CostParams,
    threshold_ms: f64,
) -> Result<SolveReport> {
    let n = regions.len();
    let viewers: Vec<RegionId> = inst.demand.viewer_regions().collect();
    if n > MAX_BRUTE_REGIONS || viewers.len() > MAX_BRUTE_VIEWER_REGIONS {
        return Err(Error::InstanceTooLarge(format!(
            "{n} regions and {} viewer regions (limits {MAX_BRUTE_REGIONS} and {MAX_BRUTE_VIEWER_REGIONS})",
            viewers.len()
        )));
    }
    super::check_instance(inst, n)?;
    let b = inst.broadcaster_region;
    let k = inst.size_gb;
    let rtt = &regions.rtt;
    let total: u64 = inst.demand.total();

    let mut best: Option<(f64, u32, Vec<RegionId>)> = None;
    for mask in 0..1u32 << n {
        if mask >> b & 1 == 0 {
            continue;
        }
        let sites: Vec<RegionId> = (0..n).filter(|r| mask >> r & 1 == 1).collect();
        let mut fixed = 0.0;
        for &a in &sites {
            fixed += prices.alpha[a] * k;
            if a != b || prices.charge_broadcaster_migration {
                fixed += prices.eta[b] * k;
            }
        }
        // odometer over serving maps viewers -> sites
        let mut idx = vec![0usize; viewers.len()];
        loop {
            let mut serving = 0.0;
            let mut weighted = 0.0;
            for (&w, &i) in viewers.iter().zip(&idx) {
                let p = inst.demand.get(w) as f64;
                serving += prices.omega[sites[i]] * k * p;
                weighted += p * rtt.get(sites[i], w);
            }
            let feasible = total == 0 || weighted / total as f64 <= threshold_ms + DELAY_SLACK_MS;
            let cost = fixed + serving;
            if feasible && best.as_ref().is_none_or(|(c, _, _)| cost < *c) {
                best = Some((
                    cost,
                    mask,
                    viewers.iter().zip(&idx).map(|(_, &i)| sites[i]).collect(),
                ));
            }

            let mut c = 0;
            while c < idx.len() {
                idx[c] += 1;
                if idx[c] < sites.len() {
                    break;
                }
                idx[c] = 0;
                c += 1;
            }
            if c == idx.len() {
                break;
            }
        }
    }

    let Some((_, mask, serve_from)) = best else {
        return Err(Error::Infeasible {
            threshold_ms,
            min_avg_delay_ms: min_achievable_delay(&inst.demand, rtt),
        });
    };
    let decision = PlacementDecision {
        allocate: (0..n).map(|r| mask >> r & 1 == 1).collect(),
        serve: viewers.iter().copied().zip(serve_from).collect(),
    };
    finish(inst, decision, prices, rtt)
}

/// A random small instance for solver/oracle comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomCase {
    pub regions: RegionSet,
    pub prices: CostParams,
    pub inst: VideoInstance,
    pub threshold_ms: f64,
}

/// Draws 2..=`max_regions` regions with a random symmetric RTT matrix, random
/// prices, up to `max_viewer_regions` regions with viewers and a threshold
/// spread around the achievable delay range (some draws are infeasible).
pub fn random_case<R: Rng>(
    rng: &mut R,
    max_regions: usize,
    max_viewer_regions: usize,
) -> RandomCase {
    let n = rng.random_range(2..=max_regions.max(2));
    let regions: Vec<Region> = (0..n)
        .map(|i| Region {
            id: i,
            name: format!("r{i}"),
            lat: 0.0,
            lon: i as f64,
        })
        .collect();
    let mut d = vec![vec![0.0; n]; n];
    #[allow(clippy::needless_range_loop)]
    for i in 0..n {
        d[i][i] = rng.random_range(5.0..15.0);
        for j in (i + 1)..n {
            let v = rng.random_range(1.0..200.0);
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    let rtt = RttMatrix::new(d).expect("valid random rtt");
    let prices = CostParams {
        alpha: (0..n).map(|_| rng.random_range(0.0..0.05)).collect(),
        eta: (0..n).map(|_| rng.random_range(0.0..0.1)).collect(),
        omega: (0..n).map(|_| rng.random_range(0.01..0.3)).collect(),
        tiers: None,
        charge_broadcaster_migration: rng.random_bool(0.2),
    };
    let mut demand = vec![0u64; n];
    let k = rng.random_range(0..=max_viewer_regions.min(n));
    for w in rand::seq::index::sample(rng, n, k) {
        demand[w] = rng.random_range(1..50);
    }
    let inst = VideoInstance {
        broadcaster_region: rng.random_range(0..n),
        demand: DemandVector::new(demand),
        size_gb: rng.random_range(0.05..1.0),
    };
    let threshold_ms = rng.random_range(0.0..150.0);
    RandomCase {
        regions: RegionSet::new(regions, rtt).expect("valid random regions"),
        prices,
        inst,
        threshold_ms,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Agreement {
    pub infeasible: bool,
    pub cost: Option<f64>,
}

/// Solves `case` both ways and checks they agree: equal cost within 1e-9
/// relative, both decisions structurally valid and within the threshold, or
/// both infeasible.
pub fn compare_with_brute_force(case: &RandomCase) -> std::result::Result<Agreement, String> {
    let solved = super::solve_video(
        &case.inst,
        &case.regions,
        &case.prices,
        case.threshold_ms,
        &Default::default(),
    );
    let brute = brute_force_solve(&case.inst, &case.regions, &case.prices, case.threshold_ms);
    match (solved, brute) {
        (Ok(s), Ok(b)) => {
            for (who, r) in [("solver", &s), ("oracle", &b)] {
                let valid =
                    validate_decision(&r.decision, &case.inst.demand, case.inst.broadcaster_region)
                        .map_err(|e| e.to_string())?;
                let (_, ok) = check_delay(
                    &case.inst,
                    &r.decision,
                    &case.regions.rtt,
                    case.threshold_ms,
                );
                if !valid || !ok {
                    return Err(format!("{who} decision invalid: {:?}", r.decision));
                }
            }
            let (cs, cb) = (s.total_cost(), b.total_cost());
            if (cs - cb).abs() > 1e-9 * cs.abs().max(cb.abs()) + 1e-15 {
                return Err(format!("cost mismatch: solver {cs} vs oracle {cb}"));
            }
            Ok(Agreement {
                infeasible: false,
                cost: Some(cs),
            })
        }
        (Err(Error::Infeasible { .. }), Err(Error::Infeasible { .. })) => Ok(Agreement {
            infeasible: true,
            cost: None,
        }),
        (s, b) => Err(format!(
            "outcome mismatch: solver {:?} vs oracle {:?}",
            s.map(|r| r.total_cost()),
            b.map(|r| r.total_cost())
        )),
    }
}
