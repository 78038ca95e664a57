use approx::assert_relative_eq;
use livealloc::config::{default_cost_params, default_region_set};
use livealloc::domain::{
    validate_decision, CostParams, DemandVector, PlacementDecision, Region, RegionSet, RttMatrix,
};
use livealloc::error::Error;
use livealloc::optimizer::{
    brute_force_solve, check_delay, compare_with_brute_force, min_achievable_delay, random_case,
    solve_period, solve_video, SolveOptions, VideoInstance,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn line_of_three() -> RegionSet {
    let regions = (0..3)
        .map(|i| Region {
            id: i,
            name: format!("r{i}"),
            lat: 0.0,
            lon: i as f64,
        })
        .collect();
    let rtt = RttMatrix::new(vec![
        vec![10.0, 20.0, 90.0],
        vec![20.0, 10.0, 40.0],
        vec![90.0, 40.0, 10.0],
    ])
    .unwrap();
    RegionSet::new(regions, rtt).unwrap()
}

fn random_default_instance(rng: &mut ChaCha8Rng, n: usize) -> VideoInstance {
    let demand = (0..n)
        .map(|_| {
            if rng.random_bool(0.6) {
                rng.random_range(1..40)
            } else {
                0
            }
        })
        .collect();
    VideoInstance {
        broadcaster_region: rng.random_range(0..n),
        demand: DemandVector::new(demand),
        size_gb: rng.random_range(0.05..0.5),
    }
}

fn cost_at(inst: &VideoInstance, regions: &RegionSet, prices: &CostParams, d: f64) -> Option<f64> {
    match solve_video(inst, regions, prices, d, &SolveOptions::default()) {
        Ok(r) => Some(r.total_cost()),
        Err(Error::Infeasible { .. }) => None,
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn agrees_with_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut infeasible = 0;
    for i in 0..1000 {
        let case = random_case(&mut rng, 5, 4);
        let agreement = compare_with_brute_force(&case).unwrap_or_else(|e| panic!("case {i}: {e}"));
        infeasible += usize::from(agreement.infeasible);
    }
    // the draw covers both outcomes
    assert!(infeasible > 0 && infeasible < 1000);
}

#[test]
fn agrees_with_exhaustive_search_on_six_regions() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..200 {
        let case = random_case(&mut rng, 6, 5);
        compare_with_brute_force(&case).unwrap();
    }
}

#[test]
fn unbounded_threshold_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..300 {
        let mut case = random_case(&mut rng, 5, 4);
        case.threshold_ms = f64::INFINITY;
        let agreement = compare_with_brute_force(&case).unwrap();
        assert!(!agreement.infeasible);
    }
}

#[test]
fn cost_does_not_rise_as_the_threshold_relaxes() {
    let regions = default_region_set();
    let prices = default_cost_params();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let inst = random_default_instance(&mut rng, regions.len());
        let costs: Vec<Option<f64>> = [8.8, 60.0, 120.0, 171.0, 220.0, 371.0]
            .iter()
            .map(|&d| cost_at(&inst, &regions, &prices, d))
            .collect();
        for w in costs.windows(2) {
            match (w[0], w[1]) {
                (Some(a), Some(b)) => assert!(b <= a * (1.0 + 1e-12), "{a} -> {b}"),
                (Some(_), None) => panic!("feasible instance became infeasible"),
                _ => {}
            }
        }
    }
}

#[test]
fn intra_region_threshold_serves_everyone_locally() {
    let regions = default_region_set();
    let prices = default_cost_params();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let inst = random_default_instance(&mut rng, regions.len());
        let r = solve_video(&inst, &regions, &prices, 8.8, &SolveOptions::default()).unwrap();
        for (w, s) in &r.decision.serve {
            assert_eq!(w, s);
        }
        let (local, total) = r.decision.hits();
        assert_eq!(local, total);
    }
}

#[test]
fn pruning_never_changes_the_optimum() {
    let regions = default_region_set();
    let prices = default_cost_params();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let plain = SolveOptions {
        prune_dominated: false,
        ..SolveOptions::default()
    };
    for _ in 0..100 {
        let inst = random_default_instance(&mut rng, regions.len());
        let d = rng.random_range(8.8..200.0);
        let a = solve_video(&inst, &regions, &prices, d, &SolveOptions::default());
        let b = solve_video(&inst, &regions, &prices, d, &plain);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                assert_relative_eq!(a.total_cost(), b.total_cost(), max_relative = 1e-12)
            }
            (Err(Error::Infeasible { .. }), Err(Error::Infeasible { .. })) => {}
            (a, b) => panic!("{a:?} vs {b:?}"),
        }
    }
}

#[test]
fn scaling_every_price_scales_the_optimum() {
    let regions = default_region_set();
    let prices = default_cost_params();
    let doubled = prices.scaled(2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let inst = random_default_instance(&mut rng, regions.len());
        let d = rng.random_range(8.8..200.0);
        if let Some(c) = cost_at(&inst, &regions, &prices, d) {
            let c2 = cost_at(&inst, &regions, &doubled, d).unwrap();
            assert_relative_eq!(c2, 2.0 * c, max_relative = 1e-12);
        }
    }
}

#[test]
fn feasibility_flips_at_the_minimum_achievable_delay() {
    let regions = line_of_three();
    let prices = CostParams {
        alpha: vec![0.01; 3],
        eta: vec![0.02; 3],
        omega: vec![0.1; 3],
        tiers: None,
        charge_broadcaster_migration: false,
    };
    let inst = VideoInstance {
        broadcaster_region: 0,
        demand: DemandVector::new(vec![1, 2, 3]),
        size_gb: 1.0,
    };
    let floor = min_achievable_delay(&inst.demand, &regions.rtt);
    assert_eq!(floor, 10.0);
    assert!(solve_video(&inst, &regions, &prices, floor, &SolveOptions::default()).is_ok());
    match solve_video(
        &inst,
        &regions,
        &prices,
        floor - 1e-6,
        &SolveOptions::default(),
    ) {
        Err(Error::Infeasible {
            min_avg_delay_ms, ..
        }) => assert_eq!(min_avg_delay_ms, floor),
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        brute_force_solve(&inst, &regions, &prices, floor - 1e-6),
        Err(Error::Infeasible { .. })
    ));
}

#[test]
fn average_delay_hand_case() {
    // 2 viewers at 10 ms and 3 at 20 ms average to 16 ms
    let regions = line_of_three();
    let inst = VideoInstance {
        broadcaster_region: 0,
        demand: DemandVector::new(vec![2, 3, 0]),
        size_gb: 1.0,
    };
    let mut dec = PlacementDecision::broadcaster_only(3, 0);
    dec.serve.insert(0, 0);
    dec.serve.insert(1, 0);
    assert_eq!(check_delay(&inst, &dec, &regions.rtt, 16.0), (16.0, true));
    assert!(!check_delay(&inst, &dec, &regions.rtt, 15.9).1);
}

#[test]
fn zero_demand_keeps_only_the_broadcaster_copy() {
    let regions = default_region_set();
    let prices = default_cost_params();
    let inst = VideoInstance {
        broadcaster_region: 4,
        demand: DemandVector::zeros(10),
        size_gb: 0.5,
    };
    let r = solve_video(&inst, &regions, &prices, 8.8, &SolveOptions::default()).unwrap();
    assert_eq!(r.decision, PlacementDecision::broadcaster_only(10, 4));
    assert_eq!(r.total_cost(), prices.alpha[4] * 0.5);
    assert_eq!((r.migration_cost, r.serving_cost), (0.0, 0.0));
}

#[test]
fn period_batch_keeps_order_and_isolates_failures() {
    let regions = default_region_set();
    let prices = default_cost_params();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut videos: Vec<VideoInstance> = (0..20)
        .map(|_| random_default_instance(&mut rng, 10))
        .collect();
    videos[7].broadcaster_region = 99;
    let d = 120.0;
    let out = solve_period(&videos, &regions, &prices, d, &SolveOptions::default());
    assert_eq!(out.len(), videos.len());
    for (i, (v, r)) in videos.iter().zip(&out).enumerate() {
        if i == 7 {
            assert!(matches!(r, Err(Error::UnknownRegion { id: 99, .. })));
            continue;
        }
        let single = solve_video(v, &regions, &prices, d, &SolveOptions::default());
        let r = r.as_ref().unwrap();
        assert_eq!(r, single.as_ref().unwrap());
        assert!(validate_decision(&r.decision, &v.demand, v.broadcaster_region).unwrap());
        assert!(check_delay(v, &r.decision, &regions.rtt, d).1);
    }
}
