"""Quick end-to-end check of the livealloc_py extension module.

Build and run:

    cargo build --release -p livealloc-py --features extension-module
    cp target/release/liblivealloc_py.so python/livealloc_py.so
    python3 python/smoke_test.py
"""

import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import livealloc_py as la

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def read(*parts):
    with open(os.path.join(*parts)) as f:
        return f.read()


def main():
    regions = la.RegionSet.default()
    assert len(regions) == 10, regions
    assert regions.nearest(48.86, 2.35) == regions.names.index("Paris")
    assert math.isclose(la.haversine_km(52.52, 13.405, 48.8566, 2.3522), 877.4633259175, rel_tol=1e-9)

    prices = la.CostParams.default()
    demand = [0] * 10
    demand[2] = 40
    demand[5] = 15
    tight = la.solve_video(regions, prices, 2, demand, 0.3, 8.8)
    loose = la.solve_video(regions, prices, 2, demand, 0.3, 371.0)
    assert tight["serve"] == {2: 2, 5: 5}, tight
    assert loose["total_cost"] <= tight["total_cost"]

    three = os.path.join(ROOT, "crates", "core", "tests", "fixtures", "three")
    small = la.RegionSet.from_json(read(three, "regions.json"), read(three, "rtt.json"))
    small_prices = la.CostParams.from_json(read(three, "prices.json"))
    for d in (8.8, 60.0, 120.0, 371.0):
        exact = la.solve_video(small, small_prices, 0, [5, 12, 30], 0.4, d)
        brute = la.solve_video(small, small_prices, 0, [5, 12, 30], 0.4, d, brute_force=True)
        assert math.isclose(exact["total_cost"], brute["total_cost"], rel_tol=1e-12), d

    try:
        la.solve_video(regions, prices, 2, demand, 0.3, 5.0)
    except la.InfeasibleError as e:
        assert e.min_avg_delay_ms > 5.0
    else:
        raise AssertionError("5 ms should be infeasible")

    assert la.r_squared([1.0, 2.0, 3.0], [1.0, 2.0, 4.0]) == 0.5

    trace = la.Trace.generate(regions, periods=6, seed=1)
    model = la.Model.train(trace, regions, n_trees=10, seed=1)
    assert model.score(trace, regions) > 0.5
    with tempfile.TemporaryDirectory() as d:
        trace.save(os.path.join(d, "trace.ndjson"))
        model.save(os.path.join(d, "model.json"))
        again = la.Model.load(os.path.join(d, "model.json"))
        reloaded = la.Trace.load(os.path.join(d, "trace.ndjson"))
        assert again.predict(reloaded, regions) == model.predict(trace, regions)

    results = la.simulate(trace, regions, prices, model=model, periods=6)
    costs = [r["system_total_cost"] for r in results]
    assert [r["threshold_ms"] for r in results] == la.DEFAULT_THRESHOLDS_MS
    assert costs[-1] <= costs[0], costs
    for r in results:
        assert math.isclose(sum(p["hourly_total"] for p in r["periods"]), r["system_total_cost"], rel_tol=1e-9)

    print(f"ok: {len(trace)} videos, costs {', '.join(f'{c:.2f}' for c in costs)}")


if __name__ == "__main__":
    main()
