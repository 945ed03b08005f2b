"""Trajectory bookkeeping, capping, extinction and Monte Carlo summaries."""
import numpy as np
import pytest

from rdbp.dists import ConstantResource, Deterministic, PointMass, Poisson, Uniform
from rdbp.sim import (AllSurvived, Extinct, GenerationRecord, balance_residual, effective_growth,
                      monte_carlo, ratio_recursion_check, run_trajectory)
from rdbp.society import SubPopulationSpec

from conftest import worked_specs


def test_same_seed_same_trajectory(worked):
    a = run_trajectory(worked, (200, 200), horizon=20, seed=3)
    b = run_trajectory(worked, (200, 200), horizon=20, seed=3)
    c = run_trajectory(worked, (200, 200), horizon=20, seed=4)
    assert a.trace == b.trace
    assert a.trace != c.trace


def test_record_chaining_and_invariants(worked):
    out = run_trajectory(worked, (300, 300), horizon=15, seed=1)
    assert isinstance(out.status, AllSurvived)
    for prev, nxt in zip(out.trace, out.trace[1:]):
        if nxt.capped:
            assert sum(nxt.counts) == 10**6 and sum(prev.served) > 10**6
        else:
            assert nxt.counts == prev.served
    for r in out.trace:
        assert r.consumed <= r.resources_total + 1e-9
        assert all(s <= d for s, d in zip(r.served, r.descendants))
        assert 0 < r.threshold <= r.max_claim
        # the cheapest unserved claim would not have fit
        assert r.resources_total - r.consumed < r.max_claim or r.served == r.descendants
    assert out.final_counts == out.trace[-1].served
    assert out.final_ratio == out.final_counts[1] / out.final_counts[0]


def test_no_resources_means_extinction_next_generation():
    specs = [SubPopulationSpec("h", Poisson(2.0), ConstantResource(0.0), Uniform(0.1, 1.0)),
             SubPopulationSpec("i", Poisson(2.0), ConstantResource(0.0), Uniform(0.1, 1.0))]
    out = run_trajectory(specs, (50, 50), horizon=10, seed=0)
    assert out.status == Extinct("h", 1)
    assert out.final_counts == (0, 0)
    assert len(out.trace) == 1
    assert not out.jointly_survived and out.final_ratio is None


def test_initially_empty_subpopulation_is_extinct_at_zero():
    specs = worked_specs()
    out = run_trajectory(specs, (10, 0), horizon=3, seed=0)
    assert out.status == Extinct("i", 0)


def test_downsampling_keeps_exactly_the_cap():
    specs = [SubPopulationSpec("h", Deterministic(2), ConstantResource(1.0), PointMass(0.1)),
             SubPopulationSpec("i", Deterministic(2), ConstantResource(1.0), PointMass(0.1))]
    out = run_trajectory(specs, (30, 20), horizon=6, seed=2, population_cap=120)
    capped = [r for r in out.trace if r.capped]
    assert capped and out.cap_generation == capped[0].t
    assert all(sum(r.counts) == 120 for r in capped)
    assert isinstance(out.status, AllSurvived)


def test_halt_mode_stops_at_cap():
    specs = [SubPopulationSpec("h", Deterministic(2), ConstantResource(1.0), PointMass(0.1))]
    out = run_trajectory(specs, (10,), horizon=50, seed=0, population_cap=100, cap_mode="halt")
    assert out.status == AllSurvived(50, halted_at_cap=True)
    assert out.final_counts == (160,)
    assert len(out.trace) == 4


def test_argument_validation(worked):
    with pytest.raises(ValueError):
        run_trajectory(worked, (1, 1), horizon=0)
    with pytest.raises(ValueError):
        run_trajectory(worked, (1,), horizon=1)
    with pytest.raises(ValueError):
        run_trajectory(worked, (10, 10), population_cap=5)
    with pytest.raises(ValueError):
        run_trajectory(worked, (1, 1), cap_mode="drop")


def test_monte_carlo_matches_individual_runs(worked):
    mc = monte_carlo(worked, (100, 100), horizon=12, runs=6, base_seed=40, keep_traces=True)
    for k, o in enumerate(mc.outcomes):
        ref = run_trajectory(worked, (100, 100), horizon=12, seed=40 + k)
        assert o.seed == 40 + k and o.trace == ref.trace
    alive = mc.surviving()
    assert mc.joint_survival_fraction == len(alive) / 6
    if alive:
        ratios = sorted(o.final_ratio for o in alive)
        assert mc.conditional_ratio_stats["median"] == pytest.approx(float(np.median(ratios)))
        assert mc.conditional_ratio_stats["count"] == len(alive)


def test_monte_carlo_parallel_equals_serial(worked):
    a = monte_carlo(worked, (100, 100), horizon=10, runs=4, base_seed=1, keep_traces=True, workers=1)
    b = monte_carlo(worked, (100, 100), horizon=10, runs=4, base_seed=1, keep_traces=True, workers=2)
    assert [o.trace for o in a.outcomes] == [o.trace for o in b.outcomes]


def _record(counts, desc, threshold, served, consumed, resources):
    return GenerationRecord(0, counts, desc, resources, threshold, served, consumed, threshold)


def test_balance_residual_hand_value():
    r = _record((10, 5), (20, 10), 0.5, (8, 4), 3.9, 4.0)
    assert balance_residual(r) == pytest.approx(0.01)
    with pytest.raises(ValueError):
        balance_residual(_record((0, 5), (0, 10), 0.5, (0, 4), 1.0, 1.0))


def test_ratio_recursion_hand_value(worked):
    rt = _record((100, 100), (200, 300), 0.5, (100, 118), 0.0, 0.0)
    rn = GenerationRecord(1, (100, 118), (0, 0), 0.0, 0.0, (0, 0), 0.0, 0.0)
    wh = 200 * 0.5
    wi = 300 * (1 - np.exp(-0.5))
    want = abs(1 / (1 + 1.18) - wh / (wh + wi))
    assert ratio_recursion_check(rt, rn, worked) == pytest.approx(want, rel=1e-12)


def test_recursion_residual_shrinks_with_population(worked):
    def median_residual(n, seed):
        out = run_trajectory(worked, (n, n), horizon=2, seed=seed)
        return ratio_recursion_check(out.trace[0], out.trace[1], worked)
    small = np.median([median_residual(1000, s) for s in range(30)])
    large = np.median([median_residual(100_000, s) for s in range(30)])
    assert large < small / 2


def test_effective_growth(worked):
    assert effective_growth(worked[0], 0.5) == pytest.approx(1.0)
    assert effective_growth(worked[1], 1.0) == pytest.approx(3 * (1 - np.exp(-1)))
