"""Weakest-first allocation against a brute-force reference."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rdbp.dists import ConstantResource, Deterministic, PointMass, Poisson, Uniform
from rdbp.society import Claimant, SubPopulationSpec, allocate_weakest_first, step_generation


def reference_allocation(claimants, budget, n_subpops):
    """Literal loop: serve in (claim, subpop, birth) order until the pool falls short."""
    served = [0] * n_subpops
    left, threshold, consumed = budget, 0.0, 0.0
    for c in sorted(claimants, key=lambda c: c.order_key):
        if c.claim > left:
            break
        left -= c.claim
        consumed += c.claim
        threshold = c.claim
        served[c.subpop_index] += 1
    return served, threshold, consumed


def test_hand_example():
    cl = [Claimant(0.5, 0, 0), Claimant(0.2, 1, 0), Claimant(0.4, 0, 1), Claimant(0.9, 1, 1)]
    res = allocate_weakest_first(cl, 1.2)
    assert res.served_counts == (2, 1)
    assert res.threshold == 0.5
    assert res.consumed == pytest.approx(1.1)
    assert res.total_served == 3


def test_stops_at_first_unaffordable_claim():
    # 0.6 does not fit after 0.5; the later small claims are not reached either
    cl = [Claimant(x, 0, k) for k, x in enumerate([0.5, 0.6, 0.6])]
    assert allocate_weakest_first(cl, 1.0).served_counts == (1,)


def test_empty_and_zero_budget():
    assert allocate_weakest_first([], 3.0, n_subpops=2).served_counts == (0, 0)
    res = allocate_weakest_first([Claimant(0.1, 0, 0)], 0.0)
    assert res.served_counts == (0,)
    with pytest.raises(ValueError):
        allocate_weakest_first([Claimant(0.1, 0, 0)], -1.0)
    with pytest.raises(ValueError):
        allocate_weakest_first([Claimant(-0.1, 0, 0)], 1.0)


claim_lists = st.lists(st.tuples(st.sampled_from([0.0, 0.25, 0.5, 1.0]) | st.floats(0, 2), st.integers(0, 2)),
                       max_size=40)


@settings(max_examples=300, deadline=None)
@given(claim_lists, st.floats(0, 20))
def test_matches_reference(pairs, budget):
    births = [0, 0, 0]
    cl = []
    for x, k in pairs:
        cl.append(Claimant(x, k, births[k]))
        births[k] += 1
    res = allocate_weakest_first(cl, budget, n_subpops=3)
    served, threshold, consumed = reference_allocation(cl, budget, 3)
    assert list(res.served_counts) == served
    assert res.threshold == threshold
    assert res.consumed == pytest.approx(consumed, abs=1e-12)
    assert res.consumed <= budget + 1e-12


def test_ties_break_by_subpop_then_birth():
    cl = [Claimant(1.0, 1, 0), Claimant(1.0, 0, 0), Claimant(1.0, 0, 1)]
    assert allocate_weakest_first(cl, 2.0).served_counts == (2, 0)
    assert allocate_weakest_first(cl, 3.0).served_counts == (2, 1)


def test_step_generation_deterministic_laws():
    specs = [SubPopulationSpec("a", Deterministic(2), ConstantResource(1.0), PointMass(0.3)),
             SubPopulationSpec("b", Deterministic(1), ConstantResource(0.0), PointMass(0.4))]
    step = step_generation((5, 4), specs, np.random.default_rng(0))
    # 10 claims of 0.3 and 4 of 0.4 against a pool of 5: all ten 0.3s (3.0), then five 0.4s would cost 2.0
    assert step.descendants == (10, 4)
    assert step.resources_total == 5.0
    assert step.next_counts == (10, 4)
    assert step.allocation.consumed == pytest.approx(4.6)
    assert step.max_claim == 0.4


def test_step_generation_zero_is_absorbing():
    spec = SubPopulationSpec("a", Poisson(2.0), ConstantResource(1.0), Uniform(0, 1))
    rng = np.random.default_rng(1)
    state = rng.bit_generator.state
    step = step_generation((0, 0), [spec, spec], rng)
    assert step.next_counts == (0, 0) and step.descendants == (0, 0)
    assert rng.bit_generator.state == state


def test_spec_validation():
    with pytest.raises(ValueError):
        SubPopulationSpec("x", Deterministic(0), ConstantResource(1.0), Uniform(0, 1))
    with pytest.raises(ValueError):
        step_generation((1,), [], np.random.default_rng(0))
