"""Northwest plans, Monge checks and quantile couplings against LP and closed forms."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

from rdbp.dists import Exponential, LogNormal, Uniform
from rdbp.equilibrium import solve_equilibrium
from rdbp.society import SubPopulationSpec
from rdbp.transport import (DiscreteMarginal, TransportError, admissible_demand, brute_force_optimal,
                            check_monge, control_search, discretize, distance_cost, northwest_plan,
                            northwest_traversal, plan_cost, quantile_coupling_cost)


def lp_optimum(a, b, cost):
    """Reference optimum from scipy's HiGHS linear program."""
    m, n = cost.shape
    A_eq, b_eq = [], []
    for i in range(m):
        row = np.zeros((m, n)); row[i, :] = 1; A_eq.append(row.ravel()); b_eq.append(a[i])
    for j in range(n):
        col = np.zeros((m, n)); col[:, j] = 1; A_eq.append(col.ravel()); b_eq.append(b[j])
    res = optimize.linprog(cost.ravel(), A_eq=np.array(A_eq), b_eq=b_eq, bounds=(0, None), method="highs")
    assert res.success
    return res.fun


def random_monge_instance(rng):
    m = int(rng.integers(1, 5))
    n = int(rng.integers(1, 9 - m))
    total = int(rng.integers(max(m, n), 15))
    a = rng.multinomial(total - m, np.ones(m) / m) + 1
    b = rng.multinomial(total - n, np.ones(n) / n) + 1
    x = np.sort(rng.uniform(0, 3, m))
    y = np.sort(rng.uniform(0, 3, n))
    return a.astype(float), b.astype(float), distance_cost(x, y, 2.0)


def test_hand_instance():
    plan = northwest_plan([2, 1], [1, 2], [[0, 1], [1, 0]])
    np.testing.assert_array_equal(plan.flows, [[1, 1], [0, 1]])
    assert plan.total_cost == 1.0 and plan.sparsity == 3
    assert brute_force_optimal([2, 1], [1, 2], [[0, 1], [1, 0]]) == 1.0


def test_monge_check():
    x = np.array([0.0, 1.0, 2.5])
    assert check_monge(distance_cost(x, x, 2.0))
    assert check_monge(distance_cost(x, x, 1.0))
    assert not check_monge(distance_cost(x, x[::-1], 2.0))
    assert check_monge([[1.0]])


def test_random_monge_instances_match_lp_and_brute_force():
    rng = np.random.default_rng(8)
    for _ in range(60):
        a, b, c = random_monge_instance(rng)
        assert check_monge(c, 1e-12)
        plan = northwest_plan(a, b, c)
        best = brute_force_optimal(a, b, c)
        assert plan.total_cost == pytest.approx(best, abs=1e-9)
        assert best == pytest.approx(lp_optimum(a, b, c), abs=1e-7)
        cum = np.cumsum(np.cumsum(plan.flows, axis=0), axis=1)
        np.testing.assert_array_equal(cum, np.minimum.outer(np.cumsum(a), np.cumsum(b)))
        np.testing.assert_allclose(plan.flows.sum(axis=1), a, atol=1e-9)
        np.testing.assert_allclose(plan.flows.sum(axis=0), b, atol=1e-9)
        np.testing.assert_array_equal(northwest_traversal(a, b), plan.flows)


def test_northwest_is_not_optimal_without_monge():
    c = np.array([[5.0, 0.0], [0.0, 5.0]])
    assert not check_monge(c)
    assert northwest_plan([1, 1], [1, 1], c).total_cost == 10.0
    assert brute_force_optimal([1, 1], [1, 1], c) == 0.0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.01, 5), min_size=1, max_size=6), st.lists(st.floats(0.01, 5), min_size=1, max_size=6))
def test_plan_is_feasible_after_normalizing(a, b):
    plan = northwest_plan(a, b, normalize=True)
    assert np.all(plan.flows >= 0)
    np.testing.assert_allclose(plan.flows.sum(axis=1), a, atol=1e-9)
    np.testing.assert_allclose(plan.flows.sum(axis=0), np.asarray(b) * sum(a) / sum(b), atol=1e-9)
    assert plan.sparsity <= len(a) + len(b) - 1


def test_input_validation():
    with pytest.raises(TransportError):
        northwest_plan([1, 2], [1, 1])
    with pytest.raises(TransportError):
        DiscreteMarginal((1.0, -1.0))
    with pytest.raises(TransportError):
        brute_force_optimal([1] * 5, [1] * 4, np.zeros((5, 4)))
    with pytest.raises(TransportError):
        brute_force_optimal([0.5, 0.5], [1.0], np.zeros((2, 1)))
    with pytest.raises(TransportError):
        plan_cost(np.ones((1, 1)), [[-1.0]])


@pytest.mark.parametrize("src,dst,p,exact", [
    (Uniform(0, 1), Uniform(0, 2), 2.0, 1.0 / 3.0),  # int u^2 du
    (Uniform(0, 1), Uniform(0, 2), 1.0, 0.5),
    (Uniform(0, 1), Uniform(1, 2), 2.0, 1.0),  # pure shift
    (Exponential(1.0), Exponential(2.0), 2.0, 0.5),  # E[(X/2)^2] with X ~ Exp(1)
    (LogNormal(0.0, 0.5), LogNormal(0.3, 0.5), 1.0, math.exp(0.125) * (math.exp(0.3) - 1)),
])
def test_quantile_cost_closed_forms(src, dst, p, exact):
    assert quantile_coupling_cost(src, dst, p) == pytest.approx(exact, abs=1e-6)


def test_quantile_cost_identity_and_symmetry():
    assert quantile_coupling_cost(Exponential(1.0), Exponential(1.0)) == 0.0
    a = quantile_coupling_cost(Uniform(0, 1), Exponential(1.0))
    assert a == pytest.approx(quantile_coupling_cost(Exponential(1.0), Uniform(0, 1)), rel=1e-14)
    with pytest.raises(TransportError):
        quantile_coupling_cost(Uniform(0, 1), Uniform(0, 2), p=0.5)


def test_discretization_is_barycentric():
    d = discretize(Uniform(0, 1), 4)
    assert d.labels == pytest.approx((0.125, 0.375, 0.625, 0.875))
    assert sum(d.masses) == pytest.approx(1.0)
    e = discretize(Exponential(1.0), 200)
    assert np.dot(e.masses, e.labels) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("src,dst,p", [(Uniform(0, 1), Uniform(0, 2), 2.0),
                                       (Exponential(1.0), Exponential(2.0), 2.0),
                                       (LogNormal(0.0, 0.5), Exponential(1.0), 2.0)])
def test_discrete_plan_approximates_quantile_cost(src, dst, p):
    a, b = discretize(src, 200), discretize(dst, 200)
    c = distance_cost(a.labels, b.labels, p)
    assert check_monge(c, 1e-12)
    discrete = northwest_plan(a, b, c).total_cost
    assert discrete == pytest.approx(quantile_coupling_cost(src, dst, p), rel=0.01)


def test_admissible_demand_and_control(worked):
    spec_h, spec_i = worked
    d = admissible_demand(Uniform(0, 1), spec_h, spec_i)
    assert d is not None and d.effective_mean > 1
    cands = [({"upper": t}, Uniform(0, t)) for t in np.linspace(0.4, 2.0, 9)]
    ranked = control_search(spec_h.claims, cands, spec_h, spec_i)
    assert ranked
    costs = [r.cost for r in ranked]
    assert costs == sorted(costs)
    for r in ranked:
        law = Uniform(0, r.params["upper"])
        assert r.cost == quantile_coupling_cost(spec_h.claims, law)
        sols = solve_equilibrium(SubPopulationSpec("h", spec_h.offspring, spec_h.resource, law), spec_i)
        assert any(s.classification == "Strict" and s.tau == r.demand.tau_tilde for s in sols)
    with pytest.raises(TransportError):
        control_search(spec_h.claims, [], spec_h, spec_i)
