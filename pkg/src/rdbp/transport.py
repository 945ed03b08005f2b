"""Transport of a claim law into an admissible demand law.

Discrete side: transportation problems with row masses ``a`` and column
masses ``b``.  When the cost matrix has the Monge property, the northwest
corner plan, whose cumulative flows are ``min(A_i, B_j)`` for cumulative
masses ``A``, ``B``, is optimal.  Continuous side: the comonotone (quantile)
coupling, optimal for convex costs ``|x - y|^p`` on the line.

Monge property via adjacent 2x2 minors: if
``c[i, j] + c[i+1, j+1] <= c[i, j+1] + c[i+1, j]`` for all adjacent pairs,
summing these inequalities over a rectangle of minors telescopes to the same
inequality for any ``i < k``, ``j < l``.  The adjacent check is therefore
equivalent to the full quadrangle condition.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .dists import ClaimDistribution, is_absolutely_continuous
from .equilibrium import SearchDomain, solve_equilibrium
from .society import SubPopulationSpec

__all__ = [
    "TransportError",
    "DiscreteMarginal",
    "TransportPlan",
    "AdmissibleDemand",
    "check_monge",
    "northwest_plan",
    "northwest_traversal",
    "plan_cost",
    "brute_force_optimal",
    "quantile_coupling_cost",
    "discretize",
    "admissible_demand",
    "control_search",
]

MARGINAL_TOL = 1e-9


class TransportError(ValueError):
    pass


@dataclass(frozen=True)
class DiscreteMarginal:
    masses: tuple[float, ...]
    labels: tuple[float, ...] | None = None

    def __post_init__(self):
        masses = tuple(float(x) for x in self.masses)
        if not masses or any(x < 0 for x in masses) or sum(masses) <= 0:
            raise TransportError("marginal masses must be nonnegative with positive total")
        object.__setattr__(self, "masses", masses)
        if self.labels is not None:
            labels = tuple(float(x) for x in self.labels)
            if len(labels) != len(masses):
                raise TransportError("labels and masses differ in length")
            if any(b <= a for a, b in zip(labels, labels[1:])):
                raise TransportError("labels must be strictly ascending")
            object.__setattr__(self, "labels", labels)

    @property
    def total(self) -> float:
        return sum(self.masses)

    def __len__(self):
        return len(self.masses)


@dataclass(frozen=True)
class TransportPlan:
    flows: np.ndarray
    row_marginals: tuple[float, ...]
    col_marginals: tuple[float, ...]
    total_cost: float | None = None

    @property
    def sparsity(self) -> int:
        return int(np.count_nonzero(self.flows > 0))


@dataclass(frozen=True)
class AdmissibleDemand:
    candidate: ClaimDistribution
    tau_tilde: float
    alpha_tilde: float
    effective_mean: float


def _as_marginal(x) -> DiscreteMarginal:
    return x if isinstance(x, DiscreteMarginal) else DiscreteMarginal(tuple(x))


def _cost_matrix(cost) -> np.ndarray:
    c = np.asarray(cost, dtype=float)
    if c.ndim != 2 or c.size == 0:
        raise TransportError("cost must be a nonempty 2-D matrix")
    if not np.all(np.isfinite(c)) or np.any(c < 0):
        raise TransportError("cost entries must be finite and nonnegative")
    return c


def check_monge(cost, tol: float = 0.0) -> bool:
    """Adjacent-minor Monge test ``c[i,j] + c[i+1,j+1] <= c[i,j+1] + c[i+1,j] + tol``."""
    c = _cost_matrix(cost)
    if c.shape[0] < 2 or c.shape[1] < 2:
        return True
    lhs = c[:-1, :-1] + c[1:, 1:]
    rhs = c[:-1, 1:] + c[1:, :-1]
    return bool(np.all(lhs <= rhs + tol))


def _balanced(a: DiscreteMarginal, b: DiscreteMarginal, normalize: bool):
    am = np.asarray(a.masses)
    bm = np.asarray(b.masses)
    if abs(am.sum() - bm.sum()) > MARGINAL_TOL:
        if not normalize:
            raise TransportError(f"unbalanced marginals: {am.sum()} vs {bm.sum()}")
        bm = bm * (am.sum() / bm.sum())
    return am, bm


def plan_cost(flows: np.ndarray, cost) -> float:
    return float(np.sum(np.asarray(flows) * _cost_matrix(cost)))


def northwest_plan(a, b, cost=None, normalize: bool = False) -> TransportPlan:
    """Plan with cumulative flows ``X[i, j] = min(A_i, B_j)``.

    Flows are recovered by two-dimensional differencing of the cumulative
    table.  ``normalize`` rescales ``b`` to the total of ``a``.
    """
    a, b = _as_marginal(a), _as_marginal(b)
    am, bm = _balanced(a, b, normalize)
    A = np.cumsum(am)
    B = np.cumsum(bm)
    # both cumulative sums end at the same total; pin them to avoid drift
    B[-1] = A[-1]
    X = np.minimum.outer(A, B)
    P = np.zeros((len(am) + 1, len(bm) + 1))
    P[1:, 1:] = X
    flows = P[1:, 1:] - P[:-1, 1:] - P[1:, :-1] + P[:-1, :-1]
    flows[np.abs(flows) < 1e-12] = 0.0
    total = plan_cost(flows, cost) if cost is not None else None
    return TransportPlan(flows, tuple(am), tuple(bm), total)


def northwest_traversal(a, b, normalize: bool = False) -> np.ndarray:
    """Classical northwest-corner rule: fill greedily from the top-left cell."""
    a, b = _as_marginal(a), _as_marginal(b)
    am, bm = _balanced(a, b, normalize)
    supply, demand = am.copy(), bm.copy()
    flows = np.zeros((len(am), len(bm)))
    i = j = 0
    while i < len(am) and j < len(bm):
        q = min(supply[i], demand[j])
        flows[i, j] = q
        supply[i] -= q
        demand[j] -= q
        if supply[i] <= 1e-12 and i < len(am) - 1:
            i += 1
        elif demand[j] <= 1e-12:
            j += 1
        else:
            i += 1
    return flows


def brute_force_optimal(a, b, cost, mass_unit: float = 1.0) -> float:
    """Exact optimum of a small transportation problem by enumeration.

    Marginals must be integer multiples of ``mass_unit``; at most 14 units in
    total and ``m + n <= 8``.  Integer flows suffice because the
    transportation polytope has integral vertices.
    """
    a, b = _as_marginal(a), _as_marginal(b)
    c = _cost_matrix(cost)
    m, n = len(a), len(b)
    if c.shape != (m, n):
        raise TransportError("cost shape does not match marginals")
    if m + n > 8:
        raise TransportError("instance too large for enumeration (m + n > 8)")
    au = [round(x / mass_unit) for x in a.masses]
    bu = [round(x / mass_unit) for x in b.masses]
    if any(abs(u * mass_unit - x) > 1e-9 for u, x in zip(au + bu, a.masses + b.masses)):
        raise TransportError("marginals are not multiples of mass_unit")
    if sum(au) != sum(bu):
        raise TransportError("unbalanced marginals")
    if sum(au) > 14:
        raise TransportError("instance too large for enumeration (> 14 units)")

    row_min = c.min(axis=1)
    best = [math.inf]
    cap = list(bu)

    def rest_bound(i: int) -> float:
        return sum(au[k] * row_min[k] for k in range(i, m)) * mass_unit

    def fill_row(i: int, j: int, left: int, acc: float):
        if acc + rest_bound(i + 1) + left * (c[i, j:].min() if j < n else 0.0) * mass_unit >= best[0]:
            return
        if j == n - 1:
            if left <= cap[j]:
                cap[j] -= left
                next_row(i + 1, acc + left * c[i, j] * mass_unit)
                cap[j] += left
            return
        for q in range(min(left, cap[j]), -1, -1):
            cap[j] -= q
            fill_row(i, j + 1, left - q, acc + q * c[i, j] * mass_unit)
            cap[j] += q

    def next_row(i: int, acc: float):
        if i == m:
            if all(x == 0 for x in cap) and acc < best[0]:
                best[0] = acc
            return
        fill_row(i, 0, au[i], acc)

    next_row(0, 0.0)
    if not math.isfinite(best[0]):
        raise TransportError("no feasible plan")
    return float(best[0])


_GL_ORDER = 8


def _panel_edges(panels: int, clip: float) -> np.ndarray:
    """Panel breakpoints on ``[clip, 1 - clip]``, graded geometrically at both ends.

    Quantile functions of unbounded laws are singular at 0 or 1; geometric
    grading keeps each end panel's integrand smooth on its own scale.
    """
    knee = 0.01
    tail = max(1, panels // 8)
    middle = max(1, panels - 2 * tail)
    if clip >= knee:
        return np.linspace(clip, 1.0 - clip, panels + 1)
    low = np.geomspace(clip, knee, tail + 1)
    mid = np.linspace(knee, 1.0 - knee, middle + 1)
    high = 1.0 - low[::-1]
    return np.concatenate([low[:-1], mid, high[1:]])


def quantile_coupling_cost(src: ClaimDistribution, dst: ClaimDistribution, p: float = 2.0,
                           quad_points: int = 512, clip: float = 1e-9) -> float:
    """``int_0^1 |Q_src(u) - Q_dst(u)|^p du`` by composite Gauss-Legendre.

    The unit interval is clipped to ``[clip, 1 - clip]`` and split into
    ``quad_points / 8`` panels of 8 nodes, graded towards both ends.
    """
    if p < 1:
        raise TransportError("p must be >= 1")
    if src == dst:
        return 0.0
    panels = max(3, quad_points // _GL_ORDER)
    x, w = np.polynomial.legendre.leggauss(_GL_ORDER)
    edges = _panel_edges(panels, clip)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    u = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    diff = np.abs(np.asarray(src.quantile(u)) - np.asarray(dst.quantile(u)))
    return float(np.dot(weights, diff**p))


def discretize(dist: ClaimDistribution, bins: int) -> DiscreteMarginal:
    """Equal-mass bins, each represented by its conditional mean.

    Bin ``k`` covers levels ``[k/bins, (k+1)/bins]``; its representative is
    ``bins * (M(Q((k+1)/bins)) - M(Q(k/bins)))`` with ``M`` the partial mean.
    Intended for continuous laws; atoms would produce repeated labels.
    """
    edges = np.asarray(dist.quantile(np.linspace(0.0, 1.0, bins + 1)), dtype=float)
    cum = np.array([dist.partial_mean(float(e)) if math.isfinite(e) else dist.mean() for e in edges])
    reps = np.diff(cum) * bins
    return DiscreteMarginal(tuple(np.full(bins, 1.0 / bins)), tuple(reps))


def admissible_demand(candidate: ClaimDistribution, spec_h: SubPopulationSpec,
                      spec_i: SubPopulationSpec,
                      domain: SearchDomain | None = None) -> AdmissibleDemand | None:
    """First strict equilibrium when ``candidate`` replaces the home claim law.

    Only strictly supercritical solutions (effective mean > 1) qualify; a
    degenerate ``alpha`` continuum is not a usable target and is skipped.
    """
    if not is_absolutely_continuous(candidate):
        raise TransportError("candidate demand law must be absolutely continuous")
    spec = SubPopulationSpec(spec_h.label, spec_h.offspring, spec_h.resource, candidate)
    for sol in solve_equilibrium(spec, spec_i, domain):
        if sol.classification == "Strict" and not sol.alpha_is_any:
            return AdmissibleDemand(candidate, sol.tau, float(sol.alpha), sol.effective_mean)
    return None


@dataclass(frozen=True)
class ControlCandidate:
    params: dict
    demand: AdmissibleDemand
    cost: float


def control_search(source: ClaimDistribution,
                   candidates: Iterable[tuple[dict, ClaimDistribution]],
                   spec_h: SubPopulationSpec, spec_i: SubPopulationSpec,
                   p: float = 2.0, domain: SearchDomain | None = None,
                   quad_points: int = 512) -> list[ControlCandidate]:
    """Admissible candidates ranked by quantile-coupling cost from ``source``.

    ``candidates`` yields ``(params, law)`` pairs.  Ties keep grid order.
    """
    candidates = list(candidates)
    if not candidates:
        raise TransportError("candidate grid is empty")
    ranked = []
    for params, law in candidates:
        demand = admissible_demand(law, spec_h, spec_i, domain)
        if demand is None:
            continue
        cost = quantile_coupling_cost(source, law, p, quad_points)
        ranked.append(ControlCandidate(dict(params), demand, cost))
    ranked.sort(key=lambda c: c.cost)
    return ranked


def distance_cost(x: Sequence[float], y: Sequence[float], p: float = 2.0) -> np.ndarray:
    return np.abs(np.subtract.outer(np.asarray(x, float), np.asarray(y, float))) ** p
