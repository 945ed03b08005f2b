"""Threshold/ratio equilibria for two interacting sub-populations.

An equilibrium is a pair ``(tau, alpha)`` with

    m_h M_h(tau) + alpha m_i M_i(tau) = r_h + alpha r_i
    m_h F_h(tau) = m_i F_i(tau)

where ``M(tau) = int_0^tau x dF(x)``.  The second equation fixes the
candidate thresholds; for each of them the first one is affine in
``alpha`` and is solved exactly.  Candidates are classified by the
effective mean ``m_h F_h(tau)``: above 1 (strict), equal to 1 (critical) or
below 1 (inadmissible).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dists import ClaimDistribution, is_absolutely_continuous, quantile
from .society import SubPopulationSpec

logger = logging.getLogger(__name__)

__all__ = [
    "ANY_POSITIVE",
    "IDENTICALLY_ZERO",
    "CLASS_TOL",
    "SearchDomain",
    "EquilibriumSolution",
    "constraint_roots",
    "solve_equilibrium",
    "verify",
    "bisect",
]

CLASS_TOL = 1e-9
ZERO_TOL = 1e-12


class _Marker:
    def __init__(self, name: str):
        self.name = name

    def __repr__(self):
        return self.name


# alpha is arbitrary: every positive value solves the equation
ANY_POSITIVE = _Marker("AnyPositive")
# m_h F_h - m_i F_i vanishes on the whole grid
IDENTICALLY_ZERO = _Marker("IdenticallyZero")


class EquilibriumError(ValueError):
    pass


@dataclass(frozen=True)
class SearchDomain:
    upper: float | None = None
    grid_points: int = 4096
    bisection_tol: float = 1e-12
    lower: float = 0.0

    def resolve(self, *claims: ClaimDistribution) -> float:
        """Upper end of the scan: the given value or one covering all supports."""
        if self.upper is not None:
            if self.upper <= 0:
                raise EquilibriumError("search domain upper bound must be > 0")
            return float(self.upper)
        ends = []
        for d in claims:
            sup = d.support[1]
            ends.append(sup if math.isfinite(sup) else quantile(d, 1 - 1e-6))
        return float(max(ends))


@dataclass(frozen=True)
class EquilibriumSolution:
    tau: float
    alpha: float | _Marker
    effective_mean: float
    classification: str
    residuals: tuple[float, float]

    @property
    def alpha_is_any(self) -> bool:
        return self.alpha is ANY_POSITIVE

    def to_record(self) -> dict:
        return {
            "tau": self.tau,
            "alpha": "any" if self.alpha_is_any else self.alpha,
            "effective_mean": self.effective_mean,
            "classification": self.classification,
            "residuals": {"equation": self.residuals[0], "constraint": self.residuals[1]},
        }


def classify(effective_mean: float, tol: float = CLASS_TOL) -> str:
    if abs(effective_mean - 1.0) <= tol:
        return "Critical"
    return "Strict" if effective_mean > 1.0 else "Inadmissible"


def bisect(f, a: float, b: float, tol: float = 1e-12, max_iter: int = 200) -> float:
    """Root of ``f`` in ``[a, b]`` given a sign change (or a zero at an end)."""
    fa, fb = f(a), f(b)
    if fa == 0:
        return a
    if fb == 0:
        return b
    if (fa > 0) == (fb > 0):
        raise EquilibriumError("bisection needs a sign change")
    for _ in range(max_iter):
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0 or (b - a) <= tol:
            return m
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def _require_continuous(spec: SubPopulationSpec) -> None:
    if not is_absolutely_continuous(spec.claims):
        raise EquilibriumError(
            f"{spec.label}: equilibrium solving needs an absolutely continuous claim law, "
            f"got {type(spec.claims).__name__}")


def _phi(spec_h: SubPopulationSpec, spec_i: SubPopulationSpec):
    mh, mi = spec_h.m, spec_i.m
    fh, fi = spec_h.claims, spec_i.claims

    def phi(t):
        return mh * fh.cdf(t) - mi * fi.cdf(t)

    return phi


def constraint_roots(spec_h: SubPopulationSpec, spec_i: SubPopulationSpec,
                     domain: SearchDomain | None = None):
    """Positive sign-change roots of ``m_h F_h - m_i F_i`` on the scan grid.

    Returns a sorted list of roots, or :data:`IDENTICALLY_ZERO` when the
    function vanishes (within 1e-12) at every grid point.  Tangential roots
    without a sign change are not detected.
    """
    _require_continuous(spec_h)
    _require_continuous(spec_i)
    domain = domain or SearchDomain()
    upper = domain.resolve(spec_h.claims, spec_i.claims)
    if domain.grid_points < 2:
        raise EquilibriumError("grid needs at least two points")
    phi = _phi(spec_h, spec_i)
    grid = np.linspace(domain.lower, upper, domain.grid_points)
    grid = grid[grid > 0]
    if grid.size == 0:
        raise EquilibriumError("empty search domain")
    vals = np.asarray(phi(grid), dtype=float)
    if np.all(np.abs(vals) <= ZERO_TOL):
        return IDENTICALLY_ZERO
    sign = np.where(np.abs(vals) <= ZERO_TOL, 0, np.sign(vals)).astype(int)

    roots: list[float] = []
    k = 0
    n = len(grid)
    while k < n - 1:
        if sign[k] != 0 and sign[k + 1] != 0:
            if sign[k] != sign[k + 1]:
                roots.append(bisect(phi, grid[k], grid[k + 1], domain.bisection_tol))
            k += 1
            continue
        if sign[k] == 0:
            k += 1
            continue
        # run of grid zeros starting at k + 1
        j = k + 1
        while j < n and sign[j] == 0:
            j += 1
        if j < n and sign[j] != sign[k]:
            roots.append(float(grid[k + 1]))
        k = j
    return roots


def _solution(tau: float, alpha, spec_h, spec_i) -> EquilibriumSolution:
    eff = spec_h.m * float(spec_h.claims.cdf(tau))
    res = verify_values(tau, 1.0 if alpha is ANY_POSITIVE else alpha, spec_h, spec_i)
    return EquilibriumSolution(float(tau), alpha, eff, classify(eff), res)


def solve_equilibrium(spec_h: SubPopulationSpec, spec_i: SubPopulationSpec,
                      domain: SearchDomain | None = None,
                      diagnostics: list | None = None) -> list[EquilibriumSolution]:
    """All equilibria with ``alpha`` in ``(0, inf)``, sorted by ``tau``.

    Roots whose affine equation has no finite positive ``alpha`` are dropped
    and, when a ``diagnostics`` list is passed, described there.
    """
    domain = domain or SearchDomain()
    if diagnostics is None:
        diagnostics = []
    roots = constraint_roots(spec_h, spec_i, domain)
    mh, mi, rh, ri = spec_h.m, spec_i.m, spec_h.r, spec_i.r
    Mh, Mi = spec_h.claims.partial_mean, spec_i.claims.partial_mean

    if roots is IDENTICALLY_ZERO:
        # the laws coincide (m_h = m_i, F_h = F_i), so M_h = M_i as well
        if abs(rh - ri) > ZERO_TOL:
            diagnostics.append({"reason": "identical laws with different resource means: "
                                          "tau depends on alpha, no isolated equilibrium"})
            return []
        target = rh / mh
        if target <= 0:
            diagnostics.append({"reason": "zero resource production"})
            return []
        full = spec_h.claims.mean()
        if target >= full:
            diagnostics.append({"reason": "resources exceed every claim: no finite threshold"})
            return []
        upper = domain.resolve(spec_h.claims, spec_i.claims)
        while Mh(upper) < target:
            upper *= 2.0
        tau = bisect(lambda t: Mh(t) - target, 0.0, upper, domain.bisection_tol)
        return [_solution(tau, ANY_POSITIVE, spec_h, spec_i)]

    out: list[EquilibriumSolution] = []
    for tau in roots:
        num = rh - mh * Mh(tau)
        den = mi * Mi(tau) - ri
        if abs(den) <= ZERO_TOL:
            if abs(num) <= ZERO_TOL:
                out.append(_solution(tau, ANY_POSITIVE, spec_h, spec_i))
            else:
                diagnostics.append({"tau": tau, "reason": "zero slope in alpha, no finite alpha"})
            continue
        alpha = float(num / den)
        if not (alpha > 0 and math.isfinite(alpha)):
            diagnostics.append({"tau": tau, "alpha": alpha, "reason": "alpha not in (0, inf)"})
            continue
        out.append(_solution(tau, alpha, spec_h, spec_i))
    for d in diagnostics:
        logger.debug("dropped equilibrium candidate: %s", d)
    out.sort(key=lambda s: s.tau)
    return out


def verify_values(tau: float, alpha: float, spec_h: SubPopulationSpec,
                  spec_i: SubPopulationSpec) -> tuple[float, float]:
    lhs = spec_h.m * spec_h.claims.partial_mean(tau) + alpha * spec_i.m * spec_i.claims.partial_mean(tau)
    rhs = spec_h.r + alpha * spec_i.r
    constraint = spec_h.m * float(spec_h.claims.cdf(tau)) - spec_i.m * float(spec_i.claims.cdf(tau))
    return (float(abs(lhs - rhs)), float(abs(constraint)))


def verify(solution: EquilibriumSolution, spec_h: SubPopulationSpec, spec_i: SubPopulationSpec,
           alpha: float | None = None) -> tuple[float, float]:
    """Re-evaluate both equations at the solution; returns absolute residuals.

    For a degenerate solution pass the ``alpha`` to substitute (default 1).
    """
    a = alpha if alpha is not None else (1.0 if solution.alpha_is_any else solution.alpha)
    return verify_values(solution.tau, a, spec_h, spec_i)


def solutions_to_records(solutions: Sequence[EquilibriumSolution]) -> list[dict]:
    return [s.to_record() for s in solutions]
