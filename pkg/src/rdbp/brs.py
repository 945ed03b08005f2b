"""Maximal-count selection under a budget and its expectation bound.

For ``n`` i.i.d. claims with law ``F`` and budget ``s``, let ``N(n, s)`` be
the largest number of claims whose sum stays within ``s``.  Then
``E N(n, s) <= n F(tau*)`` where ``tau*`` solves ``n M(tau*) = s`` and
``M(tau) = int_0^tau x dF(x)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .dists import ClaimDistribution, FiniteDiscrete, PointMass
from .equilibrium import bisect

__all__ = ["BrsBound", "BrsCheck", "greedy_count", "brs_tau", "brs_bound", "brs_check"]

Z99 = 2.5758293035489004  # two-sided 99% normal quantile


@dataclass(frozen=True)
class BrsBound:
    n: int
    budget: float
    tau_star: float
    bound: float


@dataclass(frozen=True)
class BrsCheck:
    n: int
    budget: float
    tau_star: float
    bound: float
    estimate: float
    ci_halfwidth: float
    runs: int

    @property
    def holds(self) -> bool:
        return self.estimate <= self.bound + self.ci_halfwidth

    def to_record(self) -> dict:
        # an unbounded support with n * mean <= budget gives tau* = inf, not valid JSON
        tau = self.tau_star if math.isfinite(self.tau_star) else "inf"
        return {"n": self.n, "budget": self.budget, "tau_star": tau, "bound": self.bound,
                "estimate": self.estimate, "ci": self.ci_halfwidth, "runs": self.runs}


def greedy_count(claims: Sequence[float], budget: float) -> int:
    """Largest number of claims with total at most ``budget`` (smallest first)."""
    arr = np.sort(np.asarray(claims, dtype=float))
    if arr.size and arr[0] < 0:
        raise ValueError("claims must be nonnegative")
    return int(np.searchsorted(np.cumsum(arr), budget, side="right"))


def _atoms(dist: ClaimDistribution):
    if isinstance(dist, PointMass):
        return [dist.value], [1.0]
    return list(dist.atoms), list(dist.probs)


def brs_tau(dist: ClaimDistribution, n: int, budget: float, tol: float = 1e-13) -> float:
    """Solve ``n M(tau) = budget``; the supremum of the support when ``n mean <= budget``.

    For atomic laws ``tau*`` is the generalized inverse
    ``inf{tau : n M(tau) >= budget}``, i.e. the atom at which the budget
    equation is crossed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if budget < 0:
        raise ValueError("budget must be >= 0")
    if n * dist.mean() <= budget:
        return dist.support[1]
    if isinstance(dist, (PointMass, FiniteDiscrete)):
        acc = 0.0
        for a, p in zip(*_atoms(dist)):
            acc += a * p
            if n * acc >= budget:
                return float(a)
        return float(dist.support[1])
    if budget == 0:
        return dist.support[0]
    hi = dist.support[1]
    if not math.isfinite(hi):
        hi = max(dist.mean(), 1.0)
        while n * dist.partial_mean(hi) < budget:
            hi *= 2.0
    return bisect(lambda t: n * dist.partial_mean(t) - budget, dist.support[0], hi, tol)


def brs_bound(dist: ClaimDistribution, n: int, budget: float) -> BrsBound:
    tau = brs_tau(dist, n, budget)
    # F is right-continuous, so an atom at tau* counts fully (conservative)
    bound = n * float(dist.cdf(tau)) if math.isfinite(tau) else float(n)
    return BrsBound(n, float(budget), float(tau), float(bound))


def brs_check(dist: ClaimDistribution, n: int, budget: float, runs: int, seed: int,
              batch: int | None = None, backend: str | None = None) -> BrsCheck:
    """Monte Carlo mean of the greedy count against the analytic bound."""
    if runs < 100:
        raise ValueError("runs must be >= 100")
    b = brs_bound(dist, n, budget)
    kern = kernels.get_backend(backend)
    rng = np.random.default_rng(seed)
    batch = batch or max(1, min(runs, 2_000_000 // max(n, 1)))
    counts = np.empty(runs, dtype=np.int64)
    done = 0
    while done < runs:
        k = min(batch, runs - done)
        claims = np.empty((k, n))
        kern.sample_claims(rng, dist, k * n, claims.reshape(-1))
        counts[done:done + k] = kern.greedy_counts(claims, budget)
        done += k
    est = float(counts.mean())
    half = Z99 * float(counts.std(ddof=1)) / math.sqrt(runs)
    return BrsCheck(n, float(budget), b.tau_star, b.bound, est, half, runs)
