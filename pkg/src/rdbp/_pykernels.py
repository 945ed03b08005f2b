"""Pure-numpy versions of the compiled kernels in ``_core``.

Same signatures and RNG consumption as the extension; used when the
extension is unavailable or ``RDBP_PURE_PYTHON`` is set.
"""
from __future__ import annotations

import numpy as np

from .dists import ClaimDistribution, PointMass


def fill_claims(rng: np.random.Generator, dist: ClaimDistribution, n: int,
                out: np.ndarray | None = None) -> np.ndarray:
    if isinstance(dist, PointMass):
        values = np.full(n, dist.value, dtype=float)
    else:
        values = np.asarray(dist.sample(rng, n), dtype=float).reshape(n)
    if out is None:
        return values
    out[:] = values
    return out


def allocate(claims: np.ndarray, offsets: np.ndarray, budget: float):
    s = len(offsets) - 1
    served = np.zeros(s, dtype=np.int64)
    n = len(claims)
    if n == 0 or s == 0:
        return served, 0.0, 0.0, 0.0
    # concatenation order is (segment, birth), so a stable sort on the claim
    # value realizes the (claim, segment, birth) key
    order = np.argsort(claims, kind="stable")
    ordered = claims[order]
    total = float(ordered.sum())
    if total <= budget:
        served[:] = np.diff(offsets)
        return served, float(ordered[-1]), total, float(ordered[-1])
    csum = np.cumsum(ordered)
    k = int(np.searchsorted(csum, budget, side="right"))
    top = float(ordered[-1])
    if k == 0:
        return served, 0.0, 0.0, top
    seg = np.searchsorted(offsets, order[:k], side="right") - 1
    served += np.bincount(seg, minlength=s).astype(np.int64)
    return served, float(ordered[k - 1]), float(csum[k - 1]), top


def greedy_counts(claims: np.ndarray, budget: float) -> np.ndarray:
    ordered = np.sort(claims, axis=1)
    csum = np.cumsum(ordered, axis=1)
    return (csum <= budget).sum(axis=1).astype(np.int64)
