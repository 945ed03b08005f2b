"""One generation of a resource-dependent branching process.

Every living individual reproduces and produces resources into a single
joint pool.  Each descendant submits a claim; the society serves claims
weakest-first (ascending) until the pool cannot cover the next claim.
Served descendants form the next generation, the rest leave without
offspring.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .dists import ClaimDistribution, OffspringDistribution, ResourceModel

logger = logging.getLogger(__name__)

__all__ = [
    "SubPopulationSpec",
    "Claimant",
    "AllocationResult",
    "GenerationStep",
    "allocate_weakest_first",
    "step_generation",
]


@dataclass(frozen=True)
class SubPopulationSpec:
    """Laws of one sub-population: offspring ``m``, resources ``r``, claims ``F``."""

    label: str
    offspring: OffspringDistribution
    resource: ResourceModel
    claims: ClaimDistribution

    def __post_init__(self):
        if self.offspring.mean() <= 0:
            raise ValueError(f"{self.label}: offspring mean must be > 0")
        if self.resource.mean() < 0:
            raise ValueError(f"{self.label}: resource mean must be >= 0")

    @property
    def m(self) -> float:
        return self.offspring.mean()

    @property
    def r(self) -> float:
        return self.resource.mean()


@dataclass(frozen=True, order=True)
class Claimant:
    claim: float
    subpop_index: int
    birth_index: int

    @property
    def order_key(self) -> tuple[float, int, int]:
        return (self.claim, self.subpop_index, self.birth_index)


@dataclass(frozen=True)
class AllocationResult:
    served_counts: tuple[int, ...]
    threshold: float
    consumed: float
    budget: float

    @property
    def total_served(self) -> int:
        return sum(self.served_counts)


def _segments(claimants: Sequence[Claimant], n_subpops: int):
    """Pack claimants into per-sub-population segments in birth order."""
    groups: list[list[Claimant]] = [[] for _ in range(n_subpops)]
    for c in claimants:
        if c.claim < 0:
            raise ValueError("claims must be nonnegative")
        groups[c.subpop_index].append(c)
    for g in groups:
        g.sort(key=lambda c: c.birth_index)
    claims = np.array([c.claim for g in groups for c in g], dtype=float)
    offsets = np.cumsum([0] + [len(g) for g in groups]).astype(np.int64)
    return claims, offsets


def allocate_weakest_first(claimants: Sequence[Claimant], budget: float,
                           n_subpops: int | None = None) -> AllocationResult:
    """Serve claims in ascending ``order_key`` while the pool covers them.

    Service stops at the first claim exceeding what is left of ``budget``.
    """
    if budget < 0:
        raise ValueError("budget must be >= 0")
    if n_subpops is None:
        n_subpops = 1 + max((c.subpop_index for c in claimants), default=-1)
    claims, offsets = _segments(claimants, n_subpops)
    served, threshold, consumed, _ = kernels.allocate(claims, offsets, budget)
    return AllocationResult(tuple(int(x) for x in served), threshold, consumed, float(budget))


@dataclass(frozen=True)
class GenerationStep:
    """Raw outcome of one generation (before bookkeeping in ``sim``)."""

    counts: tuple[int, ...]
    descendants: tuple[int, ...]
    resources: tuple[float, ...]
    allocation: AllocationResult
    max_claim: float

    @property
    def resources_total(self) -> float:
        return self.allocation.budget

    @property
    def next_counts(self) -> tuple[int, ...]:
        return self.allocation.served_counts


def step_generation(counts: Sequence[int], specs: Sequence[SubPopulationSpec],
                    rng: np.random.Generator, backend=None) -> GenerationStep:
    """Advance all sub-populations one generation.

    Random draws happen in a fixed order: offspring total then resource total
    for each sub-population in turn, then the claims of every descendant,
    sub-population by sub-population.  Zero is absorbing: an empty
    sub-population draws nothing.
    """
    if len(counts) != len(specs):
        raise ValueError("need one count per sub-population")
    if any(c < 0 for c in counts):
        raise ValueError("counts must be >= 0")
    kern = kernels.get_backend(backend)
    desc, res = [], []
    for n, spec in zip(counts, specs):
        n = int(n)
        desc.append(spec.offspring.sample_total(rng, n) if n > 0 else 0)
        res.append(float(spec.resource.sample_total(rng, n)) if n > 0 else 0.0)
    budget = float(sum(res))
    offsets = np.cumsum([0] + desc).astype(np.int64)
    claims = np.empty(int(offsets[-1]), dtype=float)
    for k, spec in enumerate(specs):
        kern.sample_claims(rng, spec.claims, desc[k], claims[offsets[k]:offsets[k + 1]])
    served, threshold, consumed, max_claim = kern.allocate(claims, offsets, budget)
    alloc = AllocationResult(tuple(int(x) for x in served), float(threshold), float(consumed), budget)
    return GenerationStep(tuple(int(c) for c in counts), tuple(desc), tuple(res), alloc, float(max_claim))
