"""Trajectories and Monte Carlo experiments for interacting RDBPs.

The first sub-population plays the role of the home population and the
second the immigrant population; the ratio ``alpha_t`` is always
``counts[1] / counts[0]``.  Any number of sub-populations can be simulated.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .society import SubPopulationSpec, step_generation

logger = logging.getLogger(__name__)

__all__ = [
    "GenerationRecord",
    "AllSurvived",
    "Extinct",
    "TrajectoryOutcome",
    "MonteCarloSummary",
    "run_trajectory",
    "monte_carlo",
    "balance_residual",
    "ratio_recursion_check",
    "DEFAULT_HORIZON",
    "DEFAULT_CAP",
]

DEFAULT_HORIZON = 300
DEFAULT_CAP = 10**6
CAP_MODES = ("downsample", "halt")


@dataclass(frozen=True)
class GenerationRecord:
    """State and outcome of generation ``t``.

    ``counts`` are the individuals alive at ``t`` (after any down-sampling),
    ``served`` the members of generation ``t + 1``.
    """

    t: int
    counts: tuple[int, ...]
    descendants: tuple[int, ...]
    resources_total: float
    threshold: float
    served: tuple[int, ...]
    consumed: float
    max_claim: float
    capped: bool = False

    @property
    def ratio(self) -> float | None:
        if len(self.counts) < 2 or self.counts[0] == 0:
            return None
        return self.counts[1] / self.counts[0]


@dataclass(frozen=True)
class AllSurvived:
    horizon: int
    halted_at_cap: bool = False


@dataclass(frozen=True)
class Extinct:
    label: str
    generation: int


@dataclass
class TrajectoryOutcome:
    status: AllSurvived | Extinct
    final_counts: tuple[int, ...]
    final_record: GenerationRecord | None
    trace: list[GenerationRecord] = field(default_factory=list)
    cap_generation: int | None = None
    seed: int | None = None

    @property
    def jointly_survived(self) -> bool:
        return all(c > 0 for c in self.final_counts)

    @property
    def final_ratio(self) -> float | None:
        if len(self.final_counts) < 2 or self.final_counts[0] == 0:
            return None
        return self.final_counts[1] / self.final_counts[0]


def _stats(values: Sequence[float]) -> dict[str, float] | None:
    if not values:
        return None
    arr = np.sort(np.asarray(values, dtype=float))
    q = np.quantile(arr, [0.05, 0.25, 0.5, 0.75, 0.95])
    return {
        "count": int(arr.size),
        "mean": float(arr.mean()),
        "median": float(q[2]),
        "q05": float(q[0]),
        "q25": float(q[1]),
        "q75": float(q[3]),
        "q95": float(q[4]),
    }


@dataclass
class MonteCarloSummary:
    runs: int
    joint_survival_fraction: float
    conditional_ratio_stats: dict[str, float] | None
    conditional_threshold_stats: dict[str, float] | None
    outcomes: list[TrajectoryOutcome]
    population_cap: int
    cap_mode: str
    base_seed: int

    @property
    def final_records(self) -> list[GenerationRecord | None]:
        return [o.final_record for o in self.outcomes]

    def surviving(self) -> list[TrajectoryOutcome]:
        return [o for o in self.outcomes if o.jointly_survived]


def run_trajectory(specs: Sequence[SubPopulationSpec], initial_counts: Sequence[int],
                   horizon: int = DEFAULT_HORIZON, seed: int = 0,
                   population_cap: int = DEFAULT_CAP, cap_mode: str = "downsample",
                   keep_trace: bool = True, backend: str | None = None) -> TrajectoryOutcome:
    """Simulate one trajectory for ``horizon`` generations.

    When the total population exceeds ``population_cap`` the run either
    continues with a uniformly down-sampled pseudo-population of exactly
    ``population_cap`` individuals (``cap_mode="downsample"``) or stops and
    reports survival with the cap flag set (``cap_mode="halt"``).
    The run ends early once every sub-population is extinct.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if len(initial_counts) != len(specs):
        raise ValueError("need one initial count per sub-population")
    if any(c < 0 for c in initial_counts):
        raise ValueError("initial counts must be >= 0")
    if population_cap < max(initial_counts):
        raise ValueError("population_cap is smaller than the initial population")
    if cap_mode not in CAP_MODES:
        raise ValueError(f"cap_mode must be one of {CAP_MODES}")

    rng = np.random.default_rng(seed)
    counts = tuple(int(c) for c in initial_counts)
    trace: list[GenerationRecord] = []
    last: GenerationRecord | None = None
    cap_generation = None
    extinct: Extinct | None = None
    for k, c in enumerate(counts):
        if c == 0:
            extinct = Extinct(specs[k].label, 0)
            break
    halted = False

    for t in range(horizon):
        if not any(counts):
            break
        capped = False
        if sum(counts) > population_cap:
            if cap_mode == "halt":
                halted = True
                break
            counts = tuple(int(x) for x in rng.multivariate_hypergeometric(np.asarray(counts, dtype=np.int64), population_cap))
            capped = True
            if cap_generation is None:
                cap_generation = t
        step = step_generation(counts, specs, rng, backend=backend)
        last = GenerationRecord(
            t=t,
            counts=counts,
            descendants=step.descendants,
            resources_total=step.resources_total,
            threshold=step.allocation.threshold,
            served=step.allocation.served_counts,
            consumed=step.allocation.consumed,
            max_claim=step.max_claim,
            capped=capped,
        )
        if keep_trace:
            trace.append(last)
        if extinct is None:
            for k, c in enumerate(last.served):
                if c == 0:
                    extinct = Extinct(specs[k].label, t + 1)
                    break
        counts = last.served

    if extinct is not None:
        status: AllSurvived | Extinct = extinct
    else:
        status = AllSurvived(horizon, halted_at_cap=halted)
    return TrajectoryOutcome(status, counts, last, trace, cap_generation, seed)


def _run_one(args):
    return run_trajectory(*args[:-1], **args[-1])


def monte_carlo(specs: Sequence[SubPopulationSpec], initial_counts: Sequence[int],
                horizon: int = DEFAULT_HORIZON, runs: int = 100, base_seed: int = 0,
                population_cap: int = DEFAULT_CAP, cap_mode: str = "downsample",
                keep_traces: bool = False, workers: int = 1,
                backend: str | None = None) -> MonteCarloSummary:
    """Run ``runs`` independent trajectories seeded ``base_seed + i``.

    Conditional statistics of the final ratio and threshold are taken over
    the jointly surviving runs only.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    kw = dict(population_cap=population_cap, cap_mode=cap_mode, keep_trace=keep_traces, backend=backend)
    jobs = [(specs, initial_counts, horizon, base_seed + i, kw) for i in range(runs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_one, jobs))
    else:
        outcomes = [_run_one(j) for j in jobs]

    alive = [o for o in outcomes if o.jointly_survived]
    ratios = [o.final_ratio for o in alive if o.final_ratio is not None]
    taus = [o.final_record.threshold for o in alive if o.final_record is not None]
    return MonteCarloSummary(
        runs=runs,
        joint_survival_fraction=len(alive) / runs,
        conditional_ratio_stats=_stats(ratios),
        conditional_threshold_stats=_stats(taus),
        outcomes=outcomes,
        population_cap=population_cap,
        cap_mode=cap_mode,
        base_seed=base_seed,
    )


def balance_residual(record: GenerationRecord, specs: Sequence[SubPopulationSpec] | None = None) -> float:
    """``|served claims - R_t| / Gamma_t^h`` for one generation."""
    home = record.counts[0]
    if home == 0:
        raise ValueError("balance residual undefined when the home count is 0")
    return abs(record.consumed - record.resources_total) / home


def ratio_recursion_check(record_t: GenerationRecord, record_next: GenerationRecord,
                          specs: Sequence[SubPopulationSpec]) -> float:
    """Gap between the realized home share and its CDF-weighted prediction.

    Compares ``1 / (1 + alpha_{t+1})`` with
    ``D_h F_h(tau_t) / (D_h F_h(tau_t) + D_i F_i(tau_t))``.
    """
    if record_t.counts[0] == 0 or record_next.counts[0] == 0:
        raise ValueError("home count must be positive at both generations")
    tau = record_t.threshold
    wh = record_t.descendants[0] * float(specs[0].claims.cdf(tau))
    wi = record_t.descendants[1] * float(specs[1].claims.cdf(tau))
    if wh + wi == 0:
        raise ValueError("no descendant has a claim below the threshold")
    share = 1.0 / (1.0 + record_next.ratio)
    return abs(share - wh / (wh + wi))


def effective_growth(spec: SubPopulationSpec, tau: float) -> float:
    """``m F(tau)``: mean number of served children per individual."""
    return spec.m * float(spec.claims.cdf(tau))

