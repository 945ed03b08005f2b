"""Parametric nonnegative distributions used by the RDBP model.

Three kinds of law are needed: claim sizes (``F``), offspring counts (mean
``m``) and per-capita resource production (mean ``r``).  Every claim family
carries a closed-form partial expectation ``M(tau) = int_0^tau x dF(x)`` so
the equilibrium equation can be evaluated without quadrature.

Samplers take an explicit :class:`numpy.random.Generator`.  Uniform and
finite claims are drawn by inverse transform of ``rng.random``; exponential
and lognormal claims from numpy's standard exponential and normal streams.
The compiled kernels read the same bit generator the same way.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Union

import numpy as np
from scipy import special

__all__ = [
    "ClaimDistribution",
    "Uniform",
    "Exponential",
    "LogNormal",
    "PointMass",
    "FiniteDiscrete",
    "OffspringDistribution",
    "Poisson",
    "Geometric",
    "Deterministic",
    "FinitePMF",
    "ResourceModel",
    "ConstantResource",
    "GammaResource",
    "UniformResource",
    "cdf",
    "partial_mean",
    "quantile",
    "sample",
    "mean",
    "adaptive_simpson",
    "is_absolutely_continuous",
    "claim_from_record",
    "offspring_from_record",
    "resource_from_record",
]


class DistributionError(ValueError):
    """Invalid distribution parameters or arguments."""


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise DistributionError(msg)


def _norm_cdf(z):
    return special.ndtr(z)


# ---------------------------------------------------------------------------
# claim-size laws
# ---------------------------------------------------------------------------


class ClaimDistribution:
    """Base class for claim-size laws on ``[0, inf)``."""

    family: str = ""
    continuous: bool = True

    def cdf(self, x):
        raise NotImplementedError

    def pdf(self, x):
        raise NotImplementedError

    def partial_mean(self, tau: float) -> float:
        raise NotImplementedError

    def quantile(self, u):
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    @property
    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        u = rng.random(size)
        return self.quantile(u)

    def to_record(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class Uniform(ClaimDistribution):
    lower: float
    upper: float
    family = "uniform"

    def __post_init__(self):
        _check(self.lower >= 0, "uniform lower must be >= 0")
        _check(self.upper > self.lower, "uniform upper must exceed lower")

    @property
    def support(self):
        return (self.lower, self.upper)

    def cdf(self, x):
        return np.clip((np.asarray(x, float) - self.lower) / (self.upper - self.lower), 0.0, 1.0)[()]

    def pdf(self, x):
        x = np.asarray(x, float)
        return np.where((x >= self.lower) & (x <= self.upper), 1.0 / (self.upper - self.lower), 0.0)[()]

    def partial_mean(self, tau):
        if tau <= self.lower:
            return 0.0
        t = min(tau, self.upper)
        return (t * t - self.lower * self.lower) / (2.0 * (self.upper - self.lower))

    def quantile(self, u):
        return (self.lower + (self.upper - self.lower) * np.asarray(u, float))[()]

    def mean(self):
        return 0.5 * (self.lower + self.upper)

    def to_record(self):
        return {"family": "uniform", "lower": self.lower, "upper": self.upper}


@dataclass(frozen=True)
class Exponential(ClaimDistribution):
    rate: float
    family = "exponential"

    def __post_init__(self):
        _check(self.rate > 0, "exponential rate must be > 0")

    @property
    def support(self):
        return (0.0, math.inf)

    def cdf(self, x):
        x = np.maximum(np.asarray(x, float), 0.0)
        return (-np.expm1(-self.rate * x))[()]

    def pdf(self, x):
        x = np.asarray(x, float)
        return np.where(x >= 0, self.rate * np.exp(-self.rate * np.maximum(x, 0.0)), 0.0)[()]

    def partial_mean(self, tau):
        if tau <= 0:
            return 0.0
        if math.isinf(tau):
            return 1.0 / self.rate
        lt = self.rate * tau
        # (1 - e^{-lt} - lt e^{-lt}) / rate, written to avoid cancellation at small lt
        return (-math.expm1(-lt) - lt * math.exp(-lt)) / self.rate

    def quantile(self, u):
        u = np.asarray(u, float)
        with np.errstate(divide="ignore"):
            return (-np.log1p(-u) / self.rate)[()]

    def sample(self, rng, size=None):
        return rng.standard_exponential(size) / self.rate

    def mean(self):
        return 1.0 / self.rate

    def to_record(self):
        return {"family": "exponential", "rate": self.rate}


@dataclass(frozen=True)
class LogNormal(ClaimDistribution):
    mu: float
    sigma: float
    family = "lognormal"

    def __post_init__(self):
        _check(self.sigma > 0, "lognormal sigma must be > 0")

    @property
    def support(self):
        return (0.0, math.inf)

    def cdf(self, x):
        x = np.asarray(x, float)
        with np.errstate(divide="ignore"):
            z = (np.log(np.maximum(x, 0.0)) - self.mu) / self.sigma
        return _norm_cdf(z)[()]

    def pdf(self, x):
        x = np.asarray(x, float)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (np.log(x) - self.mu) / self.sigma
            d = np.exp(-0.5 * z * z) / (x * self.sigma * math.sqrt(2 * math.pi))
        return np.where(x > 0, d, 0.0)[()]

    def partial_mean(self, tau):
        if tau <= 0:
            return 0.0
        if math.isinf(tau):
            return self.mean()
        z = (math.log(tau) - self.mu - self.sigma**2) / self.sigma
        return self.mean() * float(_norm_cdf(z))

    def quantile(self, u):
        u = np.asarray(u, float)
        return np.exp(self.mu + self.sigma * special.ndtri(u))[()]

    def sample(self, rng, size=None):
        return np.exp(self.mu + self.sigma * rng.standard_normal(size))

    def mean(self):
        return math.exp(self.mu + 0.5 * self.sigma**2)

    def to_record(self):
        return {"family": "lognormal", "mu": self.mu, "sigma": self.sigma}


@dataclass(frozen=True)
class PointMass(ClaimDistribution):
    value: float
    family = "point_mass"
    continuous = False

    def __post_init__(self):
        _check(self.value >= 0, "point mass must be >= 0")

    @property
    def support(self):
        return (self.value, self.value)

    def cdf(self, x):
        return np.where(np.asarray(x, float) >= self.value, 1.0, 0.0)[()]

    def partial_mean(self, tau):
        return self.value if tau >= self.value else 0.0

    def quantile(self, u):
        return np.full_like(np.asarray(u, float), self.value)[()]

    def sample(self, rng, size=None):
        # degenerate: consumes no randomness
        if size is None:
            return self.value
        return np.full(size, self.value)

    def mean(self):
        return self.value

    def to_record(self):
        return {"family": "point_mass", "value": self.value}


@dataclass(frozen=True)
class FiniteDiscrete(ClaimDistribution):
    """Finitely many ascending nonnegative atoms with simplex weights."""

    atoms: tuple[float, ...]
    probs: tuple[float, ...]
    family = "finite_discrete"
    continuous = False
    _cum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        atoms = tuple(float(a) for a in self.atoms)
        probs = tuple(float(p) for p in self.probs)
        _check(len(atoms) > 0 and len(atoms) == len(probs), "atoms and probs must be nonempty and equal length")
        _check(all(a >= 0 for a in atoms), "atoms must be nonnegative")
        _check(all(b > a for a, b in zip(atoms, atoms[1:])), "atoms must be strictly ascending")
        _check(all(p >= 0 for p in probs), "probabilities must be nonnegative")
        _check(abs(sum(probs) - 1.0) <= 1e-9, "probabilities must sum to 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", probs)
        cum = np.cumsum(probs)
        cum[-1] = 1.0
        object.__setattr__(self, "_cum", cum)

    @property
    def support(self):
        return (self.atoms[0], self.atoms[-1])

    @property
    def cumulative(self) -> np.ndarray:
        return self._cum

    def cdf(self, x):
        x = np.asarray(x, float)
        idx = np.searchsorted(self.atoms, x, side="right")
        cum = np.concatenate(([0.0], self._cum))
        return cum[idx][()]

    def partial_mean(self, tau):
        return float(sum(a * p for a, p in zip(self.atoms, self.probs) if a <= tau))

    def quantile(self, u):
        u = np.asarray(u, float)
        idx = np.minimum(np.searchsorted(self._cum, u, side="left"), len(self.atoms) - 1)
        return np.asarray(self.atoms)[idx][()]

    def mean(self):
        return float(np.dot(self.atoms, self.probs))

    def to_record(self):
        return {"family": "finite_discrete", "atoms": list(self.atoms), "probs": list(self.probs)}


# ---------------------------------------------------------------------------
# offspring laws
# ---------------------------------------------------------------------------


class OffspringDistribution:
    """Offspring law of one individual; ``p0`` is the chance of no children."""

    family: str = ""

    @property
    def p0(self) -> float:
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def sample_total(self, rng: np.random.Generator, n: int) -> int:
        """Total offspring of ``n`` independent parents."""
        raise NotImplementedError

    def to_record(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class Poisson(OffspringDistribution):
    m: float
    family = "poisson"

    def __post_init__(self):
        _check(self.m > 0, "poisson mean must be > 0")

    @property
    def p0(self):
        return math.exp(-self.m)

    def mean(self):
        return self.m

    def sample(self, rng, size=None):
        return rng.poisson(self.m, size)

    def sample_total(self, rng, n):
        if n <= 0:
            return 0
        return int(rng.poisson(self.m * n))

    def to_record(self):
        return {"family": "poisson", "mean": self.m}


@dataclass(frozen=True)
class Geometric(OffspringDistribution):
    """Geometric law on ``{0, 1, ...}`` with the given mean."""

    m: float
    family = "geometric"

    def __post_init__(self):
        _check(self.m > 0, "geometric mean must be > 0")

    @property
    def success(self) -> float:
        return 1.0 / (1.0 + self.m)

    @property
    def p0(self):
        return self.success

    def mean(self):
        return self.m

    def sample(self, rng, size=None):
        # numpy's geometric counts trials, starting at 1
        return rng.geometric(self.success, size) - 1

    def sample_total(self, rng, n):
        if n <= 0:
            return 0
        return int(rng.negative_binomial(n, self.success))

    def to_record(self):
        return {"family": "geometric", "mean": self.m}


@dataclass(frozen=True)
class Deterministic(OffspringDistribution):
    k: int
    family = "deterministic"

    def __post_init__(self):
        _check(int(self.k) == self.k and self.k >= 0, "deterministic offspring count must be a nonnegative integer")
        object.__setattr__(self, "k", int(self.k))

    @property
    def p0(self):
        return 1.0 if self.k == 0 else 0.0

    def mean(self):
        return float(self.k)

    def sample(self, rng, size=None):
        if size is None:
            return self.k
        return np.full(size, self.k, dtype=np.int64)

    def sample_total(self, rng, n):
        return self.k * max(int(n), 0)

    def to_record(self):
        return {"family": "deterministic", "k": self.k}


@dataclass(frozen=True)
class FinitePMF(OffspringDistribution):
    counts: tuple[int, ...]
    probs: tuple[float, ...]
    family = "finite_pmf"

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        probs = tuple(float(p) for p in self.probs)
        _check(len(counts) > 0 and len(counts) == len(probs), "counts and probs must be nonempty and equal length")
        _check(all(c >= 0 for c in counts), "offspring counts must be nonnegative")
        _check(len(set(counts)) == len(counts), "offspring counts must be distinct")
        _check(all(p >= 0 for p in probs) and abs(sum(probs) - 1.0) <= 1e-9, "probs must be a simplex vector")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "probs", probs)

    @property
    def p0(self):
        return sum(p for c, p in zip(self.counts, self.probs) if c == 0)

    def mean(self):
        return float(np.dot(self.counts, self.probs))

    def sample(self, rng, size=None):
        return rng.choice(np.asarray(self.counts), size=size, p=np.asarray(self.probs))

    def sample_total(self, rng, n):
        if n <= 0:
            return 0
        tallies = rng.multinomial(n, np.asarray(self.probs) / sum(self.probs))
        return int(np.dot(tallies, self.counts))

    def to_record(self):
        return {"family": "finite_pmf", "counts": list(self.counts), "probs": list(self.probs)}


# ---------------------------------------------------------------------------
# resource production
# ---------------------------------------------------------------------------


class ResourceModel:
    """Resource production of one individual in one generation."""

    family: str = ""

    def mean(self) -> float:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def sample_total(self, rng: np.random.Generator, n: int) -> float:
        raise NotImplementedError

    def to_record(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantResource(ResourceModel):
    value: float
    family = "deterministic"

    def __post_init__(self):
        _check(self.value >= 0, "resource value must be >= 0")

    def mean(self):
        return self.value

    def sample(self, rng, size=None):
        return self.value if size is None else np.full(size, self.value)

    def sample_total(self, rng, n):
        return self.value * max(int(n), 0)

    def to_record(self):
        return {"family": "deterministic", "value": self.value}


@dataclass(frozen=True)
class GammaResource(ResourceModel):
    shape: float
    scale: float
    family = "gamma"

    def __post_init__(self):
        _check(self.shape > 0 and self.scale > 0, "gamma shape and scale must be > 0")

    def mean(self):
        return self.shape * self.scale

    def sample(self, rng, size=None):
        return rng.gamma(self.shape, self.scale, size)

    def sample_total(self, rng, n):
        # a sum of n iid Gamma(k, s) is Gamma(n k, s)
        if n <= 0:
            return 0.0
        return float(rng.gamma(self.shape * n, self.scale))

    def to_record(self):
        return {"family": "gamma", "shape": self.shape, "scale": self.scale}


@dataclass(frozen=True)
class UniformResource(ResourceModel):
    lower: float
    upper: float
    family = "uniform"

    def __post_init__(self):
        _check(0 <= self.lower <= self.upper, "uniform resource needs 0 <= lower <= upper")

    def mean(self):
        return 0.5 * (self.lower + self.upper)

    def sample(self, rng, size=None):
        return rng.uniform(self.lower, self.upper, size)

    def sample_total(self, rng, n):
        if n <= 0:
            return 0.0
        return float(rng.uniform(self.lower, self.upper, int(n)).sum())

    def to_record(self):
        return {"family": "uniform", "lower": self.lower, "upper": self.upper}


AnyDistribution = Union[ClaimDistribution, OffspringDistribution, ResourceModel]


# ---------------------------------------------------------------------------
# functional interface
# ---------------------------------------------------------------------------


def cdf(d: ClaimDistribution, x):
    """``F(x)``; 0 below the support and 1 at or above its supremum."""
    return d.cdf(x)


def partial_mean(d: ClaimDistribution, tau: float) -> float:
    """Partial expectation ``int_0^tau x dF(x)`` in closed form."""
    if tau < 0 or math.isnan(tau):
        raise DistributionError(f"tau must be >= 0, got {tau}")
    return float(d.partial_mean(tau))


def quantile(d: ClaimDistribution, u):
    """Generalized inverse ``inf{x : F(x) >= u}``."""
    arr = np.asarray(u, float)
    if np.any((arr < 0) | (arr > 1)) or np.any(np.isnan(arr)):
        raise DistributionError("quantile level must lie in [0, 1]")
    q = d.quantile(arr)
    if np.ndim(q) == 0:
        return float(q)
    return q


def sample(d: AnyDistribution, rng: np.random.Generator, size=None):
    return d.sample(rng, size)


def mean(d: AnyDistribution) -> float:
    return float(d.mean())


def is_absolutely_continuous(d: ClaimDistribution) -> bool:
    return isinstance(d, (Uniform, Exponential, LogNormal))


def adaptive_simpson(f: Callable[[float], float], a: float, b: float,
                     tol: float = 1e-10, max_depth: int = 60) -> float:
    """Adaptive Simpson quadrature of ``f`` on ``[a, b]``.

    Kept for claim families without a closed-form partial expectation.
    """
    if b == a:
        return 0.0

    def simpson(fa, fm, fb, a, b):
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        delta = left + right - whole
        if depth <= 0 or abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        return (recurse(a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(m, b, fm, frm, fb, right, tol / 2.0, depth - 1))

    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    return recurse(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, max_depth)


# ---------------------------------------------------------------------------
# config records
# ---------------------------------------------------------------------------


def _get(rec: Mapping[str, Any], key: str, where: str):
    if key not in rec:
        raise DistributionError(f"{where}: missing field '{key}'")
    return rec[key]


def claim_from_record(rec: Mapping[str, Any]) -> ClaimDistribution:
    """Build a claim law from ``{"family": ..., <params>}``."""
    fam = _get(rec, "family", "claims")
    if fam == "uniform":
        return Uniform(float(_get(rec, "lower", "uniform")), float(_get(rec, "upper", "uniform")))
    if fam == "exponential":
        return Exponential(float(_get(rec, "rate", "exponential")))
    if fam == "lognormal":
        return LogNormal(float(_get(rec, "mu", "lognormal")), float(_get(rec, "sigma", "lognormal")))
    if fam == "point_mass":
        return PointMass(float(_get(rec, "value", "point_mass")))
    if fam == "finite_discrete":
        return FiniteDiscrete(tuple(_get(rec, "atoms", "finite_discrete")), tuple(_get(rec, "probs", "finite_discrete")))
    raise DistributionError(f"claims: unknown family '{fam}'")


def offspring_from_record(rec: Mapping[str, Any]) -> OffspringDistribution:
    fam = _get(rec, "family", "offspring")
    if fam == "poisson":
        return Poisson(float(_get(rec, "mean", "poisson")))
    if fam == "geometric":
        return Geometric(float(_get(rec, "mean", "geometric")))
    if fam == "deterministic":
        return Deterministic(_get(rec, "k", "deterministic"))
    if fam == "finite_pmf":
        return FinitePMF(tuple(_get(rec, "counts", "finite_pmf")), tuple(_get(rec, "probs", "finite_pmf")))
    raise DistributionError(f"offspring: unknown family '{fam}'")


def resource_from_record(rec: Mapping[str, Any]) -> ResourceModel:
    fam = _get(rec, "family", "resource")
    if fam == "deterministic":
        return ConstantResource(float(_get(rec, "value", "deterministic")))
    if fam == "gamma":
        return GammaResource(float(_get(rec, "shape", "gamma")), float(_get(rec, "scale", "gamma")))
    if fam == "uniform":
        return UniformResource(float(_get(rec, "lower", "uniform")), float(_get(rec, "upper", "uniform")))
    raise DistributionError(f"resource: unknown family '{fam}'")
