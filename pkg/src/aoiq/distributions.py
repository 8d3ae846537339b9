"""Closed-form scalar distributions for service and inter-generation times.

Every law used by the toolkit is one of five parametric families with
exact first/second moments, Laplace-Stieltjes transform, Poisson-mixture
masses and a vectorized sampler.  Mixture masses are computed with
multiplicative term updates (no factorials), so they stay finite for
index counts in the hundreds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Deterministic",
    "Exponential",
    "Erlang",
    "Hyperexponential",
    "MixedErlang",
    "Distribution",
    "moments",
    "mean",
    "cv",
    "lst",
    "poisson_mixture_mass",
    "poisson_mixture_masses",
    "sample",
    "is_nbue",
    "from_mean_cv",
]

_WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class Deterministic:
    """Point mass at d >= 0."""

    d: float

    def __post_init__(self):
        if self.d < 0:
            raise ValueError(f"deterministic value must be >= 0, got {self.d}")


@dataclass(frozen=True)
class Exponential:
    rate: float

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError(f"rate must be > 0, got {self.rate}")


@dataclass(frozen=True)
class Erlang:
    k: int
    rate: float

    def __post_init__(self):
        if self.k < 1 or self.k != int(self.k):
            raise ValueError(f"shape k must be a positive integer, got {self.k}")
        if self.rate <= 0:
            raise ValueError(f"rate must be > 0, got {self.rate}")


@dataclass(frozen=True)
class Hyperexponential:
    """Mixture of exponentials: rate[i] with probability weights[i]."""

    weights: tuple[float, ...]
    rates: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        if len(self.weights) != len(self.rates) or not self.weights:
            raise ValueError("weights and rates must be non-empty and equal length")
        if any(w < 0 or w > 1 for w in self.weights):
            raise ValueError(f"weights must lie in [0, 1], got {self.weights}")
        if abs(sum(self.weights) - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"weights must sum to 1, got sum {sum(self.weights)}")
        if any(r <= 0 for r in self.rates):
            raise ValueError(f"rates must be > 0, got {self.rates}")


@dataclass(frozen=True)
class MixedErlang:
    """Erlang(k, rate) with probability p, Erlang(k+1, rate) with probability 1-p."""

    p: float
    k: int
    rate: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"mixing probability must lie in [0, 1], got {self.p}")
        if self.k < 1 or self.k != int(self.k):
            raise ValueError(f"shape k must be a positive integer, got {self.k}")
        if self.rate <= 0:
            raise ValueError(f"rate must be > 0, got {self.rate}")


Distribution = Deterministic | Exponential | Erlang | Hyperexponential | MixedErlang


def moments(dist: Distribution) -> tuple[float, float]:
    """Exact first and second raw moments (m1, m2)."""
    if isinstance(dist, Deterministic):
        return dist.d, dist.d**2
    if isinstance(dist, Exponential):
        return 1.0 / dist.rate, 2.0 / dist.rate**2
    if isinstance(dist, Erlang):
        k, r = dist.k, dist.rate
        return k / r, k * (k + 1) / r**2
    if isinstance(dist, Hyperexponential):
        w = np.asarray(dist.weights)
        r = np.asarray(dist.rates)
        return float(np.sum(w / r)), float(np.sum(2.0 * w / r**2))
    if isinstance(dist, MixedErlang):
        p, k, r = dist.p, dist.k, dist.rate
        m1 = (p * k + (1 - p) * (k + 1)) / r
        m2 = (p * k * (k + 1) + (1 - p) * (k + 1) * (k + 2)) / r**2
        return m1, m2
    raise TypeError(f"unsupported distribution {dist!r}")


def mean(dist: Distribution) -> float:
    return moments(dist)[0]


def cv(dist: Distribution) -> float:
    """Coefficient of variation sqrt(Var)/mean."""
    m1, m2 = moments(dist)
    if m1 == 0.0:
        return 0.0
    var = max(m2 - m1 * m1, 0.0)
    return math.sqrt(var) / m1


def lst(dist: Distribution, s: float) -> float:
    """Laplace-Stieltjes transform E[exp(-s X)] for s >= 0."""
    if s < 0:
        raise ValueError(f"LST argument must be >= 0, got {s}")
    if isinstance(dist, Deterministic):
        return math.exp(-s * dist.d)
    if isinstance(dist, Exponential):
        return dist.rate / (dist.rate + s)
    if isinstance(dist, Erlang):
        return (dist.rate / (dist.rate + s)) ** dist.k
    if isinstance(dist, Hyperexponential):
        return float(sum(w * r / (r + s) for w, r in zip(dist.weights, dist.rates)))
    if isinstance(dist, MixedErlang):
        base = dist.rate / (dist.rate + s)
        return dist.p * base**dist.k + (1 - dist.p) * base ** (dist.k + 1)
    raise TypeError(f"unsupported distribution {dist!r}")


def poisson_mixture_masses(dist: Distribution, eta: float, count: int) -> np.ndarray:
    """Masses integral of exp(-eta x) (eta x)^m / m! dF(x) for m = 0..count-1.

    Closed form per family: Poisson pmf (deterministic), geometric
    (exponential), negative binomial (Erlang), and weighted combinations
    for the mixtures.  Terms are built by multiplicative ratios.
    """
    if eta <= 0:
        raise ValueError(f"eta must be > 0, got {eta}")
    if count <= 0:
        return np.zeros(0)
    m = np.arange(count)
    if isinstance(dist, Deterministic):
        a = eta * dist.d
        if a == 0.0:
            out = np.zeros(count)
            out[0] = 1.0
            return out
        # cumulative log-free product: p_{m+1} = p_m * a / (m + 1)
        ratios = np.ones(count)
        ratios[1:] = a / m[1:]
        return math.exp(-a) * np.cumprod(ratios)
    if isinstance(dist, Exponential):
        r = dist.rate
        q = eta / (r + eta)
        return (r / (r + eta)) * q**m
    if isinstance(dist, Erlang):
        return _negbinom_masses(dist.k, dist.rate, eta, count)
    if isinstance(dist, Hyperexponential):
        out = np.zeros(count)
        for w, r in zip(dist.weights, dist.rates):
            q = eta / (r + eta)
            out += w * (r / (r + eta)) * q**m
        return out
    if isinstance(dist, MixedErlang):
        return dist.p * _negbinom_masses(dist.k, dist.rate, eta, count) + (
            1 - dist.p
        ) * _negbinom_masses(dist.k + 1, dist.rate, eta, count)
    raise TypeError(f"unsupported distribution {dist!r}")


def _negbinom_masses(k: int, rate: float, eta: float, count: int) -> np.ndarray:
    # C(m+k-1, m) (r/(r+eta))^k (eta/(r+eta))^m via term ratios (m+k)/(m+1) * q
    q = eta / (rate + eta)
    ratios = np.ones(count)
    mm = np.arange(1, count)
    ratios[1:] = (mm + k - 1) / mm * q
    return (rate / (rate + eta)) ** k * np.cumprod(ratios)


def poisson_mixture_mass(dist: Distribution, eta: float, m: int) -> float:
    """Single Poisson-mixture mass at index m >= 0."""
    if m < 0:
        raise ValueError(f"index m must be >= 0, got {m}")
    return float(poisson_mixture_masses(dist, eta, m + 1)[m])


def sample(dist: Distribution, rng: np.random.Generator, size: int | None = None):
    """Draw variates; scalar when size is None, array otherwise."""
    n = 1 if size is None else size
    if isinstance(dist, Deterministic):
        out = np.full(n, dist.d)
    elif isinstance(dist, Exponential):
        out = rng.exponential(1.0 / dist.rate, size=n)
    elif isinstance(dist, Erlang):
        out = rng.standard_gamma(dist.k, size=n) / dist.rate
    elif isinstance(dist, Hyperexponential):
        idx = rng.choice(len(dist.weights), p=dist.weights, size=n)
        out = rng.exponential(1.0, size=n) / np.asarray(dist.rates)[idx]
    elif isinstance(dist, MixedErlang):
        shape = np.where(rng.random(n) < dist.p, dist.k, dist.k + 1)
        out = rng.standard_gamma(shape, size=n) / dist.rate
    else:
        raise TypeError(f"unsupported distribution {dist!r}")
    return float(out[0]) if size is None else out


def is_nbue(dist: Distribution) -> bool:
    """New-better-than-used-in-expectation, decided structurally per family."""
    return not isinstance(dist, Hyperexponential)


def from_mean_cv(mean_value: float, cv_value: float) -> Distribution:
    """Two-moment realization of a law with given mean and coefficient of variation.

    cv = 0 gives a point mass, cv = 1 an exponential, cv in (0, 1) the
    mixed-Erlang fit (plain Erlang when 1/cv^2 is an integer), and cv > 1
    the balanced-means two-phase hyperexponential.
    """
    if mean_value <= 0:
        raise ValueError(f"mean must be > 0, got {mean_value}")
    if cv_value < 0:
        raise ValueError(f"cv must be >= 0, got {cv_value}")
    if cv_value == 0.0:
        return Deterministic(mean_value)
    if cv_value == 1.0:
        return Exponential(1.0 / mean_value)
    cv2 = cv_value * cv_value
    if cv_value < 1.0:
        k = math.ceil(1.0 / cv2 - 1e-12)
        if abs(k * cv2 - 1.0) < 1e-9:
            return Erlang(k, k / mean_value)
        p = (k * cv2 - math.sqrt(k * (1 + cv2) - k * k * cv2)) / (1 + cv2)
        nu = (k - p) / mean_value
        return MixedErlang(p, k - 1, nu)
    p1 = 0.5 * (1.0 + math.sqrt((cv2 - 1.0) / (cv2 + 1.0)))
    nu1 = 2.0 * p1 / mean_value
    nu2 = 2.0 * (1.0 - p1) / mean_value
    return Hyperexponential((p1, 1.0 - p1), (nu1, nu2))
