"""Phase-type representation of inter-generation times.

A law is described by an initial probability row vector gamma and a
subgenerator Gamma; absorption time of the underlying Markov chain is the
inter-generation time.  The module provides the two-moment fit onto this
class, the uniformization rate theta and the expansion coefficients c_k of
the density as a Poisson-weighted series, exact for mixtures of Erlangs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

__all__ = [
    "PhaseType",
    "fit_two_moment",
    "erlang_ph",
    "deterministic_approx",
    "ph_mean",
    "ph_moments",
    "uniformization_rate",
    "uniformization_coeffs",
    "sample_ph",
]

_PROB_TOL = 1e-12


@dataclass(frozen=True)
class PhaseType:
    gamma: np.ndarray = field(repr=False)
    Gamma: np.ndarray = field(repr=False)

    def __post_init__(self):
        g = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        G = np.atleast_2d(np.asarray(self.Gamma, dtype=float))
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "Gamma", G)
        m = g.shape[0]
        if G.shape != (m, m):
            raise ValueError(f"Gamma must be {m}x{m}, got {G.shape}")
        if np.any(g < 0) or abs(g.sum() - 1.0) > _PROB_TOL:
            raise ValueError("gamma must be a probability vector")
        if np.any(np.diag(G) >= 0):
            raise ValueError("Gamma diagonal must be strictly negative")
        off = G - np.diag(np.diag(G))
        if np.any(off < 0):
            raise ValueError("Gamma off-diagonal must be non-negative")
        rowsums = G.sum(axis=1)
        if np.any(rowsums > _PROB_TOL) or not np.any(rowsums < -_PROB_TOL):
            raise ValueError("Gamma row sums must be <= 0 with at least one < 0")
        # irreducibility of the renewal generator Gamma + (-Gamma e) gamma,
        # checked on the nonzero pattern
        renew = G + np.outer(-rowsums, g)
        pattern = (np.abs(renew) > 0).astype(int)
        np.fill_diagonal(pattern, 1)
        n_comp, _ = connected_components(pattern, directed=True, connection="strong")
        if n_comp != 1:
            raise ValueError("renewal chain Gamma + (-Gamma e) gamma is reducible")

    @property
    def order(self) -> int:
        return self.gamma.shape[0]

    @property
    def exit_rates(self) -> np.ndarray:
        """Absorption rate vector (-Gamma e)."""
        return -self.Gamma.sum(axis=1)


def ph_mean(ph: PhaseType) -> float:
    """Mean absorption time gamma (-Gamma)^{-1} e, by linear solve."""
    y = np.linalg.solve(-ph.Gamma, np.ones(ph.order))
    return float(ph.gamma @ y)


def ph_moments(ph: PhaseType) -> tuple[float, float]:
    """First and second raw moments of the absorption time."""
    e = np.ones(ph.order)
    y1 = np.linalg.solve(-ph.Gamma, e)
    y2 = np.linalg.solve(-ph.Gamma, y1)
    return float(ph.gamma @ y1), float(2.0 * (ph.gamma @ y2))


def uniformization_rate(ph: PhaseType) -> float:
    """theta = max_i |Gamma_ii|."""
    return float(np.max(-np.diag(ph.Gamma)))


def uniformization_coeffs(
    ph: PhaseType, eps_mass: float, cap: int = 65536
) -> np.ndarray:
    """Density expansion coefficients c_k = gamma (I + Gamma/theta)^k (-Gamma) e.

    Truncated at the first K with 1 - sum(c_k)/theta < eps_mass; the sum is
    exact (finite) for mixed-Erlang representations.  Tiny negative values
    from roundoff are clamped to zero.
    """
    if not 0.0 < eps_mass < 1.0:
        raise ValueError(f"eps_mass must lie in (0, 1), got {eps_mass}")
    theta = uniformization_rate(ph)
    step = np.eye(ph.order) + ph.Gamma / theta
    tvec = ph.exit_rates
    coeffs = []
    v = ph.gamma.copy()
    mass = 0.0
    while True:
        c = float(v @ tvec)
        if c < 0.0:
            if c < -1e-14:
                raise ValueError(f"uniformization coefficient {c} below tolerance")
            c = 0.0
        coeffs.append(c)
        mass += c / theta
        if 1.0 - mass < eps_mass:
            break
        if len(coeffs) > cap:
            raise RuntimeError(
                f"uniformization mass criterion not met within cap {cap}"
            )
        v = v @ step
    return np.asarray(coeffs)


def fit_two_moment(mean: float, cv: float) -> PhaseType:
    """Two-moment fit: mixed Erlang for cv <= 1, balanced-means H2 for cv > 1.

    For cv < 1 the order k satisfies 1/k <= cv^2 <= 1/(k-1) and the law is
    Erlang(k-1, nu) w.p. p, Erlang(k, nu) w.p. 1-p, realized as a chain of k
    exponential phases entered at phase 2 w.p. p.  cv = 0 is rejected; a
    deterministic law is approximated by deterministic_approx().
    """
    if mean <= 0:
        raise ValueError(f"mean must be > 0, got {mean}")
    if cv <= 0:
        raise ValueError(f"cv must be > 0 for a phase-type fit, got {cv}")
    if cv == 1.0:
        return PhaseType(np.array([1.0]), np.array([[-1.0 / mean]]))
    cv2 = cv * cv
    if cv < 1.0:
        k = math.ceil(1.0 / cv2 - 1e-12)
        p = (k * cv2 - math.sqrt(k * (1 + cv2) - k * k * cv2)) / (1 + cv2)
        nu = (k - p) / mean
        gamma = np.zeros(k)
        gamma[0] = 1.0 - p
        gamma[1] = p
        G = -nu * np.eye(k) + nu * np.eye(k, k=1)
        return PhaseType(gamma, G)
    p1 = 0.5 * (1.0 + math.sqrt((cv2 - 1.0) / (cv2 + 1.0)))
    nu1 = 2.0 * p1 / mean
    nu2 = 2.0 * (1.0 - p1) / mean
    return PhaseType(np.array([p1, 1.0 - p1]), np.diag([-nu1, -nu2]))


def erlang_ph(k: int, rate: float) -> PhaseType:
    """Erlang(k, rate) as a k-phase chain."""
    gamma = np.zeros(k)
    gamma[0] = 1.0
    G = -rate * np.eye(k) + rate * np.eye(k, k=1)
    return PhaseType(gamma, G)


def deterministic_approx(mean: float, order: int = 100) -> PhaseType:
    """Erlang(order) approximation of a point mass at `mean` (cv = 1/sqrt(order))."""
    if mean <= 0:
        raise ValueError(f"mean must be > 0, got {mean}")
    return erlang_ph(order, order / mean)


def sample_ph(ph: PhaseType, rng: np.random.Generator, size: int) -> np.ndarray:
    """Absorption times of the phase chain, drawn in vectorized sweeps."""
    m = ph.order
    exit_rate = -np.diag(ph.Gamma)
    # jump kernel rows: transitions to phases 0..m-1, absorption in column m
    P = np.zeros((m, m + 1))
    P[:, :m] = (ph.Gamma - np.diag(np.diag(ph.Gamma))) / exit_rate[:, None]
    P[:, m] = ph.exit_rates / exit_rate
    cumP = np.cumsum(P, axis=1)
    cumP[:, m] = 1.0
    state = rng.choice(m, p=ph.gamma / ph.gamma.sum(), size=size)
    total = np.zeros(size)
    active = np.arange(size)
    while active.size:
        s = state[active]
        total[active] += rng.exponential(1.0, size=active.size) / exit_rate[s]
        nxt = (rng.random(active.size)[:, None] > cumP[s]).sum(axis=1)
        state[active] = np.minimum(nxt, m - 1)
        active = active[nxt < m]
    return total
