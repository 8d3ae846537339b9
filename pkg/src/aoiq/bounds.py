"""Closed-form mean-AoI bounds and the near-optimal generation rate.

The lower bound holds for any inter-generation law with finite second
moment; the matching upper bound requires an NBUE law, with a two-moment
(Daley) fallback otherwise.  Minimizing the NBUE upper bound over the
generation rate has an explicit solution lambda_star whose value is an
accurate proxy for the exact AoI-minimizing rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import distributions as dist
from .model import ModelSpec, StabilityError
from .phasetype import ph_moments

__all__ = [
    "MomentSet",
    "nbue_bounds",
    "general_bounds_daley",
    "optimal_rate",
    "optimal_bound_value",
    "minimize_mean_aoi",
    "default_bracket",
]

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class MomentSet:
    """First two moments of every model ingredient, plus the service rate."""

    lam: float
    lambda_bg: float
    EH: float
    EHbg: float
    EH2: float
    EHbg2: float
    EG: float
    EG2: float
    mu: float

    def __post_init__(self):
        if self.EG2 < self.EG**2 * (1.0 - 1e-12):
            raise ValueError("EG2 must be >= EG^2")
        if self.rho + self.rho_bg >= 1.0:
            raise StabilityError(
                f"rho + rho_bg = {self.rho + self.rho_bg:.6g} >= 1"
            )

    @classmethod
    def from_model(cls, model: ModelSpec) -> "MomentSet":
        eg, eg2 = ph_moments(model.gen_ph)
        eh, eh2 = dist.moments(model.service)
        ehbg, ehbg2 = dist.moments(model.background_service)
        return cls(
            lam=1.0 / eg,
            lambda_bg=model.lambda_bg,
            EH=eh,
            EHbg=ehbg,
            EH2=eh2,
            EHbg2=ehbg2,
            EG=eg,
            EG2=eg2,
            mu=model.mu,
        )

    @property
    def rho(self) -> float:
        return self.lam * self.EH / self.mu

    @property
    def rho_bg(self) -> float:
        return self.lambda_bg * self.EHbg / self.mu

    @property
    def sigma_G(self) -> float:
        """sqrt(s_G^2 + 1) = sqrt(EG2)/EG."""
        return math.sqrt(self.EG2) / self.EG

    @property
    def Omega(self) -> float:
        val = self.EH2 + (self.EH * self.EHbg2 - self.EH2 * self.EHbg) * (
            self.lambda_bg / self.mu
        )
        if val <= 0:
            raise ValueError(f"Omega^2 = {val} must be positive")
        return math.sqrt(val)


def nbue_bounds(m: MomentSet) -> tuple[float, float]:
    """(lower, upper) mean-AoI bounds; the upper one assumes G is NBUE."""
    base = m.EH / m.mu + m.EG2 / (2.0 * m.EG)
    lower = m.lambda_bg * m.EHbg2 / (2.0 * (1.0 - m.rho_bg) * m.mu**2) + base
    upper = (m.lam * m.EH2 + m.lambda_bg * m.EHbg2) / (
        2.0 * (1.0 - m.rho - m.rho_bg) * m.mu**2
    ) + base
    return lower, upper


def general_bounds_daley(
    m: MomentSet, var_H: float, var_G: float
) -> tuple[float, float]:
    """Bounds without the NBUE assumption; upper side uses the Daley waiting-time bound."""
    rho_star = m.rho / (1.0 - m.rho_bg)
    if rho_star >= 1.0:
        raise StabilityError(f"reduced load rho_star = {rho_star:.6g} >= 1")
    var_h_star = var_H / (m.mu**2 * (1.0 - m.rho_bg) ** 2) + m.rho_bg * m.EHbg2 / (
        m.mu**2 * (1.0 - m.rho_bg) ** 3
    )
    w_bar = (var_h_star + rho_star * (2.0 - rho_star) * var_G) / (
        2.0 * (1.0 - rho_star) * m.EG
    )
    lower = (
        m.lambda_bg * m.EHbg2 / (2.0 * (1.0 - m.rho_bg) * m.mu**2)
        + m.EH / m.mu
        + m.EG2 / (2.0 * m.EG)
    )
    return lower, lower + (1.0 - m.rho_bg) * w_bar


def optimal_rate(
    EH: float,
    EH2: float,
    EHbg: float,
    EHbg2: float,
    lambda_bg: float,
    mu: float,
    s_G: float,
) -> float:
    """Generation rate minimizing the NBUE upper bound, in closed form."""
    rho_bg = lambda_bg * EHbg / mu
    if rho_bg >= 1.0:
        raise StabilityError(f"rho_bg = {rho_bg:.6g} >= 1")
    sigma_g = math.sqrt(s_G**2 + 1.0)
    omega = math.sqrt(EH2 + (EH * EHbg2 - EH2 * EHbg) * lambda_bg / mu)
    lam_star = mu * (1.0 - rho_bg) * sigma_g / (omega + EH * sigma_g)
    if lam_star * EH / mu + rho_bg >= 1.0:
        raise RuntimeError("optimal rate left the stability region")
    return lam_star


def optimal_bound_value(
    EH: float,
    EH2: float,
    EHbg: float,
    EHbg2: float,
    lambda_bg: float,
    mu: float,
    s_G: float,
) -> float:
    """Value of the NBUE upper bound at the optimal rate."""
    sigma_g = math.sqrt(s_G**2 + 1.0)
    omega = math.sqrt(EH2 + (EH * EHbg2 - EH2 * EHbg) * lambda_bg / mu)
    spare = mu - lambda_bg * EHbg
    return (
        2.0 * mu * omega * sigma_g
        + 2.0 * spare * EH
        + lambda_bg * EHbg2
        + mu * EH * sigma_g**2
    ) / (2.0 * mu * spare)


def default_bracket(EH: float, EHbg: float, lambda_bg: float, mu: float) -> tuple[float, float]:
    """Search bracket for the generation rate, right edge set by stability."""
    lam_max = (mu - lambda_bg * EHbg) / EH
    return 1e-3 * lam_max, 0.98 * lam_max


def minimize_mean_aoi(
    model_family: Callable[[float], ModelSpec],
    policy=None,
    bracket: tuple[float, float] | None = None,
    xtol: float = 5e-4,
) -> tuple[float, float]:
    """Golden-section minimization of lambda -> mean AoI over a stable bracket.

    Returns (lambda_opt, mean_aoi_opt).  The minimum must be interior: if the
    search collapses onto a bracket edge, the bracket did not contain it.
    """
    from .meanaoi import mean_aoi

    if bracket is None:
        probe = model_family(1e-3)
        bracket = default_bracket(
            dist.mean(probe.service),
            dist.mean(probe.background_service),
            probe.lambda_bg,
            probe.mu,
        )
    a, b = bracket
    if not 0.0 < a < b:
        raise ValueError(f"invalid bracket {bracket}")

    def f(lam: float) -> float:
        return mean_aoi(model_family(lam), policy).mean_aoi

    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    lam_opt = 0.5 * (a + b)
    value = f(lam_opt)
    lo, hi = bracket
    if lam_opt - lo < 2.0 * xtol or hi - lam_opt < 2.0 * xtol:
        raise RuntimeError(
            f"no interior minimum: search ended at {lam_opt:.6g} near bracket edge"
        )
    return lam_opt, value
