"""Full queueing-model instance shared by the analytic pipeline and the simulator.

A model couples the tagged stream (phase-type inter-generation times, general
service requirements) with compound-Poisson background traffic at a single
FCFS server of rate mu.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import distributions as dist
from . import phasetype as pht
from .distributions import Distribution
from .phasetype import PhaseType

__all__ = ["ModelSpec", "StabilityError", "make_model"]


class StabilityError(ValueError):
    """Raised when rho + rho_bg >= 1."""


@dataclass(frozen=True)
class ModelSpec:
    gen_ph: PhaseType
    service: Distribution
    lambda_bg: float
    background_service: Distribution
    mu: float
    # exact sampleable law of the inter-generation time when known
    # (None for explicit phase-type input; the chain itself is sampled then)
    gen_dist: Distribution | None = None

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError(f"service rate mu must be > 0, got {self.mu}")
        if self.lambda_bg < 0:
            raise ValueError(f"lambda_bg must be >= 0, got {self.lambda_bg}")

    @property
    def lam(self) -> float:
        """Generation rate 1/E[G]."""
        return 1.0 / pht.ph_mean(self.gen_ph)

    @property
    def rho(self) -> float:
        return self.lam * dist.mean(self.service) / self.mu

    @property
    def rho_bg(self) -> float:
        return self.lambda_bg * dist.mean(self.background_service) / self.mu

    @property
    def stable(self) -> bool:
        return self.rho + self.rho_bg < 1.0

    def require_stable(self) -> None:
        if not self.stable:
            raise StabilityError(
                f"stability condition rho + rho_bg < 1 violated: "
                f"{self.rho:.6g} + {self.rho_bg:.6g} >= 1"
            )

    def sample_generation(self, rng, size: int):
        if self.gen_dist is not None:
            return dist.sample(self.gen_dist, rng, size)
        return pht.sample_ph(self.gen_ph, rng, size)


def make_model(
    lam: float,
    cv_G: float,
    lambda_bg: float,
    mu: float,
    service: Distribution,
    background_service: Distribution,
    det_approx_order: int = 100,
) -> ModelSpec:
    """Model with inter-generation law fitted from (1/lam, cv_G).

    cv_G = 0 selects the Erlang(det_approx_order) stand-in for a point mass;
    the simulator still draws exact deterministic intervals in that case.
    """
    if lam <= 0:
        raise ValueError(f"generation rate must be > 0, got {lam}")
    mean_G = 1.0 / lam
    if cv_G == 0.0:
        ph = pht.deterministic_approx(mean_G, det_approx_order)
        gd: Distribution = dist.Deterministic(mean_G)
    else:
        ph = pht.fit_two_moment(mean_G, cv_G)
        gd = dist.from_mean_cv(mean_G, cv_G)
    return ModelSpec(
        gen_ph=ph,
        service=service,
        lambda_bg=lambda_bg,
        background_service=background_service,
        mu=mu,
        gen_dist=gd,
    )
