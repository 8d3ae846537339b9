"""Mean Age-of-Information assembly for the phase-type model.

Pipeline: counting masses -> density coefficients c_k -> busy-period
coefficients b^(i), u_k -> workload chain (Q, kappa, R, vhat) -> delay masses
d^(m) and E[D] -> transient-workload functionals q_k -> E[A].  One shared
series length K covers every coefficient sequence; it doubles until the
delay-mass tail and the q-tail diagnostic both pass.

The q-tail diagnostic compares theta * q_K with the stationary mean workload
of the background-only queue: the gap measures the numerical precision lost
to truncation, and the run is flagged when it exceeds the configured gate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import irfft, next_fast_len, rfft

from . import bounds as _bounds
from . import distributions as dist
from .busyperiod import BusyCoeffs, busy_coeffs
from .model import ModelSpec
from .phasetype import ph_moments, uniformization_coeffs, uniformization_rate
from .workload import (
    build_map,
    delay_coeffs,
    iterate_Q,
    mean_delay,
    r_matrices,
    stationary_kappa,
    vhat_coeffs,
)

__all__ = ["TruncationPolicy", "AoiReport", "b_ell_table", "qk_series", "mean_aoi"]


@dataclass(frozen=True)
class TruncationPolicy:
    """Series cutoffs and tolerances for the analytic pipeline."""

    eps_ck_mass: float = 1e-12  # density-coefficient mass criterion
    eps_dh_tail: float = 1e-8  # required delay-mass tail at length K
    q_residual_tol: float = 1e-6  # q-tail gate, relative to (limit + 1)
    K_init: int = 256
    K_cap: int = 16384
    L_cap: int = 65536  # hard cap for the c_k expansion
    Q_tol: float = 1e-12  # Q iteration stop, relative to zeta
    kendall_tol: float = 1e-14

    def __post_init__(self):
        for name in ("eps_ck_mass", "eps_dh_tail", "q_residual_tol", "Q_tol", "kendall_tol"):
            val = getattr(self, name)
            if not 0.0 < val < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {val}")
        if not 1 <= self.K_init <= self.K_cap:
            raise ValueError("K_init must satisfy 1 <= K_init <= K_cap")
        if self.L_cap < 1:
            raise ValueError("L_cap must be >= 1")


@dataclass(frozen=True)
class AoiReport:
    mean_aoi: float
    mean_delay: float
    lower_bound: float
    upper_bound: float | None
    q_residual: float
    series_length_used: int
    nbue_applicable: bool
    gate_passed: bool


def b_ell_table(b: np.ndarray, count: int, ell_max: int) -> np.ndarray:
    """Powers b_ell^(k) = [z^k] b(z)^ell for ell = 0..ell_max, k = 0..count.

    Reference implementation by repeated truncated convolution; the q-series
    consumes these rows on the fly instead of materializing the table.
    """
    table = np.zeros((ell_max + 1, count + 1))
    table[0, 0] = 1.0
    for ell in range(1, ell_max + 1):
        table[ell] = np.convolve(table[ell - 1], b[: count + 1])[: count + 1]
    return table


def qk_series(
    d: np.ndarray,
    busy: BusyCoeffs,
    e_delay: float,
    theta: float,
    zeta: float,
    rho_bg: float,
    count: int,
) -> np.ndarray:
    """Transient-workload functionals q_0..q_count.

    The inner sum over busy-period powers is evaluated in the rearranged form
    sum_ell b_ell^(k) S_ell = S_K u_k - sum_ell b_ell^(k) (S_K - S_ell), so
    only the decaying delay-tail weights need truncation.  Rows b_ell^(.) are
    generated by FFT-accelerated truncated convolution with b.
    """
    n = count + 1
    b = busy.b[:n]
    S = np.cumsum(d[:n])
    s_full = S[-1]
    w = s_full - S  # w[ell] = S_K - S_ell, zero at ell = count
    corr = np.zeros(n)
    row = np.zeros(n)
    row[0] = 1.0
    size = next_fast_len(2 * n - 1)
    fb = rfft(b, size)
    tiny = 1e-18 * max(1.0, float(busy.renewal[-1]))
    stagnant = 0
    for ell in range(n):
        if w[ell] > 0.0:
            corr += w[ell] * row
        if w[ell] * row.max() < tiny:
            stagnant += 1
            if stagnant >= 5:
                break
        else:
            stagnant = 0
        if ell < n - 1:
            row = irfft(rfft(row, size) * fb, size)[:n]
            np.maximum(row, 0.0, out=row)
    t_seq = s_full * busy.renewal[:n] - corr
    k = np.arange(n, dtype=float)
    q = e_delay / theta - (k + 1.0) * (1.0 - rho_bg) / theta**2 + np.cumsum(
        t_seq
    ) / (theta * zeta)
    if np.max(np.diff(q)) > 1e-9 * max(1.0, abs(q[0])):
        raise RuntimeError("q series is not non-increasing; series length too short")
    return q


def mean_aoi(model: ModelSpec, policy: TruncationPolicy | None = None) -> AoiReport:
    """Mean AoI of the tagged stream with bounds and truncation diagnostics.

    Retries with doubled series length until the delay tail and the q-tail
    gate pass; hitting the cap with a failing gate is reported through
    gate_passed, never hidden.
    """
    policy = policy or TruncationPolicy()
    model.require_stable()
    ph = model.gen_ph
    theta = uniformization_rate(ph)
    eg, _ = ph_moments(ph)
    lam = 1.0 / eg
    rho, rho_bg = model.rho, model.rho_bg
    eh = dist.mean(model.service)
    _, ehbg2 = dist.moments(model.background_service)
    q_limit = model.lambda_bg * ehbg2 / (2.0 * (1.0 - rho_bg) * model.mu**2)

    c = uniformization_coeffs(ph, policy.eps_ck_mass, cap=policy.L_cap)
    k_c = c.shape[0] - 1

    K = max(policy.K_init, k_c + 1)
    while True:
        C, dhat, zeta = build_map(model, K)
        Q = iterate_Q(C, dhat, zeta, policy.Q_tol * zeta)
        kappa = stationary_kappa(Q)
        R = r_matrices(Q, dhat, zeta)
        vhat = vhat_coeffs(kappa, R, rho, rho_bg, K)
        d = delay_coeffs(vhat, ph.exit_rates, model.service, zeta, model.mu, lam)
        d_tail = float(1.0 - d.sum())
        # the delay masses form a pmf; rescaling removes solver dust so the
        # telescoping inside the q recursion cancels exactly (the raw tail
        # still gates the series length below)
        d = d / d.sum()
        e_delay = mean_delay(d, zeta)
        busy = busy_coeffs(theta, model.lambda_bg, model.background_service, model.mu, K)
        q = qk_series(d, busy, e_delay, theta, zeta, rho_bg, K)
        q_residual = float(theta * q[K] - q_limit)
        gate = (
            d_tail < policy.eps_dh_tail
            and abs(q_residual) <= policy.q_residual_tol * (q_limit + 1.0)
            and float(q.min()) >= -1e-10
        )
        if gate or K >= policy.K_cap:
            break
        K = min(2 * K, policy.K_cap)
    q = np.maximum(q, 0.0)

    kk = np.arange(k_c + 1, dtype=float)
    series = c / (theta * eg) * (
        (kk + 1.0) * (kk + 2.0) / (2.0 * theta**2) + (kk + 1.0) * q[1 : k_c + 2]
    )
    e_aoi = eh / model.mu + float(series.sum())

    mset = _bounds.MomentSet.from_model(model)
    nbue = model.gen_dist is not None and dist.is_nbue(model.gen_dist)
    lower, upper_nbue = _bounds.nbue_bounds(mset)
    if nbue:
        upper = upper_nbue
    else:
        var_h = mset.EH2 - mset.EH**2
        var_g = mset.EG2 - mset.EG**2
        _, upper = _bounds.general_bounds_daley(mset, var_h, var_g)
    return AoiReport(
        mean_aoi=e_aoi,
        mean_delay=e_delay,
        lower_bound=lower,
        upper_bound=upper,
        q_residual=q_residual,
        series_length_used=K,
        nbue_applicable=nbue,
        gate_passed=bool(gate),
    )
