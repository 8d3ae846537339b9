"""Matrix-analytic workload analysis of the tagged + background superposition.

The total input forms a compound Markovian arrival process driven by the
generation phase.  All matrix series are Poisson-weighted (uniformized) at
rate zeta = theta + lambda_bg, so every recursion mixes non-negative terms:
the Q fixed point, the R-matrices, the stationary phase/workload
coefficients vhat and the delay masses d^(m).
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .busyperiod import masses_to_tail
from .distributions import Distribution
from .model import ModelSpec
from .phasetype import uniformization_rate

__all__ = [
    "build_map",
    "iterate_Q",
    "stationary_kappa",
    "r_matrices",
    "vhat_coeffs",
    "delay_coeffs",
    "mean_delay",
]

_MASS_TAIL = 1e-17


def build_map(model: ModelSpec, count: int) -> tuple[np.ndarray, np.ndarray, float]:
    """Phase generator C = Gamma - lambda_bg I and jump matrices Dhat^(0..).

    Dhat^(m) = (-Gamma e) gamma hhat^(m) + lambda_bg hbghat^(m) I with the
    service counting masses taken at rate zeta / mu.  The stack is truncated
    where both mass tails drop below 1e-17 (capped at `count`).
    """
    ph = model.gen_ph
    theta = uniformization_rate(ph)
    zeta = theta + model.lambda_bg
    eta = zeta / model.mu
    h = masses_to_tail(model.service, eta, _MASS_TAIL, max_len=count + 1)
    hbg = masses_to_tail(model.background_service, eta, _MASS_TAIL, max_len=count + 1)
    n = max(h.shape[0], hbg.shape[0])
    h = np.pad(h, (0, n - h.shape[0]))
    hbg = np.pad(hbg, (0, n - hbg.shape[0]))
    jump = np.outer(ph.exit_rates, ph.gamma)
    eye = np.eye(ph.order)
    dhat = jump[None, :, :] * h[:, None, None] + (
        model.lambda_bg * hbg[:, None, None]
    ) * eye[None, :, :]
    C = ph.Gamma - model.lambda_bg * eye
    return C, dhat, zeta


def iterate_Q(
    C: np.ndarray,
    dhat: np.ndarray,
    zeta: float,
    tol: float,
    max_iter: int = 1_000_000,
) -> np.ndarray:
    """Limit of Q^(n) = C + sum_k Dhat^(k) (I + Q^(n-1)/zeta)^k.

    The iterates are elementwise non-decreasing and uniformized-substochastic;
    both properties are asserted every step, and violation (or hitting the
    iteration cap) signals that the series truncation is too short.
    """
    m = C.shape[0]
    eye = np.eye(m)
    Q = C.copy()
    slack = 1e-12 * zeta
    for _ in range(max_iter):
        U = eye + Q / zeta
        if np.any(U < -1e-12) or np.any(U.sum(axis=1) > 1.0 + 1e-12):
            raise RuntimeError("uniformized iterate left the substochastic cone")
        power = eye
        total = dhat[0].copy()
        for k in range(1, dhat.shape[0]):
            power = power @ U
            total += dhat[k] @ power
        Q_next = C + total
        diff = Q_next - Q
        if np.any(diff < -slack):
            raise RuntimeError("Q iteration is not elementwise non-decreasing")
        Q_next = np.maximum(Q_next, Q)
        if np.max(diff) < tol:
            return Q_next
        Q = Q_next
    raise RuntimeError(f"Q iteration did not converge within {max_iter} steps")


def stationary_kappa(Q: np.ndarray) -> np.ndarray:
    """Stationary probability vector of the generator Q (kappa Q = 0)."""
    m = Q.shape[0]
    A = Q.T.copy()
    A[-1, :] = 1.0
    rhs = np.zeros(m)
    rhs[-1] = 1.0
    kappa = np.linalg.solve(A, rhs)
    resid = float(np.max(np.abs(kappa @ Q)))
    if resid > 1e-9:
        raise RuntimeError(f"kappa residual {resid} too large; Q not converged?")
    return np.maximum(kappa, 0.0) / np.maximum(kappa, 0.0).sum()


def r_matrices(Q: np.ndarray, dhat: np.ndarray, zeta: float) -> np.ndarray:
    """Stack R^(0..J-1) with R^(m) = sum_k Dhat^(m+k+1) (I + Q/zeta)^k / zeta.

    R^(m) vanishes for m beyond the Dhat support, so the stack length is one
    less than Dhat's.  Accumulated top-down so each entry costs one product.
    """
    m = Q.shape[0]
    U = np.eye(m) + Q / zeta
    j = dhat.shape[0]
    out = np.zeros((max(j - 1, 1), m, m))
    acc = np.zeros((m, m))
    for i in range(j - 1, 0, -1):
        acc = dhat[i] + acc @ U
        out[i - 1] = acc / zeta
    return np.maximum(out, 0.0)


def vhat_coeffs(
    kappa: np.ndarray,
    R: np.ndarray,
    rho: float,
    rho_bg: float,
    count: int,
) -> np.ndarray:
    """Coefficients vhat^(0..count) of the stationary workload/phase vector.

    vhat^(0) = (1 - rho - rho_bg) kappa (I - R^(0))^{-1} and each later term
    feeds the earlier ones through the R stack; the inverse is applied via a
    factored linear solve.
    """
    m = kappa.shape[0]
    J = R.shape[0]
    lu = lu_factor((np.eye(m) - R[0]).T)
    v = np.zeros((count + 1, m))
    v[0] = lu_solve(lu, (1.0 - rho - rho_bg) * kappa)
    for i in range(1, count + 1):
        jmax = min(i, J - 1)
        if jmax >= 1:
            s = np.einsum("jm,jmn->n", v[i - jmax : i][::-1], R[1 : jmax + 1])
            v[i] = lu_solve(lu, s)
    return np.maximum(v, 0.0)


def delay_coeffs(
    vhat: np.ndarray,
    exit_rates: np.ndarray,
    service: Distribution,
    zeta: float,
    mu: float,
    lam: float,
) -> np.ndarray:
    """Delay masses d^(m) = sum_k vhat^(k) (-Gamma e) hhat^(m-k) / lambda."""
    w = vhat @ exit_rates
    h = masses_to_tail(service, zeta / mu, _MASS_TAIL, max_len=vhat.shape[0])
    d = np.convolve(w, h)[: vhat.shape[0]] / lam
    return np.maximum(d, 0.0)


def mean_delay(d: np.ndarray, zeta: float) -> float:
    """E[D] = sum_m m d^(m) / zeta."""
    return float(np.dot(np.arange(d.shape[0]), d) / zeta)
