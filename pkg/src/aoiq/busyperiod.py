"""Background-stream M/G/1 busy-period machinery.

The probability sequence b^(i) collects the coefficients of
b(z) = (theta/zeta) z + (lambda_bg/zeta) f*_B(theta - theta z), where f*_B
solves the Kendall functional equation for the background busy period.
The renewal sequence u_k holds the coefficients of 1/(1 - b(z)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import distributions as dist
from .distributions import Distribution

__all__ = ["BusyCoeffs", "kendall_fixed_point", "ybg_table", "busy_coeffs"]


@dataclass(frozen=True)
class BusyCoeffs:
    b: np.ndarray  # b^(0) .. b^(K)
    residual: float  # 1 - sum(b)
    renewal: np.ndarray  # u_0 .. u_K, coefficients of 1/(1 - b(z))


def kendall_fixed_point(
    lambda_bg: float,
    h_bg: Distribution,
    mu: float,
    s: float,
    tol: float = 1e-14,
    max_iter: int = 10_000_000,
) -> float:
    """Busy-period LST value f*_B(s), s >= 0, by monotone fixed-point iteration.

    Iterates y <- f*_Hbg((s + lambda_bg - lambda_bg y) / mu) from y = 0; the
    map is convex on [0, 1] so the iterates increase to the minimal root.
    """
    if s < 0:
        raise ValueError(f"transform argument must be >= 0, got {s}")
    if lambda_bg == 0.0:
        return dist.lst(h_bg, s / mu)
    y = 0.0
    for _ in range(max_iter):
        y_next = dist.lst(h_bg, (s + lambda_bg - lambda_bg * y) / mu)
        if abs(y_next - y) < tol:
            return y_next
        y = y_next
    raise RuntimeError(f"Kendall fixed point did not converge at s={s}")


def masses_to_tail(
    d: Distribution, eta: float, tail_tol: float, min_len: int = 8, max_len: int = 1 << 22
) -> np.ndarray:
    """Poisson-mixture masses extended until the missing tail mass < tail_tol."""
    n = min_len
    while True:
        m = dist.poisson_mixture_masses(d, eta, n)
        if 1.0 - m.sum() < tail_tol or n >= max_len:
            return m
        n *= 2


def ybg_table(h_bg: Distribution, zeta: float, mu: float, k_max: int) -> np.ndarray:
    """Counting masses y_k^(m) for k = 1..k_max, m = 0..k_max.

    Row k holds the probabilities that a Poisson(zeta) process produces m
    points over the sum of k independent copies of H_bg / mu; rows follow by
    discrete convolution of the first row with itself.
    """
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    width = k_max + 1
    base = dist.poisson_mixture_masses(h_bg, zeta / mu, width)
    table = np.zeros((k_max, width))
    table[0] = base
    for k in range(1, k_max):
        table[k] = np.convolve(table[k - 1], base)[:width]
    return table


def busy_coeffs(
    theta: float,
    lambda_bg: float,
    h_bg: Distribution,
    mu: float,
    count: int,
    eps_tail: float = 1e-15,
) -> BusyCoeffs:
    """Coefficients b^(0..count) of b(z) plus the renewal sequence u.

    The sum over busy-period sizes is accumulated with multiplicative term
    ratios (no factorials) and stops once every term has stayed below
    eps_tail times its partial sum for 5 consecutive sizes.
    """
    zeta = theta + lambda_bg
    b = np.zeros(count + 1)
    if count >= 1:
        b[1] = theta / zeta
    if lambda_bg > 0.0:
        frac_t = theta / zeta
        frac_l = lambda_bg / zeta
        idx = np.arange(count + 1, dtype=float)
        kernel = masses_to_tail(h_bg, zeta / mu, 1e-20)
        span = kernel.shape[0]
        # row holds counting masses y_{j+1}^(m) for m = base .. base+len-1;
        # entries below j - span can never reach a used column again and are
        # dropped, so the convolution cost stays bounded in j
        row = kernel.copy()
        base = 0
        coef = np.ones(count + 1)  # C(i+j, i) (theta/zeta)^i (lambda_bg/zeta)^j
        coef[1:] = np.cumprod(np.full(count, frac_t))
        j = 0
        stagnant = 0
        while True:
            window = row[max(j - base, 0) : j - base + count + 1]
            contrib = frac_l * coef[: window.shape[0]] / (j + 1.0) * window
            b[: contrib.shape[0]] += contrib
            # every term is bounded by its component's total, so a vector-scale
            # threshold cannot starve a coefficient that matters
            if contrib.size == 0 or contrib.max() <= eps_tail * b.sum():
                stagnant += 1
                if stagnant >= 5:
                    break
            else:
                stagnant = 0
            j += 1
            if j > 100 * count + 1_000_000:
                raise RuntimeError("busy-period size sum failed to stagnate")
            row = np.convolve(row, kernel)
            drop = j - span - base
            if drop > 0:
                row = row[drop:]
                base += drop
            if row.shape[0] > count + 2 * span + 2:
                row = row[: count + 2 * span + 2]
            # C(i+j, i) (t/z)^i (l/z)^j -> multiply by (i+j)/j * (l/z)
            coef *= (idx + j) / j * frac_l
    if b[0] >= 1.0:
        raise RuntimeError(f"b^(0) = {b[0]} >= 1 signals corrupted inputs")
    u = np.empty(count + 1)
    u[0] = 1.0 / (1.0 - b[0])
    for k in range(1, count + 1):
        u[k] = np.dot(b[1 : k + 1], u[k - 1 :: -1]) / (1.0 - b[0])
    return BusyCoeffs(b=b, residual=float(1.0 - b.sum()), renewal=u)
