"""Discrete-event simulation oracle for the shared-server AoI model.

Arrivals are the only events: between jumps the workload drains linearly,
so the per-event update V <- max(0, V - mu dt) + jump is exact.  Blocks of
events are processed with a vectorized running-maximum form of that
recursion, which keeps horizons of 1e7 time units cheap.  All within-block
times are kept relative to the block start so the per-path identity
peak = delay + gap holds to 1e-9 even at large absolute times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import distributions as dist
from .model import ModelSpec

__all__ = ["SimEstimate", "simulate", "replicate"]


@dataclass(frozen=True)
class SimEstimate:
    mean_aoi: float
    stderr_aoi: float
    mean_delay: float
    stderr_delay: float
    mean_peak: float
    horizon: float
    n_tagged: int
    seed: int


def _rng_for(seed_entropy) -> np.random.Generator:
    # counter-based generator: independent streams from distinct key material
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed_entropy)))


def _arrivals_until(rng, sampler, t_next, t_end, rate_hint):
    """Arrival times in [t_next, t_end) plus the first arrival >= t_end."""
    chunks = []
    while t_next < t_end:
        n = max(
            64,
            int(
                (t_end - t_next) * rate_hint * 1.1
                + 10.0 * math.sqrt((t_end - t_next) * rate_hint + 1.0)
            ),
        )
        gaps = sampler(rng, n)
        times = t_next + np.concatenate(([0.0], np.cumsum(gaps[:-1])))
        inside = times < t_end
        if inside.all():
            chunks.append(times)
            t_next = times[-1] + gaps[-1]
        else:
            cut = int(np.argmin(inside))
            chunks.append(times[:cut])
            t_next = times[cut]
            break
    if chunks:
        return np.concatenate(chunks), t_next
    return np.zeros(0), t_next


def _bin_add(bins, edges, pos_lo, pos_hi, age_lo, age_hi):
    """Accumulate areas under the age line into measurement-time bins."""
    if pos_lo.size == 0:
        return
    i0 = np.clip(np.searchsorted(edges, pos_lo, side="right") - 1, 0, bins.size - 1)
    i1 = np.clip(np.searchsorted(edges, pos_hi, side="left") - 1, 0, bins.size - 1)
    same = i0 == i1
    np.add.at(bins, i0[same], 0.5 * (age_hi[same] ** 2 - age_lo[same] ** 2))
    for j in np.flatnonzero(~same):
        base = pos_lo[j] - age_lo[j]
        lo = age_lo[j]
        for k in range(i0[j], i1[j] + 1):
            hi = age_hi[j] if k == i1[j] else edges[k + 1] - base
            bins[k] += 0.5 * (hi**2 - lo**2)
            lo = hi


def simulate(
    model: ModelSpec,
    horizon: float,
    seed: int,
    warmup: float | None = None,
    batches: int = 20,
    block_events: int = 500_000,
    workload_guard: float | None = None,
    trace_path: str | None = None,
) -> SimEstimate:
    """Single replication estimate of mean AoI, delay and peak AoI.

    Measurement covers [warmup, horizon] (warmup defaults to 5% of the
    horizon); AoI accrues from the first delivery inside the window.  The
    standard error comes from batch means over `batches` equal time windows.
    The trace dump (CSV: t, event, V, A) is meant for debugging short runs.
    """
    model.require_stable()
    if warmup is None:
        warmup = 0.05 * horizon
    if not 0.0 <= warmup < horizon:
        raise ValueError(f"need 0 <= warmup < horizon, got {warmup} vs {horizon}")
    if batches < 2:
        raise ValueError("need at least 2 batches")
    rng = _rng_for([seed])
    lam = model.lam
    mu = model.mu
    block_len = block_events / (lam + model.lambda_bg)
    n_blocks = max(1, math.ceil(horizon / block_len))
    block_len = horizon / n_blocks

    def tag_gaps(r, n):
        return model.sample_generation(r, n)

    def bg_gaps(r, n):
        return r.exponential(1.0 / model.lambda_bg, size=n)

    edges = np.linspace(warmup, horizon, batches + 1)
    bins = np.zeros(batches)
    trace = open(trace_path, "w") if trace_path else None
    if trace:
        trace.write("t,event,V,A\n")
        trace_alpha: list[np.ndarray] = []
        trace_beta: list[np.ndarray] = []

    # continuous state; times are relative to the current block start
    next_tag = float(tag_gaps(rng, 1)[0])
    next_bg = float(bg_gaps(rng, 1)[0]) if model.lambda_bg > 0 else math.inf
    t_prev = 0.0  # time of last processed event
    v_carry = 0.0  # workload right after it
    alpha_prev = 0.0  # last tagged generation time
    deliv = None  # (alpha, beta) of the last delivery, global time
    t0 = 0.0  # global time of the block origin
    arrived = 0.0
    idle_total = 0.0
    delay_sum = delay_sq = peak_sum = 0.0
    n_window = 0
    n_peaks = 0
    n_deliv = 0

    for _ in range(n_blocks):
        ta, next_tag = _arrivals_until(rng, tag_gaps, next_tag, block_len, lam)
        if model.lambda_bg > 0:
            tb, next_bg = _arrivals_until(
                rng, bg_gaps, next_bg, block_len, model.lambda_bg
            )
        else:
            tb = np.zeros(0)
        ha = dist.sample(model.service, rng, ta.size) if ta.size else np.zeros(0)
        hb = (
            dist.sample(model.background_service, rng, tb.size)
            if tb.size
            else np.zeros(0)
        )
        times = np.concatenate((ta, tb))
        jumps = np.concatenate((ha, hb))
        is_tag = np.zeros(times.size, dtype=bool)
        is_tag[: ta.size] = True
        order = np.argsort(times, kind="stable")
        times, jumps, is_tag = times[order], jumps[order], is_tag[order]

        if times.size:
            delta = np.diff(times, prepend=t_prev)
            cnet = np.cumsum(jumps - mu * delta)
            v_after = cnet + np.maximum(np.maximum.accumulate(jumps - cnet), v_carry)
            v_prev = np.concatenate(([v_carry], v_after[:-1]))
            idle_total += float(np.maximum(delta - v_prev / mu, 0.0).sum())
            arrived += float(jumps.sum())
            if workload_guard is not None and float(v_after.max()) > workload_guard:
                raise RuntimeError(f"workload exceeded guard {workload_guard}")

            ti = np.flatnonzero(is_tag)
            if ti.size:
                alpha = times[ti]
                dly = v_after[ti] / mu
                beta = alpha + dly
                gaps = np.diff(alpha, prepend=alpha_prev)
                # FCFS keeps deliveries ordered; violation is an internal bug
                beta_prev_rel = deliv[1] - t0 if deliv is not None else -math.inf
                if np.diff(beta, prepend=beta_prev_rel).min() < -1e-9:
                    raise AssertionError("delivery times are not non-decreasing")
                ap_shift = np.concatenate(([alpha_prev], alpha[:-1]))
                if np.abs((beta - ap_shift) - (dly + gaps)).max() > 1e-9:
                    raise AssertionError("peak identity drifted beyond 1e-9")

                # delivery intervals [beta_{n-1}, beta_n) aging from alpha_{n-1}
                if deliv is not None:
                    s_g = np.concatenate(([deliv[1]], beta[:-1] + t0))
                    base_g = np.concatenate(([deliv[0]], alpha[:-1] + t0))
                    e_g = beta + t0
                else:
                    s_g = beta[:-1] + t0
                    base_g = alpha[:-1] + t0
                    e_g = beta[1:] + t0
                lo = np.maximum(s_g, warmup)
                hi = np.minimum(e_g, horizon)
                keep = hi > lo
                _bin_add(
                    bins,
                    edges,
                    lo[keep],
                    hi[keep],
                    lo[keep] - base_g[keep],
                    hi[keep] - base_g[keep],
                )

                in_window = (alpha + t0 >= warmup) & (alpha + t0 <= horizon)
                delay_sum += float(dly[in_window].sum())
                delay_sq += float((dly[in_window] ** 2).sum())
                pk = in_window & (np.arange(alpha.size) + n_deliv > 0)
                peak_sum += float((dly[pk] + gaps[pk]).sum())
                n_peaks += int(pk.sum())
                n_window += int(in_window.sum())

                n_deliv += alpha.size
                deliv = (alpha[-1] + t0, beta[-1] + t0)
                alpha_prev = alpha[-1]
                if trace:
                    trace_alpha.append(alpha + t0)
                    trace_beta.append(beta + t0)

            if trace:
                all_a = np.concatenate(trace_alpha) if trace_alpha else np.zeros(0)
                all_b = np.concatenate(trace_beta) if trace_beta else np.zeros(0)
                tt = times + t0
                idx = np.searchsorted(all_b, tt, side="right") - 1
                ages = np.where(idx >= 0, tt - all_a[np.maximum(idx, 0)], tt)
                for t_ev, tag, v_ev, a_ev in zip(tt, is_tag, v_after, ages):
                    kind = "tag" if tag else "bg"
                    trace.write(f"{t_ev:.9g},{kind},{v_ev:.9g},{a_ev:.9g}\n")

            v_carry = float(v_after[-1])
            t_prev = float(times[-1])

        # shift the frame to the next block origin
        t0 += block_len
        t_prev -= block_len
        next_tag -= block_len
        next_bg -= block_len
        alpha_prev -= block_len

    # conservation: inflow minus drained work must equal the final workload
    elapsed = t_prev + t0
    served = mu * (elapsed - idle_total)
    if arrived > 0 and abs(arrived - served - v_carry) > 1e-6 * arrived:
        raise AssertionError("work conservation violated")

    if deliv is not None and deliv[1] < horizon:
        lo0 = max(deliv[1], warmup)
        _bin_add(
            bins,
            edges,
            np.array([lo0]),
            np.array([horizon]),
            np.array([lo0 - deliv[0]]),
            np.array([horizon - deliv[0]]),
        )
    if trace:
        trace.close()

    span = horizon - warmup
    batch_means = bins / (span / batches)
    mean_delay = delay_sum / n_window if n_window else math.nan
    sd_delay = (
        math.sqrt(max(delay_sq / n_window - mean_delay**2, 0.0) / n_window)
        if n_window
        else math.nan
    )
    return SimEstimate(
        mean_aoi=float(bins.sum()) / span,
        stderr_aoi=max(float(np.std(batch_means, ddof=1) / math.sqrt(batches)), 1e-300),
        mean_delay=mean_delay,
        stderr_delay=max(sd_delay, 1e-300) if n_window else math.nan,
        mean_peak=peak_sum / n_peaks if n_peaks else math.nan,
        horizon=horizon,
        n_tagged=n_window,
        seed=seed,
    )


def replicate(
    model: ModelSpec,
    horizon: float,
    n_reps: int,
    master_seed: int,
    warmup: float | None = None,
    batches: int = 20,
) -> SimEstimate:
    """Pool n_reps independent replications; stderr is between-replication.

    Per-replication seeds derive deterministically from (master_seed, index),
    so identical inputs give bit-identical pooled output.
    """
    if n_reps < 2:
        raise ValueError("need n_reps >= 2 for a between-replication error")
    aois, delays, peaks = [], [], []
    n_tag = 0
    for rep in range(n_reps):
        child = int(np.random.SeedSequence([master_seed, rep]).generate_state(1)[0])
        est = simulate(model, horizon, child, warmup=warmup, batches=batches)
        aois.append(est.mean_aoi)
        delays.append(est.mean_delay)
        peaks.append(est.mean_peak)
        n_tag += est.n_tagged
    aoi_arr, delay_arr, peak_arr = map(np.asarray, (aois, delays, peaks))
    return SimEstimate(
        mean_aoi=float(aoi_arr.mean()),
        stderr_aoi=float(aoi_arr.std(ddof=1) / math.sqrt(n_reps)),
        mean_delay=float(delay_arr.mean()),
        stderr_delay=float(delay_arr.std(ddof=1) / math.sqrt(n_reps)),
        mean_peak=float(peak_arr.mean()),
        horizon=horizon,
        n_tagged=n_tag,
        seed=master_seed,
    )
