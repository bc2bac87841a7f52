"""Temporal depth-map consistency and metric rescaling.

A depth sequence is a (T, H, W) float array; NaN marks invalid pixels. The
smoother returns float64 regardless of input dtype — the on-disk format is
float32, but the solve itself is done and checked at full precision.
"""

from __future__ import annotations

import numpy as np


class DepthError(ValueError):
    pass


class ShapeMismatch(DepthError):
    pass


class NegativeLambda(DepthError):
    pass


class EmptyDepth(DepthError):
    pass


class NonPositiveHint(DepthError):
    pass


def valid_mask(depth: np.ndarray) -> np.ndarray:
    return np.isfinite(depth)


def lower_median(values: np.ndarray) -> float:
    """Element at index (n - 1) // 2 of the sorted values; no averaging."""
    v = np.sort(np.asarray(values).ravel())
    if v.size == 0:
        raise EmptyDepth("no values")
    return float(v[(v.size - 1) // 2])


def temporal_smooth(measured: np.ndarray, reference: np.ndarray, lam: float = 1.0) -> np.ndarray:
    """Per-pixel temporal consistency solve.

    Minimizes, independently per pixel column d = D[:, i, j],

        sum_t w_t (d_t - M_t)^2
          + lam * sum_{t<T-1} ((d_{t+1} - d_t) - (N_{t+1} - N_t))^2

    where w_t = 0 at invalid (NaN) entries of M, so holes are interpolated by
    the smoothness term. The normal equations are tridiagonal in t and solved
    exactly with the Thomas algorithm, vectorized over pixels. When either N
    sample of a difference is invalid the target difference degrades to 0
    (plain first-difference smoothing), keeping the system connected.

    lam = 0 returns M verbatim. Pixel columns with no valid M entry stay
    all-NaN. Output dtype is float64.

    Args:
        measured: (T, H, W) metric depth M, NaN = invalid.
        reference: (T, H, W) relative depth N, NaN = invalid; must be scale
            compatible with M for the differences to be meaningful.
        lam: smoothness weight, >= 0.

    Returns:
        (T, H, W) float64 array D*.
    """
    m = np.asarray(measured, dtype=np.float64)
    n = np.asarray(reference, dtype=np.float64)
    if m.ndim != 3 or n.shape != m.shape:
        raise ShapeMismatch(f"measured {m.shape} vs reference {n.shape}")
    if lam < 0:
        raise NegativeLambda(f"lambda must be >= 0, got {lam}")

    t_len = m.shape[0]
    flat_m = m.reshape(t_len, -1)
    w = np.isfinite(flat_m)
    out = np.full_like(flat_m, np.nan)
    solvable = w.any(axis=0)
    if lam == 0.0 or not solvable.any():
        # data term alone: M where valid, no interpolation possible
        out[:, :] = np.where(w, flat_m, np.nan)
        return out.reshape(m.shape)

    flat_n = n.reshape(t_len, -1)[:, solvable]
    mm = flat_m[:, solvable]
    ww = w[:, solvable].astype(np.float64)
    mm0 = np.where(np.isfinite(mm), mm, 0.0)

    # smoothness targets g_t = N_{t+1} - N_t where both samples are valid
    if t_len > 1:
        g = flat_n[1:] - flat_n[:-1]
        g = np.where(np.isfinite(g), g, 0.0)
    else:
        g = np.zeros((0, mm.shape[1]))

    diag = ww.copy()
    if t_len > 1:
        diag[:-1] += lam
        diag[1:] += lam
    rhs = ww * mm0
    if t_len > 1:
        rhs[:-1] -= lam * g
        rhs[1:] += lam * g
    off = -lam

    # Thomas forward sweep / back substitution, vectorized over pixels
    cp = np.empty((max(t_len - 1, 0), mm.shape[1]))
    dp = np.empty_like(rhs)
    beta = diag[0]
    if t_len > 1:
        cp[0] = off / beta
    dp[0] = rhs[0] / beta
    for t in range(1, t_len):
        beta = diag[t] - off * cp[t - 1]
        if t < t_len - 1:
            cp[t] = off / beta
        dp[t] = (rhs[t] - off * dp[t - 1]) / beta
    x = np.empty_like(dp)
    x[t_len - 1] = dp[t_len - 1]
    for t in range(t_len - 2, -1, -1):
        x[t] = dp[t] - cp[t] * x[t + 1]

    out[:, solvable] = x
    return out.reshape(m.shape)


def rescale_depth(depth: np.ndarray, scale_hint: float) -> np.ndarray:
    """Multiply by scale_hint / median(valid) so the median hits the hint.

    Median is the lower median. Idempotent for a fixed hint. NaN entries
    propagate unchanged.
    """
    if not scale_hint > 0:
        raise NonPositiveHint(f"scale_hint must be > 0, got {scale_hint}")
    d = np.asarray(depth, dtype=np.float64)
    valid = np.isfinite(d)
    if not valid.any():
        raise EmptyDepth("no valid depth entries")
    med = lower_median(d[valid])
    if med == 0:
        raise DepthError("median depth is zero; cannot rescale")
    return d * (scale_hint / med)
