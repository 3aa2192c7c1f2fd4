"""Dynamic time warping and the windowed, forward-only target selector.

Indices are 0-based throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numba as nb
import numpy as np


class NoWarpingPathError(ValueError):
    pass


@dataclass(frozen=True)
class DtwParams:
    """Sakoe-Chiba half-width ``band``; ``None`` means unconstrained."""

    band: Optional[int] = None

    def __post_init__(self):
        if self.band is not None and self.band < 0:
            raise ValueError("band must be non-negative")


@nb.njit(cache=True)
def _accumulate(a, b, band):
    m, n = a.shape[0], b.shape[0]
    d = a.shape[1]
    acc = np.full((m + 1, n + 1), np.inf)
    acc[0, 0] = 0.0
    cells = 0
    for i in range(1, m + 1):
        j_lo, j_hi = 1, n
        if band >= 0:
            j_lo = max(1, i - band)
            j_hi = min(n, i + band)
        for j in range(j_lo, j_hi + 1):
            s = 0.0
            for k in range(d):
                diff = a[i - 1, k] - b[j - 1, k]
                s += diff * diff
            best = acc[i - 1, j - 1]
            if acc[i - 1, j] < best:
                best = acc[i - 1, j]
            if acc[i, j - 1] < best:
                best = acc[i, j - 1]
            acc[i, j] = np.sqrt(s) + best
            cells += 1
    return acc, cells


@nb.njit(cache=True)
def _backtrack(acc):
    i, j = acc.shape[0] - 1, acc.shape[1] - 1
    path = np.empty((i + j, 2), dtype=np.int64)
    n = 0
    path[n, 0], path[n, 1] = i, j
    n += 1
    while i > 1 or j > 1:
        diag = acc[i - 1, j - 1]
        up = acc[i - 1, j]
        left = acc[i, j - 1]
        if diag <= up and diag <= left:
            i -= 1
            j -= 1
        elif up <= left:
            i -= 1
        else:
            j -= 1
        path[n, 0], path[n, 1] = i, j
        n += 1
    return path[:n][::-1] - 1


def _as_sequence(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("DTW needs non-empty sequences of shape (n,) or (n, d)")
    return np.ascontiguousarray(arr)


def accumulated_cost(a, b, params: Optional[DtwParams] = None):
    """Cumulative cost matrix ``D`` (with the padded zeroth row/column) and
    the number of DP cells evaluated."""
    a, b = _as_sequence(a), _as_sequence(b)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    band = -1
    if params is not None and params.band is not None:
        band = int(params.band)
        if abs(a.shape[0] - b.shape[0]) > band:
            raise NoWarpingPathError(
                f"band {band} admits no warping path between lengths "
                f"{a.shape[0]} and {b.shape[0]}"
            )
    return _accumulate(a, b, band)


def dtw_distance(a, b, params: Optional[DtwParams] = None) -> float:
    acc, _ = accumulated_cost(a, b, params)
    return float(acc[-1, -1])


def dtw_path(a, b, params: Optional[DtwParams] = None) -> list[tuple[int, int]]:
    """Optimal warping path from ``(0, 0)`` to ``(M-1, N-1)``.

    Ties while backtracking prefer the diagonal, then ``(i-1, j)``, then
    ``(i, j-1)``.
    """
    acc, _ = accumulated_cost(a, b, params)
    return [tuple(p) for p in _backtrack(acc).tolist()]


# -- windowed target selector -------------------------------------------------

@dataclass(frozen=True)
class SelectorState:
    k_prev: int
    history_len: int = 40
    forward_window: int = 50
    target_history: Optional[int] = None

    def __post_init__(self):
        if self.k_prev < 0:
            raise ValueError("k_prev must be a valid index")
        if self.history_len < 1 or self.forward_window < 1:
            raise ValueError("history_len and forward_window must be positive")
        if self.target_history is None:
            object.__setattr__(self, "target_history", self.history_len)
        elif self.target_history < 1:
            raise ValueError("target_history must be positive")


@nb.njit(cache=True)
def _window_costs(hist, target, k_lo, k_hi, h_prime):
    m = hist.shape[0]
    d = hist.shape[1]
    first = max(0, k_lo - h_prime)
    width = k_hi - first + 1
    local = np.empty((m, width))
    for i in range(m):
        for j in range(width):
            s = 0.0
            for k in range(d):
                diff = hist[i, k] - target[first + j, k]
                s += diff * diff
            local[i, j] = np.sqrt(s)
    costs = np.empty(k_hi - k_lo + 1)
    prev = np.empty(width + 1)
    cur = np.empty(width + 1)
    for kk in range(k_lo, k_hi + 1):
        start = max(0, kk - h_prime) - first
        n = kk - first - start + 1
        prev[0] = 0.0
        for j in range(1, n + 1):
            prev[j] = np.inf
        for i in range(m):
            cur[0] = np.inf
            for j in range(1, n + 1):
                best = prev[j - 1]
                if prev[j] < best:
                    best = prev[j]
                if cur[j - 1] < best:
                    best = cur[j - 1]
                cur[j] = local[i, start + j - 1] + best
            for j in range(n + 1):
                prev[j] = cur[j]
        costs[kk - k_lo] = prev[n]
    return costs


def initial_selector(target_seq, z0, history_len=40, forward_window=50,
                     target_history=None) -> SelectorState:
    """Selector starting at the target point nearest to ``z0``."""
    target = _as_sequence(target_seq)
    k0 = int(np.argmin(np.linalg.norm(target - np.asarray(z0, dtype=float), axis=1)))
    return SelectorState(k0, history_len, forward_window, target_history)


def window_costs(st: SelectorState, exec_history, target_seq) -> np.ndarray:
    """DTW cost of every candidate in the forward window (index ``k_prev + i``)."""
    target = _as_sequence(target_seq)
    hist = _as_sequence(exec_history)[-(st.history_len + 1):]
    n = target.shape[0]
    k_prev = min(st.k_prev, n - 1)
    k_hi = min(n - 1, k_prev + st.forward_window)
    return _window_costs(hist, target, k_prev, k_hi, st.target_history)


def select_target(st: SelectorState, exec_history, target_seq):
    """Pick the phase-consistent target index in ``[k_prev, k_prev + W]``.

    ``exec_history`` holds the most recent executed states, oldest first; only
    the last ``history_len + 1`` are used and fewer are accepted during
    warm-up. Returns ``(k_new, z_star, new_state)``; ties go to the smallest
    index so the selection never advances without evidence.
    """
    target = _as_sequence(target_seq)
    costs = window_costs(st, exec_history, target)
    k_new = min(st.k_prev, target.shape[0] - 1) + int(np.argmin(costs))
    new_state = SelectorState(k_new, st.history_len, st.forward_window, st.target_history)
    return k_new, target[k_new].copy(), new_state
