"""Discrete Sobolev-type norms on the solver grid.

Spatial derivatives reuse the solver stencils; time derivatives are
second-order finite differences (centered inside, one-sided at the ends).
"""
from __future__ import annotations

from functools import lru_cache
from itertools import product

import numpy as np

from .core import Grid, diff
from .errors import KTooLarge


@lru_cache(maxsize=None)
def multi_indices(k: int, dims: int) -> tuple[tuple[int, ...], ...]:
    return tuple(a for a in product(range(k + 1), repeat=dims) if sum(a) <= k)


def _check_k(grid: Grid, k: int) -> None:
    if k < 0 or min(grid.shape) < 2 * k + 1:
        raise KTooLarge(f"k={k} needs at least {2 * k + 1} nodes per axis, grid has {grid.shape}")


def spatial_derivative(u: np.ndarray, alpha, grid: Grid) -> np.ndarray:
    out = u
    for axis, order in enumerate(alpha):
        for _ in range(order):
            out = diff(out, axis, grid)
    return out


def _wsum(u: np.ndarray, grid: Grid) -> float:
    w = grid.weights()
    if u.ndim > 3:
        w = w.reshape(w.shape + (1,) * (u.ndim - 3))
    return float(np.sum(w * np.abs(u) ** 2))


def hk_sq(u: np.ndarray, grid: Grid, k: int, tangential_only: bool = False) -> float:
    _check_k(grid, k)
    total = 0.0
    for alpha in multi_indices(k, 3):
        if tangential_only and alpha[2]:
            continue
        total += _wsum(spatial_derivative(u, alpha, grid), grid)
    return total


def hk_norm(u: np.ndarray, grid: Grid, k: int = 0, tangential_only: bool = False) -> float:
    return float(np.sqrt(hk_sq(u, grid, k, tangential_only)))


def l2_norm(u: np.ndarray, grid: Grid) -> float:
    return hk_norm(u, grid, 0)


def hk_sq_series(states: np.ndarray, grid: Grid, k: int, chunk: int = 16) -> np.ndarray:
    """hk_sq of every time slice of ``states`` (time axis first), batched."""
    _check_k(grid, k)
    states = np.asarray(states)
    w = grid.weights()
    w = w.reshape(w.shape + (1,) * (states.ndim - 3))
    out = np.zeros(states.shape[0])
    for start in range(0, states.shape[0], chunk):
        v = np.moveaxis(states[start:start + chunk], 0, 3)  # spatial axes first
        red = tuple(a for a in range(v.ndim) if a != 3)
        for alpha in multi_indices(k, 3):
            d = spatial_derivative(v, alpha, grid)
            out[start:start + chunk] += np.sum(w * np.abs(d) ** 2, axis=red)
    return out


def time_derivative(values: np.ndarray, times: np.ndarray, order: int = 1) -> np.ndarray:
    """d^order/dt^order along axis 0 by repeated second-order differences."""
    out = np.asarray(values)
    for _ in range(order):
        if out.shape[0] < 3:
            raise KTooLarge("time derivatives need at least 3 samples")
        out = np.gradient(out, times, axis=0, edge_order=2)
    return out


def g_surrogate(states: np.ndarray, times: np.ndarray, grid: Grid, k: int) -> float:
    """max over j <= k of sup_t ||d_t^j u(t)||_{H^{k-j}}."""
    best = 0.0
    for j in range(k + 1):
        if j > 0 and len(times) < 3:
            break
        dj = time_derivative(states, times, j) if j else np.asarray(states)
        best = max(best, float(np.sqrt(np.max(hk_sq_series(dj, grid, k - j)))))
    return best


def weighted_spacetime_sq(states: np.ndarray, times: np.ndarray, grid: Grid, k: int, gamma: float = 0.0) -> float:
    """sum over (j, alpha), j + |alpha| <= k, of int e^{-2 gamma (t - t0)} ||d_t^j d^alpha u||^2 dt."""
    times = np.asarray(times, dtype=float)
    wt = np.exp(-2.0 * gamma * (times - times[0]))
    total = 0.0
    for j in range(k + 1):
        dj = time_derivative(states, times, j) if j else np.asarray(states)
        per_t = hk_sq_series(dj, grid, k - j)
        total += float(np.trapezoid(wt * per_t, times)) if len(times) > 1 else 0.0
    return total


def weighted_spacetime_norm(states, times, grid: Grid, k: int, gamma: float = 0.0) -> float:
    return float(np.sqrt(weighted_spacetime_sq(states, times, grid, k, gamma)))


# boundary (lateral) fields: shape (nt, n1, n2, c) ----------------------------------
def _bdiff(v: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (np.roll(v, -1, axis=axis) - np.roll(v, 1, axis=axis)) / (2.0 * h)


def boundary_hk_sq(values: np.ndarray, times: np.ndarray, grid: Grid, k: int, gamma: float = 0.0) -> float:
    """H^k(J x Sigma) norm squared of a face field, tangential and time derivatives."""
    values = np.asarray(values)
    times = np.asarray(times, dtype=float)
    h1, h2 = grid.spacing[:2]
    wt = np.exp(-2.0 * gamma * (times - times[0]))
    total = 0.0
    for j, a1, a2 in multi_indices(k, 3):
        if j > 0 and len(times) < 3:
            continue
        v = time_derivative(values, times, j) if j else values
        for _ in range(a1):
            v = _bdiff(v, 1, h1)
        for _ in range(a2):
            v = _bdiff(v, 2, h2)
        per_t = np.sum(np.abs(v) ** 2, axis=tuple(range(1, v.ndim))) * h1 * h2
        total += float(np.trapezoid(wt * per_t, times)) if len(times) > 1 else float(per_t[0])
    return total


def boundary_hk_norm(values, times, grid: Grid, k: int, gamma: float = 0.0) -> float:
    return float(np.sqrt(boundary_hk_sq(values, times, grid, k, gamma)))


def face_l2(v: np.ndarray, grid: Grid) -> float:
    return float(np.sqrt(np.sum(np.abs(v) ** 2) * grid.face_weight))


def w1inf(u: np.ndarray, grid: Grid) -> float:
    """max(sup |u|, max_j sup |D_j u|) with Euclidean norms of the 6-vectors."""
    val = float(np.max(np.linalg.norm(u, axis=-1)))
    for j in range(3):
        val = max(val, float(np.max(np.linalg.norm(diff(u, j, grid), axis=-1))))
    return val


def grad_inf(u: np.ndarray, grid: Grid) -> float:
    return max(float(np.max(np.linalg.norm(diff(u, j, grid), axis=-1))) for j in range(3))
