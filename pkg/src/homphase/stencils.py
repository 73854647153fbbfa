"""Fixed finite-difference stencils on uniform grids."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

# Central stencil widths: 5 points for the second derivative, 7 for the third.
STENCIL_POINTS = {2: 5, 3: 7}


@lru_cache(maxsize=None)
def stencil_weights(offsets: tuple[int, ...], order: int) -> np.ndarray:
    """Finite-difference weights on integer ``offsets`` for the ``order``-th derivative (unit spacing).

    Solves the Vandermonde moment conditions, so the stencil is exact for
    polynomials of degree below ``len(offsets)``.
    """
    k = np.asarray(offsets, dtype=float)
    A = np.vander(k, increasing=True).T
    rhs = np.zeros(len(k))
    rhs[order] = math.factorial(order)
    return np.linalg.solve(A, rhs)


def derivative(values: np.ndarray, spacing: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Stencil derivative of ``values`` and a mask of the one-sided edge samples."""
    if order not in STENCIL_POINTS:
        raise ValueError(f"derivative order must be 2 or 3, got {order}")
    width = STENCIL_POINTS[order]
    n = values.size
    if n < width:
        raise ValueError(f"grid of {n} points is too short for the {width}-point stencil")
    half = width // 2
    out = np.empty(n)
    central = stencil_weights(tuple(range(-half, half + 1)), order)
    windows = np.lib.stride_tricks.sliding_window_view(values, width)
    out[half : n - half] = windows @ central
    edge = np.zeros(n, dtype=bool)
    for i in [*range(half), *range(n - half, n)]:
        start = min(max(i - half, 0), n - width)
        w = stencil_weights(tuple(range(start - i, start - i + width)), order)
        out[i] = values[start : start + width] @ w
        edge[i] = True
    return out / spacing**order, edge


def stencil_window_starts(n: int, order: int) -> np.ndarray:
    """First sample of the window each output of :func:`derivative` reads."""
    width = STENCIL_POINTS[order]
    return np.clip(np.arange(n) - width // 2, 0, n - width)


def stencil_support(mask: np.ndarray, order: int) -> np.ndarray:
    """Samples whose whole derivative stencil lies inside ``mask``.

    Phase is undetermined where the intensity vanishes, so a stencil that
    reaches such a sample gives a meaningless derivative even when the centre
    sample itself is well supported.
    """
    mask = np.asarray(mask, dtype=bool)
    width = STENCIL_POINTS[order]
    if mask.size < width:
        return np.zeros(mask.shape, dtype=bool)
    gaps = np.concatenate(([0], np.cumsum(~mask)))
    starts = stencil_window_starts(mask.size, order)
    return (gaps[starts + width] - gaps[starts]) == 0


def weighted_mean(values: np.ndarray, weights: np.ndarray, floor: float, order: int | None = None) -> float:
    """Weighted mean over samples whose weight exceeds ``floor`` times the peak.

    With ``order`` set, ``values`` is read as a stencil derivative of that
    order and only samples whose full stencil clears the floor are kept.
    """
    mask = weights > floor * weights.max() if weights.size and weights.max() > 0 else np.zeros(weights.shape, bool)
    if order is not None:
        mask = stencil_support(mask, order)
    if not mask.any():
        raise ValueError("all weights lie below the intensity floor")
    return float(np.sum(weights[mask] * values[mask]) / np.sum(weights[mask]))
