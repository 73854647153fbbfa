"""Error metric, magnitude projections and the Gerchberg-Saxton step."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..grids import ComplexTrace, VisibilityTrace, forward_array, inverse_array
from ..model import Spectrum
from .state import RetrievalState

# Below this modulus the unit phasor is taken as 1 (the sample carries no weight).
ZERO_GUARD = 1e-300


def unit_phasor(values: np.ndarray) -> np.ndarray:
    """``u / |u|`` with the zero-magnitude guard applied."""
    mag = np.abs(values)
    out = np.ones_like(values, dtype=complex)
    ok = mag > ZERO_GUARD
    out[ok] = values[ok] / mag[ok]
    return out


def constraint_magnitude(I: Spectrum | np.ndarray) -> np.ndarray:
    return I.intensity if isinstance(I, Spectrum) else np.asarray(I, dtype=float)


def error_array(G: np.ndarray, sqrt_v: np.ndarray, v_sum: float) -> float:
    return float(np.sum((np.abs(G) - sqrt_v) ** 2) / v_sum)


def retrieval_error(G: ComplexTrace, V: VisibilityTrace) -> float:
    """Normalized error ``sum (|G| - sqrt V)^2 / sum V`` over the delay samples."""
    if G.grid != V.grid:
        raise ValueError("G and V are on different delay grids")
    v_sum = float(V.values.sum())
    if v_sum <= 0:
        raise ValueError("degenerate visibility trace (sum V = 0)")
    return error_array(G.values, np.sqrt(V.values), v_sum)


def fourier_projection(state: RetrievalState, V: VisibilityTrace) -> np.ndarray:
    """Replace ``|G_k|`` by ``sqrt V`` and transform back: returns ``g_k'``."""
    G_prime = np.sqrt(V.values) * unit_phasor(state.transform.values)
    return inverse_array(G_prime, state.guess.grid, V.grid)


def advance(state: RetrievalState, g_new: np.ndarray, V: VisibilityTrace, **changes) -> RetrievalState:
    """Build the next state from a new frequency-domain guess."""
    G = forward_array(g_new, state.guess.grid, V.grid)
    E = error_array(G, np.sqrt(V.values), float(V.values.sum()))
    return replace(
        state,
        iteration=state.iteration + 1,
        guess=ComplexTrace(state.guess.grid, g_new),
        transform=ComplexTrace(V.grid, G),
        error_history=state.error_history + (E,),
        **changes,
    )


def gs_step(state: RetrievalState, V: VisibilityTrace, I: Spectrum | np.ndarray) -> RetrievalState:
    """One Gerchberg-Saxton cycle.

    Substitutes the measured modulus in the delay domain, transforms back and
    restores the spectral modulus ``I`` while keeping the new phase.
    """
    g_prime = fourier_projection(state, V)
    g_new = constraint_magnitude(I) * unit_phasor(g_prime)
    return advance(state, g_new, V, coeffs=None, stalled=False)
