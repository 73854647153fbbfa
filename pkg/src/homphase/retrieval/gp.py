"""Generalized-projection step: descent on the spectral-constraint distance.

The spectral projection looks for the phase of ``g_{k+1} = I exp(i phi)``
closest to the Fourier-projected ``g_k'``,

    Z(phi) = sum_i |I_i exp(i phi_i) - g'_i|^2,

either over the per-sample phases or over Taylor coefficients of
``phi(w) = -z sum_j beta_j (w - w0)^j / j!``. Each iteration performs one
line-searched descent from the previous iterate instead of an exact
minimization.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Mapping
from dataclasses import replace

import numpy as np

from ..grids import ComplexTrace, FrequencyGrid, VisibilityTrace
from ..model import Spectrum
from .projections import advance, constraint_magnitude, fourier_projection
from .state import LineSearchConfig, RetrievalState, unwrap_from_peak

INTENSITY_FLOOR = 1e-6


def _values(x: ComplexTrace | np.ndarray) -> np.ndarray:
    return x.values if isinstance(x, ComplexTrace) else np.asarray(x)


def gp_distance(phase: np.ndarray, I: Spectrum | np.ndarray, g_prime: ComplexTrace | np.ndarray) -> float:
    """Squared distance ``Z`` between ``I exp(i phase)`` and ``g'``."""
    mag = constraint_magnitude(I)
    return float(np.sum(np.abs(mag * np.exp(1j * phase) - _values(g_prime)) ** 2))


def gp_phase_gradient(
    g_prime: ComplexTrace | np.ndarray, I: Spectrum | np.ndarray, phi: np.ndarray
) -> np.ndarray:
    """``dZ/dphi_i = 2 |g'_i| I_i sin(phi_i - arg g'_i)``."""
    gp = _values(g_prime)
    return 2.0 * np.abs(gp) * constraint_magnitude(I) * np.sin(phi - np.angle(gp))


def taylor_basis(offsets: np.ndarray, orders, z: float) -> np.ndarray:
    """Rows ``d phi / d beta_j = -z x^j / j!`` for each order."""
    return np.array([-z * offsets**j / math.factorial(j) for j in orders])


def coefficient_phase(coeffs: Mapping[int, float], offsets: np.ndarray, z: float) -> np.ndarray:
    orders = sorted(coeffs)
    return np.array([coeffs[j] for j in orders]) @ taylor_basis(offsets, orders, z)


def gp_coeff_gradient(
    g_prime: ComplexTrace,
    I: Spectrum | np.ndarray,
    coeffs: Mapping[int, float],
    z: float,
    center: float | None = None,
) -> dict[int, float]:
    """Gradient of ``Z`` with respect to the Taylor coefficients ``beta_j``.

    Chain rule through ``phi = -z sum_j beta_j x^j / j!``:

        dZ/dbeta_j = -z/j! * sum_i 2 |g'_i| I_i sin(phi_i - arg g'_i) x_i^j

    The keys of ``coeffs`` select the orders differentiated.
    """
    if not isinstance(g_prime.grid, FrequencyGrid):
        raise TypeError("g_prime must live on a FrequencyGrid")
    mag = constraint_magnitude(I)
    if not mag.sum() > 0:
        raise ValueError("spectral constraint is identically zero")
    center = g_prime.grid.center if center is None else center
    x = g_prime.grid.omega - center
    orders = sorted(coeffs)
    phi = coefficient_phase(coeffs, x, z)
    per_sample = gp_phase_gradient(g_prime, mag, phi)
    grad = taylor_basis(x, orders, z) @ per_sample
    return dict(zip(orders, grad.tolist()))


def line_search(
    f: Callable[[np.ndarray], float],
    x0: np.ndarray,
    direction: np.ndarray,
    step: float,
    config: LineSearchConfig,
) -> tuple[np.ndarray, float, bool]:
    """Adaptive one-dimensional descent along ``-direction``.

    Starting from the carried ``step``: on success keep multiplying by the
    growth factor while ``f`` still falls; on overshoot shrink until ``f``
    drops below ``f(x0)`` or the probe budget runs out.

    Returns
    -------
    x, step, success
        The accepted point (``x0`` on failure) and the step to carry into
        the next iteration.
    """
    f0 = f(x0)
    f1 = f(x0 - step * direction)
    probes = 1
    if f1 < f0:
        while probes < config.max_probes:
            trial = step * config.growth_factor
            f2 = f(x0 - trial * direction)
            probes += 1
            if f2 < f1:
                step, f1 = trial, f2
            else:
                break
        return x0 - step * direction, step, True
    while probes < config.max_probes:
        step *= config.shrink_factor
        f1 = f(x0 - step * direction)
        probes += 1
        if f1 < f0:
            return x0 - step * direction, step, True
    return x0, step, False


def fit_taylor_coeffs(
    phase: np.ndarray,
    magnitude: np.ndarray,
    offsets: np.ndarray,
    z: float,
    order: int,
) -> np.ndarray:
    """Magnitude-weighted least-squares Taylor coefficients (orders 0..order) of a phase."""
    mask = magnitude > INTENSITY_FLOOR * magnitude.max()
    basis = taylor_basis(offsets, range(order + 1), z)
    w = np.sqrt(magnitude[mask])
    scale = np.abs(basis[:, mask]).max(axis=1)
    scale[scale == 0] = 1.0
    A = (basis[:, mask] / scale[:, None] * w).T
    sol, *_ = np.linalg.lstsq(A, phase[mask] * w, rcond=None)
    return sol / scale


def gp_step(
    state: RetrievalState,
    V: VisibilityTrace,
    I: Spectrum | np.ndarray,
    variant: str = "phase",
    line_search_config: LineSearchConfig | None = None,
    order: int = 3,
) -> RetrievalState:
    """One generalized-projection iteration.

    ``variant="phase"`` descends along the per-sample phase gradient;
    ``variant="coeff"`` descends in Taylor-coefficient space (orders 0..order,
    the affine orders absorbing the unobservable global phase and delay) along
    the gradient scaled by the Gauss-Newton diagonal. A failed line search
    keeps the previous guess and marks the state stalled.
    """
    cfg = line_search_config or LineSearchConfig()
    mag = constraint_magnitude(I)
    g_prime = fourier_projection(state, V)
    weight = 2.0 * np.abs(g_prime) * mag
    target = np.angle(g_prime)

    if variant == "phase":
        phi0 = np.angle(state.guess.values)
        grad = weight * np.sin(phi0 - target)
        phi, step, ok = line_search(lambda p: gp_distance(p, mag, g_prime), phi0, grad, state.step, cfg)
        if not ok:
            return advance(state, state.guess.values, V, step=step, stalled=True)
        return advance(state, mag * np.exp(1j * phi), V, step=step, coeffs=None, stalled=False)

    if variant != "coeff":
        raise ValueError(f"unknown GP variant {variant!r}")
    x = state.guess.grid.offsets
    basis = taylor_basis(x, range(order + 1), state.z)
    if state.coeffs is None or len(state.coeffs) != order + 1:
        c0 = fit_taylor_coeffs(unwrap_from_peak(state.guess.values), mag, x, state.z, order)
    else:
        c0 = np.array(state.coeffs)
    grad = basis @ (weight * np.sin(c0 @ basis - target))
    diag = (basis**2) @ weight
    direction = np.divide(grad, diag, out=np.zeros_like(grad), where=diag > 0)
    c, step, ok = line_search(lambda c: gp_distance(c @ basis, mag, g_prime), c0, direction, state.step, cfg)
    if not ok:
        stalled = replace(state, coeffs=tuple(c0))
        return advance(stalled, stalled.guess.values, V, step=step, stalled=True)
    return advance(state, mag * np.exp(1j * (c @ basis)), V, step=step, coeffs=tuple(c), stalled=False)
