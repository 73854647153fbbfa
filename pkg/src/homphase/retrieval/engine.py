"""Retrieval drivers: single-algorithm runs, the composite scheduler and
two-field phase-difference retrieval."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import replace

import numpy as np

from ..grids import (
    ComplexTrace,
    FrequencyGrid,
    VisibilityTrace,
    forward_array,
    is_conjugate,
)
from ..model import Spectrum
from ..stencils import derivative, weighted_mean
from .gp import INTENSITY_FLOOR, coefficient_phase, gp_step
from .projections import advance, constraint_magnitude, error_array, gs_step, unit_phasor
from .state import RetrievalConfig, RetrievalResult, RetrievalState, StageRecord, unwrap_from_peak

Sink = Callable[[int, float, str], None]

SYMMETRY_RTOL = 1e-9


def _centroid(tau: np.ndarray, weight: np.ndarray) -> float:
    total = weight.sum()
    return float(np.sum(tau * weight) / total) if total > 0 else 0.0


def initial_state(
    config: RetrievalConfig,
    V: VisibilityTrace,
    magnitude: np.ndarray,
    grid: FrequencyGrid,
    z: float,
) -> RetrievalState:
    """Build ``g_0`` from the configured initial guess."""
    x = grid.offsets
    if config.initial_guess == "random_phase":
        rng = np.random.default_rng(config.seed)
        phase = rng.uniform(0.0, 2.0 * np.pi, grid.n_points)
    elif config.initial_guess == "taylor_seed":
        phase = coefficient_phase(dict(config.seed_coeffs), x, z) if config.seed_coeffs else np.zeros_like(x)
    else:
        phase = np.zeros_like(x)

    g0 = magnitude * np.exp(1j * phase)
    if config.align_delay and config.initial_guess != "random_phase":
        G0 = forward_array(g0, grid, V.grid)
        shift = _centroid(V.tau, V.values) - _centroid(V.tau, np.abs(G0) ** 2)
        g0 = g0 * np.exp(1j * x * shift)

    G0 = forward_array(g0, grid, V.grid)
    E0 = error_array(G0, np.sqrt(V.values), float(V.values.sum()))
    return RetrievalState(
        iteration=0,
        guess=ComplexTrace(grid, g0),
        transform=ComplexTrace(V.grid, G0),
        error_history=(E0,),
        z=z,
        step=config.line_search.initial_step,
    )


def _step(state: RetrievalState, algorithm: str, V, magnitude, config: RetrievalConfig) -> RetrievalState:
    if algorithm == "gs":
        return gs_step(state, V, magnitude)
    if algorithm == "gp_phase":
        return gp_step(state, V, magnitude, "phase", config.line_search)
    return gp_step(state, V, magnitude, "coeff", config.line_search, config.gp_coeff_order)


class _StallMonitor:
    """Tracks the running best error to detect a stalled run."""

    def __init__(self, config: RetrievalConfig, first: float):
        self.window = config.stall_window
        self.tol = config.stall_tolerance
        self.best = [first]

    def push(self, E: float) -> None:
        self.best.append(min(self.best[-1], E))

    def stalled(self) -> bool:
        if len(self.best) <= self.window:
            return False
        before, now = self.best[-1 - self.window], self.best[-1]
        return before - now < self.tol * before


def _prepare_visibility(config: RetrievalConfig, V: VisibilityTrace, magnitude: np.ndarray, grid) -> VisibilityTrace:
    if not config.rescale_visibility:
        return V
    spectral_energy = np.sum(magnitude**2) * grid.spacing
    delay_energy = V.values.sum() * V.grid.spacing / (2.0 * np.pi)
    if not delay_energy > 0:
        raise ValueError("degenerate visibility trace (sum V = 0)")
    return VisibilityTrace(V.grid, V.values * (spectral_energy / delay_energy), V.extrapolated)


def _check_inputs(V: VisibilityTrace, grid: FrequencyGrid, magnitude: np.ndarray) -> None:
    if not is_conjugate(grid, V.grid):
        raise ValueError("visibility grid is not conjugate to the spectrum grid; resample first")
    if magnitude.shape != (grid.n_points,) or not np.all(magnitude >= 0):
        raise ValueError("spectral constraint must be non-negative and match the grid")
    if not V.values.sum() > 0:
        raise ValueError("degenerate visibility trace (sum V = 0)")


def _loop(
    state: RetrievalState,
    V: VisibilityTrace,
    magnitude: np.ndarray,
    config: RetrievalConfig,
    emit: Sink,
) -> tuple[RetrievalState, str, list[StageRecord]]:
    """Iterate from ``state`` until a stopping rule fires."""
    composite = config.algorithm == "composite"
    schedule = config.composite_schedule if composite else (config.algorithm,)
    monitor = _StallMonitor(config, state.error)
    stages: list[StageRecord] = []
    stage_index = 0
    stage_start = state
    stage_iters = 0

    while True:
        if state.error <= config.error_tolerance:
            reason = "tolerance_met"
            break
        if state.iteration >= config.max_iterations:
            reason = "max_iterations"
            break
        if monitor.stalled() or (state.stalled and not composite):
            reason = "stalled"
            break

        algorithm = schedule[stage_index % len(schedule)]
        previous = state.error
        state = _step(state, algorithm, V, magnitude, config)
        stage_iters += 1
        monitor.push(state.error)
        emit(state.iteration, state.error, algorithm)

        if not composite:
            continue
        improvement = (previous - state.error) / previous if previous > 0 else 0.0
        if not (state.stalled or (stage_iters >= 2 and improvement < config.stall_tolerance)):
            continue
        rolled_back = False
        if state.error > stage_start.error and state.iteration < config.max_iterations:
            state = replace(
                stage_start,
                iteration=state.iteration + 1,
                error_history=state.error_history + (stage_start.error,),
            )
            stage_iters += 1
            rolled_back = True
            monitor.push(state.error)
            emit(state.iteration, state.error, "rollback")
        stages.append(StageRecord(algorithm, stage_iters, stage_start.error, state.error, rolled_back))
        stage_index += 1
        state = replace(state, coeffs=None, stalled=False, step=config.line_search.initial_step)
        stage_start = state
        stage_iters = 0

    rolled_back = False
    if composite and state.error > stage_start.error:
        # A stage cut short by a stopping rule is rolled back like a stalled one.
        before = state.iteration
        state = _revert(state, stage_start, config.max_iterations, emit)
        stage_iters += state.iteration - before
        rolled_back = True
    if stage_iters or not stages:
        stages.append(
            StageRecord(
                schedule[stage_index % len(schedule)], stage_iters, stage_start.error, state.error, rolled_back
            )
        )
    return state, reason, stages


def _revert(state: RetrievalState, target: RetrievalState, max_iterations: int, emit: Sink) -> RetrievalState:
    """Return ``target``'s iterate, recorded as one more step of ``state``'s history.

    With no budget left the revert takes the place of the last recorded step.
    """
    if state.iteration < max_iterations:
        history = state.error_history + (target.error,)
        emit(len(history) - 1, target.error, "rollback")
    else:
        history = state.error_history[:-1] + (target.error,)
    return replace(target, iteration=len(history) - 1, error_history=history)


def _iterate(
    config: RetrievalConfig,
    V: VisibilityTrace,
    magnitude: np.ndarray,
    grid: FrequencyGrid,
    z: float,
    sink: Sink | None,
) -> RetrievalResult:
    _check_inputs(V, grid, magnitude)
    V = _prepare_visibility(config, V, magnitude, grid)
    state = initial_state(config, V, magnitude, grid, z)
    emit = sink or (lambda k, E, tag: None)
    emit(0, state.error, "init")
    state, reason, stages = _loop(state, V, magnitude, config, emit)

    oriented = False
    if config.beta2_sign:
        state, oriented = orient_time_reversal(state, magnitude, config.beta2_sign)
        if (
            not oriented
            and not has_preferred_sign(state, magnitude, config.beta2_sign)
            and state.iteration < config.max_iterations
        ):
            # No exact twin on this grid: restart from the nearest mirrored guess.
            before, before_reason = state, reason
            c = int(round(2.0 * np.sum(np.arange(magnitude.size) * magnitude) / magnitude.sum()))
            mirrored = magnitude * unit_phasor(time_reversed_twin(state.guess.values, c))
            state = advance(state, mirrored, V, coeffs=None, stalled=False, step=config.line_search.initial_step)
            emit(state.iteration, state.error, "reorient")
            stages.append(StageRecord("reorient", 1, before.error, state.error))
            state, reason, more = _loop(state, V, magnitude, config, emit)
            stages.extend(more)
            oriented = True
            if reason != "tolerance_met" and state.error > before.error:
                # The mirrored start found nothing better: keep the original solution.
                state = _revert(state, before, config.max_iterations, emit)
                stages.append(StageRecord("reorient", 0, before.error, state.error, rolled_back=True))
                reason, oriented = before_reason, False

    return RetrievalResult(
        final_state=state,
        converged=reason == "tolerance_met",
        reason=reason,
        recovered_visibility=VisibilityTrace(
            V.grid, np.clip(np.abs(state.transform.values) ** 2, 0.0, 1.0 + VisibilityTrace.SLACK / 2)
        ),
        stages=tuple(stages) if config.algorithm == "composite" else (),
        oriented=oriented,
    )


def mirror_index(magnitude: np.ndarray) -> int | None:
    """Index sum ``c`` with ``magnitude[i] == magnitude[(c - i) mod n]``, if any.

    Only a circular mirror maps the DFT onto its conjugate exactly, so only
    such symmetries give an exact time-reversed twin.
    """
    n = magnitude.size
    idx = np.arange(n)
    guess = int(round(2.0 * np.sum(idx * magnitude) / magnitude.sum()))
    scale = magnitude.max()
    for c in (guess, guess - 1, guess + 1):
        if np.abs(magnitude - magnitude[(c - idx) % n]).max() <= SYMMETRY_RTOL * scale:
            return c % n
    return None


def time_reversed_twin(values: np.ndarray, c: int) -> np.ndarray:
    """``conj(g[(c - i) mod n])``: same Fourier modulus, mirrored phase."""
    n = values.size
    return np.conj(values[(c - np.arange(n)) % n])


def second_order_estimate(state: RetrievalState, magnitude: np.ndarray) -> float:
    """Magnitude-weighted mean of the current ``beta''``, as the analysis module reports it."""
    beta = -unwrap_from_peak(state.guess.values) / state.z
    d2, _ = derivative(beta, state.guess.grid.spacing, 2)
    return weighted_mean(d2, magnitude, INTENSITY_FLOOR, order=2)


def has_preferred_sign(state: RetrievalState, magnitude: np.ndarray, sign: int) -> bool:
    return np.sign(second_order_estimate(state, magnitude)) != -np.sign(sign)


def orient_time_reversal(
    state: RetrievalState, magnitude: np.ndarray, sign: int
) -> tuple[RetrievalState, bool]:
    """Swap to the time-reversed twin when the weighted second-order coefficient has the wrong sign.

    Returns the (possibly replaced) state and whether a swap happened. No swap
    is made when the spectral constraint has no exact mirror symmetry.
    """
    c = mirror_index(magnitude)
    if c is None or has_preferred_sign(state, magnitude, sign):
        return state, False
    twin = time_reversed_twin(state.guess.values, c)
    G = forward_array(twin, state.guess.grid, state.transform.grid)
    swapped = replace(
        state,
        guess=ComplexTrace(state.guess.grid, twin),
        transform=ComplexTrace(state.transform.grid, G),
        coeffs=None,
    )
    return swapped, True


def run(
    config: RetrievalConfig,
    V: VisibilityTrace,
    I: Spectrum,
    z: float,
    sink: Sink | None = None,
) -> RetrievalResult:
    """Recover the phase constant of a medium of length ``z`` (km) from ``V`` and ``I``.

    Iterates the configured algorithm until the error tolerance is met, the
    run stalls, or ``max_iterations`` is reached. ``sink`` receives one
    ``(k, E_k, stage)`` record per iteration.
    """
    if not z > 0:
        raise ValueError(f"medium length z must be positive, got {z}")
    return _iterate(config, V, constraint_magnitude(I), I.grid, float(z), sink)


def composite_run(
    config: RetrievalConfig,
    V: VisibilityTrace,
    I: Spectrum,
    z: float,
    sink: Sink | None = None,
) -> RetrievalResult:
    """Run the composite scheduler regardless of ``config.algorithm``.

    Stages follow ``config.composite_schedule`` cyclically. A stage ends when
    the per-iteration relative improvement falls below
    ``config.stall_tolerance`` (or its line search fails); a stage that ends
    worse than it started is rolled back to its starting guess.
    """
    return run(replace(config, algorithm="composite"), V, I, z, sink)


def _magnitude(x) -> np.ndarray:
    if isinstance(x, Spectrum):
        return x.intensity
    if isinstance(x, ComplexTrace):
        return np.abs(x.values)
    return np.abs(np.asarray(x))


def phase_difference_retrieval(
    V: VisibilityTrace,
    mag1,
    mag2,
    config: RetrievalConfig,
    curvature_sign: int = 0,
    sink: Sink | None = None,
    full_output: bool = False,
):
    """Recover the relative spectral phase of two fields from their HOM trace.

    The iterated object is ``g(w) = |E1(w)| |E2(w)| exp(i phi(w))`` and the
    trace is rescaled to the energy of that constraint, so only the shape of
    ``V`` matters. Constant and linear phase terms are not determined.

    Parameters
    ----------
    V
        Visibility trace on the grid conjugate to the magnitudes' grid.
    mag1, mag2
        Spectral magnitudes (arrays, ``ComplexTrace`` or ``Spectrum``).
    config
        Retrieval settings. ``seed_coeffs`` are read as Taylor coefficients
        of the phase itself (rad ps^j).
    curvature_sign
        Optional sign prior for the phase's second derivative; overrides
        ``config.beta2_sign``.
    full_output
        Also return the :class:`RetrievalResult`.

    Returns
    -------
    numpy.ndarray or (numpy.ndarray, RetrievalResult)
        Unwrapped recovered phase on the frequency grid.
    """
    grid = None
    for m in (mag1, mag2):
        if isinstance(m, (Spectrum, ComplexTrace)):
            grid = m.grid
    if grid is None:
        raise TypeError("at least one magnitude must carry its FrequencyGrid (Spectrum or ComplexTrace)")
    magnitude = _magnitude(mag1) * _magnitude(mag2)
    sign = curvature_sign if curvature_sign else config.beta2_sign
    cfg = replace(config, rescale_visibility=True, beta2_sign=int(sign))
    # With z = -1 the "phase constant" of the engine equals the phase itself.
    result = _iterate(cfg, V, magnitude, grid, -1.0, sink)
    return (result.phase, result) if full_output else result.phase
