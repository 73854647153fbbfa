"""Configuration, iteration state and results of a retrieval run."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..grids import ComplexTrace, VisibilityTrace
from ..model import PhaseConstant

ALGORITHMS = ("gs", "gp_phase", "gp_coeff", "composite")
INITIAL_GUESSES = ("zero_phase", "random_phase", "taylor_seed")
REASONS = ("tolerance_met", "max_iterations", "stalled")


@dataclass(frozen=True)
class LineSearchConfig:
    """Adaptive step control for the generalized-projection descent.

    The step carried between iterations is multiplied by ``growth_factor``
    while the distance keeps falling, and by ``shrink_factor`` on overshoot.
    """

    initial_step: float = 1.0
    growth_factor: float = 2.0
    shrink_factor: float = 0.5
    max_probes: int = 20

    def __post_init__(self) -> None:
        if not self.initial_step > 0:
            raise ValueError("line_search.initial_step must be positive")
        if not self.growth_factor > 1.0:
            raise ValueError("line_search.growth_factor must exceed 1")
        if not 0.0 < self.shrink_factor < 1.0:
            raise ValueError("line_search.shrink_factor must lie in (0, 1)")
        if int(self.max_probes) != self.max_probes or self.max_probes < 1:
            raise ValueError("line_search.max_probes must be a positive integer")


@dataclass(frozen=True)
class RetrievalConfig:
    """Algorithm selection and stopping rules.

    Attributes
    ----------
    algorithm
        One of ``gs``, ``gp_phase``, ``gp_coeff``, ``composite``.
    error_tolerance
        Stop once the normalized error drops to this value.
    stall_tolerance
        Relative error decrease per iteration below which a composite stage
        ends; a run stops as stalled when the best error improves by less
        than this fraction over ``stall_window`` iterations.
    initial_guess
        ``zero_phase``, ``random_phase`` (uses ``seed``) or ``taylor_seed``
        (uses ``seed_coeffs``, ps^j/km).
    align_delay
        Add a linear phase to the initial guess so that its delay centroid
        matches the measured trace. Linear phase is unobservable, so this
        only removes a gauge offset from the starting point.
    beta2_sign
        Sign prior for the recovered second-order coefficient (+1, -1, or 0
        for none). A mirror-symmetric spectrum admits two time-reversed
        solutions with opposite second-order dispersion; the prior picks one.
    rescale_visibility
        Rescale the measured trace so its energy matches the spectral
        constraint (Parseval) before iterating.
    """

    algorithm: str = "gs"
    max_iterations: int = 5000
    error_tolerance: float = 1e-12
    stall_tolerance: float = 1e-3
    stall_window: int = 200
    initial_guess: str = "zero_phase"
    seed: int | None = None
    seed_coeffs: tuple[tuple[int, float], ...] = ()
    align_delay: bool = True
    gp_coeff_order: int = 3
    line_search: LineSearchConfig = field(default_factory=LineSearchConfig)
    composite_schedule: tuple[str, ...] = ("gs", "gp_coeff")
    beta2_sign: int = 0
    rescale_visibility: bool = False

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"retrieval.algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError("retrieval.max_iterations must be >= 1")
        if not self.error_tolerance > 0:
            raise ValueError("retrieval.error_tolerance must be positive")
        if not self.stall_tolerance > 0:
            raise ValueError("retrieval.stall_tolerance must be positive")
        if self.stall_window < 1:
            raise ValueError("retrieval.stall_window must be >= 1")
        if self.initial_guess not in INITIAL_GUESSES:
            raise ValueError(
                f"retrieval.initial_guess must be one of {INITIAL_GUESSES}, got {self.initial_guess!r}"
            )
        if self.initial_guess == "random_phase" and self.seed is None:
            raise ValueError("retrieval.initial_guess = random_phase requires retrieval.seed")
        if self.gp_coeff_order < 2:
            raise ValueError("retrieval.gp_coeff_order must be >= 2")
        if not self.composite_schedule or any(
            s not in ALGORITHMS[:3] for s in self.composite_schedule
        ):
            raise ValueError(f"retrieval.composite_schedule must list stages from {ALGORITHMS[:3]}")
        if self.beta2_sign not in (-1, 0, 1):
            raise ValueError("retrieval.beta2_sign must be -1, 0 or +1")
        object.__setattr__(
            self, "seed_coeffs", tuple((int(j), float(b)) for j, b in dict(self.seed_coeffs).items())
        )


@dataclass(frozen=True)
class RetrievalState:
    """One iterate ``g_k`` together with its transform and error history.

    ``transform`` caches ``G_k`` so a step needs one forward transform.
    ``coeffs`` holds the Taylor parameters (orders 0..J) while a
    coefficient-space descent is active.
    """

    iteration: int
    guess: ComplexTrace
    transform: ComplexTrace
    error_history: tuple[float, ...]
    z: float
    step: float = 1.0
    coeffs: tuple[float, ...] | None = None
    stalled: bool = False

    def __post_init__(self) -> None:
        if len(self.error_history) != self.iteration + 1:
            raise ValueError("error_history length must equal iteration + 1")

    @property
    def error(self) -> float:
        return self.error_history[-1]

    @property
    def phase(self) -> np.ndarray:
        """Phase of the guess, unwrapped outward from the intensity peak."""
        return unwrap_from_peak(self.guess.values)

    @property
    def current_beta(self) -> PhaseConstant:
        """``beta_k(w) = -arg(g_k) / z``."""
        return PhaseConstant(self.guess.grid, -self.phase / self.z)


def unwrap_from_peak(values: np.ndarray) -> np.ndarray:
    """Unwrap ``arg(values)`` starting at the largest-magnitude sample."""
    phase = np.angle(values)
    start = int(np.argmax(np.abs(values)))
    out = np.empty_like(phase)
    out[start:] = np.unwrap(phase[start:])
    out[: start + 1] = np.unwrap(phase[start::-1])[::-1]
    return out


@dataclass(frozen=True)
class StageRecord:
    algorithm: str
    iterations: int
    start_error: float
    end_error: float
    rolled_back: bool = False


@dataclass(frozen=True)
class RetrievalResult:
    final_state: RetrievalState
    converged: bool
    reason: str
    recovered_visibility: VisibilityTrace
    stages: tuple[StageRecord, ...] = ()
    oriented: bool = False

    def __post_init__(self) -> None:
        if self.reason not in REASONS:
            raise ValueError(f"unknown stop reason {self.reason!r}")
        if self.converged != (self.reason == "tolerance_met"):
            raise ValueError("converged must be True exactly when the tolerance was met")

    @property
    def iterations(self) -> int:
        return self.final_state.iteration

    @property
    def error_history(self) -> tuple[float, ...]:
        return self.final_state.error_history

    @property
    def initial_error(self) -> float:
        return self.error_history[0]

    @property
    def final_error(self) -> float:
        return self.error_history[-1]

    @property
    def beta(self) -> PhaseConstant:
        return self.final_state.current_beta

    @property
    def phase(self) -> np.ndarray:
        return self.final_state.phase
