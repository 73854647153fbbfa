"""Iterative phase retrieval from HOM visibility traces."""

from .engine import (
    composite_run,
    initial_state,
    mirror_index,
    orient_time_reversal,
    phase_difference_retrieval,
    run,
    second_order_estimate,
    time_reversed_twin,
)
from .gp import (
    coefficient_phase,
    fit_taylor_coeffs,
    gp_coeff_gradient,
    gp_distance,
    gp_phase_gradient,
    gp_step,
    line_search,
)
from .projections import fourier_projection, gs_step, retrieval_error, unit_phasor
from .state import (
    LineSearchConfig,
    RetrievalConfig,
    RetrievalResult,
    RetrievalState,
    StageRecord,
    unwrap_from_peak,
)

__all__ = [
    "LineSearchConfig",
    "RetrievalConfig",
    "RetrievalResult",
    "RetrievalState",
    "StageRecord",
    "coefficient_phase",
    "composite_run",
    "fit_taylor_coeffs",
    "fourier_projection",
    "gp_coeff_gradient",
    "gp_distance",
    "gp_phase_gradient",
    "gp_step",
    "gs_step",
    "initial_state",
    "line_search",
    "mirror_index",
    "orient_time_reversal",
    "phase_difference_retrieval",
    "retrieval_error",
    "run",
    "second_order_estimate",
    "time_reversed_twin",
    "unit_phasor",
    "unwrap_from_peak",
]
