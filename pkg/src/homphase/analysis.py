"""Post-processing of recovered phase constants.

Finite-difference derivatives, intensity-weighted dispersion coefficients,
comparison against a known profile and assembly of joint-spectral-phase maps
from a sweep of one-dimensional retrievals.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grids import ComplexTrace, DelayGrid, FrequencyGrid, VisibilityTrace, conjugate_delay_grid
from .model import PhaseConstant, Spectrum, jsp_visibility
from .retrieval import RetrievalConfig, RetrievalResult, phase_difference_retrieval
from .stencils import derivative, stencil_weights, weighted_mean

INTENSITY_FLOOR = 1e-6


def phase_derivative(beta: PhaseConstant, order: int, return_edges: bool = False):
    """``d^order beta / d w^order`` in ps^order/km by fixed central stencils.

    The outermost samples use one-sided stencils of the same width; with
    ``return_edges`` a boolean mask flagging them is returned as well.
    """
    d, edge = derivative(beta.beta, beta.grid.spacing, order)
    return (d, edge) if return_edges else d


def _weights(weights: Spectrum | np.ndarray) -> np.ndarray:
    return weights.intensity if isinstance(weights, Spectrum) else np.asarray(weights, dtype=float)


def support_mask(weights: Spectrum | np.ndarray, floor: float = INTENSITY_FLOOR) -> np.ndarray:
    """Samples whose weight exceeds ``floor`` times the peak."""
    w = _weights(weights)
    return w > floor * w.max() if w.size and w.max() > 0 else np.zeros(w.shape, dtype=bool)


def weighted_coefficient(derivative: np.ndarray, weights: Spectrum | np.ndarray, order: int | None = None) -> float:
    """Weighted mean of ``derivative``; samples below the intensity floor are excluded.

    Passing the stencil ``order`` also drops samples whose stencil reaches a
    sub-floor sample, where the phase carries no information.
    """
    w = _weights(weights)
    d = np.asarray(derivative, dtype=float)
    if d.shape != w.shape:
        raise ValueError("derivative and weights are on different grids")
    return weighted_mean(d, w, INTENSITY_FLOOR, order)


def _record(obj) -> str:
    lines = []
    for key, value in obj.__dict__.items():
        if isinstance(value, np.ndarray):
            continue
        lines.append(f"{key} = {value!r}" if isinstance(value, (bool, str)) else f"{key} = {value:.17g}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class DispersionEstimate:
    """Intensity-weighted second- and third-order dispersion of a profile."""

    beta2: float
    beta3: float
    per_frequency_beta2: np.ndarray
    per_frequency_beta3: np.ndarray
    weights: np.ndarray

    def to_record(self) -> str:
        return _record(self)


@dataclass(frozen=True)
class ErrorReport:
    beta2_error: float
    beta3_error: float
    final_E: float
    iterations: int

    def __post_init__(self) -> None:
        if not all(np.isfinite([self.beta2_error, self.beta3_error, self.final_E])):
            raise ValueError("error report fields must be finite")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")

    def to_record(self) -> str:
        return "\n".join(
            [
                f"beta2_error = {self.beta2_error:.17g}",
                f"beta3_error = {self.beta3_error:.17g}",
                f"final_E = {self.final_E:.17g}",
                f"iterations = {self.iterations}",
            ]
        ) + "\n"


def estimate_dispersion(beta: PhaseConstant, spectrum: Spectrum | np.ndarray) -> DispersionEstimate:
    """Weighted averages of ``beta''`` and ``beta'''`` over the spectrum."""
    d2 = phase_derivative(beta, 2)
    d3 = phase_derivative(beta, 3)
    w = _weights(spectrum)
    return DispersionEstimate(
        beta2=weighted_coefficient(d2, w, order=2),
        beta3=weighted_coefficient(d3, w, order=3),
        per_frequency_beta2=d2,
        per_frequency_beta3=d3,
        weights=w,
    )


def compare_to_truth(result: RetrievalResult | PhaseConstant, truth: PhaseConstant, spectrum: Spectrum) -> ErrorReport:
    """Absolute weighted-coefficient errors of a retrieval against the true profile.

    Both profiles go through the same stencil-and-average extraction, so an
    exact recovery reports zero regardless of the stencil error class.
    """
    recovered = result.beta if isinstance(result, RetrievalResult) else result
    if recovered.grid != truth.grid:
        raise ValueError("recovered and true profiles are on different grids")
    est = estimate_dispersion(recovered, spectrum)
    ref = estimate_dispersion(truth, spectrum)
    if isinstance(result, RetrievalResult):
        final_E, iterations = result.final_error, result.iterations
    else:
        final_E, iterations = 0.0, 0
    return ErrorReport(
        beta2_error=abs(est.beta2 - ref.beta2),
        beta3_error=abs(est.beta3 - ref.beta3),
        final_E=final_E,
        iterations=iterations,
    )


@dataclass(frozen=True)
class JspMap:
    """Joint spectral phase assembled from per-slice retrievals.

    ``phase[:, k]`` is the gauge-fixed phase recovered for idler center
    ``idler_centers[k]``; ``mask`` marks the entries that carry an accuracy
    claim. ``metadata`` records the gauge reference of every slice.
    """

    signal_grid: FrequencyGrid
    idler_centers: np.ndarray
    phase: np.ndarray
    mask: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        shape = (self.signal_grid.n_points, len(self.idler_centers))
        if self.phase.shape != shape or self.mask.shape != shape:
            raise ValueError(f"phase and mask must have shape {shape}")

    def to_delimited(self, delimiter: str = ",") -> str:
        """Matrix text: a header row of idler centers, then one row per signal frequency.

        Masked entries are written as ``nan``.
        """
        lines = [
            "# joint spectral phase (rad); rows: signal omega (rad/ps); columns: idler center (rad/ps)",
            "# gauge: constant and linear terms removed at each slice's reference frequency",
            delimiter.join(["omega_s"] + [f"{c:.17g}" for c in self.idler_centers]),
        ]
        values = np.where(self.mask, self.phase, np.nan)
        for w, row in zip(self.signal_grid.omega, values):
            lines.append(delimiter.join([f"{w:.17g}"] + [f"{v:.17g}" for v in row]))
        return "\n".join(lines) + "\n"

    def export(self, path: str | Path, delimiter: str = ",") -> Path:
        path = Path(path)
        path.write_text(self.to_delimited(delimiter))
        return path


def gauge_fix(phase: np.ndarray, magnitude: np.ndarray, spacing: float) -> tuple[np.ndarray, int]:
    """Remove the constant and linear terms at the magnitude peak.

    The slope is taken from the five-point first-derivative stencil. Returns
    the fixed phase and the reference index.
    """
    ref = int(np.argmax(magnitude))
    n = phase.size
    start = min(max(ref - 2, 0), n - 5)
    w = stencil_weights(tuple(range(start - ref, start - ref + 5)), 1)
    slope = phase[start : start + 5] @ w / spacing
    x = (np.arange(n) - ref) * spacing
    return phase - phase[ref] - slope * x, ref


def _slices(phi_family) -> list[tuple[float, ComplexTrace]]:
    items = phi_family.items() if isinstance(phi_family, Mapping) else phi_family
    return [(float(c), tr) for c, tr in items]


def jsp_sweep(
    alpha: ComplexTrace,
    phi_family: Mapping[float, ComplexTrace] | Sequence[tuple[float, ComplexTrace]],
    mean_photon_number: float,
    config: RetrievalConfig,
    curvature_sign: int = 0,
    measured: Sequence[VisibilityTrace] | None = None,
    delay_grid: DelayGrid | None = None,
) -> JspMap:
    """Recover the signal phase of each idler slice and stack the slices.

    Parameters
    ----------
    alpha
        Unit-norm reference pulse amplitude.
    phi_family
        ``{w_i0: Phi'(w, w_i0)}`` heralded signal amplitudes, unit-norm.
    mean_photon_number
        ``|A|^2`` of the reference pulse.
    config
        Retrieval settings shared by all slices.
    curvature_sign
        Optional sign prior on each slice's phase curvature.
    measured
        Measured traces, one per slice; when omitted the traces are
        synthesized from the amplitudes.

    Slices that do not converge are kept with an all-false mask column.
    """
    slices = _slices(phi_family)
    if not slices:
        raise ValueError("idler center list is empty")
    if measured is not None and len(measured) != len(slices):
        raise ValueError("need one measured trace per slice")
    grid = alpha.grid
    delay = delay_grid or conjugate_delay_grid(grid)
    n = grid.n_points
    phase = np.zeros((n, len(slices)))
    mask = np.zeros((n, len(slices)), dtype=bool)
    refs, converged = [], []
    for k, (center, phi) in enumerate(slices):
        if phi.grid != grid:
            raise ValueError(f"slice at {center} is not on the reference grid")
        V = measured[k] if measured is not None else jsp_visibility(alpha, phi, mean_photon_number, delay)
        magnitude = np.abs(alpha.values) * np.abs(phi.values)
        recovered, result = phase_difference_retrieval(
            V, alpha, phi, config, curvature_sign=curvature_sign, full_output=True
        )
        fixed, ref = gauge_fix(recovered, magnitude, grid.spacing)
        phase[:, k] = fixed
        mask[:, k] = support_mask(magnitude) & result.converged
        refs.append(float(grid.omega[ref]))
        converged.append(result.converged)
    return JspMap(
        signal_grid=grid,
        idler_centers=np.array([c for c, _ in slices]),
        phase=phase,
        mask=mask,
        metadata={"gauge_reference": refs, "converged": converged},
    )
