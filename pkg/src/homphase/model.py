"""Source spectra, phase-constant profiles and the HOM visibility simulator."""

from __future__ import annotations

import enum
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np
from scipy.special import eval_hermite

from .grids import (
    ComplexTrace,
    DelayGrid,
    FrequencyGrid,
    VisibilityTrace,
    _frozen,
    conjugate_delay_grid,
    forward_array,
    is_conjugate,
)

# Speed of light in nm/ps (numerically equal to km/s).
C_NM_PER_PS = 299792.458
AREA_RTOL = 1e-9


def wavelength_to_omega(wavelength_nm: float) -> float:
    """Angular frequency (rad/ps) of a vacuum wavelength in nm."""
    if not wavelength_nm > 0:
        raise ValueError(f"wavelength must be positive, got {wavelength_nm}")
    return 2.0 * np.pi * C_NM_PER_PS / wavelength_nm


def omega_to_wavelength(omega: float | np.ndarray) -> float | np.ndarray:
    return 2.0 * np.pi * C_NM_PER_PS / np.asarray(omega)


def wavelength_width_to_omega(width_nm: float, center_nm: float) -> float:
    """Convert a wavelength width to an angular-frequency width, ``2 pi c dl / l^2``."""
    return 2.0 * np.pi * C_NM_PER_PS * width_nm / center_nm**2


def thz_to_omega(nu_thz: float) -> float:
    return 2.0 * np.pi * nu_thz


@dataclass(frozen=True)
class Spectrum:
    """Non-negative source intensity ``I(w)`` with unit area on its grid."""

    grid: FrequencyGrid
    intensity: np.ndarray

    def __post_init__(self) -> None:
        intensity = np.asarray(self.intensity, dtype=float)
        if intensity.shape != (self.grid.n_points,):
            raise ValueError("intensity length does not match grid")
        if not np.all(np.isfinite(intensity)) or intensity.min() < 0:
            raise ValueError("intensity must be finite and non-negative")
        area = intensity.sum() * self.grid.spacing
        if abs(area - 1.0) > AREA_RTOL:
            raise ValueError(f"spectrum must have unit area, got {area!r}")
        object.__setattr__(self, "intensity", _frozen(intensity))

    @classmethod
    def from_samples(cls, grid: FrequencyGrid, samples: np.ndarray) -> Spectrum:
        """Clamp negatives to zero and normalize to unit area."""
        samples = np.clip(np.asarray(samples, dtype=float), 0.0, None)
        area = samples.sum() * grid.spacing
        if not area > 0:
            raise ValueError("spectrum has zero area")
        return cls(grid, samples / area)

    @property
    def rms_width(self) -> float:
        w = self.grid.omega
        mean = np.sum(w * self.intensity) / self.intensity.sum()
        return float(np.sqrt(np.sum((w - mean) ** 2 * self.intensity) / self.intensity.sum()))


@dataclass(frozen=True)
class PhaseConstant:
    """Phase constant ``beta(w)`` in rad/km.

    ``taylor`` optionally maps order ``j`` to ``beta_j`` (ps^j/km) about
    ``expansion_center``; the sampled profile must agree with it.
    """

    grid: FrequencyGrid
    beta: np.ndarray
    taylor: Mapping[int, float] | None = None
    expansion_center: float | None = None

    def __post_init__(self) -> None:
        beta = np.asarray(self.beta, dtype=float)
        if beta.shape != (self.grid.n_points,):
            raise ValueError("beta length does not match grid")
        if not np.all(np.isfinite(beta)):
            raise ValueError("beta must be finite on the grid")
        center = self.grid.center if self.expansion_center is None else float(self.expansion_center)
        object.__setattr__(self, "expansion_center", center)
        if self.taylor is not None:
            taylor = {int(j): float(b) for j, b in dict(self.taylor).items()}
            expected = taylor_polynomial(self.grid.omega - center, taylor)
            scale = max(np.abs(expected).max(), 1.0)
            if np.abs(expected - beta).max() > 1e-12 * scale:
                raise ValueError("sampled beta disagrees with its Taylor coefficients")
            object.__setattr__(self, "taylor", taylor)
        object.__setattr__(self, "beta", _frozen(beta))


class PhotonStatistics(enum.Enum):
    """Photon statistics of the two inputs; the value is the factor ``xi``."""

    SINGLE_PHOTON = 1.0
    COHERENT = 0.5
    THERMAL = 1.0 / 3.0

    @property
    def xi(self) -> float:
        return self.value

    @classmethod
    def from_kind(cls, kind: str) -> PhotonStatistics:
        try:
            return cls[kind.strip().upper()]
        except KeyError:
            names = ", ".join(m.name.lower() for m in cls)
            raise ValueError(f"unknown photon statistics {kind!r} (expected one of {names})") from None


@dataclass(frozen=True)
class CoincidenceTrace:
    """Normalized coincidence rate ``N_C(tau) = 1 - xi V(tau)``."""

    grid: DelayGrid
    values: np.ndarray
    statistics: PhotonStatistics

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_points,):
            raise ValueError("trace length does not match grid")
        object.__setattr__(self, "values", _frozen(values))


def taylor_polynomial(offsets: np.ndarray, coeffs: Mapping[int, float]) -> np.ndarray:
    """Evaluate ``sum_j beta_j x^j / j!`` at detunings ``x``."""
    out = np.zeros_like(np.asarray(offsets, dtype=float))
    for j, b in sorted(coeffs.items()):
        if j < 0:
            raise ValueError("Taylor orders must be non-negative")
        out = out + b * offsets**j / math.factorial(j)
    return out


def _check_width(grid: FrequencyGrid, rms: float) -> None:
    if rms < 3 * grid.spacing:
        raise ValueError(
            f"spectrum under-resolved: rms width {rms:.4g} rad/ps < 3 x spacing {grid.spacing:.4g}"
        )
    if rms > grid.span / 6:
        raise ValueError(
            f"frequency window too small: rms width {rms:.4g} rad/ps > span/6 = {grid.span / 6:.4g}"
        )


def _check_center(grid: FrequencyGrid, omega_c: float) -> None:
    w = grid.omega
    if not w[0] <= omega_c <= w[-1]:
        raise ValueError(
            f"spectrum center {omega_c:.6f} rad/ps lies outside the grid [{w[0]:.6f}, {w[-1]:.6f}]"
        )


def gaussian_spectrum(grid: FrequencyGrid, center_wavelength: float, fwhm_wavelength: float) -> Spectrum:
    """Unit-area Gaussian intensity with the given wavelength center and FWHM (nm)."""
    if not (center_wavelength > 0 and fwhm_wavelength > 0):
        raise ValueError("center and width must be positive")
    omega_c = wavelength_to_omega(center_wavelength)
    fwhm = wavelength_width_to_omega(fwhm_wavelength, center_wavelength)
    sigma = fwhm / (2.0 * np.sqrt(2.0 * np.log(2.0)))
    _check_center(grid, omega_c)
    _check_width(grid, sigma)
    x = grid.offsets + (grid.center - omega_c)
    return Spectrum.from_samples(grid, np.exp(-0.5 * (x / sigma) ** 2))


def hermite_gaussian_spectrum(
    grid: FrequencyGrid, order: int, center_wavelength: float, scale_wavelength: float
) -> Spectrum:
    """Spectral intensity of a Hermite-Gaussian mode, ``|H_n(x) exp(-x^2/2)|^2``.

    ``x = (w - w_c) / s`` with ``s`` the angular-frequency equivalent of
    ``scale_wavelength``. Order 0 is a Gaussian with intensity FWHM
    ``2 sqrt(ln 2) s``.
    """
    if int(order) != order or order < 0:
        raise ValueError(f"order must be a non-negative integer, got {order}")
    if not (center_wavelength > 0 and scale_wavelength > 0):
        raise ValueError("center and scale must be positive")
    omega_c = wavelength_to_omega(center_wavelength)
    scale = wavelength_width_to_omega(scale_wavelength, center_wavelength)
    _check_center(grid, omega_c)
    _check_width(grid, scale * np.sqrt(order + 0.5))
    x = (grid.offsets + (grid.center - omega_c)) / scale
    amplitude = eval_hermite(int(order), x) * np.exp(-0.5 * x**2)
    return Spectrum.from_samples(grid, amplitude**2)


def taylor_phase_constant(
    grid: FrequencyGrid,
    coeffs: Mapping[int, float] | Sequence[float],
    center: float | None = None,
) -> PhaseConstant:
    """Phase constant from Taylor coefficients ``{j: beta_j}`` (ps^j/km).

    A sequence is read as ``[beta_0, beta_1, ...]``.
    """
    if not isinstance(coeffs, Mapping):
        coeffs = dict(enumerate(coeffs))
    coeffs = {int(j): float(b) for j, b in coeffs.items()}
    if not all(np.isfinite(b) for b in coeffs.values()):
        raise ValueError("Taylor coefficients must be finite")
    center = grid.center if center is None else float(center)
    beta = taylor_polynomial(grid.offsets + (grid.center - center), coeffs)
    return PhaseConstant(grid, beta, taylor=coeffs, expansion_center=center)


def cosine_phase_constant(
    grid: FrequencyGrid,
    amplitude: float,
    period: float,
    phase_offset: float = 0.0,
    center: float | None = None,
) -> PhaseConstant:
    """``beta(w) = amplitude * cos(2 pi (w - w0) / period + phase_offset)``.

    amplitude in rad/km, period in rad/ps.
    """
    if not period > 0:
        raise ValueError(f"period must be positive, got {period}")
    center = grid.center if center is None else float(center)
    x = grid.offsets + (grid.center - center)
    beta = amplitude * np.cos(2.0 * np.pi * x / period + phase_offset)
    return PhaseConstant(grid, beta, expansion_center=center)


def cross_spectrum(spectrum: Spectrum, beta: PhaseConstant, z: float) -> ComplexTrace:
    """Cross-spectral density ``I(w) exp(-i beta(w) z)``; ``z`` in km."""
    if spectrum.grid != beta.grid:
        raise ValueError("spectrum and phase constant are on different grids")
    return ComplexTrace(spectrum.grid, spectrum.intensity * np.exp(-1j * beta.beta * z))


def visibility(
    spectrum: Spectrum,
    beta: PhaseConstant,
    z: float,
    delay_grid: DelayGrid | None = None,
) -> VisibilityTrace:
    """Simulated HOM visibility ``V(tau) = |G(tau)|^2`` for a medium of length ``z``.

    ``G`` is the forward transform of :func:`cross_spectrum`; with a
    unit-area spectrum the peak never exceeds 1. With the ``exp(-i w tau)``
    kernel a linear term ``beta_1 (w - w0)`` moves the dip to
    ``tau = -beta_1 z``; an even ``beta`` gives a trace even in ``tau``.
    """
    g = cross_spectrum(spectrum, beta, z)
    delay = conjugate_delay_grid(spectrum.grid) if delay_grid is None else delay_grid
    if not is_conjugate(spectrum.grid, delay):
        raise ValueError("delay grid is not conjugate to the spectrum grid")
    G = forward_array(g.values, spectrum.grid, delay)
    return VisibilityTrace(delay, np.abs(G) ** 2)


def coincidence_from_visibility(V: VisibilityTrace, stats: PhotonStatistics) -> CoincidenceTrace:
    if V.values.max() > 1.0 + VisibilityTrace.SLACK:
        raise ValueError("visibility out of range [0, 1]")
    return CoincidenceTrace(V.grid, 1.0 - stats.xi * V.values, stats)


def visibility_from_coincidence(nc: CoincidenceTrace) -> VisibilityTrace:
    return VisibilityTrace(nc.grid, (1.0 - nc.values) / nc.statistics.xi)


def amplitude_norm(trace: ComplexTrace) -> float:
    """``sum |a|^2 dw`` for a spectral amplitude."""
    return float(np.sum(np.abs(trace.values) ** 2) * trace.grid.spacing)


def normalize_amplitude(trace: ComplexTrace) -> ComplexTrace:
    norm = amplitude_norm(trace)
    if not norm > 0:
        raise ValueError("cannot normalize an all-zero amplitude")
    return ComplexTrace(trace.grid, trace.values / np.sqrt(norm))


def jsp_visibility(
    alpha: ComplexTrace,
    phi: ComplexTrace,
    mean_photon_number: float,
    delay_grid: DelayGrid | None = None,
) -> VisibilityTrace:
    """Visibility of a weak coherent pulse interfering with a heralded single photon.

    Parameters
    ----------
    alpha
        Normalized coherent-pulse amplitude ``alpha'(w)``.
    phi
        Normalized heralded signal amplitude ``Phi'(w, w_i0)`` for one idler
        filter setting.
    mean_photon_number
        ``|A|^2`` of the coherent pulse.

    Returns
    -------
    VisibilityTrace
        ``2 |int alpha' Phi' exp(-i w tau) dw|^2 / (|A|^2 + 2)``.
    """
    if alpha.grid != phi.grid:
        raise ValueError("alpha and phi are on different grids")
    if not isinstance(alpha.grid, FrequencyGrid):
        raise TypeError("amplitudes must live on a FrequencyGrid")
    if not mean_photon_number >= 0:
        raise ValueError(f"mean photon number must be non-negative, got {mean_photon_number}")
    for name, tr in (("alpha", alpha), ("phi", phi)):
        if abs(amplitude_norm(tr) - 1.0) > AREA_RTOL:
            raise ValueError(f"{name} is not unit-norm (norm {amplitude_norm(tr)!r})")
    delay = conjugate_delay_grid(alpha.grid) if delay_grid is None else delay_grid
    if not is_conjugate(alpha.grid, delay):
        raise ValueError("delay grid is not conjugate to the amplitude grid")
    G = forward_array(alpha.values * phi.values, alpha.grid, delay)
    return VisibilityTrace(delay, 2.0 * np.abs(G) ** 2 / (mean_photon_number + 2.0))


def gaussian_amplitude(
    grid: FrequencyGrid,
    center: float,
    rms_width: float,
    quadratic_phase: float = 0.0,
) -> ComplexTrace:
    """Unit-norm Gaussian spectral amplitude with an optional quadratic phase.

    ``center`` and ``rms_width`` are in rad/ps and refer to the intensity
    ``|a|^2``; the phase is ``quadratic_phase/2 * (w - center)^2`` (ps^2).
    """
    x = grid.offsets + (grid.center - center)
    amp = np.exp(-0.25 * (x / rms_width) ** 2) * np.exp(0.5j * quadratic_phase * x**2)
    return normalize_amplitude(ComplexTrace(grid, amp))
