"""Conjugate frequency/delay sampling grids and the Fourier transform pair.

The transform pair approximates

    G(tau) = integral g(w) exp(-i w tau) dw
    g(w)   = 1/(2 pi) integral G(tau) exp(+i w tau) dtau

with the quadrature weights folded in, so that the two directions are exact
inverses of each other on a conjugate grid pair.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator, make_interp_spline

TWO_PI = 2.0 * np.pi
CONJUGACY_RTOL = 1e-12


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.array(values)
    values.setflags(write=False)
    return values


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform angular-frequency grid, ``w_i = center + (i - n/2) * spacing``.

    Parameters
    ----------
    center
        Center angular frequency (rad/ps).
    spacing
        Sample spacing (rad/ps).
    n_points
        Number of samples; even and at least 8.
    """

    center: float
    spacing: float
    n_points: int

    def __post_init__(self) -> None:
        if not np.isfinite(self.center):
            raise ValueError("center must be finite")
        if not (self.spacing > 0 and np.isfinite(self.spacing)):
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        if int(self.n_points) != self.n_points or self.n_points < 8 or self.n_points % 2:
            raise ValueError(f"n_points must be an even integer >= 8, got {self.n_points}")

    @property
    def offsets(self) -> np.ndarray:
        """Detuning ``w - center`` (rad/ps)."""
        return (np.arange(self.n_points) - self.n_points // 2) * self.spacing

    @property
    def omega(self) -> np.ndarray:
        """Absolute angular frequencies (rad/ps)."""
        return self.center + self.offsets

    @property
    def span(self) -> float:
        return self.n_points * self.spacing

    @property
    def center_index(self) -> int:
        return self.n_points // 2


@dataclass(frozen=True)
class DelayGrid:
    """Uniform delay grid with ``tau = origin`` at index ``n/2``.

    Parameters
    ----------
    spacing
        Delay step (ps).
    n_points
        Number of samples.
    origin
        Delay at the array midpoint (ps).
    """

    spacing: float
    n_points: int
    origin: float = 0.0

    def __post_init__(self) -> None:
        if not (self.spacing > 0 and np.isfinite(self.spacing)):
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        if int(self.n_points) != self.n_points or self.n_points < 1:
            raise ValueError(f"n_points must be a positive integer, got {self.n_points}")

    @property
    def tau(self) -> np.ndarray:
        """Delay samples (ps)."""
        return self.origin + (np.arange(self.n_points) - self.n_points // 2) * self.spacing


@dataclass(frozen=True)
class ComplexTrace:
    """Complex samples on a frequency or delay grid. Values are read-only."""

    grid: FrequencyGrid | DelayGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (self.grid.n_points,):
            raise ValueError(
                f"trace has {values.size} samples but grid has {self.grid.n_points}"
            )
        object.__setattr__(self, "values", _frozen(values))

    def __len__(self) -> int:
        return self.grid.n_points


@dataclass(frozen=True)
class VisibilityTrace:
    """Interference visibility ``V(tau)`` sampled on a delay grid.

    ``extrapolated`` records that part of the grid fell outside the measured
    delay span and was zero-filled during resampling.
    """

    grid: DelayGrid
    values: np.ndarray
    extrapolated: bool = field(default=False)

    SLACK = 1e-9

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_points,):
            raise ValueError(
                f"trace has {values.size} samples but grid has {self.grid.n_points}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("visibility contains non-finite values")
        if values.min() < 0.0:
            raise ValueError(f"visibility must be non-negative (min {values.min():.3g})")
        if values.max() > 1.0 + self.SLACK:
            raise ValueError(f"visibility exceeds 1 (max {values.max():.17g})")
        object.__setattr__(self, "values", _frozen(values))

    @property
    def tau(self) -> np.ndarray:
        return self.grid.tau


def build_conjugate_grids(
    n_points: int, freq_spacing: float, center: float
) -> tuple[FrequencyGrid, DelayGrid]:
    """Return a frequency grid and its DFT-conjugate delay grid.

    The delay spacing is ``2 pi / (n_points * freq_spacing)`` and the delay
    grid is centered on ``tau = 0``.

    >>> f, d = build_conjugate_grids(8, 2 * np.pi / 8, 0.0)
    >>> d.spacing
    1.0
    """
    freq = FrequencyGrid(center=float(center), spacing=float(freq_spacing), n_points=n_points)
    delay = DelayGrid(spacing=TWO_PI / (freq.n_points * freq.spacing), n_points=freq.n_points)
    return freq, delay


def conjugate_delay_grid(freq: FrequencyGrid) -> DelayGrid:
    return DelayGrid(spacing=TWO_PI / (freq.n_points * freq.spacing), n_points=freq.n_points)


def is_conjugate(freq: FrequencyGrid, delay: DelayGrid) -> bool:
    if freq.n_points != delay.n_points:
        return False
    product = freq.spacing * delay.spacing * freq.n_points
    return abs(product - TWO_PI) <= CONJUGACY_RTOL * TWO_PI


def _check_conjugate(freq: FrequencyGrid, delay: DelayGrid) -> None:
    if not is_conjugate(freq, delay):
        raise ValueError(
            "frequency and delay grids are not conjugate: "
            f"n={freq.n_points}/{delay.n_points}, "
            f"dw*dtau*n={freq.spacing * delay.spacing * freq.n_points!r}"
        )


@functools.lru_cache(maxsize=32)
def _phase_factors(freq: FrequencyGrid, delay: DelayGrid) -> tuple[np.ndarray, np.ndarray]:
    # Split exp(-i w_i tau_j) into carrier/origin factors around the bare DFT kernel.
    carrier = np.exp(-1j * freq.center * delay.tau)
    origin = np.exp(-1j * freq.offsets * delay.origin)
    carrier.setflags(write=False)
    origin.setflags(write=False)
    return carrier, origin


def forward_array(g: np.ndarray, freq: FrequencyGrid, delay: DelayGrid) -> np.ndarray:
    """Array form of :func:`forward_transform` (no validation)."""
    carrier, origin = _phase_factors(freq, delay)
    spectrum = np.fft.fft(np.fft.ifftshift(g * origin))
    return freq.spacing * carrier * np.fft.fftshift(spectrum)


def inverse_array(G: np.ndarray, freq: FrequencyGrid, delay: DelayGrid) -> np.ndarray:
    """Array form of :func:`inverse_transform` (no validation)."""
    carrier, origin = _phase_factors(freq, delay)
    samples = np.fft.fftshift(np.fft.ifft(np.fft.ifftshift(G * carrier.conj())))
    return (delay.spacing * delay.n_points / TWO_PI) * origin.conj() * samples


def forward_transform(g: ComplexTrace, delay: DelayGrid | None = None) -> ComplexTrace:
    """Transform a frequency-domain trace to the delay domain.

    Parameters
    ----------
    g
        Trace on a :class:`FrequencyGrid`.
    delay
        Target delay grid; defaults to the conjugate grid centered on zero.

    Returns
    -------
    ComplexTrace
        ``G(tau_j) = sum_i g(w_i) exp(-i w_i tau_j) dw``.
    """
    if not isinstance(g.grid, FrequencyGrid):
        raise TypeError("forward_transform expects a trace on a FrequencyGrid")
    delay = conjugate_delay_grid(g.grid) if delay is None else delay
    _check_conjugate(g.grid, delay)
    return ComplexTrace(delay, forward_array(g.values, g.grid, delay))


def inverse_transform(G: ComplexTrace, freq: FrequencyGrid) -> ComplexTrace:
    """Transform a delay-domain trace back onto ``freq``.

    ``g(w_i) = 1/(2 pi) sum_j G(tau_j) exp(+i w_i tau_j) dtau``.
    """
    if not isinstance(G.grid, DelayGrid):
        raise TypeError("inverse_transform expects a trace on a DelayGrid")
    _check_conjugate(freq, G.grid)
    return ComplexTrace(freq, inverse_array(G.values, freq, G.grid))


def resample_visibility(
    tau: np.ndarray,
    values: np.ndarray,
    target: DelayGrid,
    method: str = "pchip",
) -> VisibilityTrace:
    """Interpolate a measured visibility trace onto ``target``.

    Parameters
    ----------
    tau, values
        Measured delays (ps, strictly increasing) and visibilities.
    target
        Delay grid to sample onto, normally the conjugate of the retrieval
        frequency grid.
    method
        ``"pchip"`` (monotone cubic, no overshoot) or ``"quintic"``
        (interpolating quintic spline; much smaller error on smooth traces,
        may overshoot near sharp features).

    Returns
    -------
    VisibilityTrace
        Negative interpolants are clamped to zero. Target points outside the
        measured span are zero-filled and ``extrapolated`` is set.
    """
    tau = np.asarray(tau, dtype=float)
    values = np.asarray(values, dtype=float)
    if tau.shape != values.shape or tau.ndim != 1:
        raise ValueError("tau and values must be 1-D arrays of equal length")
    if tau.size < 4:
        raise ValueError(f"need at least 4 measured points, got {tau.size}")
    if np.isnan(tau).any() or np.isnan(values).any():
        raise ValueError("measured trace contains NaN")
    if np.any(np.diff(tau) <= 0):
        raise ValueError("measured delays must be strictly increasing")

    grid_tau = target.tau
    if tau.size == grid_tau.size and np.allclose(tau, grid_tau, rtol=0, atol=1e-12 * target.spacing):
        return VisibilityTrace(target, np.clip(values, 0.0, None))

    if method == "pchip":
        interp = PchipInterpolator(tau, values, extrapolate=False)
    elif method == "quintic":
        spline = make_interp_spline(tau, values, k=5)
        inside_lo, inside_hi = tau[0], tau[-1]

        def interp(x):
            out = spline(x)
            out[(x < inside_lo) | (x > inside_hi)] = np.nan
            return out
    else:
        raise ValueError(f"unknown interpolation method {method!r}")

    out = interp(grid_tau)
    outside = np.isnan(out)
    out[outside] = 0.0
    return VisibilityTrace(target, np.clip(out, 0.0, None), extrapolated=bool(outside.any()))
