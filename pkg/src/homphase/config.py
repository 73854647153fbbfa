"""Scenario configuration files.

One scenario per file, flat ``key = value`` lines with dotted section
prefixes; ``#`` starts a comment. Physical quantities carry their unit in
the key name, and a key with an unrecognized unit suffix is rejected.

Keys
----
name
statistics                      single_photon | coherent | thermal
source.kind                     gaussian | hermite_gaussian | file
source.center_nm, source.center_thz
source.fwhm_nm                  (gaussian; intensity FWHM)
source.order, source.scale_nm   (hermite_gaussian)
source.path                     (file; trace with x_unit rad/ps, THz or nm)
medium.kind                     taylor | cosine | file
medium.length_km
medium.beta<j>                  (taylor; ps^j/km, about the grid center)
medium.amplitude_rad_per_km, medium.period_rad_per_ps, medium.phase_offset_rad   (cosine)
medium.path                     (file; beta in rad/km)
grid.n_points
grid.spacing_thz, grid.spacing_rad_per_ps
grid.center_nm, grid.center_thz (defaults to the source center)
retrieval.algorithm, retrieval.max_iterations, retrieval.error_tolerance,
retrieval.stall_tolerance, retrieval.stall_window, retrieval.initial_guess,
retrieval.seed, retrieval.seed_beta<j>, retrieval.align_delay,
retrieval.gp_coeff_order, retrieval.composite_schedule (comma list),
retrieval.beta2_sign, retrieval.line_search.{initial_step, growth_factor,
shrink_factor, max_probes}
outputs.directory
sweep.idler_offsets_rad_per_ps  (comma list of idler-center offsets)
sweep.mean_photon_number, sweep.reference_rms_rad_per_ps,
sweep.signal_rms_rad_per_ps, sweep.quadratic_phase_ps2, sweep.curvature_sign
"""

from __future__ import annotations

import re
from collections.abc import Callable
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

from .grids import FrequencyGrid
from .io import TraceFormatError, read_trace
from .model import (
    PhaseConstant,
    PhotonStatistics,
    Spectrum,
    cosine_phase_constant,
    gaussian_spectrum,
    hermite_gaussian_spectrum,
    omega_to_wavelength,
    taylor_phase_constant,
    thz_to_omega,
    wavelength_to_omega,
)
from .retrieval import LineSearchConfig, RetrievalConfig


class ConfigError(ValueError):
    """Invalid configuration, reported with the offending field path."""

    def __init__(self, field: str, reason: str):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _int(text: str) -> int:
    return int(text)


def _list(text: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in text.split(",") if p.strip())


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in _list(text))


_PARSERS: dict[str, Callable[[str], object]] = {
    "name": str,
    "statistics": str,
    "source.kind": str,
    "source.center_nm": float,
    "source.center_thz": float,
    "source.fwhm_nm": float,
    "source.order": _int,
    "source.scale_nm": float,
    "source.path": str,
    "medium.kind": str,
    "medium.length_km": float,
    "medium.amplitude_rad_per_km": float,
    "medium.period_rad_per_ps": float,
    "medium.phase_offset_rad": float,
    "medium.path": str,
    "grid.n_points": _int,
    "grid.spacing_thz": float,
    "grid.spacing_rad_per_ps": float,
    "grid.center_nm": float,
    "grid.center_thz": float,
    "retrieval.algorithm": str,
    "retrieval.max_iterations": _int,
    "retrieval.error_tolerance": float,
    "retrieval.stall_tolerance": float,
    "retrieval.stall_window": _int,
    "retrieval.initial_guess": str,
    "retrieval.seed": _int,
    "retrieval.align_delay": _bool,
    "retrieval.gp_coeff_order": _int,
    "retrieval.composite_schedule": _list,
    "retrieval.beta2_sign": _int,
    "retrieval.line_search.initial_step": float,
    "retrieval.line_search.growth_factor": float,
    "retrieval.line_search.shrink_factor": float,
    "retrieval.line_search.max_probes": _int,
    "outputs.directory": str,
    "sweep.idler_offsets_rad_per_ps": _floats,
    "sweep.mean_photon_number": float,
    "sweep.reference_rms_rad_per_ps": float,
    "sweep.signal_rms_rad_per_ps": float,
    "sweep.quadratic_phase_ps2": float,
    "sweep.curvature_sign": _int,
}
_INDEXED = {
    re.compile(r"medium\.beta(\d+)"): float,
    re.compile(r"retrieval\.seed_beta(\d+)"): float,
}
_UNIT_SUFFIXES = ("_nm", "_thz", "_km", "_rad_per_ps", "_rad_per_km", "_rad", "_ps2")


def _parser_for(key: str) -> Callable[[str], object]:
    if key in _PARSERS:
        return _PARSERS[key]
    for pattern, parser in _INDEXED.items():
        if pattern.fullmatch(key):
            return parser
    stem = key.rsplit("_", 1)[0]
    for suffix in _UNIT_SUFFIXES:
        if key.endswith(suffix):
            stem = key[: -len(suffix)]
            break
    known = sorted(k for k in _PARSERS if k.startswith(stem + "_"))
    if known:
        raise ConfigError(key, f"unit not accepted here; use one of {', '.join(known)}")
    raise ConfigError(key, "unknown key")


def parse_pairs(text: str) -> dict[str, str]:
    """Split ``key = value`` lines; comments and blank lines are skipped."""
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}", "expected 'key = value'")
        if key in pairs:
            raise ConfigError(key, f"duplicate key (line {lineno})")
        pairs[key] = value.strip()
    return pairs


@dataclass(frozen=True)
class SourceSpec:
    kind: str
    center: float | None = None  # rad/ps
    fwhm_nm: float | None = None
    order: int | None = None
    scale_nm: float | None = None
    path: Path | None = None


@dataclass(frozen=True)
class MediumSpec:
    kind: str
    length_km: float
    taylor: dict[int, float] = field(default_factory=dict)
    amplitude: float = 0.0
    period: float = 1.0
    phase_offset: float = 0.0
    path: Path | None = None


@dataclass(frozen=True)
class SweepSpec:
    """Synthetic joint-spectral-phase sweep.

    Each idler offset ``d`` moves the heralded signal amplitude to
    ``center - d`` (fixed pump frequency); rms widths refer to intensities.
    """

    idler_offsets: tuple[float, ...]
    mean_photon_number: float = 1.0
    reference_rms: float = 0.6
    signal_rms: float = 0.34
    quadratic_phase: float = 0.0
    curvature_sign: int = 0


@dataclass(frozen=True)
class ScenarioConfig:
    """A parsed scenario: source, medium, grid, detection statistics and retrieval settings."""

    name: str
    source: SourceSpec
    medium: MediumSpec
    n_points: int
    spacing: float  # rad/ps
    center: float  # rad/ps
    statistics: PhotonStatistics
    retrieval: RetrievalConfig
    output_dir: Path | None = None
    sweep: SweepSpec | None = None
    snapshot: tuple[tuple[str, str], ...] = ()
    path: Path | None = None

    def frequency_grid(self) -> FrequencyGrid:
        return FrequencyGrid(self.center, self.spacing, self.n_points)

    def spectrum(self, grid: FrequencyGrid | None = None) -> Spectrum:
        grid = grid or self.frequency_grid()
        src = self.source
        if src.kind == "gaussian":
            return gaussian_spectrum(grid, omega_to_wavelength(src.center), src.fwhm_nm)
        if src.kind == "hermite_gaussian":
            return hermite_gaussian_spectrum(grid, src.order, omega_to_wavelength(src.center), src.scale_nm)
        values = profile_on_grid("source.path", src.path, grid, fill_outside=True)
        return Spectrum.from_samples(grid, np.clip(values, 0.0, None))

    def phase_constant(self, grid: FrequencyGrid | None = None) -> PhaseConstant:
        grid = grid or self.frequency_grid()
        med = self.medium
        if med.kind == "taylor":
            return taylor_phase_constant(grid, med.taylor)
        if med.kind == "cosine":
            return cosine_phase_constant(grid, med.amplitude, med.period, med.phase_offset)
        return PhaseConstant(grid, profile_on_grid("medium.path", med.path, grid, fill_outside=False))

    def with_overrides(
        self,
        algorithm: str | None = None,
        max_iterations: int | None = None,
        seed: int | None = None,
    ) -> ScenarioConfig:
        changes = {}
        if algorithm is not None:
            changes["algorithm"] = algorithm.replace("-", "_")
        if max_iterations is not None:
            changes["max_iterations"] = max_iterations
        if seed is not None:
            changes["seed"] = seed
        try:
            retrieval = replace(self.retrieval, **changes)
        except ValueError as exc:
            raise ConfigError("retrieval", str(exc)) from None
        return replace(self, retrieval=retrieval)


def _x_to_omega(x: np.ndarray, unit: str, where: str) -> np.ndarray:
    unit = unit.lower()
    if unit in ("rad/ps", ""):
        return x
    if unit == "thz":
        return thz_to_omega(1.0) * x
    if unit == "nm":
        return np.asarray(omega_to_wavelength(x))  # the map is its own inverse
    raise ConfigError(where, f"unsupported x_unit {unit!r} (use rad/ps, THz or nm)")


def profile_on_grid(where: str, path: Path, grid: FrequencyGrid, fill_outside: bool) -> np.ndarray:
    try:
        trace = read_trace(path)
    except TraceFormatError as exc:
        raise ConfigError(where, exc.reason) from None
    omega = _x_to_omega(trace.x, trace.x_unit, where)
    order = np.argsort(omega)
    omega, y = omega[order], trace.y[order]
    if np.any(np.diff(omega) <= 0) or omega.size < 2:
        raise ConfigError(where, "abscissa must have at least two distinct, non-repeated values")
    w = grid.omega
    if np.array_equal(omega, w):
        return y
    inside = (w >= omega[0]) & (w <= omega[-1])
    if not fill_outside and not inside.all():
        raise ConfigError(where, "profile does not cover the frequency grid")
    out = np.zeros(grid.n_points)
    out[inside] = PchipInterpolator(omega, y)(w[inside])
    return out


def _parse_value(key: str, text: str):
    parser = _parser_for(key)
    try:
        return parser(text)
    except ValueError as exc:
        raise ConfigError(key, f"cannot parse {text!r} ({exc})") from None


def _center(values: dict, prefix: str) -> float | None:
    nm, thz = values.get(f"{prefix}.center_nm"), values.get(f"{prefix}.center_thz")
    if nm is not None and thz is not None:
        raise ConfigError(f"{prefix}.center_nm", f"give either {prefix}.center_nm or {prefix}.center_thz")
    if nm is not None:
        if not nm > 0:
            raise ConfigError(f"{prefix}.center_nm", "must be positive")
        return wavelength_to_omega(nm)
    if thz is not None:
        if not thz > 0:
            raise ConfigError(f"{prefix}.center_thz", "must be positive")
        return thz_to_omega(thz)
    return None


def _require(values: dict, key: str):
    if key not in values:
        raise ConfigError(key, "required")
    return values[key]


def _resolve_path(values: dict, key: str, base: Path) -> Path:
    path = Path(_require(values, key))
    path = path if path.is_absolute() else base / path
    if not path.is_file():
        raise ConfigError(key, f"file not found: {path}")
    return path


def _indexed(values: dict, prefix: str) -> dict[int, float]:
    pattern = re.compile(re.escape(prefix) + r"(\d+)")
    out = {}
    for key, value in values.items():
        m = pattern.fullmatch(key)
        if m:
            out[int(m.group(1))] = value
    return out


def _source(values: dict, base: Path) -> SourceSpec:
    kind = _require(values, "source.kind")
    center = _center(values, "source")
    if kind == "gaussian":
        fwhm = _require(values, "source.fwhm_nm")
        if not fwhm > 0:
            raise ConfigError("source.fwhm_nm", "must be positive")
        return SourceSpec(kind, _require_center(center), fwhm_nm=fwhm)
    if kind == "hermite_gaussian":
        order, scale = _require(values, "source.order"), _require(values, "source.scale_nm")
        if order < 0:
            raise ConfigError("source.order", "must be non-negative")
        if not scale > 0:
            raise ConfigError("source.scale_nm", "must be positive")
        return SourceSpec(kind, _require_center(center), order=order, scale_nm=scale)
    if kind == "file":
        return SourceSpec(kind, center, path=_resolve_path(values, "source.path", base))
    raise ConfigError("source.kind", f"must be gaussian, hermite_gaussian or file, got {kind!r}")


def _require_center(center: float | None) -> float:
    if center is None:
        raise ConfigError("source.center_nm", "required (or source.center_thz)")
    return center


def _medium(values: dict, base: Path) -> MediumSpec:
    kind = _require(values, "medium.kind")
    length = _require(values, "medium.length_km")
    if not length > 0:
        raise ConfigError("medium.length_km", "must be positive")
    if kind == "taylor":
        coeffs = _indexed(values, "medium.beta")
        if not all(np.isfinite(v) for v in coeffs.values()):
            raise ConfigError("medium.beta", "coefficients must be finite")
        return MediumSpec(kind, length, taylor=coeffs)
    if kind == "cosine":
        period = _require(values, "medium.period_rad_per_ps")
        if not period > 0:
            raise ConfigError("medium.period_rad_per_ps", "must be positive")
        return MediumSpec(
            kind,
            length,
            amplitude=_require(values, "medium.amplitude_rad_per_km"),
            period=period,
            phase_offset=values.get("medium.phase_offset_rad", 0.0),
        )
    if kind == "file":
        return MediumSpec(kind, length, path=_resolve_path(values, "medium.path", base))
    raise ConfigError("medium.kind", f"must be taylor, cosine or file, got {kind!r}")


def _retrieval(values: dict) -> RetrievalConfig:
    ls_fields = {
        key.rsplit(".", 1)[1]: value for key, value in values.items() if key.startswith("retrieval.line_search.")
    }
    kwargs = {
        key.split(".", 1)[1]: value
        for key, value in values.items()
        if key.startswith("retrieval.") and not key.startswith("retrieval.line_search.")
        and not key.startswith("retrieval.seed_beta")
    }
    seeds = _indexed(values, "retrieval.seed_beta")
    if seeds:
        kwargs["seed_coeffs"] = tuple(sorted(seeds.items()))
    try:
        line_search = LineSearchConfig(**ls_fields)
    except ValueError as exc:
        raise ConfigError("retrieval.line_search", str(exc).removeprefix("line_search.")) from None
    try:
        return RetrievalConfig(line_search=line_search, **kwargs)
    except ValueError as exc:
        message = str(exc)
        m = re.match(r"(retrieval\.[\w.]+)", message)
        raise ConfigError(m.group(1) if m else "retrieval", message) from None


def _sweep(values: dict) -> SweepSpec | None:
    if not any(key.startswith("sweep.") for key in values):
        return None
    offsets = values.get("sweep.idler_offsets_rad_per_ps", ())
    if not offsets:
        raise ConfigError("sweep.idler_offsets_rad_per_ps", "slice list is empty")
    spec = SweepSpec(
        idler_offsets=offsets,
        mean_photon_number=values.get("sweep.mean_photon_number", 1.0),
        reference_rms=values.get("sweep.reference_rms_rad_per_ps", 0.6),
        signal_rms=values.get("sweep.signal_rms_rad_per_ps", 0.34),
        quadratic_phase=values.get("sweep.quadratic_phase_ps2", 0.0),
        curvature_sign=values.get("sweep.curvature_sign", 0),
    )
    if spec.mean_photon_number < 0:
        raise ConfigError("sweep.mean_photon_number", "must be non-negative")
    for key, value in (("sweep.reference_rms_rad_per_ps", spec.reference_rms), ("sweep.signal_rms_rad_per_ps", spec.signal_rms)):
        if not value > 0:
            raise ConfigError(key, "must be positive")
    if spec.curvature_sign not in (-1, 0, 1):
        raise ConfigError("sweep.curvature_sign", "must be -1, 0 or +1")
    return spec


def parse_config(text: str, base_dir: str | Path = ".", path: Path | None = None) -> ScenarioConfig:
    """Parse scenario text; relative file paths resolve against ``base_dir``."""
    pairs = parse_pairs(text)
    values = {key: _parse_value(key, raw) for key, raw in pairs.items()}
    base = Path(base_dir)

    source = _source(values, base)
    medium = _medium(values, base)

    n_points = _require(values, "grid.n_points")
    thz, rad = values.get("grid.spacing_thz"), values.get("grid.spacing_rad_per_ps")
    if (thz is None) == (rad is None):
        raise ConfigError("grid.spacing_thz", "give exactly one of grid.spacing_thz or grid.spacing_rad_per_ps")
    spacing = thz_to_omega(thz) if thz is not None else rad
    center = _center(values, "grid") or source.center
    if center is None:
        raise ConfigError("grid.center_nm", "required when the source has no center")
    try:
        FrequencyGrid(center, spacing, n_points)
    except ValueError as exc:
        raise ConfigError("grid", str(exc)) from None

    stats_name = values.get("statistics", "single_photon")
    try:
        statistics = PhotonStatistics.from_kind(stats_name)
    except ValueError:
        raise ConfigError("statistics", f"must be single_photon, coherent or thermal, got {stats_name!r}") from None

    out_dir = values.get("outputs.directory")
    return ScenarioConfig(
        name=values.get("name", path.stem if path else "scenario"),
        source=source,
        medium=medium,
        n_points=n_points,
        spacing=spacing,
        center=center,
        statistics=statistics,
        retrieval=_retrieval(values),
        output_dir=Path(out_dir) if out_dir else None,
        sweep=_sweep(values),
        snapshot=tuple(pairs.items()),
        path=path,
    )


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path} ({exc.strerror})") from None
    return parse_config(text, path.parent, path)


def scenario_dir() -> Path:
    """Directory of the scenario files shipped with the package."""
    return Path(__file__).parent / "scenarios"


def shipped_scenarios() -> list[Path]:
    """The single-trace reproduction scenarios (``fig*.cfg``)."""
    return sorted(scenario_dir().glob("fig*.cfg"))
