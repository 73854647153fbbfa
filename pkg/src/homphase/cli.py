"""Command-line front end: ``homphase {simulate,retrieve,analyze,sweep,reproduce}``.

Every command reads one scenario file (see :mod:`homphase.config`), writes
its artifacts to an output directory and always leaves a ``run_record.txt``
there, including on failure. Traces use the two-column format described in
:mod:`homphase.io`; records are flat ``key = value`` text.

Exit status: 0 success, 1 input or configuration error, 2 the retrieval ran
but did not reach its error tolerance.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    compare_to_truth,
    estimate_dispersion,
    jsp_sweep,
    phase_derivative,
    weighted_coefficient,
)
from .config import ConfigError, ScenarioConfig, load_config, profile_on_grid, shipped_scenarios
from .grids import VisibilityTrace, conjugate_delay_grid, resample_visibility
from .io import TraceFormatError, read_record, read_trace, write_record, write_trace
from .model import (
    PhaseConstant,
    Spectrum,
    coincidence_from_visibility,
    gaussian_amplitude,
    visibility,
)
from .retrieval import RetrievalResult, run
from .stencils import derivative

log = logging.getLogger("homphase")

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 1, 2
INPUT_ERRORS = (ConfigError, TraceFormatError, ValueError, OSError)


@dataclass
class RunRecord:
    """What a command did: configuration, outcome, artifacts and timing."""

    command: str
    status: str = "ok"
    reason: str = ""
    config_snapshot: tuple[tuple[str, str], ...] = ()
    summary: dict[str, object] = field(default_factory=dict)
    artifacts: dict[str, Path] = field(default_factory=dict)
    duration_s: float = 0.0
    version: str = __version__

    def fields(self) -> dict[str, object]:
        out: dict[str, object] = {
            "command": self.command,
            "status": self.status,
            "reason": self.reason,
            "version": self.version,
            "duration_s": self.duration_s,
        }
        out.update({f"summary.{k}": v for k, v in self.summary.items()})
        out.update({f"artifact.{k}": p.name for k, p in self.artifacts.items()})
        out.update({f"config.{k}": v for k, v in self.config_snapshot})
        return out

    def write(self, directory: Path) -> Path:
        directory.mkdir(parents=True, exist_ok=True)
        return write_record(directory / "run_record.txt", self.fields())


class _Outcome:
    """Collects artifacts and summary values while a command runs."""

    def __init__(self, out: Path, plot: bool):
        self.out = out
        self.plot = plot
        self.status = "ok"
        self.reason = ""
        self.summary: dict[str, object] = {}
        self.artifacts: dict[str, Path] = {}

    def add(self, key: str, path: Path) -> Path:
        self.artifacts[key] = path
        return path

    def figure(self, key: str, render) -> None:
        if not self.plot:
            return
        try:
            self.add(key, render(self.out / f"{key}.png"))
        except ImportError:
            log.warning("matplotlib is not installed; skipping %s.png", key)


# -- input helpers ---------------------------------------------------------------------------


def _spectrum(cfg: ScenarioConfig, path: str | None) -> Spectrum:
    grid = cfg.frequency_grid()
    if path is None:
        return cfg.spectrum(grid)
    values = profile_on_grid("--spectrum", Path(path), grid, fill_outside=True)
    return Spectrum.from_samples(grid, np.clip(values, 0.0, None))


def _visibility_from_file(cfg: ScenarioConfig, path: str, delay) -> VisibilityTrace:
    trace = read_trace(path)
    y = trace.y
    if trace.metadata.get("quantity") == "coincidence":
        y = (1.0 - y) / cfg.statistics.xi
    if trace.x.size == delay.n_points and np.allclose(trace.x, delay.tau, rtol=0, atol=1e-9 * delay.spacing):
        return VisibilityTrace(delay, np.clip(y, 0.0, None))
    return resample_visibility(trace.x, y, delay)


def _write_profile(out: _Outcome, key: str, omega, values, quantity: str, y_unit: str) -> Path:
    return out.add(
        key,
        write_trace(out.out / f"{key}.txt", omega, values, quantity=quantity, x="omega", x_unit="rad/ps", y_unit=y_unit),
    )


def _write_visibility(out: _Outcome, key: str, V: VisibilityTrace) -> Path:
    return out.add(
        key, write_trace(out.out / f"{key}.txt", V.tau, V.values, quantity="visibility", x="delay", x_unit="ps", y_unit="1")
    )


# -- commands ---------------------------------------------------------------------------------


def simulate(cfg: ScenarioConfig, out: _Outcome) -> None:
    grid = cfg.frequency_grid()
    I = cfg.spectrum(grid)
    beta = cfg.phase_constant(grid)
    V = visibility(I, beta, cfg.medium.length_km)
    nc = coincidence_from_visibility(V, cfg.statistics)
    _write_profile(out, "spectrum", grid.omega, I.intensity, "intensity", "ps/rad")
    _write_profile(out, "beta", grid.omega, beta.beta, "phase_constant", "rad/km")
    _write_visibility(out, "visibility", V)
    out.add(
        "coincidence",
        write_trace(
            out.out / "coincidence.txt", nc.grid.tau, nc.values,
            quantity="coincidence", x="delay", x_unit="ps", y_unit="1", statistics=cfg.statistics.name.lower(),
        ),
    )
    out.summary["peak_visibility"] = float(V.values.max())
    out.figure(
        "simulation",
        lambda p: _plotting().plot_simulation(p, V.tau, V.values, nc.values, grid.omega, I.intensity, beta.beta),
    )


def _plotting():
    from . import plotting

    return plotting


def _retrieve_core(cfg: ScenarioConfig, out: _Outcome, I: Spectrum, V: VisibilityTrace) -> RetrievalResult:
    log_lines: list[str] = []

    def sink(k: int, E: float, stage: str) -> None:
        log_lines.append(f"{k} {E:.17g} {stage}")

    result = run(cfg.retrieval, V, I, cfg.medium.length_km, sink=sink)
    grid = I.grid
    beta2 = phase_derivative(result.beta, 2)
    truth = cfg.phase_constant(grid)
    report = compare_to_truth(result, truth, I)
    estimate = estimate_dispersion(result.beta, I)

    _write_profile(out, "recovered_beta", grid.omega, result.beta.beta, "phase_constant", "rad/km")
    _write_profile(out, "beta2_profile", grid.omega, beta2, "beta2", "ps^2/km")
    _write_visibility(out, "recovered_visibility", result.recovered_visibility)
    log_path = out.out / "convergence.log"
    log_path.write_text("# k E_k stage\n" + "\n".join(log_lines) + "\n")
    out.add("convergence_log", log_path)
    out.add("error_report", write_record(out.out / "error_report.txt", _report_fields(report)))
    out.add("dispersion", out.out / "dispersion.txt")
    (out.out / "dispersion.txt").write_text(estimate.to_record())

    out.summary.update(_report_fields(report))
    out.summary.update(
        beta2_estimate=estimate.beta2, beta3_estimate=estimate.beta3,
        initial_E=result.initial_error, reason=result.reason, converged=result.converged,
    )
    if not result.converged:
        out.status, out.reason = "not_converged", result.reason
    else:
        out.reason = result.reason

    stats = cfg.statistics
    out.figure(
        "retrieval",
        lambda p: _plotting().plot_retrieval(
            p,
            tau=V.tau,
            target_coincidence=1.0 - stats.xi * V.values,
            recovered_coincidence=1.0 - stats.xi * result.recovered_visibility.values,
            omega=grid.omega,
            intensity=I.intensity,
            beta2_true=phase_derivative(truth, 2),
            beta2_recovered=beta2,
            error_history=result.error_history,
            title=cfg.name,
        ),
    )
    return result


def _report_fields(report) -> dict[str, object]:
    return {
        "beta2_error": report.beta2_error,
        "beta3_error": report.beta3_error,
        "final_E": report.final_E,
        "iterations": report.iterations,
    }


def retrieve(cfg: ScenarioConfig, out: _Outcome, visibility_path: str | None, spectrum_path: str | None) -> None:
    I = _spectrum(cfg, spectrum_path)
    delay = conjugate_delay_grid(I.grid)
    if visibility_path is None:
        V = visibility(I, cfg.phase_constant(I.grid), cfg.medium.length_km, delay)
    else:
        V = _visibility_from_file(cfg, visibility_path, delay)
    _retrieve_core(cfg, out, I, V)


def analyze(cfg: ScenarioConfig, out: _Outcome, beta_path: str, spectrum_path: str | None) -> None:
    I = _spectrum(cfg, spectrum_path)
    beta = PhaseConstant(I.grid, profile_on_grid("--beta", Path(beta_path), I.grid, fill_outside=False))
    estimate = estimate_dispersion(beta, I)
    (out.out / "dispersion.txt").write_text(estimate.to_record())
    out.add("dispersion", out.out / "dispersion.txt")
    _write_profile(out, "beta2_profile", I.grid.omega, estimate.per_frequency_beta2, "beta2", "ps^2/km")
    report = compare_to_truth(beta, cfg.phase_constant(I.grid), I)
    fields = {"beta2_error": report.beta2_error, "beta3_error": report.beta3_error}
    out.add("error_report", write_record(out.out / "error_report.txt", fields))
    out.summary.update(beta2_estimate=estimate.beta2, beta3_estimate=estimate.beta3, **fields)
    out.figure(
        "dispersion",
        lambda p: _plotting().plot_dispersion(p, I.grid.omega, estimate.per_frequency_beta2, I.intensity),
    )


def sweep(cfg: ScenarioConfig, out: _Outcome) -> None:
    if cfg.sweep is None:
        raise ConfigError("sweep", "section missing (sweep.idler_offsets_rad_per_ps is required)")
    spec = cfg.sweep
    grid = cfg.frequency_grid()
    alpha = gaussian_amplitude(grid, cfg.center, spec.reference_rms)
    family = [
        (d, gaussian_amplitude(grid, cfg.center - d, spec.signal_rms, spec.quadratic_phase))
        for d in spec.idler_offsets
    ]
    jsp = jsp_sweep(alpha, family, spec.mean_photon_number, cfg.retrieval, curvature_sign=spec.curvature_sign)
    out.add("jsp_map", jsp.export(out.out / "jsp_map.csv"))
    for k, (d, phi) in enumerate(family):
        magnitude = np.where(jsp.mask[:, k], np.abs(alpha.values * phi.values), 0.0)
        d2 = derivative(jsp.phase[:, k], grid.spacing, 2)[0]
        curvature = weighted_coefficient(d2, magnitude, order=2) if jsp.mask[:, k].any() else float("nan")
        out.add(
            f"slice_{k:02d}",
            write_record(
                out.out / f"slice_{k:02d}.txt",
                {
                    "idler_offset_rad_per_ps": float(d),
                    "converged": jsp.metadata["converged"][k],
                    "masked": not jsp.mask[:, k].any(),
                    "quadratic_coefficient_ps2": curvature,
                    "gauge_reference_rad_per_ps": jsp.metadata["gauge_reference"][k],
                },
            ),
        )
    out.summary["slices"] = len(family)
    out.summary["masked_slices"] = int(sum(not m.any() for m in jsp.mask.T))
    out.figure("jsp_map", lambda p: _plotting().plot_jsp_map(p, jsp))


# -- driver -----------------------------------------------------------------------------------


def _out_dir(args, cfg: ScenarioConfig | None) -> Path:
    if args.out:
        return Path(args.out)
    if cfg is not None and cfg.output_dir is not None:
        return cfg.output_dir
    return Path("homphase_out") / (cfg.name if cfg is not None else "unnamed")


def _load(args) -> ScenarioConfig:
    if not args.config:
        raise ConfigError("--config", "required")
    cfg = load_config(args.config)
    return cfg.with_overrides(args.algorithm, args.max_iters, args.seed)


def _execute(args, command: str, body) -> int:
    start = time.perf_counter()
    cfg = None
    record = RunRecord(command)
    out_dir = None
    try:
        cfg = _load(args)
        record.config_snapshot = cfg.snapshot
        out_dir = _out_dir(args, cfg)
        out_dir.mkdir(parents=True, exist_ok=True)
        outcome = _Outcome(out_dir, getattr(args, "plot", False))
        body(cfg, outcome)
        record.status, record.reason = outcome.status, outcome.reason
        record.summary, record.artifacts = outcome.summary, outcome.artifacts
    except INPUT_ERRORS as exc:
        record.status, record.reason = "error", str(exc).replace("\n", " ")
        print(f"homphase {command}: error: {exc}", file=sys.stderr)
    except Exception as exc:  # still leave a record behind
        record.status, record.reason = "error", f"internal error: {type(exc).__name__}: {exc}"
        log.exception("homphase %s: internal error", command)
    record.duration_s = time.perf_counter() - start
    out_dir = out_dir or _out_dir(args, cfg)
    try:
        record.write(out_dir)
    except OSError as exc:
        print(f"homphase {command}: cannot write run record: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if record.status == "error":
        return EXIT_INPUT
    log.info("%s: %s (%s) -> %s", command, record.status, record.reason or "done", out_dir)
    return EXIT_NOT_CONVERGED if record.status == "not_converged" else EXIT_OK


def reproduce(args) -> int:
    """Simulate and retrieve every shipped scenario and print a summary table."""
    root = Path(args.out or "homphase_out")
    paths = [Path(p) for p in args.scenarios] if args.scenarios else shipped_scenarios()
    rows = []
    status = EXIT_OK
    for path in paths:
        try:
            cfg = load_config(path).with_overrides(args.algorithm, args.max_iters, args.seed)
        except ConfigError as exc:
            print(f"homphase reproduce: error: {path}: {exc}", file=sys.stderr)
            return EXIT_INPUT
        sub = argparse.Namespace(**{**vars(args), "config": str(path), "out": str(root / cfg.name)})
        code = _execute(sub, "retrieve", lambda c, o: retrieve(c, o, None, None))
        if code == EXIT_INPUT:
            return code
        if code == EXIT_NOT_CONVERGED:
            status = EXIT_NOT_CONVERGED
        rec = read_record(root / cfg.name / "run_record.txt")
        rows.append((cfg.name, cfg.retrieval.algorithm, rec))

    header = ["scenario", "algorithm", "beta2_error", "beta3_error", "iterations", "initial_E", "final_E", "converged"]
    lines = ["  ".join(f"{h:<18}" if i == 0 else f"{h:<12}" for i, h in enumerate(header))]
    for name, algorithm, rec in rows:
        cells = [f"{name:<18}", f"{algorithm:<12}"]
        for key in header[2:]:
            value = rec.get(f"summary.{key}", "")
            if key in ("beta2_error", "beta3_error", "initial_E", "final_E"):
                value = f"{float(value):.3e}"
            cells.append(f"{value:<12}")
        lines.append("  ".join(cells))
    table = "\n".join(lines) + "\n"
    root.mkdir(parents=True, exist_ok=True)
    (root / "summary.txt").write_text(table)
    print(table, end="")
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="homphase", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="seed for random-phase starts")
    common.add_argument("--max-iters", type=int, help="override retrieval.max_iterations")
    common.add_argument(
        "--algorithm", choices=["gs", "gp-phase", "gp-coeff", "composite"], help="override retrieval.algorithm"
    )
    common.add_argument("--plot", action="store_true", help="render PNG figures next to the data files")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="write the visibility, coincidence, spectrum and beta files")
    p.set_defaults(func=lambda a: _execute(a, "simulate", simulate))

    p = sub.add_parser("retrieve", parents=[common], help="recover beta from a visibility trace")
    p.add_argument("--visibility", help="trace file (visibility or coincidence); simulated from the config if omitted")
    p.add_argument("--spectrum", help="spectrum trace file; taken from the config if omitted")
    p.set_defaults(func=lambda a: _execute(a, "retrieve", lambda c, o: retrieve(c, o, a.visibility, a.spectrum)))

    p = sub.add_parser("analyze", parents=[common], help="dispersion estimates of a beta profile file")
    p.add_argument("--beta", required=True, help="phase-constant trace file (rad/km)")
    p.add_argument("--spectrum", help="spectrum trace file used as weights; taken from the config if omitted")
    p.set_defaults(func=lambda a: _execute(a, "analyze", lambda c, o: analyze(c, o, a.beta, a.spectrum)))

    p = sub.add_parser("sweep", parents=[common], help="joint-spectral-phase sweep over idler settings")
    p.set_defaults(func=lambda a: _execute(a, "sweep", sweep))

    p = sub.add_parser("reproduce", parents=[common], help="run every shipped scenario and print a summary table")
    p.add_argument("scenarios", nargs="*", help="scenario files (default: the shipped set)")
    p.add_argument("--no-plot", dest="plot", action="store_false", help="skip figure rendering")
    p.set_defaults(func=reproduce, plot=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
