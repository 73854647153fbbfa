import numpy as np
import pytest

from homphase.cli import main
from homphase.config import scenario_dir
from homphase.io import read_record, read_trace

FIG4 = str(scenario_dir() / "fig4_gaussian_gs.cfg")
SWEEP = str(scenario_dir() / "jsp_quadratic_sweep.cfg")


def record(directory):
    return read_record(directory / "run_record.txt")


def numeric_outputs(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.glob("*.txt")) if p.name != "run_record.txt"}


def test_simulate_writes_traces(tmp_path):
    assert main(["simulate", "--config", FIG4, "--out", str(tmp_path)]) == 0
    for name in ("visibility", "coincidence", "spectrum", "beta"):
        assert (tmp_path / f"{name}.txt").is_file()
    V = read_trace(tmp_path / "visibility.txt")
    assert 0.0 < V.y.max() < 1.0
    assert record(tmp_path)["status"] == "ok"
    assert record(tmp_path)["config.medium.beta2"] == "4.0"


def test_zero_dispersion_peak(tmp_path):
    cfg = tmp_path / "flat.cfg"
    cfg.write_text(
        (scenario_dir() / "fig4_gaussian_gs.cfg").read_text().replace("medium.beta2 = 4.0", "medium.beta2 = 0.0")
        .replace("medium.beta3 = 0.06", "medium.beta3 = 0.0")
    )
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert read_trace(tmp_path / "o" / "visibility.txt").y.max() == pytest.approx(1.0, abs=1e-9)


def test_simulate_then_retrieve_from_files(tmp_path):
    sim, rec = tmp_path / "sim", tmp_path / "rec"
    assert main(["simulate", "--config", FIG4, "--out", str(sim)]) == 0
    argv = ["retrieve", "--config", FIG4, "--out", str(rec),
            "--visibility", str(sim / "visibility.txt"), "--spectrum", str(sim / "spectrum.txt")]
    assert main(argv) == 0
    report = read_record(rec / "error_report.txt")
    assert float(report["beta2_error"]) < 1e-4
    log = [line for line in (rec / "convergence.log").read_text().splitlines() if not line.startswith("#")]
    assert log[0].split()[0] == "0"
    assert float(log[-1].split()[1]) < 1e-10
    # simulate-retrieve closure: the recovered trace reproduces the input one.
    V = read_trace(sim / "visibility.txt").y
    W = read_trace(rec / "recovered_visibility.txt").y
    assert np.sum((np.sqrt(W) - np.sqrt(V)) ** 2) / V.sum() < 1e-10


def test_retrieve_from_coincidence_file(tmp_path):
    sim = tmp_path / "sim"
    main(["simulate", "--config", FIG4, "--out", str(sim)])
    argv = ["retrieve", "--config", FIG4, "--out", str(tmp_path / "r"), "--visibility", str(sim / "coincidence.txt")]
    assert main(argv) == 0
    assert float(read_record(tmp_path / "r" / "error_report.txt")["beta2_error"]) < 1e-4


def test_composite_not_worse_than_gs_same_budget(tmp_path):
    finals = {}
    for algorithm in ("gs", "composite"):
        out = tmp_path / algorithm
        main(["retrieve", "--config", FIG4, "--out", str(out), "--algorithm", algorithm, "--max-iters", "300"])
        finals[algorithm] = float(record(out)["summary.final_E"])
    assert finals["composite"] <= finals["gs"]


def test_analyze(tmp_path):
    main(["simulate", "--config", FIG4, "--out", str(tmp_path / "sim")])
    argv = ["analyze", "--config", FIG4, "--out", str(tmp_path / "a"), "--beta", str(tmp_path / "sim" / "beta.txt")]
    assert main(argv) == 0
    assert float(read_record(tmp_path / "a" / "error_report.txt")["beta2_error"]) == 0.0


def test_non_convergence_exit_code(tmp_path):
    assert main(["retrieve", "--config", FIG4, "--out", str(tmp_path), "--max-iters", "5"]) == 2
    assert record(tmp_path)["status"] == "not_converged"


def test_corrupted_visibility_file(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("0 0.1\n1 oops\n")
    code = main(["retrieve", "--config", FIG4, "--out", str(tmp_path / "o"), "--visibility", str(bad)])
    assert code == 1
    rec = record(tmp_path / "o")
    assert rec["status"] == "error" and "non-numeric" in rec["reason"]


def test_config_error_still_writes_record(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text((scenario_dir() / "fig4_gaussian_gs.cfg").read_text() + "medium.length_m = 1\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "medium.length_m" in record(tmp_path / "o")["reason"]


def test_missing_config_file(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "absent.cfg"), "--out", str(tmp_path / "o")]) == 1
    assert record(tmp_path / "o")["status"] == "error"


def test_byte_identical_outputs(tmp_path):
    for name in ("a", "b"):
        argv = ["retrieve", "--config", FIG4, "--out", str(tmp_path / name), "--algorithm", "composite",
                "--max-iters", "200", "--seed", "5"]
        main(argv)
    assert numeric_outputs(tmp_path / "a") == numeric_outputs(tmp_path / "b")
    assert len(numeric_outputs(tmp_path / "a")) >= 5


def test_sweep(tmp_path):
    assert main(["sweep", "--config", SWEEP, "--out", str(tmp_path)]) == 0
    assert (tmp_path / "jsp_map.csv").is_file()
    for k in range(5):
        rec = read_record(tmp_path / f"slice_{k:02d}.txt")
        assert rec["converged"] == "True"
        assert float(rec["quadratic_coefficient_ps2"]) == pytest.approx(10.0, rel=1e-3)


def test_sweep_forced_non_convergence_is_masked(tmp_path):
    assert main(["sweep", "--config", SWEEP, "--out", str(tmp_path), "--max-iters", "1"]) == 0
    assert record(tmp_path)["summary.masked_slices"] == "5"


def test_sweep_empty_slice_list(tmp_path):
    cfg = tmp_path / "empty.cfg"
    text = (scenario_dir() / "jsp_quadratic_sweep.cfg").read_text()
    cfg.write_text(text.replace("-0.3, -0.1, 0.0, 0.137, 0.3", ""))
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "sweep.idler_offsets_rad_per_ps" in record(tmp_path / "o")["reason"]


def test_plots_rendered_next_to_data(tmp_path):
    pytest.importorskip("matplotlib")
    assert main(["retrieve", "--config", FIG4, "--out", str(tmp_path), "--plot"]) == 0
    png = tmp_path / "retrieval.png"
    assert png.is_file() and png.read_bytes()[:4] == b"\x89PNG"
    assert record(tmp_path)["artifact.retrieval"] == "retrieval.png"


def test_reproduce_table(tmp_path, capsys):
    scenarios = [str(scenario_dir() / n) for n in ("fig4_gaussian_gs.cfg", "fig5_gp2.cfg")]
    assert main(["reproduce", *scenarios, "--out", str(tmp_path), "--no-plot"]) == 0
    table = capsys.readouterr().out
    assert "fig4_gaussian_gs" in table and "fig5_gp2" in table
    assert (tmp_path / "summary.txt").read_text() == table
    assert not list(tmp_path.rglob("*.png"))


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert "homphase" in capsys.readouterr().out
