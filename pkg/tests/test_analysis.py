import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from homphase.analysis import (
    ErrorReport,
    JspMap,
    compare_to_truth,
    estimate_dispersion,
    gauge_fix,
    jsp_sweep,
    phase_derivative,
    support_mask,
    weighted_coefficient,
)
from homphase.grids import ComplexTrace, build_conjugate_grids
from homphase.model import (
    PhaseConstant,
    cosine_phase_constant,
    gaussian_amplitude,
    taylor_phase_constant,
    thz_to_omega,
)
from homphase.retrieval import RetrievalConfig, run
from homphase.stencils import stencil_support


@pytest.fixture(scope="module")
def grid():
    freq, _ = build_conjugate_grids(1024, thz_to_omega(0.002), 1228.0)
    return freq


class TestDerivatives:
    def test_exact_on_cubic(self, grid):
        beta = taylor_phase_constant(grid, {0: 3.0, 1: -2.0, 2: 4.0, 3: 0.06})
        x = grid.offsets
        d2, edge = phase_derivative(beta, 2, return_edges=True)
        d3 = phase_derivative(beta, 3)
        scale = np.abs(beta.beta).max() / grid.spacing**2
        assert np.abs(d2 - (4.0 + 0.06 * x)).max() < 1e-12 * scale
        assert np.abs(d3 - 0.06).max() < 1e-12 * scale / grid.spacing
        assert edge.sum() == 4 and edge[0] and edge[-1] and not edge[2]

    def test_cosine_against_symbolic_derivative(self, grid):
        amp, period, offset = 1.6, 4.0, 0.4
        w = sp.Symbol("w")
        expr = amp * sp.cos(2 * sp.pi * w / period + offset)
        beta = cosine_phase_constant(grid, amp, period, offset)
        for order in (2, 3):
            oracle = sp.lambdify(w, sp.diff(expr, w, order), "numpy")(grid.offsets)
            d, edge = phase_derivative(beta, order, return_edges=True)
            interior = ~edge
            assert np.abs(d - oracle)[interior].max() < 1e-6 * np.abs(oracle).max()

    def test_zero_profile(self, grid):
        assert np.all(phase_derivative(taylor_phase_constant(grid, {}), 2) == 0.0)


class TestWeightedCoefficient:
    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), value=st.floats(-1e3, 1e3))
    def test_constant_is_preserved(self, seed, value):
        w = np.random.default_rng(seed).uniform(0.0, 1.0, 64)
        assert weighted_coefficient(np.full(64, value), w) == pytest.approx(value, rel=1e-13, abs=1e-13)

    def test_odd_derivative_with_symmetric_weights(self):
        x = np.linspace(-1.0, 1.0, 101)
        assert abs(weighted_coefficient(x**3, np.exp(-(x**2)))) < 1e-16

    def test_all_weights_below_floor(self):
        w = np.zeros(16)
        w[3] = 1.0
        with pytest.raises(ValueError):
            weighted_coefficient(np.ones(16), np.zeros(16))
        assert weighted_coefficient(np.arange(16.0), w) == 3.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            weighted_coefficient(np.ones(4), np.ones(5))


class TestExtraction:
    def test_gauge_invariant(self, fig4):
        base = {2: 4.0, 3: 0.06}
        a = estimate_dispersion(taylor_phase_constant(fig4.grid, base), fig4.spectrum)
        b = estimate_dispersion(taylor_phase_constant(fig4.grid, {0: 1e3, 1: 10.0, **base}), fig4.spectrum)
        # Affine terms cancel exactly in exact arithmetic; in floating point the
        # stored samples carry eps*|beta| rounding that the stencil divides by h^order.
        eps = np.finfo(float).eps
        scale = np.abs(taylor_phase_constant(fig4.grid, {0: 1e3, 1: 10.0, **base}).beta).max()
        h = fig4.grid.spacing
        assert abs(a.beta2 - b.beta2) < 16 * eps * scale / h**2
        assert abs(a.beta3 - b.beta3) < 16 * eps * scale / h**3
        # Without a large offset the cancellation is at the 1e-12 level.
        c = estimate_dispersion(taylor_phase_constant(fig4.grid, {0: 0.5, 1: 0.01, **base}), fig4.spectrum)
        assert abs(a.beta2 - c.beta2) < 1e-12
        assert a.beta2 == pytest.approx(4.0, abs=1e-9)
        assert a.beta3 == pytest.approx(0.06, abs=1e-6)

    def test_truth_against_itself(self, fig4):
        report = compare_to_truth(fig4.beta, fig4.beta, fig4.spectrum)
        assert report.beta2_error == 0.0 and report.beta3_error == 0.0

    def test_report_from_run(self, fig4):
        result = run(fig4.cfg.retrieval, fig4.V, fig4.spectrum, fig4.z)
        report = compare_to_truth(result, fig4.beta, fig4.spectrum)
        assert result.converged
        assert report.beta2_error < 1e-4
        assert report.iterations == result.iterations
        assert all(np.isfinite([report.beta2_error, report.beta3_error, report.final_E]))
        assert "beta2_error" in report.to_record()

    def test_grid_mismatch(self, fig4, grid):
        with pytest.raises(ValueError):
            compare_to_truth(taylor_phase_constant(grid, {}), fig4.beta, fig4.spectrum)

    def test_report_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            ErrorReport(np.nan, 0.0, 0.0, 0)


class TestGauge:
    def test_removes_affine_terms(self, grid):
        x = grid.offsets
        mag = np.exp(-(((x - 0.3) / 0.4) ** 2))
        phase = 2.0 + 5.0 * x + 3.0 * (x - 0.3) ** 2
        fixed, ref = gauge_fix(phase, mag, grid.spacing)
        assert ref == np.argmax(mag)
        assert np.abs(fixed - 3.0 * (x - x[ref]) ** 2).max() < 1e-9


class TestJspSweep:
    cfg = RetrievalConfig(
        algorithm="composite", max_iterations=3000, error_tolerance=1e-12, stall_tolerance=1e-2
    )

    def family(self, grid, widths, quadratic, center=1228.0):
        return {float(k): gaussian_amplitude(grid, center, w, quadratic) for k, w in enumerate(widths)}

    def test_separable_columns_agree(self, grid):
        alpha = gaussian_amplitude(grid, 1228.0, 0.6)
        # Agreement to 1e-6 rad reaches the 1e-6 intensity wings only once E is far below 1e-12.
        tight = RetrievalConfig(algorithm="composite", max_iterations=5000, error_tolerance=1e-24, stall_tolerance=1e-2)
        result = jsp_sweep(alpha, self.family(grid, [0.34, 0.3], 10.0), 1.0, tight, curvature_sign=1)
        assert all(result.metadata["converged"])
        both = result.mask.all(axis=1)
        assert both.sum() > 50
        assert np.abs(result.phase[both, 0] - result.phase[both, 1]).max() < 1e-6

    def test_quadratic_coefficient(self, grid):
        alpha = gaussian_amplitude(grid, 1228.0, 0.6)
        result = jsp_sweep(alpha, self.family(grid, [0.34], 10.0), 1.0, self.cfg, curvature_sign=1)
        curvature = phase_derivative(PhaseConstant(grid, result.phase[:, 0]), 2)
        weights = np.abs(alpha.values) ** 2
        estimate = weighted_coefficient(curvature, np.where(result.mask[:, 0], weights, 0.0))
        assert estimate == pytest.approx(10.0, rel=1e-3)

    def test_non_converged_slice_is_masked(self, grid):
        alpha = gaussian_amplitude(grid, 1228.0, 0.6)
        short = RetrievalConfig(max_iterations=1, error_tolerance=1e-300)
        result = jsp_sweep(alpha, self.family(grid, [0.34, 0.3], 10.0), 1.0, short)
        assert not result.mask.any()
        assert result.metadata["converged"] == [False, False]

    def test_slice_rerun_bit_identical(self, grid):
        alpha = gaussian_amplitude(grid, 1228.0, 0.6)
        fam = self.family(grid, [0.34], 10.0)
        a = jsp_sweep(alpha, fam, 1.0, self.cfg, curvature_sign=1)
        b = jsp_sweep(alpha, fam, 1.0, self.cfg, curvature_sign=1)
        assert np.array_equal(a.phase, b.phase)

    def test_empty_family(self, grid):
        with pytest.raises(ValueError):
            jsp_sweep(gaussian_amplitude(grid, 1228.0, 0.6), {}, 1.0, self.cfg)

    def test_export(self, grid, tmp_path):
        phase = np.zeros((grid.n_points, 2))
        mask = np.zeros_like(phase, dtype=bool)
        mask[10, 1] = True
        phase[10, 1] = 0.25
        path = JspMap(grid, np.array([0.0, 0.1]), phase, mask).export(tmp_path / "map.csv")
        rows = [line for line in path.read_text().splitlines() if not line.startswith("#")]
        assert rows[0].split(",") == ["omega_s", "0", "0.10000000000000001"]
        data = np.genfromtxt(rows[1:], delimiter=",")
        assert data.shape == (grid.n_points, 3)
        assert data[10, 2] == 0.25
        assert np.isnan(data[10, 1]) and np.isnan(data[0, 2])

    def test_shape_checked(self, grid):
        with pytest.raises(ValueError):
            JspMap(grid, np.array([0.0]), np.zeros((4, 1)), np.zeros((4, 1), bool))


class TestStencilSupport:
    def test_window_around_a_gap(self):
        mask = np.ones(20, dtype=bool)
        mask[10] = False
        kept = stencil_support(mask, 2)
        assert kept.tolist() == [i not in range(8, 13) for i in range(20)]
        assert stencil_support(mask, 3).sum() == 20 - 7

    def test_edge_windows_are_one_sided(self):
        mask = np.ones(12, dtype=bool)
        mask[4] = False
        # samples 0 and 1 read the one-sided window 0..4, which contains the gap
        assert stencil_support(mask, 2)[:7].tolist() == [False] * 7
        mask = np.ones(12, dtype=bool)
        mask[5] = False
        assert stencil_support(mask, 2)[:4].tolist() == [True, True, True, False]

    def test_null_phase_does_not_leak(self, grid):
        # an odd spectrum with an exact null: the phase at the null is arbitrary
        x = grid.offsets
        I = (x / 0.3) ** 2 * np.exp(-((x / 0.3) ** 2))
        null = int(np.argmin(np.abs(x)))
        I[null] = 0.0
        beta = taylor_phase_constant(grid, {2: 4.0, 3: 0.06})
        garbage = beta.beta.copy()
        garbage[null] += 1.0
        a = estimate_dispersion(beta, I)
        b = estimate_dispersion(PhaseConstant(grid, garbage), I)
        assert a.beta2 == pytest.approx(4.0, abs=1e-9)
        assert a.beta2 == b.beta2 and a.beta3 == b.beta3


def test_support_mask_floor():
    w = np.array([1.0, 1e-7, 2e-6, 0.0])
    assert support_mask(w).tolist() == [True, False, True, False]
    assert not support_mask(np.zeros(3)).any()
