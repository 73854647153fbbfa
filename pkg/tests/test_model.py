import numpy as np
import pytest
import sympy as sp

from homphase.grids import ComplexTrace, DelayGrid, FrequencyGrid, VisibilityTrace, build_conjugate_grids
from homphase.model import (
    PhotonStatistics,
    Spectrum,
    coincidence_from_visibility,
    cosine_phase_constant,
    cross_spectrum,
    gaussian_amplitude,
    gaussian_spectrum,
    hermite_gaussian_spectrum,
    jsp_visibility,
    omega_to_wavelength,
    taylor_phase_constant,
    thz_to_omega,
    visibility,
    visibility_from_coincidence,
    wavelength_to_omega,
    wavelength_width_to_omega,
)

C = 299792.458  # nm/ps


@pytest.fixture(scope="module")
def grid():
    freq, _ = build_conjugate_grids(1024, thz_to_omega(0.002), wavelength_to_omega(1533.0))
    return freq


def rms_delay(V: VisibilityTrace) -> float:
    w = V.values / V.values.sum()
    mean = np.sum(w * V.tau)
    return float(np.sqrt(np.sum(w * (V.tau - mean) ** 2)))


class TestConversions:
    def test_center_frequency(self):
        assert wavelength_to_omega(1533.0) == pytest.approx(2 * np.pi * C / 1533.0, rel=1e-15)
        assert wavelength_to_omega(1533.0) == pytest.approx(1228.74, abs=5e-3)

    def test_width(self):
        # Oracle: c * dlambda / lambda^2 in THz, times 2 pi.
        nu = C * 1.0 / 1533.0**2
        assert nu == pytest.approx(0.1276, abs=1e-4)
        assert wavelength_width_to_omega(1.0, 1533.0) == pytest.approx(2 * np.pi * nu, rel=1e-12)
        assert wavelength_width_to_omega(1.0, 1533.0) == pytest.approx(0.802, abs=1e-3)

    def test_wavelength_round_trip(self):
        assert omega_to_wavelength(wavelength_to_omega(1550.0)) == pytest.approx(1550.0, rel=1e-15)


class TestSpectra:
    def test_gaussian_unit_area_and_peak(self, grid):
        s = gaussian_spectrum(grid, 1533.0, 1.0)
        assert np.sum(s.intensity) * grid.spacing == pytest.approx(1.0, abs=1e-12)
        assert np.argmax(s.intensity) == grid.center_index
        assert s.intensity.min() >= 0.0

    def test_gaussian_rms_width(self, grid):
        s = gaussian_spectrum(grid, 1533.0, 1.0)
        expected = wavelength_width_to_omega(1.0, 1533.0) / (2 * np.sqrt(2 * np.log(2)))
        assert s.rms_width == pytest.approx(expected, rel=1e-9)

    @pytest.mark.parametrize("fwhm", [0.01, 50.0])
    def test_gaussian_width_limits(self, grid, fwhm):
        with pytest.raises(ValueError):
            gaussian_spectrum(grid, 1533.0, fwhm)

    def test_hermite_order_zero_is_gaussian(self, grid):
        scale = 0.6
        hg0 = hermite_gaussian_spectrum(grid, 0, 1533.0, scale)
        g = gaussian_spectrum(grid, 1533.0, 2 * np.sqrt(np.log(2)) * scale)
        assert np.abs(hg0.intensity - g.intensity).max() < 1e-12 * g.intensity.max()

    def test_hermite_order_three_has_three_zeros(self, grid):
        s = hermite_gaussian_spectrum(grid, 3, 1533.0, 1.0)
        I = s.intensity
        interior = I[1:-1]
        minima = (interior < I[:-2]) & (interior < I[2:]) & (interior < 1e-2 * I.max())
        assert minima.sum() == 3
        assert np.sum(I) * grid.spacing == pytest.approx(1.0, abs=1e-12)

    def test_negative_intensity_rejected(self, grid):
        with pytest.raises(ValueError):
            Spectrum.from_samples(grid, -np.ones(grid.n_points))


class TestPhaseConstants:
    def test_taylor_values(self, grid):
        b = taylor_phase_constant(grid, {2: 4.0, 3: 0.06})
        x = grid.offsets
        assert b.beta[grid.center_index] == 0.0
        assert np.allclose(b.beta, 2.0 * x**2 + 0.01 * x**3, rtol=1e-12, atol=0)
        # Second difference at the center recovers beta2 (the cubic term is odd).
        h = grid.spacing
        c = grid.center_index
        d2 = (b.beta[c + 1] - 2 * b.beta[c] + b.beta[c - 1]) / h**2
        assert d2 == pytest.approx(4.0, rel=1e-6)

    def test_trivial_profiles(self, grid):
        assert np.all(taylor_phase_constant(grid, {}).beta == 0.0)
        assert np.all(taylor_phase_constant(grid, {0: 5.0}).beta == 5.0)
        assert np.all(cosine_phase_constant(grid, 0.0, 4.0).beta == 0.0)

    def test_cosine_matches_analytic(self, grid):
        b = cosine_phase_constant(grid, 1.6, 4.0, 0.3)
        expected = 1.6 * np.cos(2 * np.pi * grid.offsets / 4.0 + 0.3)
        assert np.abs(b.beta - expected).max() < 1e-12

    def test_cosine_period_must_be_positive(self, grid):
        with pytest.raises(ValueError):
            cosine_phase_constant(grid, 1.0, 0.0)

    def test_nonfinite_coefficients_rejected(self, grid):
        with pytest.raises(ValueError):
            taylor_phase_constant(grid, {2: np.inf})


class TestCrossSpectrum:
    def test_zero_length_is_real(self, grid):
        s = gaussian_spectrum(grid, 1533.0, 1.0)
        g = cross_spectrum(s, taylor_phase_constant(grid, {2: 4.0}), 0.0)
        assert np.array_equal(g.values, s.intensity.astype(complex))

    def test_modulus_is_intensity(self, grid):
        s = gaussian_spectrum(grid, 1533.0, 1.0)
        g = cross_spectrum(s, cosine_phase_constant(grid, 3.0, 2.0), 7.0)
        assert np.allclose(np.abs(g.values), s.intensity, rtol=1e-14, atol=0)

    def test_constant_beta_is_global_phase(self, grid):
        s = gaussian_spectrum(grid, 1533.0, 1.0)
        g = cross_spectrum(s, taylor_phase_constant(grid, {0: 2.0}), 1.5)
        assert np.allclose(g.values, s.intensity * np.exp(-3.0j), rtol=1e-14, atol=0)

    def test_grid_mismatch(self, grid):
        other = FrequencyGrid(grid.center, grid.spacing * 1.5, grid.n_points)
        with pytest.raises(ValueError):
            cross_spectrum(gaussian_spectrum(grid, 1533.0, 1.0), taylor_phase_constant(other, {}), 1.0)


class TestVisibility:
    def test_transform_limited_gaussian_matches_symbolic_oracle(self, grid):
        s = gaussian_spectrum(grid, 1533.0, 1.0)
        V = visibility(s, taylor_phase_constant(grid, {}), 0.0)
        x, t = sp.symbols("x t", real=True)
        sig = sp.Symbol("sigma", positive=True)
        amplitude = sp.integrate(
            sp.exp(-(x**2) / (2 * sig**2)) * sp.exp(-sp.I * x * t), (x, -sp.oo, sp.oo)
        ) / (sig * sp.sqrt(2 * sp.pi))
        oracle = sp.lambdify((t, sig), sp.simplify(sp.Abs(amplitude) ** 2), "numpy")
        assert np.abs(V.values - oracle(V.tau, s.rms_width)).max() < 1e-12
        assert V.values.max() == pytest.approx(1.0, abs=1e-12)
        assert np.argmax(V.values) == V.grid.n_points // 2

    def test_chirped_gaussian_closed_form(self, grid):
        s = gaussian_spectrum(grid, 1533.0, 1.0)
        z = 3.7
        V = visibility(s, taylor_phase_constant(grid, {2: 4.0}), z)
        sigma = s.rms_width
        a = 4.0 * z
        q = 1 + (a * sigma**2) ** 2
        oracle = np.exp(-(V.tau**2) * sigma**2 / q) / np.sqrt(q)
        assert np.abs(V.values - oracle).max() < 1e-12

    def test_fig4_dip_shallower_and_broader(self, grid):
        s = gaussian_spectrum(grid, 1533.0, 1.0)
        flat = visibility(s, taylor_phase_constant(grid, {}), 3.7)
        disp = visibility(s, taylor_phase_constant(grid, {2: 4.0, 3: 0.06}), 3.7)
        assert disp.values.max() < 1.0
        # Quadratic-phase broadening factor sqrt(1 + (beta2 z sigma^2)^2); the cubic term adds a little.
        factor = np.sqrt(1 + (4.0 * 3.7 * s.rms_width**2) ** 2)
        assert rms_delay(disp) / rms_delay(flat) == pytest.approx(factor, rel=0.05)
        assert factor > 1.9

    def test_gauge_terms(self, grid):
        s = gaussian_spectrum(grid, 1533.0, 1.0)
        z = 3.7
        k = 9
        base = {2: 4.0, 3: 0.06}
        delay_step = 2 * np.pi / (grid.n_points * grid.spacing)
        V = visibility(s, taylor_phase_constant(grid, base), z).values
        shifted = visibility(s, taylor_phase_constant(grid, {0: 1e3, 1: k * delay_step / z, **base}), z).values
        # The dip moves to tau = -beta1 z: k samples toward negative delay.
        assert np.abs(np.roll(shifted, k) - V).max() < 1e-10

    def test_peak_bound_any_phase(self, grid):
        s = gaussian_spectrum(grid, 1533.0, 1.0)
        rng = np.random.default_rng(3)
        beta = taylor_phase_constant(grid, dict(enumerate(rng.normal(size=5))))
        assert visibility(s, beta, 2.0).values.max() <= 1.0 + 1e-12

    def test_non_conjugate_delay_grid(self, grid):
        s = gaussian_spectrum(grid, 1533.0, 1.0)
        with pytest.raises(ValueError):
            visibility(s, taylor_phase_constant(grid, {}), 1.0, DelayGrid(1.0, grid.n_points))


class TestCoincidence:
    @pytest.mark.parametrize(
        "kind, xi", [("single_photon", 1.0), ("coherent", 0.5), ("thermal", 1 / 3)]
    )
    def test_xi(self, kind, xi):
        assert PhotonStatistics.from_kind(kind).xi == xi

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            PhotonStatistics.from_kind("squeezed")

    def test_zero_visibility(self):
        V = VisibilityTrace(DelayGrid(1.0, 8), np.zeros(8))
        nc = coincidence_from_visibility(V, PhotonStatistics.from_kind("thermal"))
        assert np.all(nc.values == 1.0)

    def test_coherent_peak_and_round_trip(self, grid):
        s = gaussian_spectrum(grid, 1533.0, 1.0)
        V = visibility(s, taylor_phase_constant(grid, {2: 4.0}), 1.0)
        for kind in ("single_photon", "coherent", "thermal"):
            nc = coincidence_from_visibility(V, PhotonStatistics.from_kind(kind))
            assert np.abs(visibility_from_coincidence(nc).values - V.values).max() <= 1e-15 / PhotonStatistics.from_kind(kind).xi
        flat = visibility(s, taylor_phase_constant(grid, {}), 0.0)
        nc = coincidence_from_visibility(flat, PhotonStatistics.from_kind("coherent"))
        assert nc.values[grid.n_points // 2] == pytest.approx(0.5, abs=1e-12)


class TestJsp:
    def setup_method(self):
        self.grid, self.delay = build_conjugate_grids(1024, thz_to_omega(0.002), 1228.0)

    def amplitudes(self, phase=0.0):
        alpha = gaussian_amplitude(self.grid, 1228.0, 0.4)
        return alpha, ComplexTrace(self.grid, np.conj(alpha.values) * np.exp(1j * phase))

    @pytest.mark.parametrize("n_bar", [0.0, 1.0, 2.0])
    def test_peak_scaling(self, n_bar):
        alpha, phi = self.amplitudes()
        V = jsp_visibility(alpha, phi, n_bar, self.delay)
        assert V.values.max() == pytest.approx(2 / (n_bar + 2), abs=1e-12)

    def test_global_phase_invariance(self):
        alpha, phi = self.amplitudes()
        _, rotated = self.amplitudes(phase=1.234)
        a = jsp_visibility(alpha, phi, 1.0).values
        b = jsp_visibility(alpha, rotated, 1.0).values
        assert np.abs(a - b).max() < 1e-15

    def test_preconditions(self):
        alpha, phi = self.amplitudes()
        with pytest.raises(ValueError):
            jsp_visibility(alpha, phi, -0.1)
        with pytest.raises(ValueError):
            jsp_visibility(alpha, ComplexTrace(self.grid, 2 * phi.values), 1.0)
        other = FrequencyGrid(self.grid.center, self.grid.spacing, 512)
        with pytest.raises(ValueError):
            jsp_visibility(alpha, gaussian_amplitude(other, 1228.0, 0.4), 1.0)
