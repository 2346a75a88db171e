import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nanoguide.core import Emitter, SpectralGrid
from nanoguide.dynamics import resonant_g2
from nanoguide.inference import (
    OutOfModelError,
    extinction_to_beta,
    fit_g2,
    fit_lorentzian,
    fit_result_csv,
    fit_result_text,
    fit_stark_slope,
    g2_model,
    lorentzian_model,
    _g2_jac,
    _lorentzian_jac,
)
from nanoguide.scattering import extinction_spectrum, single_emitter_response

# recovery tolerances for noiseless synthetic inputs (relative)
NOISELESS_TOL = {
    "lorentzian_center": 1e-6,
    "lorentzian_fwhm": 1e-3,
    "g2_params": 1e-3,
    "stark_coeffs": 1e-9,
}


def lorentz(x, amp, center, fwhm, baseline=0.0):
    return baseline + amp / (1.0 + (2.0 * (x - center) / fwhm) ** 2)


class TestFitLorentzian:
    def test_noiseless_extinction_dip_recovery(self):
        x = np.linspace(-150.0, 150.0, 2001)
        y = 1.0 - lorentz(x, 0.072631, 0.0, 30.0)  # transmission dip
        fit = fit_lorentzian(x, y, n_peaks=1)
        assert fit.converged
        assert fit["fwhm_0"] == pytest.approx(30.0, rel=NOISELESS_TOL["lorentzian_fwhm"] * 0.01)
        assert fit["amplitude_0"] == pytest.approx(-0.072631, rel=1e-6)
        assert fit["baseline"] == pytest.approx(1.0, abs=1e-9)

    def test_flat_data_flagged(self):
        x = np.linspace(0.0, 1.0, 50)
        fit = fit_lorentzian(x, np.full(50, 2.0))
        assert not fit.converged
        assert fit["amplitude_0"] == 0.0

    def test_two_overlapping_peaks(self):
        x = np.linspace(-100.0, 100.0, 4001)
        sep = 30.0  # equal to the FWHM
        y = lorentz(x, 1.0, -sep / 2, 30.0) + lorentz(x, 0.8, sep / 2, 30.0)
        fit = fit_lorentzian(x, y, n_peaks=2)
        assert fit.converged
        assert abs(fit["center_0"] - (-sep / 2)) < 0.05 * sep
        assert abs(fit["center_1"] - (sep / 2)) < 0.05 * sep

    def test_noisy_recovery_within_reported_sigma(self):
        rng = np.random.default_rng(8)
        x = np.linspace(-200.0, 200.0, 801)
        y = lorentz(x, -0.07, 5.0, 30.0, baseline=1.0) + rng.normal(0, 1e-3, len(x))
        fit = fit_lorentzian(x, y)
        assert abs(fit["center_0"] - 5.0) < 4 * fit.sigmas["center_0"]
        assert abs(fit["fwhm_0"] - 30.0) < 4 * fit.sigmas["fwhm_0"]

    def test_jacobian_matches_finite_differences(self):
        x = np.linspace(-10.0, 10.0, 101)
        theta = np.array([0.3, -0.8, 1.2, 4.5])
        jac = _lorentzian_jac(x, theta)
        eps = 1e-7
        for k in range(len(theta)):
            tp, tm = theta.copy(), theta.copy()
            tp[k] += eps
            tm[k] -= eps
            fd = (lorentzian_model(x, tp) - lorentzian_model(x, tm)) / (2 * eps)
            denom = np.maximum(np.abs(fd).max(), 1e-12)
            assert np.max(np.abs(jac[:, k] - fd)) / denom < 1e-4

    @given(
        scale=st.floats(0.1, 50.0),
        shift=st.floats(-1000.0, 1000.0),
    )
    @settings(max_examples=15, deadline=None)
    def test_affine_x_covariance(self, scale, shift):
        x = np.linspace(-100.0, 100.0, 1501)
        y = lorentz(x, -0.5, 12.0, 25.0, baseline=2.0)
        base = fit_lorentzian(x, y)
        moved = fit_lorentzian(scale * x + shift, y)
        assert moved["center_0"] == pytest.approx(scale * base["center_0"] + shift, abs=1e-6 * scale * 100)
        assert moved["fwhm_0"] == pytest.approx(scale * base["fwhm_0"], rel=1e-6)

    def test_rejects_unsorted_x(self):
        with pytest.raises(Exception):
            fit_lorentzian(np.array([0.0, 2.0, 1.0, 3.0, 4.0]), np.zeros(5))


class TestFitG2:
    def test_recovery_at_published_fit_point_with_shot_noise(self):
        # synthetic histogram at 1e6 total counts: per-bin counts around 1e6/600
        rng = np.random.default_rng(12)
        taus = np.linspace(0.0, 100.0, 600)
        truth = resonant_g2(taus, 0.9, 5.0)
        per_bin = 1e6 / len(taus)
        noisy = rng.poisson(np.maximum(truth, 1e-9) * per_bin) / per_bin
        fit = fit_g2(taus, noisy)
        assert fit.converged
        assert fit["rabi_gamma0"] == pytest.approx(0.9, rel=0.05)
        assert fit["lifetime_ns"] == pytest.approx(5.0, rel=0.05)

    def test_noiseless_recovery(self):
        taus = np.linspace(0.0, 80.0, 400)
        fit = fit_g2(taus, resonant_g2(taus, 1.4, 4.0))
        assert fit["rabi_gamma0"] == pytest.approx(1.4, rel=NOISELESS_TOL["g2_params"])
        assert fit["lifetime_ns"] == pytest.approx(4.0, rel=NOISELESS_TOL["g2_params"])

    def test_exponential_branch(self):
        taus = np.linspace(0.0, 60.0, 200)
        y = 1.0 - np.exp(-taus / 7.5)
        fit = fit_g2(taus, y, model="exponential")
        assert fit["tau_c"] == pytest.approx(7.5, rel=1e-6)

    def test_time_axis_rescaling_covariance(self):
        taus = np.linspace(0.0, 90.0, 500)
        y = resonant_g2(taus, 0.9, 5.0)
        k = 3.0
        fit = fit_g2(k * taus, y)
        assert fit["lifetime_ns"] == pytest.approx(k * 5.0, rel=1e-3)
        assert fit["rabi_gamma0"] == pytest.approx(0.9, rel=1e-3)

    def test_jacobian_matches_finite_differences(self):
        taus = np.linspace(0.0, 50.0, 200)
        for ratio, t1 in [(0.9, 5.0), (0.1, 8.0), (2.2, 3.0)]:
            jac = _g2_jac(taus, ratio, t1)
            eps = 1e-6
            fd0 = (g2_model(taus, ratio + eps, t1) - g2_model(taus, ratio - eps, t1)) / (2 * eps)
            fd1 = (g2_model(taus, ratio, t1 + eps) - g2_model(taus, ratio, t1 - eps)) / (2 * eps)
            for col, fd in ((0, fd0), (1, fd1)):
                denom = max(np.abs(fd).max(), 1e-9)
                assert np.max(np.abs(jac[:, col] - fd)) / denom < 1e-4


class TestFitStarkSlope:
    def test_exact_line_recovered_exactly(self):
        v = np.linspace(-10.0, 10.0, 11)
        centers = 120.0 + 500.0 * v  # 0.5 GHz/V in MHz
        fit = fit_stark_slope(v, centers)
        assert fit["a_ghz_per_v"] == pytest.approx(0.5, rel=NOISELESS_TOL["stark_coeffs"])
        assert fit["f0_mhz"] == pytest.approx(120.0, abs=1e-6)
        assert fit["b_ghz_per_v2"] == pytest.approx(0.0, abs=1e-9)

    def test_noisy_line_slope_within_two_percent(self):
        rng = np.random.default_rng(4)
        v = np.linspace(-20.0, 20.0, 41)
        centers = 500.0 * v + rng.normal(0.0, 50.0, len(v))
        fit = fit_stark_slope(v, centers)
        assert fit["a_ghz_per_v"] == pytest.approx(0.5, rel=0.02)

    def test_quadratic_data_with_linear_model_flags_large_residual(self):
        v = np.linspace(-10.0, 10.0, 21)
        centers = 500.0 * v + 30.0 * v**2
        good = fit_stark_slope(v, centers, degree=2)
        bad = fit_stark_slope(v, centers, degree=1)
        assert good.residual_norm < 1e-6
        assert bad.residual_norm > 100.0 * max(good.residual_norm, 1e-12)


class TestExtinctionToBeta:
    def test_published_operating_point(self):
        assert extinction_to_beta(0.072631, 0.5) == pytest.approx(0.074, abs=1e-6)

    def test_trivial_endpoints(self):
        assert extinction_to_beta(0.0, 0.7) == 0.0
        assert extinction_to_beta(1.0, 1.0) == 1.0

    def test_out_of_model_depth(self):
        with pytest.raises(OutOfModelError):
            extinction_to_beta(0.9, 0.2)
        with pytest.raises(OutOfModelError):
            extinction_to_beta(1.0, 0.5)

    @given(beta=st.floats(0.001, 1.0), alpha=st.floats(0.05, 1.0))
    @settings(max_examples=60, deadline=None)
    def test_round_trip_with_scattering_model(self, beta, alpha):
        e = Emitter(f0=0.0, gamma0=30.0, beta=beta, alpha=alpha)
        grid = SpectralGrid(-1.0, 1.0, 3)  # center point on resonance
        depth = extinction_spectrum(single_emitter_response(e, grid))[1]
        assert extinction_to_beta(float(depth), alpha) == pytest.approx(beta, abs=1e-10)


class TestFitResultRendering:
    def test_text_and_csv_round_trip_fields(self):
        fit = fit_stark_slope(np.linspace(-5, 5, 11), 500.0 * np.linspace(-5, 5, 11))
        text = fit_result_text(fit)
        assert "a_ghz_per_v" in text and "converged = True" in text
        header, row = fit_result_csv(fit)
        assert header.split(",")[0] == "model"
        assert len(header.split(",")) == len(row.split(","))
