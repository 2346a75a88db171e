import numpy as np
import pytest

from nanoguide.core import DriveField, Emitter, SpectralGrid, ValidationError
from nanoguide.pump_probe import (
    PumpProbeScan,
    calibrate_pump_scatter,
    gain_attenuation_summary,
    normalize_probe,
    probe_response,
    raw_detected,
    transmission_map,
    two_tone_probe_response,
)

GAMMA0 = 30.0
ALPHABETA = 0.074 * 0.5
EMITTER = Emitter(f0=0.0, gamma0=GAMMA0, beta=0.074, alpha=0.5)
WIDE = SpectralGrid(-40 * GAMMA0, 40 * GAMMA0, 401)


def scan(pump_rabi, pump_detuning=0.0, probe_rabi=0.1, grid=WIDE, amp=0.0):
    return PumpProbeScan(
        pump=DriveField(rabi=pump_rabi, detuning=pump_detuning),
        probe_rabi=probe_rabi,
        pp_grid=grid,
        emitter=EMITTER,
        pump_scatter_amp=amp,
    )


def linear_t(deltas_mhz):
    return 1 - ALPHABETA / (1 - 2j * np.asarray(deltas_mhz) / GAMMA0)


class TestProbeResponse:
    def test_linear_limit_contract(self):
        deltas = np.linspace(-10 * GAMMA0, 10 * GAMMA0, 801)
        tp = probe_response(scan(1e-3), deltas)
        assert np.max(np.abs(tp - linear_t(deltas))) < 1e-6

    def test_linear_limit_with_detuned_pump_recovers_shifted_line(self):
        # sanity check on the sign convention: the dip sits where the probe
        # meets the molecule, i.e. at pump-probe detuning = -pump detuning
        pump_det = 2.0 * GAMMA0
        deltas = np.linspace(-10 * GAMMA0, 10 * GAMMA0, 801)
        tp = probe_response(scan(1e-3, pump_detuning=pump_det), deltas)
        assert np.max(np.abs(tp - linear_t(deltas + pump_det))) < 1e-6

    def test_weak_pump_keeps_linear_dip_depth(self):
        tp = probe_response(scan(0.02), np.array([0.0]))
        assert 1 - abs(tp[0]) ** 2 == pytest.approx(0.0726, abs=2e-4)

    def test_strong_pump_bleaches_transition(self):
        deltas = np.linspace(-5 * GAMMA0, 5 * GAMMA0, 101)
        tp = probe_response(scan(400.0), deltas)
        assert np.max(np.abs(tp - 1.0)) < 1e-3

    def test_moderate_pump_suppresses_dip_and_creates_gain(self):
        deltas = np.linspace(-4 * GAMMA0, 4 * GAMMA0, 3001)
        power = np.abs(probe_response(scan(2.0), deltas)) ** 2
        assert 1 - power.min() < 0.0726  # dip shallower than the linear value
        assert power.max() > 1.0  # gain regions exist

    def test_resolvent_continuous_through_zero_detuning(self):
        tp = probe_response(scan(1.0), np.array([-1e-7, 0.0, 1e-7]))
        assert abs(tp[1] - tp[0]) < 1e-6 and abs(tp[1] - tp[2]) < 1e-6

    def test_power_spectrum_even_for_resonant_pump(self):
        deltas = np.linspace(-3 * GAMMA0, 3 * GAMMA0, 241)
        power = np.abs(probe_response(scan(1.3), deltas)) ** 2
        assert np.max(np.abs(power - power[::-1])) < 1e-12

    def test_gain_never_exceeds_coupling_bound(self):
        rng = np.random.default_rng(5)
        deltas = np.linspace(-6 * GAMMA0, 6 * GAMMA0, 601)
        for _ in range(10):
            power = np.abs(
                probe_response(scan(rng.uniform(0, 3), rng.uniform(-3, 3) * GAMMA0), deltas)
            ) ** 2
            assert power.max() - 1.0 <= 4 * ALPHABETA

    def test_attenuation_monotone_in_pump_power_on_resonance(self):
        dips = [
            1 - abs(probe_response(scan(w), np.array([0.0]))[0]) ** 2
            for w in (0.05, 0.3, 0.8, 1.5, 2.5, 4.0)
        ]
        assert all(a > b for a, b in zip(dips, dips[1:]))

    def test_warns_on_strong_probe(self):
        with pytest.warns(UserWarning):
            scan(1.0, probe_rabi=0.5)


class TestTwoToneOracle:
    def test_agreement_on_random_tuples(self):
        rng = np.random.default_rng(17)
        worst = 0.0
        for _ in range(5):
            w = rng.uniform(0.05, 3.0)
            dpm = rng.uniform(-3.0, 3.0) * GAMMA0
            dpp = float(rng.choice([-1, 1])) * rng.uniform(0.15, 5.0) * GAMMA0
            s = scan(w, dpm, probe_rabi=0.005)
            t_res = probe_response(s, dpp)[0]
            t_brute = two_tone_probe_response(s, dpp)
            worst = max(worst, abs(t_res - t_brute) / abs(t_res))
        assert worst < 1e-4

    def test_rejects_zero_beat(self):
        with pytest.raises(ValidationError):
            two_tone_probe_response(scan(1.0, probe_rabi=0.01), 0.0)


class TestRawDetected:
    def test_no_scatter_reduces_to_probe_power(self):
        deltas = np.linspace(-GAMMA0, GAMMA0, 21)
        s = scan(1.0)
        assert np.allclose(raw_detected(s, deltas), np.abs(probe_response(s, deltas)) ** 2)

    def test_far_detuned_probe_with_resonant_pump_exceeds_unity(self):
        s = scan(1.0, amp=0.05)
        raw = raw_detected(s, np.array([35 * GAMMA0]))
        assert raw[0] > 1.0

    def test_calibrated_amplitude_hits_five_percent_plateau(self):
        amp = calibrate_pump_scatter(1.05)
        s = scan(1.0, amp=amp)
        raw = raw_detected(s, np.array([38 * GAMMA0]))
        assert raw[0] == pytest.approx(1.05, abs=1e-3)

    def test_rejects_sub_unity_plateau(self):
        with pytest.raises(ValidationError):
            calibrate_pump_scatter(0.9)


class TestNormalizeProbe:
    def test_flat_rows_become_unity(self):
        # a fully bleached emitter gives an essentially flat row; the grid
        # must still clear the (formal) sideband positions at +-400 gamma0
        tmap = transmission_map(
            EMITTER, pump_rabi_gamma0=400.0, probe_rabi_gamma0=0.1,
            pump_detunings_mhz=np.array([0.0]),
            pp_grid=SpectralGrid(-900 * GAMMA0, 900 * GAMMA0, 101),
        )
        out = normalize_probe(tmap)
        assert np.allclose(out.coherent, 1.0, atol=1e-5)

    def test_scaled_row_normalizes_exactly(self):
        tmap = transmission_map(
            EMITTER, 1.0, 0.1, np.array([0.0]),
            SpectralGrid(-40 * GAMMA0, 40 * GAMMA0, 201),
        )
        scaled = type(tmap)(
            axis1=tmap.axis1, axis2=tmap.axis2, raw=tmap.raw * 3.7,
            gamma0_mhz=tmap.gamma0_mhz, pump_rabi_mhz=tmap.pump_rabi_mhz,
        )
        a = normalize_probe(tmap).coherent
        b = normalize_probe(scaled).coherent
        assert np.allclose(a, b, atol=1e-12)

    def test_strong_pump_trace_wing_settles_at_unity(self):
        tmap = transmission_map(
            EMITTER, 2.6, 0.1, np.array([0.0]),
            SpectralGrid(-40 * GAMMA0, 40 * GAMMA0, 801),
        )
        out = normalize_probe(tmap)
        wing = out.coherent[0, -20:]
        assert np.max(np.abs(wing - 1.0)) < 1e-3

    def test_rejects_narrow_grid(self):
        tmap = transmission_map(
            EMITTER, 1.0, 0.1, np.array([0.0]),
            SpectralGrid(-5 * GAMMA0, 5 * GAMMA0, 101),
        )
        with pytest.raises(ValidationError):
            normalize_probe(tmap)

    def test_map_runs_with_worker_threads(self):
        pm = np.linspace(-GAMMA0, GAMMA0, 5)
        grid = SpectralGrid(-40 * GAMMA0, 40 * GAMMA0, 101)
        serial = transmission_map(EMITTER, 1.0, 0.1, pm, grid, threads=1)
        threaded = transmission_map(EMITTER, 1.0, 0.1, pm, grid, threads=4)
        assert np.array_equal(serial.raw, threaded.raw)


class TestSummary:
    def test_zero_jitter_band_collapses(self):
        s = gain_attenuation_summary(EMITTER, [0.5, 1.5], jitter=0.0)
        assert np.allclose(s.attenuation, s.attenuation_lo)
        assert np.allclose(s.attenuation, s.attenuation_hi)
        assert np.allclose(s.gain, s.gain_lo)

    def test_weak_pump_limit(self):
        s = gain_attenuation_summary(EMITTER, [0.01], jitter=0.0)
        assert s.attenuation[0] == pytest.approx(0.0726, abs=5e-4)
        assert s.gain[0] == pytest.approx(0.0, abs=1e-5)

    def test_peak_gain_brackets_published_value(self):
        pumps = np.geomspace(0.02, 3.0, 10)
        s = gain_attenuation_summary(EMITTER, pumps, jitter=0.0)
        strong = s.pump_rabi_gamma0 >= 1.0
        assert np.any(s.gain[strong] > 0)
        assert 0.001 <= s.gain.max() <= 0.006

    def test_jitter_band_grows_into_saturation(self):
        # the band is orders of magnitude wider once the pump saturates the
        # transition; within the sweep it is not pointwise monotone (there
        # is a dressing crossover near 0.75 linewidths and a collapse once
        # the transition bleaches), so assert the trend, not monotonicity
        pumps = [0.05, 1.2]
        s = gain_attenuation_summary(EMITTER, pumps, jitter=0.2 * GAMMA0)
        width = s.attenuation_hi - s.attenuation_lo
        assert width[1] > 10 * width[0]
        assert s.attenuation_lo[1] <= s.attenuation[1] <= s.attenuation_hi[1]
