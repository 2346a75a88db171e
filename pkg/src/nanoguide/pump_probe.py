"""Nonlinear probe transmission of a pump-dressed emitter.

The pump is treated exactly (it sets the steady state of the driven
emitter); the guided probe is treated to first order. Writing the probe
coupling in the pump rotating frame as a perturbation oscillating at the
pump-probe detuning ``d``, the first-order response solves the shifted
linear system

    (L + i d I) x = i (W_prb / 2) vec([s+, rho_ss])

and the probe-frequency dipole component ``c = Tr(s- x)`` converts to a
transmission amplitude through ``t_p = 1 - i (alpha beta gamma / W_prb) c``.
The conversion constant is fixed by requiring that an infinitely weak pump
reproduces the weak-probe law ``t(d) = 1 - alpha beta / (1 - 2 i d / g0)``
exactly; that equality is the defining contract of this module, and a
brute-force two-tone time-domain integration provides an independent
cross-check of the resolvent route.

Detected (raw) maps add the pump light elastically scattered into the
guide as a single complex amplitude; the normalization step divides every
constant-pump-detuning row by its own far-detuned baseline, after which
gain and attenuation read directly as the deviation from 1.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .core import (
    DriveField,
    Emitter,
    SpectralGrid,
    ValidationError,
    mhz_to_rad_per_ns,
)
from .dynamics import (
    SIGMA_MINUS,
    SIGMA_PLUS,
    LiouvilleProblem,
    liouvillian_matrix,
    steady_state,
    unvec,
    vec,
)

__all__ = [
    "PumpProbeScan",
    "TransmissionMap",
    "PumpSweepSummary",
    "probe_response",
    "two_tone_probe_response",
    "raw_detected",
    "transmission_map",
    "normalize_probe",
    "calibrate_pump_scatter",
    "gain_attenuation_summary",
]

_PROBE_LINEARITY_BOUND = 0.2  # in gamma0 units; warn above
_WING_FRACTION = 0.10
_WING_CLEARANCE = 20.0  # in gamma0 units


@dataclass(frozen=True)
class PumpProbeScan:
    """One pump-probe measurement configuration.

    ``pump.detuning`` is the pump-emitter detuning in MHz; ``pp_grid``
    spans the pump-probe detuning axis. ``pump_scatter_amp`` is the
    complex amplitude (relative to the probe field) of pump light scattered
    directly into the guide when the pump sits on the molecular resonance;
    it models the apparent extra signal in raw detection and is a
    calibration parameter, not microscopic physics.
    """

    pump: DriveField
    probe_rabi: float  # in gamma0 units
    pp_grid: SpectralGrid
    emitter: Emitter
    pump_scatter_amp: complex = 0.0

    def __post_init__(self) -> None:
        if self.probe_rabi < 0:
            raise ValidationError(f"probe_rabi must be >= 0, got {self.probe_rabi}")
        if self.probe_rabi > _PROBE_LINEARITY_BOUND:
            warnings.warn(
                f"probe_rabi = {self.probe_rabi} gamma0 exceeds the first-order "
                f"validity guideline of {_PROBE_LINEARITY_BOUND} gamma0",
                stacklevel=2,
            )

    def problem(self, pump_detuning_mhz: float | None = None) -> LiouvilleProblem:
        pump = self.pump
        if pump_detuning_mhz is not None:
            pump = DriveField(rabi=pump.rabi, detuning=pump_detuning_mhz, unit=pump.unit)
        return LiouvilleProblem(
            gamma=self.emitter.gamma_rad_per_ns, drives=(pump,)
        )


@dataclass(frozen=True)
class TransmissionMap:
    """Detected probe power over (pump-emitter, pump-probe) detunings.

    ``raw`` is relative to the off-resonant probe power; ``coherent`` is
    filled by :func:`normalize_probe` and tends to 1 far from resonance.
    """

    axis1: np.ndarray  # pump-emitter detunings, MHz
    axis2: SpectralGrid  # pump-probe detuning grid
    raw: np.ndarray  # shape (len(axis1), axis2.n_points)
    coherent: np.ndarray | None = None
    gamma0_mhz: float = 0.0
    pump_rabi_mhz: float = 0.0

    def __post_init__(self) -> None:
        raw = np.asarray(self.raw, dtype=float)
        if raw.shape != (len(self.axis1), self.axis2.n_points):
            raise ValidationError("raw map shape must be (len(axis1), n_points)")
        if not np.all(np.isfinite(raw)):
            raise ValidationError("raw map must be finite")
        object.__setattr__(self, "raw", raw)


@dataclass(frozen=True)
class PumpSweepSummary:
    """Attenuation/gain extremes per pump power, with a jitter envelope.

    Curves are evaluated with the nominal emitter frequency; the lo/hi
    bands bracket the values obtained when the emitter frequency wanders
    within +- jitter while pump and probe stay fixed in the lab frame.
    """

    pump_rabi_gamma0: np.ndarray
    attenuation: np.ndarray
    attenuation_lo: np.ndarray
    attenuation_hi: np.ndarray
    gain: np.ndarray
    gain_lo: np.ndarray
    gain_hi: np.ndarray
    jitter_mhz: float


def _response_vector(L: np.ndarray, rho_ss_vec: np.ndarray, probe_rabi: float) -> np.ndarray:
    rho = unvec(rho_ss_vec)
    comm = SIGMA_PLUS @ rho - rho @ SIGMA_PLUS
    return 1j * 0.5 * probe_rabi * vec(comm)


def _probe_amplitudes(
    emitter: Emitter,
    pump_rabi: float,
    pump_detuning_mhz: float,
    deltas_mhz: np.ndarray,
) -> np.ndarray:
    """t_p over an array of pump-probe detunings (angular math inside)."""
    gamma = emitter.gamma_rad_per_ns
    L = liouvillian_matrix(pump_rabi, mhz_to_rad_per_ns(pump_detuning_mhz), gamma)
    rho_ss_vec = vec(steady_state(L).matrix)

    probe_rabi = 1.0  # cancels in the calibrated amplitude
    source = _response_vector(L, rho_ss_vec, probe_rabi)
    conversion = -1j * emitter.coherent_coupling * gamma / probe_rabi

    deltas = mhz_to_rad_per_ns(np.asarray(deltas_mhz, dtype=float))
    eye = np.eye(4, dtype=complex)
    systems = L[None, :, :] + 1j * deltas[:, None, None] * eye[None, :, :]
    singular = np.abs(deltas) < 1e-12 * max(gamma, 1e-12)
    out = np.empty(len(deltas), dtype=complex)

    regular = ~singular
    if np.any(regular):
        rhs = np.broadcast_to(source[:, None], (int(regular.sum()), 4, 1))
        sols = np.linalg.solve(systems[regular], rhs)
        out[regular] = sols[:, 1, 0]
    if np.any(singular):
        # L itself is singular along rho_ss; pick the trace-free solution,
        # which is the d -> 0 limit of the regular branch.
        x, *_ = np.linalg.lstsq(L, source, rcond=None)
        x = x - (x[0] + x[3]) * rho_ss_vec
        out[singular] = x[1]

    return 1.0 + conversion * out


def probe_response(scan: PumpProbeScan, deltas_mhz=None) -> np.ndarray:
    """Complex probe transmission amplitude t_p on the pump-probe axis.

    ``deltas_mhz`` defaults to the scan grid; a scalar or array is
    accepted. The result is first order in the probe and therefore
    independent of ``scan.probe_rabi``.
    """
    if deltas_mhz is None:
        deltas_mhz = scan.pp_grid.frequencies()
    deltas = np.atleast_1d(np.asarray(deltas_mhz, dtype=float))
    pump_rabi = scan.pump.rabi_rad_per_ns(scan.emitter.gamma0)
    return _probe_amplitudes(scan.emitter, pump_rabi, scan.pump.detuning, deltas)


def two_tone_probe_response(
    scan: PumpProbeScan,
    delta_mhz: float,
    probe_rabi_gamma0: float | None = None,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> complex:
    """Brute-force t_p: integrate the master equation with both tones.

    Starting from the pump-only steady state, the bichromatic master
    equation is integrated past its transient; the dipole component at the
    probe frequency is then extracted by quadrature over an integer number
    of beat periods and converted with the same calibration as the
    resolvent route. Independent of :func:`probe_response` except for that
    shared conversion constant. Requires ``delta_mhz != 0`` (at zero beat
    the probe component is not separable from the pump's own dipole).
    """
    if delta_mhz == 0:
        raise ValidationError("two-tone extraction needs a nonzero pump-probe detuning")
    e = scan.emitter
    gamma = e.gamma_rad_per_ns
    w_prb = mhz_to_rad_per_ns(
        (scan.probe_rabi if probe_rabi_gamma0 is None else probe_rabi_gamma0) * e.gamma0
    )
    if w_prb <= 0:
        raise ValidationError("two-tone oracle needs a positive probe amplitude")

    pump_rabi = scan.pump.rabi_rad_per_ns(e.gamma0)
    L = liouvillian_matrix(pump_rabi, mhz_to_rad_per_ns(scan.pump.detuning), gamma)
    rho0 = vec(steady_state(L).matrix)
    delta = mhz_to_rad_per_ns(delta_mhz)

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        rho = y[:4]
        m = unvec(rho)
        drive = 0.5 * w_prb * (
            SIGMA_PLUS * np.exp(-1j * delta * t) + SIGMA_MINUS * np.exp(1j * delta * t)
        )
        drho = L @ rho + vec(-1j * (drive @ m - m @ drive))
        dacc = m[1, 0] * np.exp(1j * delta * t)
        return np.concatenate([drho, [dacc]])

    t_relax = 60.0 / gamma
    period = 2.0 * np.pi / abs(delta)
    n_periods = max(4, int(np.ceil((20.0 / gamma) / period)))
    t_acc = n_periods * period

    y0 = np.concatenate([rho0, [0.0 + 0.0j]])
    warm = solve_ivp(rhs, (0.0, t_relax), y0, method="DOP853", rtol=rtol, atol=atol)
    y1 = warm.y[:, -1].copy()
    y1[4] = 0.0

    def rhs_shifted(t: float, y: np.ndarray) -> np.ndarray:
        return rhs(t + t_relax, y)

    run = solve_ivp(rhs_shifted, (0.0, t_acc), y1, method="DOP853", rtol=rtol, atol=atol)
    c_probe = run.y[4, -1] / t_acc
    return complex(1.0 - 1j * e.coherent_coupling * gamma / w_prb * c_probe)


def _pump_scatter_field(scan: PumpProbeScan, pump_detuning_mhz: float) -> complex:
    """Pump light coherently scattered into the guide, relative to the probe."""
    lorentz = 1.0 / (1.0 - 2j * pump_detuning_mhz / scan.emitter.gamma0)
    return scan.pump_scatter_amp * lorentz


def raw_detected(scan: PumpProbeScan, deltas_mhz=None) -> np.ndarray:
    """Detected power relative to the off-resonant probe intensity.

    Coherent sum of the transmitted probe and the pump-scattered field;
    with ``pump_scatter_amp = 0`` this is just ``|t_p|^2``.
    """
    t_p = probe_response(scan, deltas_mhz)
    return np.abs(t_p + _pump_scatter_field(scan, scan.pump.detuning)) ** 2


def calibrate_pump_scatter(target_plateau: float) -> float:
    """Real scatter amplitude giving ``raw = target_plateau`` far from resonance
    with the pump on the molecular resonance."""
    if target_plateau < 1.0:
        raise ValidationError("plateau below 1 cannot come from added pump light")
    return float(np.sqrt(target_plateau) - 1.0)


def transmission_map(
    emitter: Emitter,
    pump_rabi_gamma0: float,
    probe_rabi_gamma0: float,
    pump_detunings_mhz,
    pp_grid: SpectralGrid,
    pump_scatter_amp: complex = 0.0,
    threads: int = 1,
) -> TransmissionMap:
    """Raw detected power over the (pump-emitter, pump-probe) detuning plane."""
    axis1 = np.asarray(pump_detunings_mhz, dtype=float)
    raw = np.empty((len(axis1), pp_grid.n_points))

    def fill_row(i: int) -> None:
        scan = PumpProbeScan(
            pump=DriveField(rabi=pump_rabi_gamma0, detuning=float(axis1[i])),
            probe_rabi=probe_rabi_gamma0,
            pp_grid=pp_grid,
            emitter=emitter,
            pump_scatter_amp=pump_scatter_amp,
        )
        raw[i] = raw_detected(scan)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill_row, range(len(axis1))))
    else:
        for i in range(len(axis1)):
            fill_row(i)

    return TransmissionMap(
        axis1=axis1,
        axis2=pp_grid,
        raw=raw,
        gamma0_mhz=emitter.gamma0,
        pump_rabi_mhz=pump_rabi_gamma0 * emitter.gamma0,
    )


def _wing_indices(n: int) -> np.ndarray:
    k = max(1, int(np.ceil(_WING_FRACTION * n)))
    return np.arange(n - k, n)


def normalize_probe(tmap: TransmissionMap) -> TransmissionMap:
    """Divide each constant-pump-detuning row by its far-detuned baseline.

    The baseline is the median of the trailing 10% of grid points, which
    must sit at least 20 linewidths away from every dressed-emitter
    feature (the beat origin and the two generalized-Rabi sidebands).
    """
    if tmap.gamma0_mhz <= 0:
        raise ValidationError("map is missing its linewidth metadata")
    freqs = tmap.axis2.frequencies()
    wings = _wing_indices(len(freqs))
    omega_g = np.hypot(
        tmap.pump_rabi_mhz * np.ones_like(tmap.axis1), tmap.axis1
    )  # generalized Rabi per row, MHz
    clearance = _WING_CLEARANCE * tmap.gamma0_mhz
    for i, og in enumerate(omega_g):
        features = np.array([0.0, og, -og])
        dist = np.min(np.abs(freqs[wings][:, None] - features[None, :]), axis=1)
        if np.any(dist < clearance):
            raise ValidationError(
                "pump-probe grid too narrow for a clean baseline: wing points "
                f"closer than {clearance:g} MHz to a dressed feature on row {i}"
            )
    baseline = np.median(tmap.raw[:, wings], axis=1)
    coherent = tmap.raw / baseline[:, None]
    return TransmissionMap(
        axis1=tmap.axis1,
        axis2=tmap.axis2,
        raw=tmap.raw,
        coherent=coherent,
        gamma0_mhz=tmap.gamma0_mhz,
        pump_rabi_mhz=tmap.pump_rabi_mhz,
    )


def _extremes_over_probe(
    emitter: Emitter, pump_rabi_gamma0: float, pump_detuning_mhz: float
) -> tuple[float, float]:
    """(max attenuation, max gain) of |t_p|^2 over the probe detuning axis."""
    g0 = emitter.gamma0
    span = max(4.0 * g0, 3.0 * np.hypot(pump_rabi_gamma0 * g0, pump_detuning_mhz))
    coarse = np.linspace(-span, span, 1601)
    pump_rabi = mhz_to_rad_per_ns(pump_rabi_gamma0 * g0)
    power = np.abs(_probe_amplitudes(emitter, pump_rabi, pump_detuning_mhz, coarse)) ** 2

    def refine(idx: int) -> np.ndarray:
        lo = coarse[max(idx - 1, 0)]
        hi = coarse[min(idx + 1, len(coarse) - 1)]
        fine = np.linspace(lo, hi, 101)
        return np.abs(_probe_amplitudes(emitter, pump_rabi, pump_detuning_mhz, fine)) ** 2

    t_min = min(power.min(), refine(int(power.argmin())).min())
    t_max = max(power.max(), refine(int(power.argmax())).max())
    return 1.0 - t_min, max(0.0, t_max - 1.0)


def gain_attenuation_summary(
    emitter: Emitter,
    pump_rabi_list,
    jitter: float,
    pump_detuning_mhz: float = 0.0,
    n_jitter: int = 5,
) -> PumpSweepSummary:
    """Probe attenuation and net coherent gain versus pump power.

    For each pump Rabi frequency (in linewidth units) the probe detuning is
    swept and the deepest attenuation and largest gain of ``|t_p|^2`` are
    recorded. The lo/hi envelope repeats the sweep with the emitter
    frequency offset through ``+- jitter`` (MHz, ``n_jitter`` samples)
    while pump and probe frequencies stay fixed.
    """
    if jitter < 0:
        raise ValidationError(f"jitter must be >= 0, got {jitter}")
    pumps = np.asarray(pump_rabi_list, dtype=float)
    if np.any(pumps < 0):
        raise ValidationError("pump Rabi frequencies must be nonnegative")
    offsets = np.linspace(-jitter, jitter, n_jitter) if jitter > 0 else np.zeros(1)
    if jitter > 0 and n_jitter % 2 == 0:
        offsets = np.sort(np.append(offsets, 0.0))

    att = np.empty(len(pumps))
    att_lo = np.empty(len(pumps))
    att_hi = np.empty(len(pumps))
    gain = np.empty(len(pumps))
    gain_lo = np.empty(len(pumps))
    gain_hi = np.empty(len(pumps))
    for i, w in enumerate(pumps):
        vals = np.array(
            [
                _extremes_over_probe(emitter, w, pump_detuning_mhz - off)
                for off in offsets
            ]
        )
        nominal = _extremes_over_probe(emitter, w, pump_detuning_mhz)
        att[i], gain[i] = nominal
        att_lo[i], att_hi[i] = vals[:, 0].min(), vals[:, 0].max()
        gain_lo[i], gain_hi[i] = vals[:, 1].min(), vals[:, 1].max()

    return PumpSweepSummary(
        pump_rabi_gamma0=pumps,
        attenuation=att,
        attenuation_lo=att_lo,
        attenuation_hi=att_hi,
        gain=gain,
        gain_lo=gain_lo,
        gain_hi=gain_hi,
        jitter_mhz=jitter,
    )
