"""Built-in oracle cross-checks, runnable from the command line.

Each suite pits two independent routes to the same observable against each
other: the regression correlation against its closed form, the resolvent
probe response against brute-force two-tone integration, the matrix
exponential against a fixed-step integrator, and the Monte Carlo photon
stream (at reduced statistics) against the master equation. A corrupted
constant anywhere in those paths shows up as a suite failure.
"""

from __future__ import annotations

import sys
from typing import Callable, TextIO

import numpy as np

from . import dynamics, photostream, pump_probe
from .core import DriveField, Emitter, SpectralGrid, linewidth_to_lifetime

__all__ = ["run_selftest"]

_GAMMA0 = 30.0  # MHz reference linewidth for the suites


def _suite_g2_analytic() -> tuple[bool, str]:
    p = dynamics.LiouvilleProblem.from_linewidth(_GAMMA0, 0.9)
    taus = np.linspace(0.0, 120.0, 481)
    reg = dynamics.g2(p, taus)
    ana = dynamics.resonant_g2(taus, 0.9, linewidth_to_lifetime(_GAMMA0))
    err = float(np.max(np.abs(reg - ana)))
    return err < 1e-6, f"max |regression - analytic| = {err:.2e}"


def _suite_two_tone() -> tuple[bool, str]:
    emitter = Emitter(f0=0.0, gamma0=_GAMMA0, beta=0.074, alpha=0.5)
    grid = SpectralGrid(-150.0, 150.0, 11)
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(3):
        w = rng.uniform(0.3, 2.5)
        dpm = rng.uniform(-2.0, 2.0) * _GAMMA0
        dpp = float(rng.choice([-1, 1])) * rng.uniform(0.3, 4.0) * _GAMMA0
        scan = pump_probe.PumpProbeScan(
            pump=DriveField(rabi=w, detuning=dpm),
            probe_rabi=0.005,
            pp_grid=grid,
            emitter=emitter,
        )
        resolvent = pump_probe.probe_response(scan, dpp)[0]
        brute = pump_probe.two_tone_probe_response(scan, dpp)
        worst = max(worst, abs(resolvent - brute) / abs(resolvent))
    return worst < 1e-4, f"max relative mismatch = {worst:.2e}"


def _suite_propagators() -> tuple[bool, str]:
    p = dynamics.LiouvilleProblem.from_linewidth(_GAMMA0, 1.3, detuning_mhz=12.0)
    L = dynamics.build_liouvillian(p)
    times = np.linspace(0.0, 40.0, 9)
    rho0 = dynamics.DensityMatrix.ground()
    via_expm = dynamics.evolve(L, rho0, times, method="expm")
    via_rk4 = dynamics.evolve(L, rho0, times, method="rk4")
    err = max(
        float(np.max(np.abs(a.matrix - b.matrix))) for a, b in zip(via_expm, via_rk4)
    )
    return err < 1e-8, f"max |expm - rk4| = {err:.2e}"


def _suite_montecarlo() -> tuple[bool, str]:
    emitter = Emitter(f0=0.0, gamma0=_GAMMA0, beta=1.0, alpha=0.5, fwd_fraction=0.57)
    p = dynamics.LiouvilleProblem.from_linewidth(_GAMMA0, 0.9)
    stream = photostream.simulate_stream(p, emitter, duration=6.0e5, seed=99)
    hist = photostream.cross_correlate(
        stream.select(port="left"),
        stream.select(port="right"),
        bin_width=2.0,
        max_tau=80.0,
        duration=stream.duration,
    )
    centers = hist.bin_centers
    pos = centers > 0
    theory = dynamics.g2(p, np.abs(centers[pos]))
    expected = hist.n_left * hist.n_right * 2.0 / stream.duration
    sigma = np.sqrt(np.maximum(expected * theory, 1.0)) / expected
    within = np.abs(hist.g2[pos] - theory) <= 4.0 * sigma
    frac = float(np.mean(within))
    return frac >= 0.90, f"{frac:.0%} of bins within 4 sigma at {len(stream)} photons"


_SUITES: dict[str, Callable[[], tuple[bool, str]]] = {
    "g2_regression_vs_analytic": _suite_g2_analytic,
    "resolvent_vs_two_tone": _suite_two_tone,
    "expm_vs_rk4": _suite_propagators,
    "montecarlo_vs_master_equation": _suite_montecarlo,
}


def run_selftest(stream: TextIO | None = None) -> bool:
    """Run every suite, print one line each, return overall success."""
    stream = sys.stdout if stream is None else stream
    all_ok = True
    for name, suite in _SUITES.items():
        try:
            ok, detail = suite()
        except Exception as exc:  # a crashed suite is a failed suite
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        all_ok &= ok
        stream.write(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}\n")
    stream.write("selftest: " + ("all suites passed\n" if all_ok else "FAILURES detected\n"))
    return all_ok
