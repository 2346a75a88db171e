"""Domain types and unit conventions shared by every solver.

Conventions
-----------
* Frequencies, detunings, and FWHM linewidths at function boundaries are
  ordinary frequencies in MHz.
* Dynamics kernels work with angular rates in rad/ns; convert with
  :func:`mhz_to_rad_per_ns` and :func:`rad_per_ns_to_mhz`.
* Times are in ns, positions in um, voltages in V, Stark slopes in GHz/V.
* Rabi frequencies may be given either in units of the linewidth ("gamma0")
  or directly in MHz; the unit tag travels with the value and is resolved
  once at ingestion.

All types are immutable after construction and every function in this
module is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ValidationError",
    "StarkCoefficients",
    "Emitter",
    "SpectralGrid",
    "DriveField",
    "lifetime_to_linewidth",
    "linewidth_to_lifetime",
    "ideal_cross_section",
    "mhz_to_rad_per_ns",
    "rad_per_ns_to_mhz",
]

TWO_PI = 2.0 * math.pi


class ValidationError(ValueError):
    """Raised when a domain value violates its invariants."""


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValidationError(msg)


def mhz_to_rad_per_ns(f_mhz: float) -> float:
    """Ordinary frequency in MHz to angular rate in rad/ns."""
    return TWO_PI * 1e-3 * f_mhz


def rad_per_ns_to_mhz(omega: float) -> float:
    """Angular rate in rad/ns back to ordinary frequency in MHz."""
    return omega / (TWO_PI * 1e-3)


def lifetime_to_linewidth(t1_ns: float) -> float:
    """FWHM linewidth in MHz of a lifetime-limited transition.

    A purely radiative two-level transition with excited-state lifetime
    ``t1`` has a Lorentzian line of FWHM ``1 / (2 pi t1)`` in ordinary
    frequency. ``t1 = inf`` is accepted and gives 0.
    """
    _require(t1_ns > 0, f"lifetime must be positive, got {t1_ns}")
    if math.isinf(t1_ns):
        return 0.0
    return 1e3 / (TWO_PI * t1_ns)


def linewidth_to_lifetime(gamma0_mhz: float) -> float:
    """Inverse of :func:`lifetime_to_linewidth`; returns ns."""
    _require(gamma0_mhz > 0, f"linewidth must be positive, got {gamma0_mhz}")
    return 1e3 / (TWO_PI * gamma0_mhz)


def ideal_cross_section(wavelength: float) -> float:
    """Peak resonant scattering cross section, 3 lambda^2 / (2 pi).

    Units follow the input: a wavelength in um gives an area in um^2.
    """
    _require(wavelength > 0, f"wavelength must be positive, got {wavelength}")
    return 3.0 * wavelength**2 / TWO_PI


@dataclass(frozen=True)
class StarkCoefficients:
    """DC Stark response of one molecule: shift = a*V + b*V^2 in GHz."""

    a: float  # GHz/V
    b: float = 0.0  # GHz/V^2

    def __post_init__(self) -> None:
        _require(math.isfinite(self.a), f"stark coefficient a must be finite, got {self.a}")
        _require(math.isfinite(self.b), f"stark coefficient b must be finite, got {self.b}")


@dataclass(frozen=True)
class Emitter:
    """One molecule coupled to the guide.

    Parameters
    ----------
    f0 : float
        Transition frequency offset from the scan reference, MHz.
    gamma0 : float
        FWHM linewidth in ordinary frequency, MHz.
    beta : float
        Fraction of emitted power going into the guided mode, both
        propagation directions combined, in [0, 1].
    alpha : float
        Branching fraction of emission on the narrow zero-phonon line
        (the rest is red-shifted and counts as loss), in [0, 1].
    fwd_fraction : float
        Share of the guided emission leaving through the "right" port.
    stark : StarkCoefficients
        Voltage tuning response.
    position : float
        Location along the guide axis, um.
    """

    f0: float
    gamma0: float
    beta: float
    alpha: float = 1.0
    fwd_fraction: float = 0.5
    stark: StarkCoefficients = field(default_factory=lambda: StarkCoefficients(0.0, 0.0))
    position: float = 0.0

    def __post_init__(self) -> None:
        _require(math.isfinite(self.f0), f"f0 must be finite, got {self.f0}")
        _require(
            math.isfinite(self.gamma0) and self.gamma0 > 0,
            f"gamma0 must be positive and finite, got {self.gamma0}",
        )
        _require(0.0 <= self.beta <= 1.0, f"beta must lie in [0, 1], got {self.beta}")
        _require(0.0 <= self.alpha <= 1.0, f"alpha must lie in [0, 1], got {self.alpha}")
        _require(
            0.0 <= self.fwd_fraction <= 1.0,
            f"fwd_fraction must lie in [0, 1], got {self.fwd_fraction}",
        )
        _require(math.isfinite(self.position), f"position must be finite, got {self.position}")

    @property
    def coherent_coupling(self) -> float:
        """Lumped coherent coupling alpha*beta used by the scattering model."""
        return self.alpha * self.beta

    @property
    def gamma_rad_per_ns(self) -> float:
        """Population decay rate (angular, rad/ns) for the lifetime-limited case."""
        return mhz_to_rad_per_ns(self.gamma0)


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform, inclusive detuning axis in MHz."""

    start: float
    stop: float
    n_points: int

    def __post_init__(self) -> None:
        _require(self.n_points >= 2, f"n_points must be >= 2, got {self.n_points}")
        _require(
            math.isfinite(self.start) and math.isfinite(self.stop),
            "grid endpoints must be finite",
        )
        _require(self.start < self.stop, f"grid must be increasing, got [{self.start}, {self.stop}]")

    def frequencies(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.n_points)

    @property
    def spacing(self) -> float:
        return (self.stop - self.start) / (self.n_points - 1)


@dataclass(frozen=True)
class DriveField:
    """A near-resonant coherent drive.

    ``rabi`` is interpreted according to ``unit``: "gamma0" means multiples
    of the emitter linewidth (the usual way drive strengths are quoted),
    "mhz" means ordinary frequency. ``detuning`` is drive frequency minus
    emitter frequency in MHz.
    """

    rabi: float
    detuning: float = 0.0
    unit: str = "gamma0"

    def __post_init__(self) -> None:
        _require(self.rabi >= 0, f"rabi must be nonnegative, got {self.rabi}")
        _require(math.isfinite(self.detuning), f"detuning must be finite, got {self.detuning}")
        _require(self.unit in ("gamma0", "mhz"), f"unknown rabi unit {self.unit!r}")

    def rabi_mhz(self, gamma0_mhz: float) -> float:
        """Resolve the Rabi frequency to MHz for a given linewidth."""
        if self.unit == "mhz":
            return self.rabi
        return self.rabi * gamma0_mhz

    def rabi_rad_per_ns(self, gamma0_mhz: float) -> float:
        return mhz_to_rad_per_ns(self.rabi_mhz(gamma0_mhz))

    def detuning_rad_per_ns(self) -> float:
        return mhz_to_rad_per_ns(self.detuning)
