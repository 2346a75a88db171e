"""Voltage tuning of emitter frequencies and inhomogeneous ensembles.

Each molecule shifts as ``f(V) = f0 + 1000 (a V + b V^2)`` with the slope
``a`` in GHz/V and ``f`` in MHz. Ensembles draw per-molecule center
frequencies and Stark slopes from seeded distributions, since nominally
identical molecules respond differently to the same electrode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Emitter, SpectralGrid, StarkCoefficients, ValidationError

__all__ = [
    "Ensemble",
    "AlignResult",
    "make_ensemble",
    "shifted_frequency",
    "excitation_map",
    "align_pair",
]


@dataclass(frozen=True)
class Ensemble:
    """A fixed collection of emitters plus the parameters that generated it."""

    emitters: tuple[Emitter, ...]
    center_spread: float  # GHz
    seed: int

    def __post_init__(self) -> None:
        if self.center_spread < 0:
            raise ValidationError(f"center_spread must be >= 0, got {self.center_spread}")


@dataclass(frozen=True)
class AlignResult:
    """Voltages (sorted) at which two emitters share one frequency.

    Empty ``voltages`` means the pair is not alignable in the searched
    range. ``always`` marks the degenerate case of identical tuning curves,
    where any voltage works.
    """

    voltages: tuple[float, ...]
    frequencies: tuple[float, ...]  # MHz, common frequency at each voltage
    always: bool = False

    @property
    def alignable(self) -> bool:
        return self.always or len(self.voltages) > 0


def make_ensemble(
    n: int,
    center_spread_ghz: float,
    seed: int,
    gamma0_mhz: float = 30.0,
    beta: float = 0.074,
    alpha: float = 0.5,
    slope_scale_ghz_per_v: float = 0.5,
) -> Ensemble:
    """Draw a seeded inhomogeneous ensemble.

    Center frequencies are normal with the given spread; slope magnitudes
    are half-normal around the typical tuning rate with random sign, and
    the quadratic response defaults to zero. The same seed reproduces the
    ensemble bit for bit.
    """
    if n < 0:
        raise ValidationError(f"ensemble size must be >= 0, got {n}")
    if center_spread_ghz < 0:
        raise ValidationError(f"center_spread must be >= 0, got {center_spread_ghz}")
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, 1e3 * center_spread_ghz, n)
    slopes = np.abs(rng.normal(0.0, slope_scale_ghz_per_v, n)) * rng.choice([-1.0, 1.0], n)
    spacing = 1.0  # um, nominal positions along the guide
    emitters = tuple(
        Emitter(
            f0=float(centers[i]),
            gamma0=gamma0_mhz,
            beta=beta,
            alpha=alpha,
            stark=StarkCoefficients(a=float(slopes[i]), b=0.0),
            position=i * spacing,
        )
        for i in range(n)
    )
    return Ensemble(emitters=emitters, center_spread=center_spread_ghz, seed=seed)


def shifted_frequency(e: Emitter, volts: float) -> float:
    """Transition frequency in MHz under a DC voltage."""
    if not np.isfinite(volts):
        raise ValidationError(f"voltage must be finite, got {volts}")
    return e.f0 + 1e3 * (e.stark.a * volts + e.stark.b * volts * volts)


def excitation_map(
    ensemble: Ensemble,
    voltages,
    grid: SpectralGrid,
    linewidth: float,
) -> np.ndarray:
    """Fluorescence intensity versus (voltage, frequency).

    Each molecule contributes a unit-height Lorentzian of the given FWHM at
    its shifted frequency; rows follow ``voltages``, columns the grid.
    """
    if linewidth <= 0:
        raise ValidationError(f"linewidth must be positive, got {linewidth}")
    voltages = np.asarray(voltages, dtype=float)
    freqs = grid.frequencies()
    out = np.zeros((len(voltages), len(freqs)))
    for e in ensemble.emitters:
        centers = e.f0 + 1e3 * (e.stark.a * voltages + e.stark.b * voltages**2)
        out += 1.0 / (1.0 + (2.0 * (freqs[None, :] - centers[:, None]) / linewidth) ** 2)
    return out


def _polish_root(c0: float, c1: float, c2: float, v: float) -> float:
    # one Newton step cleans up the quadratic-formula rounding
    f = c0 + c1 * v + c2 * v * v
    df = c1 + 2.0 * c2 * v
    if df != 0 and np.isfinite(f / df):
        v = v - f / df
    return v


def align_pair(e1: Emitter, e2: Emitter, v_range: tuple[float, float]) -> AlignResult:
    """Voltages in ``v_range`` where the two tuning curves intersect.

    Solves the (at most quadratic) difference polynomial exactly; a pair
    with no real intersection in range yields an empty, non-exceptional
    result.
    """
    v_lo, v_hi = v_range
    if not (np.isfinite(v_lo) and np.isfinite(v_hi)) or v_lo >= v_hi:
        raise ValidationError(f"invalid voltage range {v_range}")

    # difference in MHz: c0 + c1 V + c2 V^2
    c0 = e1.f0 - e2.f0
    c1 = 1e3 * (e1.stark.a - e2.stark.a)
    c2 = 1e3 * (e1.stark.b - e2.stark.b)

    if c2 == 0 and c1 == 0:
        if c0 == 0:
            return AlignResult(voltages=(), frequencies=(), always=True)
        return AlignResult(voltages=(), frequencies=())

    if c2 == 0:
        roots = [-c0 / c1]
    else:
        disc = c1 * c1 - 4.0 * c2 * c0
        if disc < 0:
            return AlignResult(voltages=(), frequencies=())
        sq = np.sqrt(disc)
        # numerically stable pair of quadratic roots
        q = -0.5 * (c1 + np.copysign(sq, c1 if c1 != 0 else 1.0))
        roots = [q / c2] if q == 0 else [q / c2, c0 / q]

    polished = sorted(
        _polish_root(c0, c1, c2, v) for v in roots if v_lo <= v <= v_hi
    )
    volts: list[float] = []
    for v in polished:
        if not (v_lo <= v <= v_hi):
            continue
        if volts and abs(v - volts[-1]) <= 1e-9 * (1.0 + abs(v)):
            continue  # double root
        volts.append(v)
    return AlignResult(
        voltages=tuple(volts),
        frequencies=tuple(shifted_frequency(e1, v) for v in volts),
    )
