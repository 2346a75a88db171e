"""Weak-probe transmission and reflection of emitters on a 1D guide.

A single emitter on the guide reflects a resonant weak probe with the
Lorentzian amplitude ``r(d) = -ab / (1 - 2i d / g0)`` where ``ab`` is the
coherent coupling alpha*beta, ``d`` the probe detuning from the emitter,
and ``g0`` the FWHM linewidth; transmission is ``t = 1 + r``. Emission into
free space and into red-shifted channels appears purely as loss, so
``|t|^2 + |r|^2 <= 1`` with equality only for an ideal emitter
(``alpha*beta = 1``).

Chains of emitters are composed scatterer by scatterer with inter-emitter
propagation phases. Composition tracks transmission plus both one-sided
reflections, so lossy and even fully opaque elements combine without
singular transfer-matrix inversions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Emitter, SpectralGrid, ValidationError

__all__ = [
    "GuideSegment",
    "ScatterResponse",
    "single_emitter_response",
    "cascade_response",
    "extinction_spectrum",
]

_PASSIVITY_TOL = 1e-12


@dataclass(frozen=True)
class GuideSegment:
    """Propagation section between neighboring emitters."""

    length: float  # um
    phase_per_um: float  # rad/um, frequency-independent over a narrow scan

    def __post_init__(self) -> None:
        if self.length < 0:
            raise ValidationError(f"segment length must be >= 0, got {self.length}")

    @property
    def phase(self) -> float:
        return self.length * self.phase_per_um


@dataclass(frozen=True)
class ScatterResponse:
    """Complex transmission/reflection amplitudes on a detuning grid.

    ``r`` is the reflection seen from the input (left) side. Any deficit
    ``1 - |t|^2 - |r|^2`` is power lost to unguided and red-shifted channels.
    """

    grid: SpectralGrid
    t: np.ndarray
    r: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.t, dtype=complex)
        r = np.asarray(self.r, dtype=complex)
        if t.shape != (self.grid.n_points,) or r.shape != (self.grid.n_points,):
            raise ValidationError("t and r must match the grid length")
        if np.any(np.abs(t) ** 2 + np.abs(r) ** 2 > 1.0 + _PASSIVITY_TOL):
            raise ValidationError("response violates passivity: |t|^2 + |r|^2 > 1")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "r", r)


def _reflection_amplitude(e: Emitter, detunings_mhz: np.ndarray) -> np.ndarray:
    delta = detunings_mhz - e.f0
    return -e.coherent_coupling / (1.0 - 2j * delta / e.gamma0)


def single_emitter_response(e: Emitter, grid: SpectralGrid) -> ScatterResponse:
    """Weak-probe response of one emitter.

    On resonance the transmitted power is ``(1 - alpha*beta)^2`` and the
    extinction lineshape is a Lorentzian of FWHM exactly ``gamma0``.
    """
    r = _reflection_amplitude(e, grid.frequencies())
    return ScatterResponse(grid=grid, t=1.0 + r, r=r)


def _compose(left: tuple, right: tuple, phase: float) -> tuple:
    """Star-product of two scatterers separated by a propagation phase.

    Each operand is ``(t, r_left, r_right)`` as ndarrays over the grid.
    Opaque elements (t exactly 0) shadow everything behind them, which
    keeps the two-perfect-mirror corner case finite.
    """
    t_x, rl_x, rr_x = left
    t_y, rl_y, rr_y = right
    ph1 = np.exp(1j * phase)
    ph2 = ph1 * ph1

    denom = 1.0 - rr_x * rl_y * ph2
    opaque_x = t_x == 0
    opaque_y = t_y == 0
    safe = np.where(denom == 0, 1.0, denom)

    t = t_x * t_y * ph1 / safe
    rl = rl_x + t_x * t_x * rl_y * ph2 / safe
    rr = rr_y + t_y * t_y * rr_x * ph2 / safe

    # Behind an opaque left element only its own front reflection survives;
    # the mirrored statement holds for an opaque right element.
    t = np.where(opaque_x | opaque_y, 0.0, t)
    rl = np.where(opaque_x, rl_x, rl)
    rr = np.where(opaque_y, rr_y, rr)
    return t, rl, rr


def cascade_response(
    emitters: Sequence[Emitter],
    segments: Sequence[GuideSegment],
    grid: SpectralGrid,
) -> ScatterResponse:
    """Response of an ordered chain of emitters along the guide.

    ``segments[i]`` is the guide section between ``emitters[i]`` and
    ``emitters[i + 1]``; emitter positions must be strictly increasing.
    A single emitter with no segments reduces exactly to
    :func:`single_emitter_response`.
    """
    if not emitters:
        raise ValidationError("cascade needs at least one emitter")
    if len(segments) != len(emitters) - 1:
        raise ValidationError(
            f"expected {len(emitters) - 1} segments for {len(emitters)} emitters, "
            f"got {len(segments)}"
        )
    positions = [e.position for e in emitters]
    if any(b <= a for a, b in zip(positions, positions[1:])):
        raise ValidationError("emitter positions must be strictly increasing")

    if len(emitters) == 1:
        return single_emitter_response(emitters[0], grid)

    freqs = grid.frequencies()
    r0 = _reflection_amplitude(emitters[0], freqs)
    acc = (1.0 + r0, r0, r0)
    for e, seg in zip(emitters[1:], segments):
        r = _reflection_amplitude(e, freqs)
        acc = _compose(acc, (1.0 + r, r, r), seg.phase)

    t, rl, _ = acc
    # composition of passive elements is passive; clip sub-ulp overshoot
    scale = np.sqrt(np.maximum(np.abs(t) ** 2 + np.abs(rl) ** 2, 1.0))
    return ScatterResponse(grid=grid, t=t / scale, r=rl / scale)


def extinction_spectrum(resp: ScatterResponse) -> np.ndarray:
    """Fractional transmission dip ``1 - |t|^2`` per grid point, in [0, 1]."""
    return np.clip(1.0 - np.abs(resp.t) ** 2, 0.0, 1.0)
