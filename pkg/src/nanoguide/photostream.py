"""Monte Carlo photon emission streams and coincidence histograms.

Photon records are produced by a quantum-jump unraveling of the driven
two-level emitter. Between photons the conditional state evolves under the
no-emission generator ``L_nc = L - J`` (the Liouvillian minus the photon
recycling term); every detection projects the emitter to the ground state,
so emission is a renewal process and waiting times can be drawn exactly
from the no-emission survival law ``S(t) = Tr[exp(L_nc t) |g><g|]``.
This reproduces master-equation photon statistics without time stepping.

Each photon is then routed: guided with probability ``beta`` (right port
with probability ``fwd_fraction``, else left), otherwise free space; and
labeled zpl with probability ``alpha``, else red_shifted. Routing is
independent of the jump dynamics, which is exact for static branching
ratios.

Streams export and import as UTF-8 text lines ``time_ns<TAB>port<TAB>channel``
sorted by time.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .core import Emitter, ValidationError
from .dynamics import (
    DensityMatrix,
    LiouvilleProblem,
    build_liouvillian,
    emission_superoperator,
    vec,
)

__all__ = [
    "PORTS",
    "CHANNELS",
    "PhotonRecord",
    "PhotonStream",
    "CoincidenceHistogram",
    "simulate_stream",
    "cross_correlate",
    "apply_timing_jitter",
    "write_stream",
    "read_stream",
]

PORTS = ("left", "right", "free_space")
CHANNELS = ("zpl", "red_shifted")

_SURVIVAL_FLOOR = 1e-13
_GRID_POINTS = 200_000


@dataclass(frozen=True)
class PhotonRecord:
    """One time-tagged detection event."""

    time: float  # ns
    port: str
    channel: str

    def __post_init__(self) -> None:
        if self.port not in PORTS:
            raise ValidationError(f"unknown port {self.port!r}")
        if self.channel not in CHANNELS:
            raise ValidationError(f"unknown channel {self.channel!r}")


@dataclass(frozen=True)
class PhotonStream:
    """Column store of photon records, sorted by time."""

    times: np.ndarray  # ns, nondecreasing
    ports: np.ndarray  # int8 index into PORTS
    channels: np.ndarray  # int8 index into CHANNELS
    duration: float  # ns observation window

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        if np.any(np.diff(t) < 0):
            raise ValidationError("stream times must be nondecreasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "ports", np.asarray(self.ports, dtype=np.int8))
        object.__setattr__(self, "channels", np.asarray(self.channels, dtype=np.int8))

    def __len__(self) -> int:
        return len(self.times)

    def records(self) -> Iterator[PhotonRecord]:
        for t, p, c in zip(self.times, self.ports, self.channels):
            yield PhotonRecord(float(t), PORTS[p], CHANNELS[c])

    def select(self, port: str | None = None, channel: str | None = None) -> np.ndarray:
        """Times of the records matching the given port/channel filters."""
        mask = np.ones(len(self.times), dtype=bool)
        if port is not None:
            mask &= self.ports == PORTS.index(port)
        if channel is not None:
            mask &= self.channels == CHANNELS.index(channel)
        return self.times[mask]


@dataclass(frozen=True)
class CoincidenceHistogram:
    """Start-stop coincidence counts over signed delays."""

    bin_edges: np.ndarray  # ns
    counts: np.ndarray
    normalization: str  # "rate" or "none"
    g2: np.ndarray  # counts normalized by the uncorrelated expectation
    n_left: int
    n_right: int
    empty: bool = False

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])


class _WaitingTimeSampler:
    """Inverse-CDF sampler for the no-emission survival law of one state."""

    def __init__(self, L_nc: np.ndarray, rho0_vec: np.ndarray, horizon: float):
        lam, V = np.linalg.eig(L_nc)
        coef = (V[0] + V[3]) * np.linalg.solve(V, rho0_vec)  # trace functional per mode

        def survival(t: np.ndarray) -> np.ndarray:
            return np.real(np.exp(np.multiply.outer(t, lam)) @ coef)

        t_max = min(1.0, horizon)
        while survival(np.array([t_max]))[0] > _SURVIVAL_FLOOR and t_max < horizon:
            t_max = min(2.0 * t_max, horizon)

        # Dense head segment resolves the coherent dynamics; a coarser tail
        # covers the smooth (near-exponential) stretch out to t_max.
        t_fast = 1.0 / max(np.linalg.norm(L_nc, 2), 1e-12)
        t_head = min(t_max, 2000.0 * t_fast)
        head = np.linspace(0.0, t_head, 3 * _GRID_POINTS // 4)
        if t_head < t_max:
            tail = np.linspace(t_head, t_max, _GRID_POINTS // 4)[1:]
            grid = np.concatenate([head, tail])
        else:
            grid = head
        s = np.clip(survival(grid), 0.0, 1.0)
        s = np.minimum.accumulate(s)  # enforce monotonicity against roundoff
        self._grid = grid
        self._s = s
        self._s_floor = s[-1]

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw n waiting times; +inf marks 'no emission within the horizon'."""
        u = rng.random(n)
        w = np.interp(u, self._s[::-1], self._grid[::-1])
        return np.where(u < self._s_floor, np.inf, w)


def simulate_stream(
    p: LiouvilleProblem,
    e: Emitter,
    duration: float,
    seed: int,
    initial: str = "ground",
    dead_time: float = 0.0,
    dark_rate: float = 0.0,
) -> PhotonStream:
    """Generate a photon stream of the driven emitter over ``duration`` ns.

    ``initial`` selects the emitter state at t = 0 ("ground" or "excited").
    ``dead_time`` (ns) drops events arriving within that window after an
    accepted event on the same port; ``dark_rate`` (events/ns, per grating
    port) adds uncorrelated background labeled red_shifted. Both default
    to zero. Fixed seeds give bit-identical streams.
    """
    if duration <= 0:
        raise ValidationError(f"duration must be positive, got {duration}")
    if initial not in ("ground", "excited"):
        raise ValidationError(f"unknown initial state {initial!r}")
    if dead_time < 0 or dark_rate < 0:
        raise ValidationError("dead_time and dark_rate must be nonnegative")

    L = build_liouvillian(p)
    L_nc = L - emission_superoperator(p.gamma)
    seq = np.random.SeedSequence(seed)
    rng_times, rng_route, rng_extra = (np.random.default_rng(s) for s in seq.spawn(3))

    ground_vec = vec(DensityMatrix.ground().matrix)
    sampler = _WaitingTimeSampler(L_nc, ground_vec, horizon=1.05 * duration)
    if initial == "excited":
        first_sampler = _WaitingTimeSampler(
            L_nc, vec(DensityMatrix.excited().matrix), horizon=1.05 * duration
        )
    else:
        first_sampler = sampler

    times: list[np.ndarray] = []
    t_now = 0.0
    first = True
    mean_wait = max(np.trapezoid(sampler._s, sampler._grid), 1e-9)
    chunk = int(np.clip(duration / mean_wait * 1.2 + 64, 64, 2_000_000))
    while t_now < duration:
        src = first_sampler if first else sampler
        w = src.sample(1 if first else chunk, rng_times)
        first = False
        if np.any(np.isinf(w)):
            stop = int(np.argmax(np.isinf(w)))
            w = w[:stop]
            if stop == 0:
                t_now = duration
                break
            t = t_now + np.cumsum(w)
            times.append(t)
            t_now = duration  # an infinite wait ends the stream
            break
        t = t_now + np.cumsum(w)
        times.append(t)
        t_now = t[-1]

    emission = np.concatenate(times) if times else np.empty(0)
    emission = emission[emission <= duration]
    n = len(emission)

    guided = rng_route.random(n) < e.beta
    to_right = rng_route.random(n) < e.fwd_fraction
    on_zpl = rng_route.random(n) < e.alpha
    ports = np.where(guided, np.where(to_right, 1, 0), 2).astype(np.int8)
    channels = np.where(on_zpl, 0, 1).astype(np.int8)

    if dark_rate > 0:
        for port_idx in (0, 1):
            n_dark = rng_extra.poisson(dark_rate * duration)
            t_dark = np.sort(rng_extra.random(n_dark) * duration)
            emission = np.concatenate([emission, t_dark])
            ports = np.concatenate([ports, np.full(n_dark, port_idx, dtype=np.int8)])
            channels = np.concatenate([channels, np.full(n_dark, 1, dtype=np.int8)])
        order = np.argsort(emission, kind="stable")
        emission, ports, channels = emission[order], ports[order], channels[order]

    if dead_time > 0 and len(emission):
        keep = np.ones(len(emission), dtype=bool)
        last_accept = {0: -np.inf, 1: -np.inf, 2: -np.inf}
        for i, (t, port_idx) in enumerate(zip(emission, ports)):
            if t - last_accept[int(port_idx)] < dead_time:
                keep[i] = False
            else:
                last_accept[int(port_idx)] = t
        emission, ports, channels = emission[keep], ports[keep], channels[keep]

    return PhotonStream(times=emission, ports=ports, channels=channels, duration=duration)


def cross_correlate(
    left: Sequence[float],
    right: Sequence[float],
    bin_width: float,
    max_tau: float,
    duration: float | None = None,
) -> CoincidenceHistogram:
    """Histogram of signed delays ``t_right - t_left`` within ``|tau| <= max_tau``.

    All pairs inside the window are counted, not just nearest neighbors,
    so after rate normalization the far wings sit at 1 and the histogram
    estimates g2. ``duration`` defaults to the observed time span; pass
    the true acquisition window when it is known.
    """
    if bin_width <= 0 or max_tau <= 0:
        raise ValidationError("bin_width and max_tau must be positive")
    tl = np.sort(np.asarray(left, dtype=float))
    tr = np.sort(np.asarray(right, dtype=float))
    n_bins = int(np.ceil(max_tau / bin_width))
    edges = bin_width * np.arange(-n_bins, n_bins + 1)

    if len(tl) == 0 or len(tr) == 0:
        zeros = np.zeros(len(edges) - 1)
        return CoincidenceHistogram(
            bin_edges=edges, counts=zeros, normalization="rate",
            g2=zeros, n_left=len(tl), n_right=len(tr), empty=True,
        )

    lo = np.searchsorted(tr, tl - max_tau, side="left")
    hi = np.searchsorted(tr, tl + max_tau, side="right")
    pair_count = hi - lo
    flat = np.repeat(lo, pair_count) + _ragged_arange(pair_count)
    deltas = tr[flat] - np.repeat(tl, pair_count)
    counts, _ = np.histogram(deltas, edges)

    if duration is None:
        duration = max(tl[-1], tr[-1]) - min(tl[0], tr[0])
    expected = len(tl) * len(tr) * bin_width / duration if duration > 0 else np.inf
    g2_est = counts / expected
    return CoincidenceHistogram(
        bin_edges=edges, counts=counts.astype(float), normalization="rate",
        g2=g2_est, n_left=len(tl), n_right=len(tr),
    )


def _ragged_arange(counts: np.ndarray) -> np.ndarray:
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=int)
    out = np.ones(total, dtype=int)
    out[0] = 0
    starts = np.cumsum(counts)[:-1]
    nonzero = counts[:-1] > 0
    out[starts[nonzero]] -= counts[:-1][nonzero]
    return np.cumsum(out)


def apply_timing_jitter(stream: PhotonStream, sigma: float, seed: int) -> PhotonStream:
    """Convolve detection times with Gaussian timing jitter of width sigma (ns)."""
    if sigma < 0:
        raise ValidationError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0 or len(stream) == 0:
        return stream
    rng = np.random.default_rng(seed)
    t = stream.times + rng.normal(0.0, sigma, len(stream))
    order = np.argsort(t, kind="stable")
    return PhotonStream(
        times=t[order], ports=stream.ports[order], channels=stream.channels[order],
        duration=stream.duration,
    )


def write_stream(stream: PhotonStream, path: str | Path) -> None:
    """Write ``time_ns<TAB>port<TAB>channel`` lines, UTF-8, sorted by time."""
    with io.open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t, p, c in zip(stream.times, stream.ports, stream.channels):
            fh.write(f"{float(t)!r}\t{PORTS[p]}\t{CHANNELS[c]}\n")


def read_stream(path: str | Path, duration: float | None = None) -> PhotonStream:
    """Read a stream written by :func:`write_stream`."""
    times, ports, channels = [], [], []
    with io.open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValidationError(f"{path}:{lineno}: expected 3 tab-separated fields")
            t_str, port, channel = parts
            if port not in PORTS:
                raise ValidationError(f"{path}:{lineno}: unknown port {port!r}")
            if channel not in CHANNELS:
                raise ValidationError(f"{path}:{lineno}: unknown channel {channel!r}")
            times.append(float(t_str))
            ports.append(PORTS.index(port))
            channels.append(CHANNELS.index(channel))
    t = np.asarray(times)
    if duration is None:
        duration = float(t[-1]) if len(t) else 0.0
    return PhotonStream(
        times=t,
        ports=np.asarray(ports, dtype=np.int8),
        channels=np.asarray(channels, dtype=np.int8),
        duration=duration,
    )
