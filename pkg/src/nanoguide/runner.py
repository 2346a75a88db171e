"""Execute experiment configs into CSV artifacts.

Every artifact is a text CSV with a ``#``-prefixed header block carrying
the column names, units, config hash, and seed; a small manifest file is
written next to each artifact. Outputs are byte-identical for identical
config and seed: floats are rendered with ``repr`` (shortest round-trip
form) and no timestamps are embedded.
"""

from __future__ import annotations

import io
import os
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .core import ValidationError
from .dynamics import LiouvilleProblem, g2
from .inference import (
    FitResult,
    fit_g2,
    fit_lorentzian,
    fit_result_csv,
    fit_result_text,
    fit_stark_slope,
)
from .photostream import cross_correlate, simulate_stream, write_stream
from .pump_probe import (
    gain_attenuation_summary,
    normalize_probe,
    transmission_map,
)
from .scattering import (
    GuideSegment,
    cascade_response,
    extinction_spectrum,
    single_emitter_response,
)
from .stark import excitation_map, make_ensemble

__all__ = ["run_experiment", "write_csv", "thread_count"]

THREADS_ENV = "NANOGUIDE_THREADS"


def thread_count() -> int:
    """Worker count for map-style experiments, from $NANOGUIDE_THREADS."""
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValidationError(f"{THREADS_ENV} must be an integer, got {raw!r}")
    return max(1, n)


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(
    path: Path,
    columns: list[str],
    units: list[str],
    rows,
    meta: dict[str, str],
) -> None:
    """Write a deterministic CSV with a commented header block."""
    with io.open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, value in meta.items():
            fh.write(f"# {key}: {value}\n")
        fh.write(f"# columns: {', '.join(columns)}\n")
        fh.write(f"# units: {', '.join(units)}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_manifest(artifact: Path, cfg: ExperimentConfig, extra: dict[str, str] | None = None) -> Path:
    manifest = artifact.with_name(artifact.name + ".manifest.txt")
    lines = {
        "artifact": artifact.name,
        "kind": cfg.kind,
        "seed": str(cfg.seed),
        "config_sha256": cfg.sha256,
        "tool_version": __version__,
    }
    if extra:
        lines.update(extra)
    with io.open(manifest, "w", encoding="utf-8", newline="\n") as fh:
        for key, value in lines.items():
            fh.write(f"{key} = {value}\n")
    return manifest


def _meta(cfg: ExperimentConfig) -> dict[str, str]:
    return {
        "kind": cfg.kind,
        "tool_version": __version__,
        "config_sha256": cfg.sha256,
        "seed": str(cfg.seed),
    }


def run_experiment(cfg: ExperimentConfig, out_dir: Path | None = None) -> list[Path]:
    """Run one experiment, returning the artifact paths (manifests excluded)."""
    out = Path(out_dir) if out_dir is not None else Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    runner = _RUNNERS[cfg.kind]
    artifacts = runner(cfg, out)
    for artifact in artifacts:
        _write_manifest(artifact, cfg)
    return artifacts


# ---------------------------------------------------------------------------
# individual experiment kinds


def _run_linear_spectrum(cfg: ExperimentConfig, out: Path) -> list[Path]:
    resp = single_emitter_response(cfg.emitter(), cfg.grid())
    return [_write_response(cfg, out, "linear_spectrum.csv", resp)]


def _run_cascade(cfg: ExperimentConfig, out: Path) -> list[Path]:
    n = cfg.get("cascade", "n_emitters")
    emitters = [cfg.emitter(f"emitter_{i}") for i in range(1, n + 1)]
    segments = [
        GuideSegment(
            length=cfg.get(f"segment_{i}", "length_um"),
            phase_per_um=cfg.get(f"segment_{i}", "phase_per_um_rad"),
        )
        for i in range(1, n)
    ]
    resp = cascade_response(emitters, segments, cfg.grid())
    return [_write_response(cfg, out, "cascade.csv", resp)]


def _write_response(cfg: ExperimentConfig, out: Path, name: str, resp) -> Path:
    freqs = resp.grid.frequencies()
    ext = extinction_spectrum(resp)
    rows = zip(
        freqs,
        resp.t.real,
        resp.t.imag,
        resp.r.real,
        resp.r.imag,
        np.abs(resp.t) ** 2,
        np.abs(resp.r) ** 2,
        ext,
    )
    path = out / name
    write_csv(
        path,
        ["detuning_mhz", "re_t", "im_t", "re_r", "im_r", "transmission", "reflection", "extinction"],
        ["MHz", "1", "1", "1", "1", "1", "1", "1"],
        rows,
        _meta(cfg),
    )
    return path


def _run_stark_map(cfg: ExperimentConfig, out: Path) -> list[Path]:
    ens = make_ensemble(
        n=cfg.get("ensemble", "n_molecules"),
        center_spread_ghz=cfg.get("ensemble", "center_spread_ghz"),
        seed=cfg.seed,
        gamma0_mhz=cfg.get("ensemble", "gamma0_mhz"),
        beta=cfg.get("ensemble", "beta"),
        alpha=cfg.get("ensemble", "alpha"),
        slope_scale_ghz_per_v=cfg.get("ensemble", "slope_scale_ghz_per_v"),
    )
    voltages = np.linspace(
        cfg.get("stark", "v_start"),
        cfg.get("stark", "v_stop"),
        cfg.get("stark", "n_voltages"),
    )
    grid = cfg.grid()
    intensity = excitation_map(ens, voltages, grid, cfg.get("stark", "linewidth_mhz"))
    freqs = grid.frequencies()
    rows = (
        (voltages[i], freqs[j], intensity[i, j])
        for i in range(len(voltages))
        for j in range(len(freqs))
    )
    path = out / "stark_map.csv"
    write_csv(
        path,
        ["voltage_v", "frequency_mhz", "intensity"],
        ["V", "MHz", "arb"],
        rows,
        _meta(cfg),
    )
    return [path]


def _run_g2(cfg: ExperimentConfig, out: Path) -> list[Path]:
    lifetime = cfg.get("g2", "lifetime_ns")
    gamma0_mhz = 1e3 / (2.0 * np.pi * lifetime)
    problem = LiouvilleProblem.from_linewidth(
        gamma0_mhz,
        cfg.get("g2", "rabi_gamma0"),
        detuning_mhz=cfg.get("g2", "detuning_mhz"),
        gamma_phi_mhz=cfg.get("g2", "gamma_phi_mhz"),
    )
    taus = np.linspace(0.0, cfg.get("g2", "tau_max_ns"), cfg.get("g2", "n_tau"))
    values = g2(problem, taus)
    path = out / "g2.csv"
    write_csv(
        path,
        ["tau_ns", "g2"],
        ["ns", "1"],
        zip(taus, values),
        _meta(cfg),
    )
    return [path]


def _run_montecarlo(cfg: ExperimentConfig, out: Path) -> list[Path]:
    emitter = cfg.emitter()
    problem = LiouvilleProblem(
        gamma=emitter.gamma_rad_per_ns, drives=(cfg.drive("drive"),)
    )
    stream = simulate_stream(
        problem,
        emitter,
        duration=cfg.get("montecarlo", "duration_ns"),
        seed=cfg.seed,
        dead_time=cfg.get("montecarlo", "dead_time_ns"),
        dark_rate=cfg.get("montecarlo", "dark_rate_per_ns"),
    )
    stream_path = out / "photons.txt"
    write_stream(stream, stream_path)

    channel = cfg.get("montecarlo", "channel")
    channel_filter = None if channel == "all" else channel
    hist = cross_correlate(
        stream.select(port="left", channel=channel_filter),
        stream.select(port="right", channel=channel_filter),
        bin_width=cfg.get("montecarlo", "bin_width_ns"),
        max_tau=cfg.get("montecarlo", "max_tau_ns"),
        duration=stream.duration,
    )
    hist_path = out / "coincidences.csv"
    write_csv(
        hist_path,
        ["tau_ns", "counts", "g2"],
        ["ns", "1", "1"],
        zip(hist.bin_centers, hist.counts, hist.g2),
        _meta(cfg),
    )
    return [stream_path, hist_path]


def _run_pump_probe_map(cfg: ExperimentConfig, out: Path) -> list[Path]:
    emitter = cfg.emitter()
    pump_grid = cfg.grid("pump_grid")
    tmap = transmission_map(
        emitter,
        pump_rabi_gamma0=cfg.get("pump_probe", "pump_rabi_gamma0"),
        probe_rabi_gamma0=cfg.get("pump_probe", "probe_rabi_gamma0"),
        pump_detunings_mhz=pump_grid.frequencies(),
        pp_grid=cfg.grid("probe_grid"),
        pump_scatter_amp=cfg.get("pump_probe", "pump_scatter_amp"),
        threads=thread_count(),
    )
    tmap = normalize_probe(tmap)
    freqs = tmap.axis2.frequencies()
    rows = (
        (tmap.axis1[i], freqs[j], tmap.raw[i, j], tmap.coherent[i, j])
        for i in range(len(tmap.axis1))
        for j in range(len(freqs))
    )
    path = out / "pump_probe_map.csv"
    write_csv(
        path,
        ["pump_detuning_mhz", "pump_probe_detuning_mhz", "raw", "coherent"],
        ["MHz", "MHz", "1", "1"],
        rows,
        _meta(cfg),
    )
    return [path]


def _run_pump_probe_summary(cfg: ExperimentConfig, out: Path) -> list[Path]:
    emitter = cfg.emitter()
    pumps = np.geomspace(
        cfg.get("summary", "pump_rabi_min_gamma0"),
        cfg.get("summary", "pump_rabi_max_gamma0"),
        cfg.get("summary", "n_pump"),
    )
    summary = gain_attenuation_summary(
        emitter,
        pumps,
        jitter=cfg.get("summary", "jitter_gamma0") * emitter.gamma0,
        pump_detuning_mhz=cfg.get("summary", "pump_detuning_mhz"),
    )
    rows = zip(
        summary.pump_rabi_gamma0,
        summary.attenuation,
        summary.attenuation_lo,
        summary.attenuation_hi,
        summary.gain,
        summary.gain_lo,
        summary.gain_hi,
    )
    path = out / "pump_probe_summary.csv"
    write_csv(
        path,
        [
            "pump_rabi_gamma0",
            "attenuation",
            "attenuation_lo",
            "attenuation_hi",
            "gain",
            "gain_lo",
            "gain_hi",
        ],
        ["gamma0", "1", "1", "1", "1", "1", "1"],
        rows,
        _meta(cfg),
    )
    return [path]


def _read_xy_csv(path: Path) -> tuple[np.ndarray, np.ndarray]:
    xs, ys = [], []
    with io.open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) < 2:
                raise ValidationError(f"{path}: expected two comma-separated columns")
            try:
                x, y = float(parts[0]), float(parts[1])
            except ValueError:
                continue  # header row
            xs.append(x)
            ys.append(y)
    if not xs:
        raise ValidationError(f"{path}: no numeric rows found")
    return np.asarray(xs), np.asarray(ys)


def run_fit(model: str, data_path: Path, n_peaks: int = 1, degree: int = 2) -> FitResult:
    """Fit a two-column CSV with one of the supported models."""
    x, y = _read_xy_csv(data_path)
    if model == "lorentzian":
        return fit_lorentzian(x, y, n_peaks=n_peaks)
    if model == "g2":
        return fit_g2(x, y)
    if model == "stark":
        return fit_stark_slope(x, y, degree=degree)
    raise ValidationError(f"unknown fit model {model!r}; expected lorentzian, g2, or stark")


def _run_fit(cfg: ExperimentConfig, out: Path) -> list[Path]:
    result = run_fit(
        cfg.get("fit", "model"),
        Path(cfg.get("fit", "input")),
        n_peaks=cfg.get("fit", "n_peaks"),
        degree=cfg.get("fit", "degree"),
    )
    text_path = out / "fit_result.txt"
    with io.open(text_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(fit_result_text(result))
    header, row = fit_result_csv(result)
    csv_path = out / "fit_result.csv"
    with io.open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        for key, value in _meta(cfg).items():
            fh.write(f"# {key}: {value}\n")
        fh.write(header + "\n")
        fh.write(row + "\n")
    return [text_path, csv_path]


_RUNNERS = {
    "linear_spectrum": _run_linear_spectrum,
    "cascade": _run_cascade,
    "stark_map": _run_stark_map,
    "g2": _run_g2,
    "montecarlo": _run_montecarlo,
    "pump_probe_map": _run_pump_probe_map,
    "pump_probe_summary": _run_pump_probe_summary,
    "fit": _run_fit,
}
