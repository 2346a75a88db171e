"""Figure rendering for experiment artifacts.

Each renderer reads a CSV artifact produced by the runner and writes a PNG
next to it, so figures always reflect the shipped data. CSV remains the
contract; figures are a convenience layer for eyeballing runs.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_artifact"]


def _load_csv(path: Path) -> tuple[list[str], np.ndarray]:
    columns: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                continue
            columns = [c.strip() for c in line.strip().split(",")]
            break
    data = np.genfromtxt(path, delimiter=",", comments="#", skip_header=0, names=None)
    # genfromtxt keeps the header row as NaNs; drop non-numeric rows
    data = np.atleast_2d(data)
    data = data[~np.isnan(data).all(axis=1)]
    return columns, data


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _plot_spectrum(csv_path: Path) -> Path:
    cols, data = _load_csv(csv_path)
    f = data[:, cols.index("detuning_mhz")]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
    ax1.plot(f, data[:, cols.index("transmission")], color="tab:green")
    ax1.set_ylabel("transmission")
    ax2.plot(f, 100 * data[:, cols.index("extinction")], color="tab:red")
    ax2.set_ylabel("extinction (%)")
    ax2.set_xlabel("detuning (MHz)")
    for ax in (ax1, ax2):
        ax.grid(alpha=0.3)
    return _save(fig, csv_path.with_suffix(".png"))


def _plot_stark_map(csv_path: Path) -> Path:
    cols, data = _load_csv(csv_path)
    v = np.unique(data[:, cols.index("voltage_v")])
    f = np.unique(data[:, cols.index("frequency_mhz")])
    z = data[:, cols.index("intensity")].reshape(len(v), len(f))
    fig, ax = plt.subplots(figsize=(6, 4.5))
    if len(v) > 1:
        mesh = ax.pcolormesh(f / 1e3, v, z, shading="auto", cmap="inferno")
        fig.colorbar(mesh, ax=ax, label="fluorescence (arb)")
        ax.set_ylabel("voltage (V)")
    else:
        ax.plot(f / 1e3, z[0])
        ax.set_ylabel("fluorescence (arb)")
    ax.set_xlabel("frequency (GHz)")
    return _save(fig, csv_path.with_suffix(".png"))


def _plot_g2(csv_path: Path) -> Path:
    cols, data = _load_csv(csv_path)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(data[:, cols.index("tau_ns")], data[:, cols.index("g2")], color="tab:blue")
    ax.axhline(1.0, color="gray", lw=0.8, ls="--")
    ax.set_xlabel("delay (ns)")
    ax.set_ylabel("g2")
    ax.grid(alpha=0.3)
    return _save(fig, csv_path.with_suffix(".png"))


def _plot_coincidences(csv_path: Path) -> Path:
    cols, data = _load_csv(csv_path)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.step(
        data[:, cols.index("tau_ns")],
        data[:, cols.index("g2")],
        where="mid",
        color="tab:purple",
    )
    ax.axhline(1.0, color="gray", lw=0.8, ls="--")
    ax.set_xlabel("delay (ns)")
    ax.set_ylabel("normalized coincidences")
    ax.grid(alpha=0.3)
    return _save(fig, csv_path.with_suffix(".png"))


def _plot_pump_probe_map(csv_path: Path) -> Path:
    cols, data = _load_csv(csv_path)
    pm = np.unique(data[:, cols.index("pump_detuning_mhz")])
    pp = np.unique(data[:, cols.index("pump_probe_detuning_mhz")])
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    for ax, name in zip(axes, ("raw", "coherent")):
        z = data[:, cols.index(name)].reshape(len(pm), len(pp))
        if len(pm) > 1:
            mesh = ax.pcolormesh(pp, pm, z, shading="auto", cmap="RdBu_r")
            fig.colorbar(mesh, ax=ax, label=name)
            ax.set_ylabel("pump detuning (MHz)")
        else:
            ax.plot(pp, z[0])
            ax.set_ylabel(name)
        ax.set_xlabel("pump-probe detuning (MHz)")
        ax.set_title(name)
    return _save(fig, csv_path.with_suffix(".png"))


def _plot_summary(csv_path: Path) -> Path:
    cols, data = _load_csv(csv_path)
    w = data[:, cols.index("pump_rabi_gamma0")]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.fill_between(
        w,
        100 * data[:, cols.index("attenuation_lo")],
        100 * data[:, cols.index("attenuation_hi")],
        alpha=0.25,
        color="black",
    )
    ax.semilogx(w, 100 * data[:, cols.index("attenuation")], "k-", label="attenuation")
    ax.fill_between(
        w,
        100 * data[:, cols.index("gain_lo")],
        100 * data[:, cols.index("gain_hi")],
        alpha=0.25,
        color="red",
    )
    ax.semilogx(w, 100 * data[:, cols.index("gain")], "r-", label="coherent gain")
    ax.set_xlabel("pump Rabi frequency (linewidths)")
    ax.set_ylabel("signal (%)")
    ax.legend()
    ax.grid(alpha=0.3, which="both")
    return _save(fig, csv_path.with_suffix(".png"))


_RENDERERS = {
    "linear_spectrum.csv": _plot_spectrum,
    "cascade.csv": _plot_spectrum,
    "stark_map.csv": _plot_stark_map,
    "g2.csv": _plot_g2,
    "coincidences.csv": _plot_coincidences,
    "pump_probe_map.csv": _plot_pump_probe_map,
    "pump_probe_summary.csv": _plot_summary,
}


def render_artifact(csv_path: Path) -> Path | None:
    """Render the figure for a known artifact; returns None for others."""
    renderer = _RENDERERS.get(Path(csv_path).name)
    if renderer is None:
        return None
    return renderer(Path(csv_path))
