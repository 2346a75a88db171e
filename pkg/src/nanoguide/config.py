"""Experiment configuration files: parsing, schema validation, hashing.

Configs are flat INI-style text with typed keys grouped in sections. Every
experiment kind declares exactly which sections and keys it accepts;
unknown sections or keys are rejected with the offending name so typos
fail loudly instead of silently running a default.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .core import DriveField, Emitter, SpectralGrid, StarkCoefficients

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "EXPERIMENT_KINDS"]

EXPERIMENT_KINDS = (
    "linear_spectrum",
    "cascade",
    "stark_map",
    "g2",
    "montecarlo",
    "pump_probe_map",
    "pump_probe_summary",
    "fit",
)


class ConfigError(ValueError):
    """Configuration file is malformed; the message names the offending key."""


# key -> (type, required, default); complex accepts plain floats too
_EMITTER_KEYS = {
    "f0_mhz": (float, False, 0.0),
    "gamma0_mhz": (float, True, None),
    "beta": (float, True, None),
    "alpha": (float, False, 1.0),
    "fwd_fraction": (float, False, 0.5),
    "stark_a_ghz_per_v": (float, False, 0.0),
    "stark_b_ghz_per_v2": (float, False, 0.0),
    "position_um": (float, False, 0.0),
}

_GRID_KEYS = {
    "start_mhz": (float, True, None),
    "stop_mhz": (float, True, None),
    "n_points": (int, True, None),
}

_SCHEMAS: dict[str, dict[str, dict]] = {
    "linear_spectrum": {"emitter": _EMITTER_KEYS, "grid": _GRID_KEYS},
    "cascade": {
        "cascade": {"n_emitters": (int, True, None)},
        "grid": _GRID_KEYS,
        # emitter_<i> and segment_<i> sections are validated dynamically
    },
    "stark_map": {
        "ensemble": {
            "n_molecules": (int, True, None),
            "center_spread_ghz": (float, True, None),
            "gamma0_mhz": (float, False, 30.0),
            "beta": (float, False, 0.074),
            "alpha": (float, False, 0.5),
            "slope_scale_ghz_per_v": (float, False, 0.5),
        },
        "stark": {
            "linewidth_mhz": (float, True, None),
            "v_start": (float, True, None),
            "v_stop": (float, True, None),
            "n_voltages": (int, True, None),
        },
        "grid": _GRID_KEYS,
    },
    "g2": {
        "g2": {
            "rabi_gamma0": (float, True, None),
            "lifetime_ns": (float, True, None),
            "detuning_mhz": (float, False, 0.0),
            "gamma_phi_mhz": (float, False, 0.0),
            "tau_max_ns": (float, True, None),
            "n_tau": (int, True, None),
        },
    },
    "montecarlo": {
        "emitter": _EMITTER_KEYS,
        "drive": {
            "rabi_gamma0": (float, True, None),
            "detuning_mhz": (float, False, 0.0),
        },
        "montecarlo": {
            "duration_ns": (float, True, None),
            "bin_width_ns": (float, True, None),
            "max_tau_ns": (float, True, None),
            "channel": (str, False, "all"),
            "dead_time_ns": (float, False, 0.0),
            "dark_rate_per_ns": (float, False, 0.0),
        },
    },
    "pump_probe_map": {
        "emitter": _EMITTER_KEYS,
        "pump_probe": {
            "pump_rabi_gamma0": (float, True, None),
            "probe_rabi_gamma0": (float, True, None),
            "pump_scatter_amp": (complex, False, 0.0),
        },
        "pump_grid": _GRID_KEYS,
        "probe_grid": _GRID_KEYS,
    },
    "pump_probe_summary": {
        "emitter": _EMITTER_KEYS,
        "summary": {
            "pump_rabi_min_gamma0": (float, True, None),
            "pump_rabi_max_gamma0": (float, True, None),
            "n_pump": (int, True, None),
            "jitter_gamma0": (float, False, 0.0),
            "pump_detuning_mhz": (float, False, 0.0),
        },
    },
    "fit": {
        "fit": {
            "model": (str, True, None),
            "input": (str, True, None),
            "n_peaks": (int, False, 1),
            "degree": (int, False, 2),
        },
    },
}

_EXPERIMENT_KEYS = {
    "kind": (str, True, None),
    "seed": (int, False, 0),
}

_OUTPUT_KEYS = {
    "dir": (str, True, None),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated experiment description.

    ``values`` maps ``section.key`` to a typed value; convenience builders
    construct the domain objects the runner needs. ``sha256`` is the hash
    of the raw file bytes and is stamped into every artifact.
    """

    kind: str
    seed: int
    output_dir: str
    values: dict[str, Any]
    sha256: str
    path: str

    def get(self, section: str, key: str) -> Any:
        return self.values[f"{section}.{key}"]

    def emitter(self, section: str = "emitter") -> Emitter:
        g = lambda k: self.get(section, k)
        return Emitter(
            f0=g("f0_mhz"),
            gamma0=g("gamma0_mhz"),
            beta=g("beta"),
            alpha=g("alpha"),
            fwd_fraction=g("fwd_fraction"),
            stark=StarkCoefficients(a=g("stark_a_ghz_per_v"), b=g("stark_b_ghz_per_v2")),
            position=g("position_um"),
        )

    def grid(self, section: str = "grid") -> SpectralGrid:
        return SpectralGrid(
            start=self.get(section, "start_mhz"),
            stop=self.get(section, "stop_mhz"),
            n_points=self.get(section, "n_points"),
        )

    def drive(self, section: str = "drive") -> DriveField:
        return DriveField(
            rabi=self.get(section, "rabi_gamma0"),
            detuning=self.get(section, "detuning_mhz"),
            unit="gamma0",
        )


def _parse_value(kind: type, raw: str, where: str) -> Any:
    raw = raw.strip()
    try:
        if kind is bool:
            if raw.lower() in ("true", "yes", "1"):
                return True
            if raw.lower() in ("false", "no", "0"):
                return False
            raise ValueError(raw)
        if kind is complex:
            return complex(raw)
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {kind.__name__}") from exc


def _apply_schema(
    parser: configparser.ConfigParser,
    section: str,
    keys: dict[str, tuple],
    values: dict[str, Any],
) -> None:
    present = parser.has_section(section)
    got = dict(parser.items(section)) if present else {}
    for key in got:
        if key not in keys:
            raise ConfigError(f"unknown key '{section}.{key}'")
    for key, (typ, required, default) in keys.items():
        if key in got:
            values[f"{section}.{key}"] = _parse_value(typ, got[key], f"{section}.{key}")
        elif required:
            raise ConfigError(f"missing required key '{section}.{key}'")
        else:
            values[f"{section}.{key}"] = default


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate an experiment config file."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    sha = hashlib.sha256(raw).hexdigest()

    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), strict=True)
    try:
        parser.read_string(raw.decode("utf-8"))
    except (UnicodeDecodeError, configparser.Error) as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc

    values: dict[str, Any] = {}
    _apply_schema(parser, "experiment", _EXPERIMENT_KEYS, values)
    kind = values["experiment.kind"]
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(
            f"experiment.kind: unknown kind {kind!r}; expected one of {', '.join(EXPERIMENT_KINDS)}"
        )
    _apply_schema(parser, "output", _OUTPUT_KEYS, values)

    schema = dict(_SCHEMAS[kind])
    dynamic_sections: set[str] = set()
    if kind == "cascade":
        _apply_schema(parser, "cascade", schema.pop("cascade"), values)
        dynamic_sections.add("cascade")
        n = values["cascade.n_emitters"]
        if n < 1:
            raise ConfigError("cascade.n_emitters: must be >= 1")
        for i in range(1, n + 1):
            name = f"emitter_{i}"
            if not parser.has_section(name):
                raise ConfigError(f"missing section [{name}]")
            _apply_schema(parser, name, _EMITTER_KEYS, values)
            dynamic_sections.add(name)
        for i in range(1, n):
            name = f"segment_{i}"
            if not parser.has_section(name):
                raise ConfigError(f"missing section [{name}]")
            _apply_schema(
                parser,
                name,
                {"length_um": (float, True, None), "phase_per_um_rad": (float, True, None)},
                values,
            )
            dynamic_sections.add(name)

    for section, keys in schema.items():
        _apply_schema(parser, section, keys, values)

    allowed = {"experiment", "output", *schema, *dynamic_sections}
    for section in parser.sections():
        if section not in allowed:
            raise ConfigError(f"unknown section '[{section}]' for kind {kind!r}")

    return ExperimentConfig(
        kind=kind,
        seed=values["experiment.seed"],
        output_dir=values["output.dir"],
        values=values,
        sha256=sha,
        path=str(path),
    )
