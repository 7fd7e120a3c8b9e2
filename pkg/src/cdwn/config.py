"""Plain ``key = value`` run configuration.

One assignment per line, ``#`` starts a comment. Keys are the
:class:`~cdwn.simulator.SimConfig` field names plus a few run-level keys;
unknown keys are rejected.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from .simulator import SWEEP_AXES, SimConfig

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


KEY_HELP = {
    "scheme": "A (multihop + Co-MIMO), B (multihop only) or none (no caches)",
    "topology": "regular, perturbed or file",
    "topology_file": "path of a topology file (topology = file)",
    "n_side": "BSs per side of the grid; N = n_side^2",
    "cell_pitch_m": "lattice pitch r_0 in metres",
    "user_offset_m": "BS-user distance d_0 of the regular grid in metres",
    "n_users": "number of users K (perturbed grid)",
    "r_min_m": "minimum BS-BS distance in metres",
    "r_max_m": "maximum point-to-BS distance in metres",
    "d_min_m": "minimum BS-user distance in metres",
    "k_max": "maximum users per cell",
    "jitter_side_m": "side of the square each BS is jittered in, metres",
    "n_backhaul": "number of BSs with wired backhaul N_0",
    "alpha": "path-loss exponent (> 2)",
    "gain_bs": "inter-BS path-gain constant G_b",
    "gain_user": "BS-user path-gain constant G_d",
    "noise_psd_w_per_hz": "noise power spectral density eta_0 in W/Hz",
    "bandwidth_hz": "system bandwidth W in Hz",
    "snr_db": "full-band SNR of a user at snr_reference_m, dB",
    "snr_reference_m": "distance the SNR refers to, metres (0: d_0 or r_0/2)",
    "power_w": "per-BS transmit power in W (> 0 overrides snr_db)",
    "n_files": "number of files L",
    "files_per_bs": "L / N kept fixed on N sweeps (0: fixed L)",
    "tau": "Zipf skewness",
    "cache_size_bits": "BS cache size B_C in bits",
    "cache_size_files": "normalised cache size B_C / F (used if cache_size_bits = 0)",
    "file_size_bits": "file size F in bits",
    "segment_size_bits": "MDS segment length L_S in bits",
    "replication": "optimal or uniform replication vector",
    "uncovered_files": "backhaul (fetch from the nearest wired BS) or error, for files needing more source BSs than exist",
    "split": "optimize or explicit band split",
    "split_inter_hz": "explicit inter-BS bandwidth W_b in Hz",
    "split_comimo_hz": "explicit Co-MIMO bandwidth W_c in Hz",
    "cluster_size": "BSs per Co-MIMO cluster square N_c",
    "reuse_radius_inter_m": "inter-BS reuse radius in metres (0: 2.5 r_0)",
    "reuse_radius_downlink_m": "downlink reuse radius in metres (0: 1.5 r_0)",
    "coloring": "auto, greedy or tiling",
    "guard_band": "exclude users near cluster edges (true/false)",
    "n_phase_draws": "Co-MIMO slots (phase and offset draws) averaged",
    "n_request_draws": "request draws averaged for loads (0: exact expectation)",
    "topology_seed": "seed of the random topology",
    "phase_seed": "seed of the channel phases and cluster offsets",
    "request_seed": "seed of the request draws",
}

RUN_KEYS = {
    "schema_version": "configuration schema version (1)",
    "sweep_axis": "sweep axis: " + ", ".join(SWEEP_AXES),
    "sweep_values": "comma list or start:stop:step of sweep values (axis units)",
    "schemes": "comma list of schemes to run",
    "output_csv": "result CSV path (default: stdout)",
}


@dataclass
class RunConfig:
    sim: SimConfig
    sweep_axis: str = ""
    sweep_values: list = field(default_factory=list)
    schemes: tuple = ()
    output_csv: str = ""
    schema_version: int = SCHEMA_VERSION


def parse_values(text: str) -> list:
    """``"1,2,3"`` or ``"start:stop:step"`` (inclusive stop) to a list of floats."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"range {text!r} must be start:stop:step")
        a, b, s = (float(p) for p in parts)
        if s <= 0:
            raise ConfigError("range step must be positive")
        n = int(round((b - a) / s))
        if n < 0:
            return []
        out = [a + i * s for i in range(n + 1)]
        return [round(v, 12) for v in out if v <= b + 1e-9 * max(1.0, abs(b))]
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad value list {text!r}") from exc


def _convert(kind: str, key: str, raw: str):
    raw = raw.strip()
    try:
        if kind == "bool":
            v = raw.lower()
            if v in ("1", "true", "yes", "on"):
                return True
            if v in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "int":
            f = float(raw)
            if f != int(f):
                raise ValueError(raw)
            return int(f)
        if kind == "float":
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot read {raw!r} as {kind}") from exc
    return raw


_FIELD_TYPES = {f.name: str(f.type) for f in fields(SimConfig)}


def apply_settings(cfg: SimConfig, settings: dict) -> SimConfig:
    """Overlay ``{key: text}`` on a config; unknown keys raise :class:`ConfigError`."""
    kw = {}
    for key, raw in settings.items():
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown configuration key {key!r}")
        kw[key] = _convert(_FIELD_TYPES[key], key, raw)
    try:
        return replace(cfg, **kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_lines(text: str) -> dict:
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise ConfigError(f"line {n}: duplicate key {key!r}")
        out[key] = val
    return out


def loads_config(text: str, base: SimConfig | None = None, overrides: dict | None = None) -> RunConfig:
    items = parse_lines(text)
    if overrides:
        items.update(overrides)
    run = {k: items.pop(k) for k in list(items) if k in RUN_KEYS}
    version = int(run.get("schema_version", SCHEMA_VERSION))
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}")
    if base is None:
        base = SimConfig()
    sim = apply_settings(base, items)
    axis = run.get("sweep_axis", "")
    if axis and axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}")
    schemes = tuple(s.strip() for s in run.get("schemes", "").split(",") if s.strip())
    for s in schemes:
        if s not in ("A", "B", "none"):
            raise ConfigError(f"unknown scheme {s!r}")
    return RunConfig(sim, axis, parse_values(run.get("sweep_values", "")), schemes,
                     run.get("output_csv", ""), version)


def load_config(path, overrides: dict | None = None) -> RunConfig:
    with open(path) as fh:
        return loads_config(fh.read(), overrides=overrides)


def dumps_config(cfg: SimConfig) -> str:
    lines = [f"schema_version = {SCHEMA_VERSION}"]
    for f in fields(SimConfig):
        v = getattr(cfg, f.name)
        lines.append(f"{f.name} = {str(v).lower() if isinstance(v, bool) else v}")
    return "\n".join(lines) + "\n"


def keys_help() -> str:
    rows = [f"  {k:<26} {v}" for k, v in KEY_HELP.items()]
    rows += [f"  {k:<26} {v}" for k, v in RUN_KEYS.items()]
    return "configuration keys:\n" + "\n".join(rows)
