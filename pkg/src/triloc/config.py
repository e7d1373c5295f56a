"""Experiment configuration: YAML schema, defaults, validation, hashing.

A config file is a single YAML mapping; every key is optional and falls
back to the reference scenario (4x4x3 m room, side 0.1 m, K = 151). The
canonical sha256 hash is computed over the fully normalized key/value set,
so two files that resolve to the same effective experiment hash equal, and
command-line overrides change the hash exactly as editing the file would.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError
from .manifold import TrianglePoint
from .objective import BeaconSet
from .signal import SignalParams
from .sim import DEFAULT_DIRECT_KAPPA, INIT_MODES, RANGING_MODES, SOLVER_IDS, Scenario

_APEX = 1.0 + 0.05 * np.sqrt(3.0)

_DEFAULTS = {
    "room": [4.0, 4.0, 3.0],
    "beacons": [
        [0.0, 0.0, 3.0],
        [4.0, 0.0, 3.0],
        [0.0, 4.0, 3.0],
        [4.0, 4.0, 0.0],
    ],
    "transmitters": [
        [2.0, 2.0, 1.0],
        [2.1, 2.0, 1.0],
        [2.05, 2.0, _APEX],
    ],
    "side_length": 0.1,
    "signal": {
        "num_symbols": 151,
        "roots": [1, 2, 3],
        "sample_period_s": 1e-6,
        "speed_of_sound_m_s": 343.0,
    },
    "snr_grid_db": [0.0, 5.0, 10.0, 15.0, 20.0],
    "trials": 200,
    "seed": 20240613,
    "ranging_mode": "direct",
    "direct_kappa": DEFAULT_DIRECT_KAPPA,
    "solvers": ["gn", "projected_gn", "riemannian_sd", "riemannian_tr"],
    "init": "improved",
    "out_dir": "results",
}

_SIGNAL_KEYS = set(_DEFAULTS["signal"])


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated experiment: scenario plus solver/init/output selection."""

    scenario: Scenario
    solvers: tuple[str, ...]
    init: str
    out_dir: str
    sha256: str
    normalized: dict


def _fail(source: str, msg: str) -> "ConfigError":
    return ConfigError(f"{source}: {msg}")


def _real_matrix(value, shape, key, source) -> list:
    arr = np.asarray(value, dtype=object)
    try:
        arr = arr.astype(float)
    except (TypeError, ValueError):
        raise _fail(source, f"key {key!r} must be a numeric array") from None
    if arr.shape != shape:
        raise _fail(source, f"key {key!r} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise _fail(source, f"key {key!r} must be finite")
    return arr.tolist()


def _real(value, key, source) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _fail(source, f"key {key!r} must be a real number, got {value!r}")
    return float(value)


def _integer(value, key, source) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise _fail(source, f"key {key!r} must be an integer, got {value!r}")
    return int(value)


def normalize(raw: dict, source: str = "<config>") -> dict:
    """Apply defaults and validate types; returns the canonical plain dict."""
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise _fail(source, "top level must be a mapping of option names to values")
    unknown = sorted(set(raw) - set(_DEFAULTS))
    if unknown:
        raise _fail(source, f"unknown option(s): {', '.join(unknown)}")

    norm = {}
    merged = {**_DEFAULTS, **raw}

    norm["room"] = [_real(v, "room", source) for v in _as_list3(merged["room"], "room", source)]
    norm["beacons"] = _real_matrix(merged["beacons"], (4, 3), "beacons", source)
    norm["transmitters"] = _real_matrix(
        merged["transmitters"], (3, 3), "transmitters", source
    )
    norm["side_length"] = _real(merged["side_length"], "side_length", source)

    sig_raw = merged["signal"]
    if not isinstance(sig_raw, dict):
        raise _fail(source, "key 'signal' must be a mapping")
    bad = sorted(set(sig_raw) - _SIGNAL_KEYS)
    if bad:
        raise _fail(source, f"unknown signal option(s): {', '.join(bad)}")
    sig = {**_DEFAULTS["signal"], **sig_raw}
    roots = sig["roots"]
    if not isinstance(roots, (list, tuple)) or len(roots) != 3:
        raise _fail(source, "signal.roots must be a list of three integers")
    norm["signal"] = {
        "num_symbols": _integer(sig["num_symbols"], "signal.num_symbols", source),
        "roots": [_integer(r, "signal.roots", source) for r in roots],
        "sample_period_s": _real(sig["sample_period_s"], "signal.sample_period_s", source),
        "speed_of_sound_m_s": _real(
            sig["speed_of_sound_m_s"], "signal.speed_of_sound_m_s", source
        ),
    }

    grid = merged["snr_grid_db"]
    if not isinstance(grid, (list, tuple)) or not grid:
        raise _fail(source, "snr_grid_db must be a non-empty list of reals")
    norm["snr_grid_db"] = [_real(v, "snr_grid_db", source) for v in grid]

    norm["trials"] = _integer(merged["trials"], "trials", source)
    norm["seed"] = _integer(merged["seed"], "seed", source)

    mode = merged["ranging_mode"]
    if mode not in RANGING_MODES:
        raise _fail(source, f"ranging_mode must be one of {RANGING_MODES}, got {mode!r}")
    norm["ranging_mode"] = mode
    norm["direct_kappa"] = _real(merged["direct_kappa"], "direct_kappa", source)

    solvers = merged["solvers"]
    if isinstance(solvers, str):
        solvers = [solvers]
    if not isinstance(solvers, (list, tuple)) or not solvers:
        raise _fail(source, "solvers must be a non-empty list of solver names")
    for sid in solvers:
        if sid not in SOLVER_IDS:
            raise _fail(
                source, f"unknown solver {sid!r}; expected one of {list(SOLVER_IDS)}"
            )
    norm["solvers"] = list(dict.fromkeys(solvers))

    init = merged["init"]
    if init not in INIT_MODES:
        raise _fail(source, f"init must be one of {INIT_MODES}, got {init!r}")
    norm["init"] = init

    out_dir = merged["out_dir"]
    if not isinstance(out_dir, str) or not out_dir:
        raise _fail(source, "out_dir must be a non-empty string")
    norm["out_dir"] = out_dir
    return norm


def _as_list3(value, key, source):
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise _fail(source, f"key {key!r} must be a list of three reals")
    return value


def config_hash(norm: dict) -> str:
    """sha256 over the canonical JSON rendering of a normalized config.

    out_dir is excluded: it names where results go, not what they are, so
    the same experiment written to two directories carries the same hash.
    """
    hashed = {k: v for k, v in norm.items() if k != "out_dir"}
    canonical = json.dumps(hashed, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def build_config(norm: dict, source: str = "<config>") -> ExperimentConfig:
    """Construct the validated ExperimentConfig from a normalized dict."""
    sig = norm["signal"]
    try:
        scenario = Scenario(
            room=tuple(norm["room"]),
            beacons=BeaconSet(np.array(norm["beacons"])),
            truth=TrianglePoint(np.array(norm["transmitters"]).T, norm["side_length"]),
            d=norm["side_length"],
            sig=SignalParams(
                K=sig["num_symbols"],
                roots=tuple(sig["roots"]),
                ts=sig["sample_period_s"],
                c=sig["speed_of_sound_m_s"],
            ),
            snr_grid_db=tuple(norm["snr_grid_db"]),
            trials=norm["trials"],
            seed=norm["seed"],
            ranging_mode=norm["ranging_mode"],
            direct_kappa=norm["direct_kappa"],
        )
    except Exception as exc:
        raise _fail(source, str(exc)) from exc
    return ExperimentConfig(
        scenario=scenario,
        solvers=tuple(norm["solvers"]),
        init=norm["init"],
        out_dir=norm["out_dir"],
        sha256=config_hash(norm),
        normalized=norm,
    )


def parse_config(text: str, source: str = "<string>", overrides: dict | None = None):
    """Parse YAML text into an ExperimentConfig; overrides replace raw keys."""
    try:
        raw = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f"{source}:{mark.line + 1}:{mark.column + 1}" if mark else source
        raise ConfigError(f"{where}: {exc.problem or 'YAML parse error'}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: YAML parse error: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise _fail(source, "top level must be a mapping of option names to values")
    if overrides:
        raw = {**raw, **{k: v for k, v in overrides.items() if v is not None}}
    return build_config(normalize(raw, source), source)


def load_config(path: str | Path, overrides: dict | None = None) -> ExperimentConfig:
    """Read and parse a config file; missing file raises ConfigError."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from exc
    return parse_config(text, source=str(path), overrides=overrides)


def default_config(overrides: dict | None = None) -> ExperimentConfig:
    """The reference experiment with optional raw-key overrides."""
    raw = dict(overrides or {})
    return build_config(normalize(raw, "<defaults>"), "<defaults>")
