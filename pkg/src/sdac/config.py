"""
YAML scenario files.

Top-level keys (all optional, defaults in :class:`ScenarioConfig`)::

    mode: sdac | smc_only
    rng_seed: 0
    airspeed: 100.0
    dt: 0.005
    Ts: 0.02
    P_w: 2.0
    t_on: 10.0
    duration: 40.0
    params_file: airframe.yaml      # relative to the scenario file
    params: {mass: ..., inertia: [...], ...}
    uncertainty: default | none | {t_event, D_scale[36], B_scale[24]}
    reference: {kind: maneuver | trim_hold | sinusoid, segments: [...]}
    lambda: [6 values]
    gamma: [6 values]
    chi: 0.0
    eps: 0.05
    q_diag: [6 values]
    r_diag: [4 values]
    dare_tol: 1.0e-10
    dare_max_iter: 100
    sv_tol: 1.0e-8
    res_max: 1.0e-3
    rank_tol: 1.0e-9
    dither: [4 values]
    noise_v: 0.0
    noise_vdot: 0.0
    initial_offset: [12 values]
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import yaml

from .dynamics import UncertaintySpec
from .errors import ConfigError, ParameterError
from .lqr import LqrWeights
from .params import load_params, params_from_dict
from .sim import ScenarioConfig, default_damage
from .smc import SmcGains

_SCALARS = {
    "mode": str,
    "rng_seed": int,
    "airspeed": float,
    "dt": float,
    "Ts": float,
    "P_w": float,
    "t_on": float,
    "duration": float,
    "dare_tol": float,
    "dare_max_iter": int,
    "sv_tol": float,
    "res_max": float,
    "rank_tol": float,
    "noise_v": float,
    "noise_vdot": float,
}
_VECTORS = {"dither": 4, "initial_offset": 12}
_KNOWN = set(_SCALARS) | set(_VECTORS) | {
    "params",
    "params_file",
    "uncertainty",
    "reference",
    "lambda",
    "gamma",
    "chi",
    "eps",
    "q_diag",
    "r_diag",
}


def _vector(d, key, n):
    arr = np.asarray(d[key], dtype=float).ravel()
    if arr.size != n:
        raise ConfigError(f"'{key}' needs {n} values, got {arr.size}")
    return arr


def _uncertainty(spec):
    if spec is None or spec == "none":
        return UncertaintySpec()
    if spec == "default":
        return default_damage()
    if not isinstance(spec, dict):
        raise ConfigError("uncertainty must be 'default', 'none' or a mapping")
    kw = {"t_event": float(spec.get("t_event", 20.0))}
    if "D_scale" in spec:
        kw["D_scale"] = _vector(spec, "D_scale", 36).reshape(6, 6)
    if "B_scale" in spec:
        kw["B_scale"] = _vector(spec, "B_scale", 24).reshape(6, 4)
    return UncertaintySpec(**kw)


def config_from_dict(d: dict, base_dir=".") -> ScenarioConfig:
    """Build a validated :class:`ScenarioConfig` from parsed YAML."""
    if not isinstance(d, dict):
        raise ConfigError("scenario file must contain a mapping")
    unknown = set(d) - _KNOWN
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
    kw = {}
    try:
        for key, kind in _SCALARS.items():
            if key in d:
                kw[key] = kind(d[key])
        for key, n in _VECTORS.items():
            if key in d:
                kw[key] = _vector(d, key, n)
        if "params_file" in d:
            kw["params"] = load_params(Path(base_dir) / d["params_file"])
        elif "params" in d:
            kw["params"] = params_from_dict(d["params"])
        if "uncertainty" in d:
            kw["uncertainty"] = _uncertainty(d["uncertainty"])
        if "reference" in d:
            if not isinstance(d["reference"], dict):
                raise ConfigError("reference must be a mapping")
            kw["reference"] = dict(d["reference"])
        if "lambda" in d or "gamma" in d:
            if not ("lambda" in d and "gamma" in d):
                raise ConfigError("'lambda' and 'gamma' must be given together")
            kw["gains"] = SmcGains(
                _vector(d, "lambda", 6), _vector(d, "gamma", 6), float(d.get("chi", 0.0)), float(d.get("eps", 0.05))
            )
        elif "chi" in d or "eps" in d:
            raise ConfigError("'chi' and 'eps' need 'lambda' and 'gamma'")
        if "q_diag" in d or "r_diag" in d:
            if not ("q_diag" in d and "r_diag" in d):
                raise ConfigError("'q_diag' and 'r_diag' must be given together")
            kw["weights"] = LqrWeights(_vector(d, "q_diag", 6), _vector(d, "r_diag", 4))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, (ConfigError, ParameterError)):
            raise
        raise ConfigError(f"malformed scenario value: {exc}") from exc
    return ScenarioConfig(**kw).validate()


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        with open(path) as fh:
            d = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    return config_from_dict(d, path.parent)
