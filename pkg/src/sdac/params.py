"""Default airframe parameters and the key-value parameter file format.

The defaults are a plausible set for a 5.5 %-scale twin-jet transport
(GTM T2 class) flying at 100 ft/s. Aerodynamic forces are linear in the
generalized velocity about a design trim, so ``tau0`` is derived from that
design point rather than listed independently.

Parameter file (YAML, matrices row-major, flat or nested)::

    mass: 1.54
    inertia: [1.08, 0, -0.11, 0, 4.39, 0, -0.11, 0, 5.18]
    rho: [0, 0, 0]
    g: 32.174
    D: [...36 values...]
    B: [...24 values...]
    tau0: [...6 values...]
    delta_min: [0, -0.5, -0.5, -0.5]
    delta_max: [1, 0.5, 0.5, 0.5]
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import yaml

from .dynamics import ModelParams, gravity_vector
from .errors import ConfigError

DESIGN_AIRSPEED = 100.0  # ft/s
DESIGN_ALPHA = 0.04  # rad
DESIGN_DELTA = np.array([0.35, 0.0, 0.0, -0.05])

_SIZES = {
    "mass": 1,
    "inertia": 9,
    "rho": 3,
    "g": 1,
    "D": 36,
    "B": 24,
    "tau0": 6,
    "delta_min": 4,
    "delta_max": 4,
}


def default_damping() -> np.ndarray:
    """Dimensional stability derivatives, ordering ``[u v w p q r]``."""
    D = np.zeros((6, 6))
    # longitudinal: X, Z, M rows on u, w, q
    D[0, 0], D[0, 2], D[0, 4] = -0.07, 0.28, 0.0
    D[2, 0], D[2, 2], D[2, 4] = -0.98, -3.5, -2.6
    D[4, 0], D[4, 2], D[4, 4] = 0.0, -0.64, -8.8
    # lateral-directional: Y, L, N rows on v, p, r
    D[1, 1], D[1, 3], D[1, 5] = -0.56, 0.0, 0.5
    D[3, 1], D[3, 3], D[3, 5] = -0.48, -8.2, 2.5
    D[5, 1], D[5, 3], D[5, 5] = 0.48, -0.8, -2.5
    return D


def default_effectiveness() -> np.ndarray:
    """Force/moment per unit effector ``[throttle, rudder, aileron, elevator]``.

    Surfaces act as moment generators (their direct side/normal force is
    neglected); with 4 effectors on 6 axes this keeps the pseudo-inverse
    allocation of the sliding-mode demand from feeding heave and sideslip
    errors into destabilizing moments.
    """
    B = np.zeros((6, 4))
    B[0, 0], B[4, 0] = 30.0, 1.0
    B[3, 1], B[5, 1] = 4.8, -33.6
    B[3, 2], B[5, 2] = 48.0, -2.0
    B[0, 3], B[4, 3] = -2.0, -77.0
    return B


def default_params() -> ModelParams:
    m, g = 1.54, 32.174
    I_M = np.array([[1.08, 0.0, -0.11], [0.0, 4.39, 0.0], [-0.11, 0.0, 5.18]])
    D = default_damping()
    B = default_effectiveness()
    v_star = DESIGN_AIRSPEED * np.array([np.cos(DESIGN_ALPHA), 0, np.sin(DESIGN_ALPHA), 0, 0, 0])
    base = ModelParams(
        m=m,
        I_M=I_M,
        rho=np.zeros(3),
        g=g,
        D=D,
        B_eff=B,
        tau0=np.zeros(6),
        delta_min=[0.0, -0.5, -0.5, -0.5],
        delta_max=[1.0, 0.5, 0.5, 0.5],
    )
    # level flight: pitch equals angle of attack
    tau0 = gravity_vector(base, np.array([0.0, DESIGN_ALPHA, 0.0])) - D @ v_star - B @ DESIGN_DELTA
    return base.replace(tau0=tau0)


def params_from_dict(d: dict) -> ModelParams:
    missing = set(_SIZES) - set(d)
    if missing:
        raise ConfigError(f"parameter file missing keys: {sorted(missing)}")
    vals = {}
    for key, size in _SIZES.items():
        arr = np.asarray(d[key], dtype=float).ravel()
        if arr.size != size:
            raise ConfigError(f"parameter '{key}' needs {size} values, got {arr.size}")
        vals[key] = arr
    return ModelParams(
        m=vals["mass"][0],
        I_M=vals["inertia"].reshape(3, 3),
        rho=vals["rho"],
        g=vals["g"][0],
        D=vals["D"].reshape(6, 6),
        B_eff=vals["B"].reshape(6, 4),
        tau0=vals["tau0"],
        delta_min=vals["delta_min"],
        delta_max=vals["delta_max"],
    )


def params_to_dict(p: ModelParams) -> dict:
    return {
        "mass": p.m,
        "inertia": p.I_M.ravel().tolist(),
        "rho": p.rho.tolist(),
        "g": p.g,
        "D": p.D.ravel().tolist(),
        "B": p.B_eff.ravel().tolist(),
        "tau0": p.tau0.tolist(),
        "delta_min": p.delta_min.tolist(),
        "delta_max": p.delta_max.tolist(),
    }


def load_params(path) -> ModelParams:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read parameter file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"parameter file {path} is not a key-value mapping")
    return params_from_dict(data)


def save_params(p: ModelParams, path) -> None:
    Path(path).write_text(yaml.safe_dump(params_to_dict(p), sort_keys=False, default_flow_style=None, width=100))
