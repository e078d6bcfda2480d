"""Sequential data-assisted control workbench."""

__version__ = "0.1.0"

from .dynamics import (
    ModelParams,
    PolynomialForce,
    Trim,
    UncertaintySpec,
    body_derivative,
    coriolis,
    euler_transform,
    external_force,
    find_trim,
    linearize_momentum,
    mass_inertia,
)
from .errors import (
    ConfigError,
    IdentificationError,
    IntegrationError,
    ParameterError,
    RiccatiError,
    SdacError,
    SingularityError,
    TrimError,
)
from .identification import LinearMomentumModel, SnapshotBuffer, SnapshotWindow, identify_dmdc, pseudo_observe_momentum
from .lqr import LqrGain, LqrWeights, lqr_control, solve_dare
from .analysis import controllability, maneuverable, stabilizability
from .params import default_params, load_params
from .smc import SmcGains, reference_momentum, smc_force
from .sim import ScenarioConfig, SimLog, metrics, rk4_step, run_scenario
