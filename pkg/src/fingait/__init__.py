"""Inverse gait search for a flapping-fin propulsor.

Given a thrust target and the gait currently applied, pick the gait for the
next flapping cycle by minimizing a weighted sum of thrust error and
kinematic change, using a forward thrust model as the black box.
"""

__version__ = "0.1.0"

from .exceptions import ConfigurationError
from .forward_model import (
    DnnForwardModel,
    DnnWeights,
    ForwardModel,
    LstmForwardModel,
    LstmWeights,
    SymmetricModel,
    SyntheticSurrogate,
    dnn_forward,
    load_model,
    load_weights,
    lstm_forward,
    mean_thrust_from_history,
    random_dnn_weights,
    random_lstm_weights,
    save_weights,
)
from .kinematics import Gait, KinematicSpace, MotorLimits, TimeHistory, generate_time_history, normalize, denormalize
from .loss import LossBreakdown, LossWeights, efficiency_loss, kinematic_loss, thrust_loss, total_loss
from .search import METHODS, InverseRequest, SearchConfig, SearchResult, gps_step, hjps_step, monte_carlo_step, propose_gait
from .simulation import (
    ClosedLoopConfig,
    PidConfig,
    PlantState,
    ThrustRequestSet,
    generate_synthetic_requests,
    generate_targets,
    mirror_gait,
    pid_step,
    plant_step,
    run_closed_loop,
)

__all__ = [name for name in dir() if not name.startswith("_")]
