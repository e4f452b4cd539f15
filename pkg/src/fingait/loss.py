"""Multi-objective gait loss: thrust accuracy, kinematic smoothness, efficiency."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kinematics import Gait, KinematicSpace


@dataclass(frozen=True)
class LossWeights:
    thrust: float = 1.0
    kinematic: float = 0.0
    efficiency: float = 0.0

    def __post_init__(self):
        values = (self.thrust, self.kinematic, self.efficiency)
        if any(not math.isfinite(w) or w < 0 for w in values):
            raise ValueError(f"loss weights must be finite and non-negative, got {values}")
        if not any(w > 0 for w in values):
            raise ValueError("at least one loss weight must be positive")

    @classmethod
    def from_thrust_weight(cls, w_t: float) -> "LossWeights":
        """Thrust weight ``w_t`` with kinematic weight ``1 - w_t``."""
        return cls(thrust=w_t, kinematic=1.0 - w_t)


@dataclass(frozen=True)
class LossBreakdown:
    thrust_loss: float
    kinematic_loss: float
    efficiency_loss: float
    total: float
    predicted_thrust: float


def thrust_loss(target: float, predicted: float) -> float:
    return abs(target - predicted)


def kinematic_loss(current: Gait, proposed: Gait, space: KinematicSpace) -> float:
    """Euclidean distance between the two gaits in step-size-normalized space."""
    delta = (proposed.as_array() - current.as_array()) / space.step_sizes
    return float(np.sqrt(np.sum(delta * delta)))


def efficiency_loss(thrust: float, velocity: float, power: float) -> float:
    """Negative propulsive efficiency, ``-(thrust * velocity / power)``."""
    if not power > 0:
        raise ValueError(f"power must be positive, got {power}")
    return -(thrust * velocity / power) + 0.0


def combine(weights: LossWeights, l_t: float, l_k: float, l_e: float) -> float:
    return weights.thrust * l_t + weights.kinematic * l_k + weights.efficiency * l_e


def total_loss(
    target: float,
    current: Gait,
    proposed: Gait,
    weights: LossWeights,
    model,
    space: KinematicSpace,
    velocity: float = 0.0,
    power: float = 1.0,
) -> LossBreakdown:
    """Weighted loss of moving from ``current`` to ``proposed``.

    Calls the forward model once, on ``proposed``.
    """
    predicted = model.predict_mean_thrust(proposed)
    l_t = thrust_loss(target, predicted)
    l_k = kinematic_loss(current, proposed, space)
    l_e = efficiency_loss(predicted, velocity, power)
    return LossBreakdown(l_t, l_k, l_e, combine(weights, l_t, l_k, l_e), predicted)
