"""Closed-loop position control around the inverse model.

A PID controller turns position error into a thrust request, the inverse
model picks the gait for the next flapping cycle, the forward model gives
the thrust that gait produces, and a 1-D rigid body integrates it over one
cycle.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .forward_model import SymmetricModel
from .kinematics import Gait, KinematicSpace
from .loss import LossWeights
from .search import InverseRequest, SearchConfig, propose_gait

REQUEST_RANGE = (0.2, 1.2)
THRUST_LIMIT = 1.2


def mirror_gait(gait: Gait) -> Gait:
    """Sign-flip stroke amplitude, pitch amplitude and offset (negative-thrust twin)."""
    return Gait(-gait.stroke_amplitude, -gait.pitch_amplitude, gait.flap_frequency, -gait.stroke_pitch_offset)


# --------------------------------------------------------------------------
# Thrust request streams
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ThrustRequestSet:
    requests: tuple
    provenance: str
    dt_max: float | None = None


def generate_synthetic_requests(dt_max: float, seed, n: int = 100, low: float = REQUEST_RANGE[0],
                                high: float = REQUEST_RANGE[1]) -> ThrustRequestSet:
    """Random walk of thrust requests with steps uniform in [-dt_max, dt_max].

    The first request is uniform in [low, high]; steps that leave the range
    are reflected back at the boundary.
    """
    if not (0 < dt_max <= high - low):
        raise ValueError(f"dt_max must lie in (0, {high - low}], got {dt_max}")
    rng = np.random.default_rng(seed)
    values = [float(rng.uniform(low, high))]
    for step in rng.uniform(-dt_max, dt_max, n - 1):
        r = values[-1] + float(step)
        if r > high:
            r = 2 * high - r
        elif r < low:
            r = 2 * low - r
        values.append(min(max(r, low), high))
    return ThrustRequestSet(tuple(values), "synthetic", dt_max)


def generate_targets(seed, n: int = 100, low: float = 0.0, high: float = 10.0,
                     max_step: float = 2.0) -> np.ndarray:
    """Target positions in [low, high] as a reflected random walk.

    The first target is uniform over the range; later ones move by a step
    uniform in [-max_step, max_step], so most moves are short start/stop
    manoeuvres.
    """
    if not (0 < max_step <= high - low):
        raise ValueError(f"max_step must lie in (0, {high - low}]")
    rng = np.random.default_rng(seed)
    targets = [float(rng.uniform(low, high))]
    for step in rng.uniform(-max_step, max_step, n - 1):
        t = targets[-1] + float(step)
        if t > high:
            t = 2 * high - t
        elif t < low:
            t = 2 * low - t
        targets.append(min(max(t, low), high))
    return np.array(targets)


# --------------------------------------------------------------------------
# Plant and controller
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PlantState:
    position: float = 0.0
    velocity: float = 0.0
    mass: float = 10.0
    drag_coefficient: float = 8.0

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        if self.drag_coefficient < 0:
            raise ValueError("drag_coefficient must be non-negative")
        if not (math.isfinite(self.position) and math.isfinite(self.velocity)):
            raise ValueError("plant state must be finite")

    @property
    def kinetic_energy(self) -> float:
        return 0.5 * self.mass * self.velocity ** 2


def plant_step(state: PlantState, thrust: float, dt: float, substep: float = 0.01) -> PlantState:
    """Integrate ``m x'' = T - c v|v|`` for ``dt`` seconds.

    Semi-implicit Euler: drag is taken implicitly in the new velocity (with
    |v| lagged), position advances with the mean of old and new velocity.
    Exact for constant acceleration, and never adds energy when unforced.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    n = max(1, math.ceil(dt / substep - 1e-9))
    h = dt / n
    m, c = state.mass, state.drag_coefficient
    x, v = state.position, state.velocity
    for _ in range(n):
        v_new = (v + h * thrust / m) / (1.0 + h * c * abs(v) / m)
        x += 0.5 * h * (v + v_new)
        v = v_new
    return replace(state, position=x, velocity=v)


@dataclass(frozen=True)
class PidConfig:
    kp: float = 2.0
    ki: float = 0.01
    kd: float = 6.0
    output_limits: tuple = (-THRUST_LIMIT, THRUST_LIMIT)
    integral_limit: float = 5.0

    def __post_init__(self):
        if min(self.kp, self.ki, self.kd) < 0:
            raise ValueError("PID gains must be non-negative")
        lo, hi = self.output_limits
        if not lo < hi:
            raise ValueError("output_limits must be ordered")
        if self.integral_limit < 0:
            raise ValueError("integral_limit must be non-negative")


@dataclass(frozen=True)
class PidState:
    integral: float = 0.0
    previous_measurement: float | None = None


def pid_step(cfg: PidConfig, state: PidState, setpoint: float, measurement: float, dt: float):
    """One controller update; returns ``(thrust, new_state)``.

    The derivative acts on the measurement so setpoint jumps cause no kick.
    The integral is clamped to ``integral_limit`` and the output to
    ``output_limits``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    error = setpoint - measurement
    integral = min(max(state.integral + error * dt, -cfg.integral_limit), cfg.integral_limit)
    if state.previous_measurement is None:
        derivative = 0.0
    else:
        derivative = -(measurement - state.previous_measurement) / dt
    out = cfg.kp * error + cfg.ki * integral + cfg.kd * derivative
    lo, hi = cfg.output_limits
    return min(max(out, lo), hi), PidState(integral, measurement)


# --------------------------------------------------------------------------
# Closed loop
# --------------------------------------------------------------------------

TRAJECTORY_FIELDS = (
    "cycle", "target_position", "position", "thrust_request", "realized_thrust",
    "stroke_amp", "pitch_amp", "flap_freq", "offset", "L_t", "L_k", "L_total", "solver_ms",
)


@dataclass(frozen=True)
class CycleRecord:
    cycle: int
    target_position: float
    position: float
    thrust_request: float
    realized_thrust: float
    stroke_amp: float
    pitch_amp: float
    flap_freq: float
    offset: float
    L_t: float
    L_k: float
    L_total: float
    solver_ms: float
    evaluations: int = 0
    cycle_duration: float = 0.0
    start_position: float = 0.0


@dataclass
class ClosedLoopConfig:
    weights: LossWeights = field(default_factory=lambda: LossWeights.from_thrust_weight(0.95))
    search: SearchConfig = field(default_factory=SearchConfig)
    pid: PidConfig = field(default_factory=PidConfig)
    plant: PlantState = field(default_factory=PlantState)
    initial_gait: Gait = field(default_factory=lambda: Gait(0.0, 0.0, 1.0, 0.0))
    cycles_per_target: int = 15
    seed: int = 0


def run_closed_loop(targets, method: str, cfg: ClosedLoopConfig, model, space: KinematicSpace):
    """Track each target position for ``cycles_per_target`` flapping cycles.

    ``model`` is wrapped with :class:`SymmetricModel` and ``space`` extended
    with mirrored gaits so negative thrust is available. Each cycle lasts
    ``1 / flap_frequency`` of the gait chosen for it. Returns one
    :class:`CycleRecord` per cycle.
    """
    model = model if isinstance(model, SymmetricModel) else SymmetricModel(model)
    space = space.with_negative_thrust()
    plant = cfg.plant
    pid_state = PidState()
    gait = cfg.initial_gait
    dt = 1.0 / gait.flap_frequency
    records = []
    cycle = 0
    for target in targets:
        start_position = plant.position
        for _ in range(cfg.cycles_per_target):
            request, pid_state = pid_step(cfg.pid, pid_state, float(target), plant.position, dt)
            search_cfg = replace(cfg.search, rng_seed=cfg.seed * 1_000_003 + cycle)
            result = propose_gait(InverseRequest(request, gait, cfg.weights), method, search_cfg, model, space)
            gait = result.proposed_gait
            realized = result.loss.predicted_thrust
            dt = 1.0 / gait.flap_frequency
            plant = plant_step(plant, realized, dt)
            records.append(CycleRecord(
                cycle, float(target), plant.position, request, realized,
                gait.stroke_amplitude, gait.pitch_amplitude, gait.flap_frequency, gait.stroke_pitch_offset,
                result.loss.thrust_loss, result.loss.kinematic_loss, result.loss.total,
                result.wall_time * 1e3, result.evaluations, dt, start_position,
            ))
            cycle += 1
    return records


def write_trajectory_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_FIELDS)
        for r in records:
            writer.writerow([getattr(r, name) for name in TRAJECTORY_FIELDS])
