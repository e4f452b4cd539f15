"""Gait parameter space, normalization, attainability and motor time histories."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .exceptions import ConfigurationError

N_KINEMATICS = 4
KINEMATIC_NAMES = ("stroke_amplitude", "pitch_amplitude", "flap_frequency", "stroke_pitch_offset")

# Motor limits of the experimental rig; amplitudes beyond these lines are not realized.
STROKE_LIMIT_INTERCEPT, STROKE_LIMIT_SLOPE = 97.0, 30.0
PITCH_LIMIT_INTERCEPT, PITCH_LIMIT_SLOPE = 75.0, 26.0

SETPOINTS_PER_CYCLE = 16
DEFAULT_SAMPLES_PER_CYCLE = 50


@dataclass(frozen=True)
class Gait:
    """Static fin kinematics applied for one flapping cycle.

    Amplitudes are in degrees, frequency in hertz and the stroke-pitch
    offset is a fraction of one cycle.
    """

    stroke_amplitude: float
    pitch_amplitude: float
    flap_frequency: float
    stroke_pitch_offset: float

    def __post_init__(self):
        for name in KINEMATIC_NAMES:
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.stroke_amplitude, self.pitch_amplitude, self.flap_frequency, self.stroke_pitch_offset]
        )

    @classmethod
    def from_array(cls, values) -> "Gait":
        values = np.asarray(values, dtype=float).ravel()
        if values.shape != (N_KINEMATICS,):
            raise ValueError(f"expected {N_KINEMATICS} kinematics, got shape {values.shape}")
        return cls(*(float(v) for v in values))


@dataclass(frozen=True)
class MotorLimits:
    max_velocity: float = 400.0  # deg/s
    max_acceleration: float = 4000.0  # deg/s^2

    def __post_init__(self):
        if not (self.max_velocity > 0 and self.max_acceleration > 0):
            raise ConfigurationError("motor limits must be positive")


def _vector(values, name) -> np.ndarray:
    arr = np.array(values, dtype=float).ravel()
    if arr.shape != (N_KINEMATICS,):
        raise ConfigurationError(f"{name} needs {N_KINEMATICS} entries, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class KinematicSpace:
    """Box bounds, equivalent step sizes and attainability limits.

    The equivalent step sizes define the normalized space: one step of
    ``step_sizes[i]`` in kinematic ``i`` is a unit distance.

    With ``mirrored=True`` the space also holds the sign-flipped gaits that
    produce negative thrust; attainability is then checked on absolute
    amplitudes.
    """

    lower_bounds: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.75, -0.0625]))
    upper_bounds: np.ndarray = field(default_factory=lambda: np.array([55.0, 55.0, 2.0, 0.125]))
    step_sizes: np.ndarray = field(default_factory=lambda: np.array([10.0, 10.0, 0.25, 0.0625]))
    mirrored: bool = False

    def __post_init__(self):
        lower = _vector(self.lower_bounds, "lower_bounds")
        upper = _vector(self.upper_bounds, "upper_bounds")
        steps = _vector(self.step_sizes, "step_sizes")
        if np.any(lower > upper):
            raise ConfigurationError("lower_bounds must not exceed upper_bounds")
        if np.any(steps <= 0):
            raise ConfigurationError("step_sizes must be strictly positive")
        object.__setattr__(self, "lower_bounds", lower)
        object.__setattr__(self, "upper_bounds", upper)
        object.__setattr__(self, "step_sizes", steps)

    @property
    def n_kinematics(self) -> int:
        return N_KINEMATICS

    def with_negative_thrust(self) -> "KinematicSpace":
        """Extend the bounds by the mirror image of amplitudes and offset."""
        if self.mirrored:
            return self
        flip = np.array([-1.0, -1.0, 1.0, -1.0])
        lower = np.minimum(self.lower_bounds, flip * self.upper_bounds)
        upper = np.maximum(self.upper_bounds, flip * self.lower_bounds)
        lower[2], upper[2] = self.lower_bounds[2], self.upper_bounds[2]
        return KinematicSpace(lower, upper, self.step_sizes, mirrored=True)

    def normalize(self, gaits) -> np.ndarray:
        return np.asarray(gaits, dtype=float) / self.step_sizes

    def denormalize(self, points) -> np.ndarray:
        return np.asarray(points, dtype=float) * self.step_sizes

    def in_bounds(self, gaits) -> np.ndarray:
        g = np.asarray(gaits, dtype=float)
        return np.all((g >= self.lower_bounds) & (g <= self.upper_bounds), axis=-1)

    def attainable(self, gaits) -> np.ndarray:
        g = np.asarray(gaits, dtype=float)
        stroke, pitch, freq = g[..., 0], g[..., 1], g[..., 2]
        if self.mirrored:
            stroke, pitch = np.abs(stroke), np.abs(pitch)
        return attainable_mask(stroke, pitch, freq)

    def feasible(self, gaits) -> np.ndarray:
        g = np.asarray(gaits, dtype=float)
        return self.in_bounds(g) & self.attainable(g) & np.all(np.isfinite(g), axis=-1)

    def __repr__(self):
        return (
            f"KinematicSpace(lower_bounds={self.lower_bounds.tolist()}, "
            f"upper_bounds={self.upper_bounds.tolist()}, step_sizes={self.step_sizes.tolist()}, "
            f"mirrored={self.mirrored})"
        )


def attainable_mask(stroke, pitch, freq) -> np.ndarray:
    stroke, pitch, freq = np.asarray(stroke), np.asarray(pitch), np.asarray(freq)
    return (stroke <= STROKE_LIMIT_INTERCEPT - STROKE_LIMIT_SLOPE * freq) & (
        pitch <= PITCH_LIMIT_INTERCEPT - PITCH_LIMIT_SLOPE * freq
    )


def normalize(gait: Gait, space: KinematicSpace) -> np.ndarray:
    """Scale each kinematic by its equivalent step size."""
    return space.normalize(gait.as_array())


def denormalize(point, space: KinematicSpace) -> Gait:
    return Gait.from_array(space.denormalize(point))


def is_attainable(gait: Gait) -> bool:
    """True when the motors can realize the commanded amplitudes at this frequency."""
    return bool(attainable_mask(gait.stroke_amplitude, gait.pitch_amplitude, gait.flap_frequency))


@dataclass(frozen=True)
class TimeHistory:
    """Stroke and pitch angles (degrees) sampled evenly over one steady cycle."""

    points: np.ndarray
    samples_per_cycle: int

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.shape != (self.samples_per_cycle, 2):
            raise ValueError(f"expected ({self.samples_per_cycle}, 2) samples, got {pts.shape}")
        object.__setattr__(self, "points", pts)

    @property
    def stroke(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def pitch(self) -> np.ndarray:
        return self.points[:, 1]


def commanded_setpoints(gait: Gait) -> np.ndarray:
    """The 16 per-cycle motor commands as a (16, 2) array of (stroke, pitch).

    Stroke follows a sine sampled at the setpoints; pitch is a square wave
    between -p_a and +p_a leading the stroke by a quarter cycle and shifted
    by the stroke-pitch offset.
    """
    return _setpoints(gait.as_array()[None, :])[0]


def _setpoints(gaits: np.ndarray) -> np.ndarray:
    k = np.arange(SETPOINTS_PER_CYCLE) / SETPOINTS_PER_CYCLE
    stroke = gaits[:, 0:1] * np.sin(2.0 * np.pi * k)
    phase = np.mod(k[None, :] + 0.25 + gaits[:, 3:4], 1.0)
    pitch = np.where(phase < 0.5, 1.0, -1.0) * gaits[:, 1:2]
    return np.stack([stroke, pitch], axis=-1)


@njit(cache=True)
def _track(setpoints, amplitudes, period, vmax, amax, substeps, min_cycles, max_cycles, samples):
    # Rate- and acceleration-limited tracking of zero-order-held setpoints,
    # started from rest. Cycles are simulated until the state at a cycle
    # boundary repeats (the motion is then periodic) or max_cycles is hit;
    # the last cycle is resampled to `samples` points.
    n_sp = setpoints.shape[0]
    steps_per_cycle = n_sp * substeps
    dt = period / steps_per_cycle
    lim = amax * dt
    out = np.empty((samples, 2))
    traj = np.empty(steps_per_cycle + 1)
    for ch in range(2):
        amp = abs(amplitudes[ch])
        x = 0.0
        v = 0.0
        for cycle in range(max_cycles):
            x_start = x
            v_start = v
            traj[0] = x
            for step in range(steps_per_cycle):
                sp = setpoints[step // substeps, ch]
                e = sp - x
                if e != 0.0 or v != 0.0:
                    v_des = min(vmax, math.sqrt(2.0 * amax * abs(e)))
                    if e < 0.0:
                        v_des = -v_des
                    dv = v_des - v
                    if dv > lim:
                        dv = lim
                    elif dv < -lim:
                        dv = -lim
                    v += dv
                    x_new = x + v * dt
                    if (sp - x) * (sp - x_new) <= 0.0 and abs(v) <= lim * 2.0:
                        # arrival: settle on the setpoint
                        x_new = sp
                        v = 0.0
                    if x_new > amp:
                        x_new = amp
                        v = min(v, 0.0)
                    elif x_new < -amp:
                        x_new = -amp
                        v = max(v, 0.0)
                    x = x_new
                traj[step + 1] = x
            if cycle + 1 >= min_cycles and abs(x - x_start) <= 1e-9 and abs(v - v_start) <= 1e-9:
                break
        for j in range(samples):
            pos = j * steps_per_cycle / samples
            i0 = int(pos)
            frac = pos - i0
            out[j, ch] = traj[i0] + frac * (traj[i0 + 1] - traj[i0])
    return out


MOTOR_SUBSTEPS = 32
# at least this many cycles are simulated and all but the last discarded
STEADY_CYCLES = 2
# cap on cycles spent waiting for the motion to become periodic
MAX_SETTLE_CYCLES = 64


def generate_time_histories(
    gaits, motor: MotorLimits | None = None, samples_per_cycle: int = DEFAULT_SAMPLES_PER_CYCLE
) -> np.ndarray:
    """Batch version of :func:`generate_time_history`; returns (n, samples, 2)."""
    motor = motor or MotorLimits()
    gaits = np.atleast_2d(np.asarray(gaits, dtype=float))
    if samples_per_cycle < SETPOINTS_PER_CYCLE:
        raise ValueError(f"samples_per_cycle must be >= {SETPOINTS_PER_CYCLE}")
    if np.any(gaits[:, 2] <= 0):
        raise ValueError("flap frequency must be positive")
    sps = _setpoints(gaits)
    out = np.empty((gaits.shape[0], samples_per_cycle, 2))
    for i in range(gaits.shape[0]):
        out[i] = _track(
            sps[i],
            gaits[i, :2].copy(),
            1.0 / gaits[i, 2],
            motor.max_velocity,
            motor.max_acceleration,
            MOTOR_SUBSTEPS,
            STEADY_CYCLES,
            MAX_SETTLE_CYCLES,
            samples_per_cycle,
        )
    return out


def generate_time_history(
    gait: Gait, motor: MotorLimits | None = None, samples_per_cycle: int = DEFAULT_SAMPLES_PER_CYCLE
) -> TimeHistory:
    """Realized stroke/pitch angles over one steady flapping cycle.

    The motors receive 16 setpoints per cycle and follow them under the
    velocity and acceleration limits in ``motor``. Starting from rest, at
    least two cycles are simulated and more until the motion repeats itself
    (at most 64); the last cycle is resampled to ``samples_per_cycle``
    evenly spaced points.
    """
    if gait.flap_frequency <= 0:
        raise ValueError("flap frequency must be positive")
    points = generate_time_histories(gait.as_array(), motor, samples_per_cycle)[0]
    return TimeHistory(points, samples_per_cycle)
