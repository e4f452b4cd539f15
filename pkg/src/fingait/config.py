"""Run configuration: one JSON document per run, unknown fields rejected."""

from __future__ import annotations

import json
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .exceptions import ConfigurationError
from .kinematics import Gait, KinematicSpace, MotorLimits
from .search import METHODS, SearchConfig
from .simulation import PidConfig, PlantState

FourVector = Tuple[float, float, float, float]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ModelSettings(_Strict):
    kind: Literal["synthetic", "lstm", "dnn"] = "synthetic"
    weights_path: Optional[str] = None
    # untrained seeded weights when no file is given
    random_seed: Optional[int] = None

    @model_validator(mode="after")
    def _weights_source(self):
        if self.kind != "synthetic" and self.weights_path is None and self.random_seed is None:
            raise ValueError(f"model kind {self.kind!r} needs weights_path or random_seed")
        return self


class SpaceSettings(_Strict):
    lower_bounds: FourVector = (0.0, 0.0, 0.75, -0.0625)
    upper_bounds: FourVector = (55.0, 55.0, 2.0, 0.125)
    step_sizes: FourVector = (10.0, 10.0, 0.25, 0.0625)

    def build(self) -> KinematicSpace:
        return KinematicSpace(self.lower_bounds, self.upper_bounds, self.step_sizes)


class MotorSettings(_Strict):
    max_velocity: float = Field(400.0, gt=0)
    max_acceleration: float = Field(4000.0, gt=0)

    def build(self) -> MotorLimits:
        return MotorLimits(self.max_velocity, self.max_acceleration)


class SearchSettings(_Strict):
    mc_samples: int = Field(50, ge=1)
    mesh_size: float = Field(3.0, gt=0)
    mesh_divider: float = Field(2.0, gt=1)
    precision: float = Field(0.375, gt=0)
    evaluation_budget: int = Field(2000, ge=2)
    mc_radius_floor: float = Field(0.05, gt=0)
    mc_radius_scale: float = Field(0.1, gt=0)
    mc_max_draws: int = Field(5000, ge=1)

    def build(self, seed: int = 0) -> SearchConfig:
        return SearchConfig(rng_seed=seed, **self.model_dump())


class SynthSettings(_Strict):
    dt_max_values: List[float] = Field(default_factory=lambda: [round(0.1 * i, 1) for i in range(1, 11)])
    n_requests: int = Field(100, ge=1)
    initial_gait: FourVector = (25.0, 25.0, 1.0, 0.0)

    @field_validator("dt_max_values")
    @classmethod
    def _dt_range(cls, values):
        if not values or any(not (0 < v <= 1.0) for v in values):
            raise ValueError("dt_max_values must be non-empty and within (0, 1]")
        return values


class PlantSettings(_Strict):
    mass: float = Field(10.0, gt=0)
    drag_coefficient: float = Field(8.0, ge=0)


class PidSettings(_Strict):
    kp: float = Field(2.0, ge=0)
    ki: float = Field(0.01, ge=0)
    kd: float = Field(6.0, ge=0)
    integral_limit: float = Field(5.0, ge=0)
    output_limit: float = Field(1.2, gt=0)

    def build(self) -> PidConfig:
        return PidConfig(self.kp, self.ki, self.kd, (-self.output_limit, self.output_limit), self.integral_limit)


class SimulateSettings(_Strict):
    n_targets: int = Field(100, ge=1)
    cycles_per_target: int = Field(15, ge=1)
    position_range: Tuple[float, float] = (0.0, 10.0)
    max_target_step: float = Field(2.0, gt=0)
    initial_gait: FourVector = (0.0, 0.0, 1.0, 0.0)
    plant: PlantSettings = PlantSettings()
    pid: PidSettings = PidSettings()


class TimingSettings(_Strict):
    n_requests: int = Field(200, ge=1)
    dt_max: float = Field(0.5, gt=0, le=1.0)
    initial_gait: FourVector = (25.0, 25.0, 1.0, 0.0)
    # extra MC runs at these sample counts, for scaling checks
    mc_sample_sizes: List[int] = Field(default_factory=list)
    warmup_calls: int = Field(3, ge=0)


class RunConfig(_Strict):
    model: ModelSettings = ModelSettings()
    space: SpaceSettings = SpaceSettings()
    motor: MotorSettings = MotorSettings()
    search: SearchSettings = SearchSettings()
    methods: List[Literal["mc", "hjps", "gps"]] = Field(default_factory=lambda: list(METHODS))
    thrust_weights: List[float] = Field(default_factory=lambda: [0.9, 0.95, 1.0])
    synth: SynthSettings = SynthSettings()
    simulate: SimulateSettings = SimulateSettings()
    timing: TimingSettings = TimingSettings()
    seed: int = 0
    time_budget_s: float = Field(0.5, gt=0)
    out_dir: str = "results"

    @field_validator("thrust_weights")
    @classmethod
    def _weights_range(cls, values):
        if not values or any(not (0 < w <= 1.0) for w in values):
            raise ValueError("thrust_weights must be non-empty and within (0, 1]")
        return values

    @field_validator("methods")
    @classmethod
    def _methods_nonempty(cls, values):
        if not values:
            raise ValueError("at least one method is required")
        return values

    def with_overrides(self, **fields) -> "RunConfig":
        data = self.model_dump()
        data.update({k: v for k, v in fields.items() if v is not None})
        return parse_config(data)


def parse_config(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigurationError(str(exc)) from exc


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig()
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: not valid JSON ({exc})") from exc
    return parse_config(data)


def gait_from(values) -> Gait:
    return Gait(*values)


def plant_from(settings: PlantSettings) -> PlantState:
    return PlantState(mass=settings.mass, drag_coefficient=settings.drag_coefficient)
