"""Inverse gait solvers.

Each solver takes a target thrust, the gait currently applied and the loss
weights, and proposes the gait for the next flapping cycle. All three work
in the step-size-normalized space, where a unit move costs one unit of
kinematic loss.

* ``mc``: uniform samples from a ball around the current gait whose radius
  scales with the current thrust error.
* ``hjps``: Hooke-Jeeves pattern search over the standard basis.
* ``gps``: Hooke-Jeeves plus a composite search along summed per-axis
  directions whenever a poll fails.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import ConfigurationError
from .kinematics import N_KINEMATICS, Gait, KinematicSpace
from .loss import LossBreakdown, LossWeights, total_loss

METHODS = ("mc", "hjps", "gps")

# Pattern moves are evaluated this many steps ahead per model call; the
# accepted prefix is the same as evaluating one step at a time.
LINE_LOOKAHEAD = 4


@dataclass(frozen=True)
class InverseRequest:
    target_thrust: float
    current_gait: Gait
    weights: LossWeights = field(default_factory=LossWeights)
    velocity: float = 0.0
    power: float = 1.0


@dataclass(frozen=True)
class SearchConfig:
    mc_samples: int = 50
    mesh_size: float = 3.0
    mesh_divider: float = 2.0
    precision: float = 0.375
    evaluation_budget: int = 2000
    rng_seed: int = 0
    mc_radius_floor: float = 0.05
    mc_radius_scale: float = 0.1
    mc_max_draws: int = 5000
    max_iterations: int = 10_000

    def __post_init__(self):
        if not self.precision > 0:
            raise ConfigurationError("precision must be positive")
        if self.mesh_size < self.precision:
            raise ConfigurationError("mesh_size must be >= precision")
        if not self.mesh_divider > 1:
            raise ConfigurationError("mesh_divider must exceed 1")
        if self.mc_samples < 1:
            raise ConfigurationError("mc_samples must be >= 1")
        if self.evaluation_budget < 2:
            raise ConfigurationError("evaluation_budget must allow the incumbent and one candidate")
        if not self.mc_radius_floor > 0:
            raise ConfigurationError("mc_radius_floor must be positive")
        if not self.mc_radius_scale > 0:
            raise ConfigurationError("mc_radius_scale must be positive")


@dataclass(frozen=True)
class SearchResult:
    proposed_gait: Gait
    loss: LossBreakdown
    evaluations: int
    wall_time: float
    method: str
    budget_exhausted: bool = False
    path: tuple = ()

    def same_outcome(self, other: "SearchResult") -> bool:
        """Equality ignoring wall time."""
        return replace(self, wall_time=0.0) == replace(other, wall_time=0.0)


class _BudgetExhausted(Exception):
    pass


class _Objective:
    """Cached total loss over normalized points; infeasible points cost inf."""

    def __init__(self, request: InverseRequest, model, space: KinematicSpace, budget: int):
        self.request = request
        self.model = model
        self.space = space
        self.budget = budget
        self.evaluations = 0
        self.current = request.current_gait.as_array()
        self.z0 = space.normalize(self.current)
        self._cache = {}

    def charge(self, n: int) -> None:
        if self.evaluations + n > self.budget:
            raise _BudgetExhausted
        self.evaluations += n

    def __call__(self, points) -> np.ndarray:
        points = np.atleast_2d(points)
        keys = [tuple(p.tolist()) for p in points]
        missing = {}
        for key, p in zip(keys, points):
            if key not in self._cache and key not in missing:
                missing[key] = p
        if missing:
            pts = np.array(list(missing.values()))
            gaits = self.space.denormalize(pts)
            ok = self.space.feasible(gaits)
            values = np.full(len(pts), np.inf)
            if np.any(ok):
                self.charge(int(ok.sum()))
                w = self.request.weights
                pred = self.model.predict(gaits[ok])
                l_t = np.abs(self.request.target_thrust - pred)
                delta = pts[ok] - self.z0
                l_k = np.sqrt(np.sum(delta * delta, axis=1))
                l_e = -(pred * self.request.velocity / self.request.power)
                values[ok] = w.thrust * l_t + w.kinematic * l_k + w.efficiency * l_e
            for key, v in zip(missing, values):
                self._cache[key] = float(v)
        return np.array([self._cache[k] for k in keys])

    def breakdown(self, gait: Gait) -> LossBreakdown:
        self.charge(1)
        r = self.request
        return total_loss(r.target_thrust, r.current_gait, gait, r.weights, self.model, self.space,
                          velocity=r.velocity, power=r.power)


def _validate(request: InverseRequest, space: KinematicSpace) -> None:
    if not math.isfinite(request.target_thrust):
        raise ValueError("target thrust must be finite")
    if not request.power > 0:
        raise ValueError("power must be positive")
    if not bool(space.feasible(request.current_gait.as_array())):
        raise ValueError(f"current gait {request.current_gait} is outside the kinematic space or unattainable")


def _finish(obj: _Objective, incumbent: LossBreakdown, x, moved: bool, method: str,
            start: float, exhausted: bool, path) -> SearchResult:
    request = obj.request
    proposed, loss = request.current_gait, incumbent
    if moved:
        candidate = Gait.from_array(obj.space.denormalize(x))
        try:
            cand_loss = obj.breakdown(candidate)
        except _BudgetExhausted:
            # the budget is spent; re-evaluation falls outside it
            obj.evaluations += 1
            cand_loss = total_loss(request.target_thrust, request.current_gait, candidate, request.weights,
                                   obj.model, obj.space, velocity=request.velocity, power=request.power)
            exhausted = True
        # batched and single-gait predictions may differ in the last bits
        if cand_loss.total <= incumbent.total:
            proposed, loss = candidate, cand_loss
    gaits = tuple(Gait.from_array(obj.space.denormalize(p)) for p in path)
    return SearchResult(proposed, loss, obj.evaluations, time.perf_counter() - start, method, exhausted, gaits)


def _start(request, model, space, cfg):
    _validate(request, space)
    obj = _Objective(request, model, space, cfg.evaluation_budget)
    incumbent = obj.breakdown(request.current_gait)
    obj._cache[tuple(obj.z0.tolist())] = incumbent.total
    return obj, incumbent


# --------------------------------------------------------------------------
# Monte Carlo
# --------------------------------------------------------------------------

def sample_ball(rng: np.random.Generator, center, radius: float, n: int) -> np.ndarray:
    """``n`` points uniform in the open ball of ``radius`` around ``center``."""
    dim = len(center)
    directions = rng.standard_normal((n, dim))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    radii = radius * rng.random((n, 1)) ** (1.0 / dim)
    return np.asarray(center) + directions / norms * radii


def monte_carlo_radius(current_thrust: float, target: float, floor: float, scale: float = 0.1) -> float:
    """Ball radius in normalized units: ``scale`` times the thrust error, floored."""
    return max(scale * abs(current_thrust - target), floor)


def monte_carlo_step(request: InverseRequest, cfg: SearchConfig, model, space: KinematicSpace) -> SearchResult:
    start = time.perf_counter()
    obj, incumbent = _start(request, model, space, cfg)
    x, fx = obj.z0, incumbent.total
    radius = monte_carlo_radius(incumbent.predicted_thrust, request.target_thrust, cfg.mc_radius_floor,
                                cfg.mc_radius_scale)
    rng = np.random.default_rng(cfg.rng_seed)
    accepted = []
    draws = 0
    while len(accepted) < cfg.mc_samples and draws < cfg.mc_max_draws:
        need = min(cfg.mc_samples - len(accepted), cfg.mc_max_draws - draws)
        pts = sample_ball(rng, obj.z0, radius, need)
        draws += need
        ok = space.feasible(space.denormalize(pts))
        accepted.extend(pts[ok])
    exhausted = False
    moved = False
    if accepted:
        try:
            values = obj(np.array(accepted))
            best = int(np.argmin(values))
            if values[best] < fx:
                x, fx, moved = accepted[best], values[best], True
        except _BudgetExhausted:
            exhausted = True
    path = [obj.z0, x] if moved else [obj.z0]
    return _finish(obj, incumbent, x, moved, "mc", start, exhausted, path)


# --------------------------------------------------------------------------
# Pattern search
# --------------------------------------------------------------------------

def _line_search(obj: _Objective, x, fx, direction, path):
    """Step along ``direction`` while the loss keeps strictly decreasing."""
    moved = False
    while True:
        steps = x + np.outer(np.arange(1, LINE_LOOKAHEAD + 1), direction)
        values = obj(steps)
        for point, value in zip(steps, values):
            if not value < fx:
                return x, fx, moved
            x, fx, moved = point, value, True
            path.append(x)


def _poll(obj: _Objective, x, fx, h, path):
    """Hooke-Jeeves exploratory poll along +/- each basis vector.

    Dimensions are visited in order and an improvement is accepted before
    moving on. Returns the new point, its loss, and per-dimension
    (direction, loss increase) pairs measured from the poll's base; the
    increases are only meaningful when the poll failed.
    """
    n = len(x)
    increments = [None] * n
    i = 0
    while i < n:
        dims = range(i, n)
        cands = []
        for j in dims:
            e = np.zeros(n)
            e[j] = h
            cands.extend((x + e, x - e))
        values = obj(np.array(cands))
        i = n
        for idx, j in enumerate(dims):
            f_plus, f_minus = values[2 * idx], values[2 * idx + 1]
            k = 2 * idx if f_plus <= f_minus else 2 * idx + 1
            increments[j] = (cands[k] - x, values[k] - fx)
            if values[k] < fx:
                x, fx = cands[k], values[k]
                path.append(x)
                i = j + 1
                break
    return x, fx, increments


def _search_upon_failure(obj: _Objective, x, fx, increments, path):
    """Composite moves after a failed poll.

    Per-axis directions of least loss increase are sorted by that increase
    and summed; the sum is tried first, then the axis with the largest
    increase is dropped, down to a single axis. The first improving
    composite is followed until it stops improving. Axes whose poll points
    were both infeasible carry no direction and are left out.
    """
    usable = [(inc, j, u) for j, (u, inc) in enumerate(increments) if math.isfinite(inc)]
    if not usable:
        return x, fx, False
    usable.sort(key=lambda item: (item[0], item[1]))
    directions = [u for _, _, u in usable]
    composites = []
    v = np.sum(directions, axis=0)
    for j in range(len(directions) - 1, -1, -1):
        composites.append(v)
        v = v - directions[j]
    values = obj(x + np.array(composites))
    for v, value in zip(composites, values):
        if value < fx:
            x, fx = x + v, value
            path.append(x)
            return (*_line_search(obj, x, fx, v, path)[:2], True)
    return x, fx, False


def _pattern_search(request, cfg, model, space, method: str) -> SearchResult:
    start = time.perf_counter()
    obj, incumbent = _start(request, model, space, cfg)
    x, fx = obj.z0, incumbent.total
    path = [x]
    h = cfg.mesh_size
    direction = None
    exhausted = False
    try:
        for _ in range(cfg.max_iterations):
            if h < cfg.precision:
                break
            if direction is not None:
                x, fx, moved = _line_search(obj, x, fx, direction, path)
                direction = None
                if moved:
                    continue
            base = x
            x, fx, increments = _poll(obj, x, fx, h, path)
            if x is not base:
                direction = x - base
                continue
            if method == "gps":
                x, fx, moved = _search_upon_failure(obj, x, fx, increments, path)
                if moved:
                    continue
            h /= cfg.mesh_divider
    except _BudgetExhausted:
        exhausted = True
    moved = x is not obj.z0
    return _finish(obj, incumbent, x, moved, method, start, exhausted, path)


def hjps_step(request: InverseRequest, cfg: SearchConfig, model, space: KinematicSpace) -> SearchResult:
    return _pattern_search(request, cfg, model, space, "hjps")


def gps_step(request: InverseRequest, cfg: SearchConfig, model, space: KinematicSpace) -> SearchResult:
    return _pattern_search(request, cfg, model, space, "gps")


_SOLVERS = {"mc": monte_carlo_step, "hjps": hjps_step, "gps": gps_step}


def propose_gait(request: InverseRequest, method: str, cfg: SearchConfig, model,
                 space: KinematicSpace) -> SearchResult:
    """Run one inverse-model request with the named solver."""
    try:
        solver = _SOLVERS[method.lower()]
    except (KeyError, AttributeError):
        raise ConfigurationError(f"unknown method {method!r}; expected one of {METHODS}") from None
    start = time.perf_counter()
    result = solver(request, cfg, model, space)
    return replace(result, wall_time=time.perf_counter() - start)
