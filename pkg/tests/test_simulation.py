import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fingait import (
    ClosedLoopConfig,
    Gait,
    KinematicSpace,
    PidConfig,
    PlantState,
    SymmetricModel,
    SyntheticSurrogate,
    generate_synthetic_requests,
    generate_targets,
    mirror_gait,
    pid_step,
    plant_step,
    run_closed_loop,
)
from fingait.simulation import TRAJECTORY_FIELDS, PidState, write_trajectory_csv


# -- request streams --------------------------------------------------------------

def test_synthetic_requests_protocol():
    for seed in range(1000):
        dt = 0.1 + 0.9 * (seed % 10) / 9
        r = np.array(generate_synthetic_requests(dt, seed).requests)
        assert r.shape == (100,)
        assert r.min() >= 0.2 and r.max() <= 1.2
        assert np.abs(np.diff(r)).max() <= dt + 1e-12


def test_synthetic_requests_deterministic_and_labelled():
    a = generate_synthetic_requests(0.5, 3)
    assert a == generate_synthetic_requests(0.5, 3)
    assert a.requests != generate_synthetic_requests(0.5, 4).requests
    assert a.provenance == "synthetic" and a.dt_max == 0.5


def test_tiny_step_gives_constant_sequence():
    r = np.array(generate_synthetic_requests(1e-12, 0).requests)
    assert np.ptp(r) < 1e-9


@pytest.mark.parametrize("dt", [0.0, -0.1, 1.01])
def test_invalid_step_rejected(dt):
    with pytest.raises(ValueError):
        generate_synthetic_requests(dt, 0)


def test_targets_walk():
    t = generate_targets(0)
    assert t.shape == (100,)
    assert t.min() >= 0 and t.max() <= 10
    assert np.abs(np.diff(t)).max() <= 2.0
    assert np.array_equal(t, generate_targets(0))


# -- plant ------------------------------------------------------------------------

def test_plant_rest_is_equilibrium():
    s = PlantState(position=3.0)
    assert plant_step(s, 0.0, 2.0) == s


@pytest.mark.parametrize("thrust, t", [(1.2, 1.0), (0.5, 3.7), (-0.8, 0.25)])
def test_plant_zero_drag_matches_closed_form(thrust, t):
    s = plant_step(PlantState(mass=10.0, drag_coefficient=0.0), thrust, t)
    assert s.position == pytest.approx(0.5 * thrust / 10.0 * t * t, rel=1e-4)
    assert s.velocity == pytest.approx(thrust / 10.0 * t, rel=1e-4)


@pytest.mark.parametrize("thrust", [0.2, 1.2])
def test_plant_terminal_velocity(thrust):
    s = PlantState()
    for _ in range(20):
        s = plant_step(s, thrust, 10.0)
    assert s.velocity == pytest.approx(math.sqrt(thrust / 8.0), rel=0.01)


@given(st.floats(-2, 2), st.floats(0.01, 5))
def test_unforced_plant_loses_energy(v0, dt):
    s = PlantState(velocity=v0)
    s2 = plant_step(s, 0.0, dt)
    assert s2.kinetic_energy <= s.kinetic_energy + 1e-15


@pytest.mark.parametrize("kwargs", [{"mass": 0}, {"drag_coefficient": -1}, {"position": float("nan")}])
def test_plant_validation(kwargs):
    with pytest.raises(ValueError):
        PlantState(**kwargs)


def test_plant_rejects_bad_dt():
    with pytest.raises(ValueError):
        plant_step(PlantState(), 1.0, 0.0)


# -- controller -----------------------------------------------------------------------

def reference_pid(kp, ki, kd, lo, hi, ilim, setpoint, measurements, dt):
    """Textbook discrete PID, derivative on measurement, clamped integral and output."""
    out, integral, prev = [], 0.0, None
    for y in measurements:
        e = setpoint - y
        integral = max(-ilim, min(ilim, integral + e * dt))
        d = 0.0 if prev is None else (prev - y) / dt
        prev = y
        out.append(max(lo, min(hi, kp * e + ki * integral + kd * d)))
    return out


def test_pid_examples():
    cfg = PidConfig()
    u, _ = pid_step(cfg, PidState(), 2.0, 2.0, 1.0)
    assert u == 0.0
    u, _ = pid_step(cfg, PidState(), 100.0, 0.0, 1.0)
    assert u == 1.2
    u, _ = pid_step(cfg, PidState(), -100.0, 0.0, 1.0)
    assert u == -1.2


def test_pid_step_response_matches_recurrence():
    cfg = PidConfig()
    state, plant = PidState(), PlantState()
    outs, meas = [], []
    for _ in range(40):
        meas.append(plant.position)
        u, state = pid_step(cfg, state, 1.0, plant.position, 1.0)
        outs.append(u)
        plant = plant_step(plant, u, 1.0)
    ref = reference_pid(cfg.kp, cfg.ki, cfg.kd, -1.2, 1.2, cfg.integral_limit, 1.0, meas, 1.0)
    assert outs == ref


def test_default_gains_meet_step_targets():
    """1 m step at 1 s cycles: under 20 % overshoot, within 5 % after 15 cycles."""
    cfg = PidConfig()
    state, plant = PidState(), PlantState()
    positions = []
    for _ in range(40):
        u, state = pid_step(cfg, state, 1.0, plant.position, 1.0)
        plant = plant_step(plant, u, 1.0)
        positions.append(plant.position)
    assert max(positions) < 1.2
    assert all(abs(p - 1.0) < 0.05 for p in positions[14:])


def test_integral_clamped():
    cfg = PidConfig(kp=0, ki=1, kd=0, integral_limit=0.5)
    state = PidState()
    for _ in range(10):
        _, state = pid_step(cfg, state, 10.0, 0.0, 1.0)
    assert state.integral == 0.5


@pytest.mark.parametrize("kwargs", [{"kp": -1}, {"output_limits": (1, -1)}, {"integral_limit": -1}])
def test_pid_validation(kwargs):
    with pytest.raises(ValueError):
        PidConfig(**kwargs)


# -- mirror -----------------------------------------------------------------------------

@given(st.builds(Gait, st.floats(-55, 55), st.floats(-55, 55), st.floats(0.75, 2), st.floats(-0.125, 0.125)))
def test_mirror_is_involution(g):
    assert mirror_gait(mirror_gait(g)) == g
    assert mirror_gait(g).flap_frequency == g.flap_frequency


def test_mirror_fixed_point_and_thrust():
    z = Gait(0, 0, 1.3, 0)
    assert mirror_gait(z) == Gait(-0.0, -0.0, 1.3, -0.0) == z
    model = SymmetricModel(SyntheticSurrogate())
    g = Gait(40, 30, 1.2, 0.05)
    assert model.predict_mean_thrust(mirror_gait(g)) == -model.predict_mean_thrust(g)


# -- closed loop ----------------------------------------------------------------------------

def test_hold_position_when_already_there():
    recs = run_closed_loop([0.0], "gps", ClosedLoopConfig(), SyntheticSurrogate(), KinematicSpace())
    assert len(recs) == 15
    assert all(abs(r.realized_thrust) < 1e-9 for r in recs)
    assert abs(recs[-1].position) < 0.05


def test_closed_loop_accounting():
    cfg = ClosedLoopConfig(cycles_per_target=5)
    recs = run_closed_loop([1.0, 0.5], "gps", cfg, SyntheticSurrogate(), KinematicSpace())
    assert [r.cycle for r in recs] == list(range(10))
    # each cycle lasts one period of the gait applied during it
    for r in recs:
        assert r.cycle_duration == pytest.approx(1.0 / r.flap_freq)
    # replaying the logged thrusts through the plant reproduces the positions
    plant = PlantState()
    for r in recs:
        plant = plant_step(plant, r.realized_thrust, r.cycle_duration)
        assert plant.position == r.position
    assert all(-1.2 <= r.thrust_request <= 1.2 for r in recs)
    assert recs[5].start_position == recs[4].position


def test_closed_loop_moves_toward_target():
    recs = run_closed_loop([1.0], "gps", ClosedLoopConfig(), SyntheticSurrogate(), KinematicSpace())
    assert abs(recs[-1].position - 1.0) < 0.1
    assert max(r.solver_ms for r in recs) < 500


def test_closed_loop_is_deterministic():
    a = run_closed_loop([2.0, 1.0], "mc", ClosedLoopConfig(cycles_per_target=4), SyntheticSurrogate(), KinematicSpace())
    b = run_closed_loop([2.0, 1.0], "mc", ClosedLoopConfig(cycles_per_target=4), SyntheticSurrogate(), KinematicSpace())
    strip = lambda rs: [(r.position, r.stroke_amp, r.L_total) for r in rs]
    assert strip(a) == strip(b)


def test_trajectory_csv_header(tmp_path):
    recs = run_closed_loop([0.5], "hjps", ClosedLoopConfig(cycles_per_target=3), SyntheticSurrogate(), KinematicSpace())
    path = tmp_path / "traj.csv"
    write_trajectory_csv(recs, path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == TRAJECTORY_FIELDS == (
        "cycle", "target_position", "position", "thrust_request", "realized_thrust", "stroke_amp",
        "pitch_amp", "flap_freq", "offset", "L_t", "L_k", "L_total", "solver_ms")
    assert len(rows) == 4
