import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fingait import (
    DnnForwardModel,
    DnnWeights,
    Gait,
    KinematicSpace,
    LstmForwardModel,
    LstmWeights,
    SymmetricModel,
    SyntheticSurrogate,
    dnn_forward,
    generate_time_history,
    load_model,
    load_weights,
    lstm_forward,
    mean_thrust_from_history,
    random_dnn_weights,
    random_lstm_weights,
    save_weights,
)
from fingait.exceptions import ConfigurationError
from fingait.forward_model import dnn_forward_batch, lstm_forward_batch, weights_from_dict, weights_to_dict
from fingait.kinematics import TimeHistory
from fingait.simulation import mirror_gait


# -- reference implementations ---------------------------------------------

def _sig(x):
    return 1.0 / (1.0 + math.exp(-x)) if x >= 0 else math.exp(x) / (1.0 + math.exp(x))


def scalar_lstm(w: LstmWeights, history, gait):
    """Per-element LSTM recurrence written with plain Python floats."""
    H = w.hidden_dim
    static = list(gait.as_array())
    h = [0.0] * H
    c = [0.0] * H
    out = []
    for stroke, pitch in history:
        raw = static + [stroke, pitch]
        x = [(raw[k] - w.mean[k]) / w.std[k] for k in range(len(raw))]
        gates = []
        for col in range(4 * H):
            acc = w.bias[col]
            for k in range(len(x)):
                acc += x[k] * w.kernel[k, col]
            for k in range(H):
                acc += h[k] * w.recurrent_kernel[k, col]
            gates.append(acc)
        new_c, new_h = [], []
        for u in range(H):
            i = _sig(gates[u])
            f = _sig(gates[H + u])
            g = math.tanh(gates[2 * H + u])
            o = _sig(gates[3 * H + u])
            cu = f * c[u] + i * g
            new_c.append(cu)
            new_h.append(o * math.tanh(cu))
        c, h = new_c, new_h
        out.append(w.output_bias + sum(h[u] * w.output_kernel[u] for u in range(H)))
    return np.array(out)


def gatewise_lstm(w: LstmWeights, history, gait):
    """Vectorized over units but with each gate's weights sliced out separately."""
    from scipy.special import expit
    H = w.hidden_dim
    Wi, Wf, Wc, Wo = (w.kernel[:, k * H:(k + 1) * H] for k in range(4))
    Ui, Uf, Uc, Uo = (w.recurrent_kernel[:, k * H:(k + 1) * H] for k in range(4))
    bi, bf, bc, bo = (w.bias[k * H:(k + 1) * H] for k in range(4))
    h = np.zeros(H)
    c = np.zeros(H)
    out = []
    for step in history:
        x = (np.concatenate([gait.as_array(), step]) - w.mean) / w.std
        i = expit(x @ Wi + h @ Ui + bi)
        f = expit(x @ Wf + h @ Uf + bf)
        g = np.tanh(x @ Wc + h @ Uc + bc)
        o = expit(x @ Wo + h @ Uo + bo)
        c = f * c + i * g
        h = o * np.tanh(c)
        out.append(h @ w.output_kernel + w.output_bias)
    return np.array(out)


def scalar_dnn(w: DnnWeights, gait):
    a = [(v - m) / s for v, m, s in zip(gait.as_array(), w.mean, w.std)]
    for layer, (k, b) in enumerate(zip(w.kernels, w.biases)):
        nxt = []
        for j in range(k.shape[1]):
            acc = b[j]
            for i in range(k.shape[0]):
                acc += a[i] * k[i, j]
            nxt.append(acc if layer == len(w.kernels) - 1 else max(acc, 0.0))
        a = nxt
    return a[0]


def _random_case(seed):
    rng = np.random.default_rng(seed)
    hidden = int(rng.integers(1, 11))
    steps = int(rng.integers(1, 51))
    w = random_lstm_weights(seed, hidden_dim=hidden, scale=float(rng.uniform(0.05, 1.0)))
    gait = Gait(*rng.uniform([0, 0, 0.75, -0.0625], [55, 55, 2.0, 0.125]))
    history = rng.uniform(-55, 55, (steps, 2))
    return w, history, gait


# -- LSTM -------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(100))
def test_lstm_matches_scalar_reference(seed):
    w, history, gait = _random_case(seed)
    got = lstm_forward_batch(w, history[None], gait.as_array()[None])[0]
    np.testing.assert_allclose(got, scalar_lstm(w, history, gait), atol=1e-6, rtol=0)


@pytest.mark.parametrize("seed", range(3))
def test_full_size_lstm_matches_gatewise_reference(seed):
    w = random_lstm_weights(seed)
    gait = Gait(40, 30, 1.25, 0.03)
    h = generate_time_history(gait)
    np.testing.assert_allclose(lstm_forward(w, h, gait), gatewise_lstm(w, h.points, gait), atol=1e-6, rtol=0)


def test_full_size_lstm_matches_scalar_reference():
    w = random_lstm_weights(7)
    gait = Gait(25, 45, 0.9, -0.05)
    h = generate_time_history(gait)
    np.testing.assert_allclose(lstm_forward(w, h, gait), scalar_lstm(w, h.points, gait), atol=1e-6, rtol=0)


def test_zero_lstm_outputs_zero():
    H = 5
    w = LstmWeights(np.zeros((6, 4 * H)), np.zeros((H, 4 * H)), np.zeros(4 * H), np.zeros(H), 0.0,
                    np.zeros(6), np.ones(6))
    gait = Gait(30, 30, 1, 0)
    assert not np.any(lstm_forward(w, generate_time_history(gait), gait))


def test_single_step_equals_one_cell_evaluation():
    w = random_lstm_weights(3, hidden_dim=4, scale=0.8)
    gait = Gait(10, 20, 1.5, 0.1)
    step = np.array([[12.0, -7.0]])
    x = (np.concatenate([gait.as_array(), step[0]]) - w.mean) / w.std
    z = x @ w.kernel + w.bias
    H = 4
    sig = lambda v: 1 / (1 + np.exp(-v))
    c = sig(z[:H]) * np.tanh(z[2 * H:3 * H])
    h = sig(z[3 * H:]) * np.tanh(c)
    got = lstm_forward_batch(w, step[None], gait.as_array()[None])[0]
    assert got.shape == (1,)
    assert got[0] == pytest.approx(h @ w.output_kernel + w.output_bias, abs=1e-12)


def test_lstm_rejects_shape_mismatch():
    w = random_lstm_weights(0, hidden_dim=4)
    with pytest.raises(ConfigurationError):
        lstm_forward_batch(w, np.zeros((1, 50, 3)), np.zeros((1, 4)))
    with pytest.raises(ConfigurationError):
        lstm_forward_batch(w, np.zeros((2, 50, 2)), np.zeros((1, 4)))
    with pytest.raises(ConfigurationError):
        LstmWeights(np.zeros((6, 8)), np.zeros((3, 12)), np.zeros(12), np.zeros(3), 0.0, np.zeros(6), np.ones(6))
    with pytest.raises(ConfigurationError):
        LstmWeights(np.zeros((6, 8)), np.zeros((2, 8)), np.zeros(8), np.zeros(2), 0.0, np.zeros(6), np.zeros(6))


def test_lstm_model_mean_is_mean_of_history():
    model = LstmForwardModel(random_lstm_weights(1, hidden_dim=16))
    gait = Gait(35, 25, 1.2, 0.02)
    hist = model.predict_time_history(gait)
    assert hist.shape == (50,)
    assert model.predict_mean_thrust(gait) == mean_thrust_from_history(hist)
    direct = lstm_forward(model.weights, generate_time_history(gait), gait)
    assert np.array_equal(hist, direct)


def test_lstm_model_is_deterministic():
    model = LstmForwardModel(random_lstm_weights(2, hidden_dim=8))
    gs = np.array([[10, 20, 1.0, 0.0], [40, 30, 1.5, 0.1]])
    assert np.array_equal(model.predict(gs), model.predict(gs))


# -- mean thrust --------------------------------------------------------------

def test_mean_thrust_examples():
    assert mean_thrust_from_history([0.2, 0.4]) == pytest.approx(0.3)
    assert mean_thrust_from_history([0.7] * 50) == pytest.approx(0.7)
    with pytest.raises(ValueError):
        mean_thrust_from_history([])


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=200))
def test_mean_thrust_matches_exact_sum(values):
    assert mean_thrust_from_history(values) == pytest.approx(math.fsum(values) / len(values), abs=1e-12)


# -- DNN -------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(100))
def test_dnn_matches_scalar_reference(seed):
    rng = np.random.default_rng(seed)
    layers = tuple(int(n) for n in rng.integers(1, 12, rng.integers(1, 4)))
    w = random_dnn_weights(seed, layers=layers, scale=float(rng.uniform(0.1, 1.5)))
    gait = Gait(*rng.uniform([0, 0, 0.75, -0.0625], [55, 55, 2.0, 0.125]))
    assert dnn_forward(w, gait) == pytest.approx(scalar_dnn(w, gait), abs=1e-6)


def test_default_size_dnn_matches_scalar_reference():
    w = random_dnn_weights(4)
    assert w.layer_sizes == [100, 100, 100, 1]
    for gait in (Gait(0, 0, 0.75, 0), Gait(55, 38, 1.4, 0.03)):
        assert dnn_forward(w, gait) == pytest.approx(scalar_dnn(w, gait), abs=1e-6)


def test_zero_dnn_is_bias_constant():
    w = DnnWeights((np.zeros((4, 3)), np.zeros((3, 1))), (np.full(3, 0.5), np.array([0.25])), np.zeros(4), np.ones(4))
    for g in (Gait(0, 0, 1, 0), Gait(50, 20, 2, 0.1)):
        assert dnn_forward(w, g) == 0.25


def test_single_path_dnn_passes_through_relu():
    # one hidden unit reading only the (unscaled) stroke amplitude
    k1 = np.zeros((4, 1))
    k1[0, 0] = 1.0
    w = DnnWeights((k1, np.array([[2.0]])), (np.array([-10.0]), np.array([1.0])), np.zeros(4), np.ones(4))
    for stroke in (0.0, 5.0, 10.0, 30.0):
        g = Gait(stroke, 0, 1, 0)
        assert dnn_forward(w, g) == scalar_dnn(w, g) == 1.0 + 2.0 * max(stroke - 10.0, 0.0)


def test_dnn_rejects_bad_shapes():
    with pytest.raises(ConfigurationError):
        DnnWeights((np.zeros((4, 3)), np.zeros((2, 1))), (np.zeros(3), np.zeros(1)), np.zeros(4), np.ones(4))
    with pytest.raises(ConfigurationError):
        DnnWeights((np.zeros((4, 2)),), (np.zeros(2),), np.zeros(4), np.ones(4))
    with pytest.raises(ConfigurationError):
        dnn_forward_batch(DnnWeights((np.zeros((3, 1)),), (np.zeros(1),), np.zeros(3), np.ones(3)), np.zeros((1, 4)))


# -- synthetic surrogate --------------------------------------------------------

ATTAINABLE_MAX = 1.4037545454545455  # at (55, 38.6, 1.4, 0.03), frozen from a fine frequency scan


def test_surrogate_zero_amplitude_is_zero(surrogate):
    for f in (0.75, 1.3, 2.0):
        for o in (-0.0625, 0.0, 0.1):
            assert surrogate.predict_mean_thrust(Gait(0, 0, f, o)) == 0.0


def test_surrogate_maximum_matches_grid_scan(surrogate, space):
    S = np.arange(0, 55.01, 1.0)
    F = np.arange(0.75, 2.001, 0.025)
    O = np.arange(-0.0625, 0.12501, 0.0625 / 8)
    grid = np.array(np.meshgrid(S, S, F, O, indexing="ij")).reshape(4, -1).T
    grid = grid[space.feasible(grid)]
    values = surrogate.predict(grid)
    assert values.min() >= 0.0
    assert values.max() <= ATTAINABLE_MAX + 1e-12
    assert values.max() > ATTAINABLE_MAX - 0.02
    assert surrogate.predict_mean_thrust(Gait(55, 38.6, 1.4, 0.03)) == pytest.approx(ATTAINABLE_MAX, abs=1e-12)
    # the grid argmax sits next to the analytic one
    best = grid[np.argmax(values)]
    assert abs(best[0] - 55) <= 1 and abs(best[1] - 38.6) <= 1 and abs(best[2] - 1.4) <= 0.05


@pytest.mark.parametrize("axis, step", [(0, 0.5), (1, 0.5), (2, 0.01)])
def test_surrogate_increases_along_amplitudes_and_frequency(surrogate, axis, step):
    rng = np.random.default_rng(axis)
    g = rng.uniform([1, 1, 0.8, -0.06], [50, 50, 1.9, 0.12], (500, 4))
    h = g.copy()
    h[:, axis] += step
    assert np.all(surrogate.predict(h) - surrogate.predict(g) > 0)


def test_surrogate_offset_peaks_inside_range(surrogate):
    g = np.tile([40.0, 30.0, 1.2, 0.0], (3, 1))
    g[:, 3] = [0.0, 0.03, 0.06]
    lo, peak, hi = surrogate.predict(g)
    assert peak > lo and peak > hi
    # finite differences change sign across the peak
    d = 1e-4
    below = surrogate.predict([[40, 30, 1.2, 0.02 - d], [40, 30, 1.2, 0.02 + d]])
    above = surrogate.predict([[40, 30, 1.2, 0.04 - d], [40, 30, 1.2, 0.04 + d]])
    assert below[1] > below[0] and above[1] < above[0]


def test_surrogate_lipschitz_on_grid(surrogate, space):
    """Finite differences between grid neighbours respect analytic slope bounds.

    Per normalized unit, with r <= 1, |a|, |b| <= 1, h <= 1 and
    |o - 0.03| <= 0.095 on the box:
      stroke  K (c0 + c1) 10/55            = 0.409
      pitch   K (c1 + c2) 10/55            = 0.286
      freq    K (c0 + c1 + c2) 0.25/2      = 0.309
      offset  K (c0 + c1 + c2) 2q 0.095 / 16 = 0.588
    """
    bounds = [2.25 * 1.0 * 10 / 55, 2.25 * 0.7 * 10 / 55, 2.25 * 1.1 * 0.125, 2.25 * 1.1 * 40 * 0.095 * 0.0625]
    axes = [np.linspace(lo, hi, 12) for lo, hi in zip(space.lower_bounds, space.upper_bounds)]
    grid = np.array(np.meshgrid(*axes, indexing="ij"))
    values = surrogate.predict(grid.reshape(4, -1).T).reshape(grid.shape[1:])
    for k in range(4):
        spacing = (axes[k][1] - axes[k][0]) / space.step_sizes[k]
        slope = np.abs(np.diff(values, axis=k)).max() / spacing
        assert 0 < slope <= bounds[k] + 1e-12


def test_surrogate_batch_equals_single(surrogate):
    gs = np.random.default_rng(0).uniform([0, 0, 0.75, -0.0625], [55, 55, 2.0, 0.125], (200, 4))
    batch = surrogate.predict(gs)
    for g, b in zip(gs, batch):
        assert surrogate.predict_mean_thrust(Gait.from_array(g)) == b


def test_surrogate_has_no_time_history(surrogate):
    with pytest.raises(NotImplementedError):
        surrogate.predict_time_history(Gait(1, 1, 1, 0))


# -- symmetry wrapper ------------------------------------------------------------

mirrored_gaits = st.builds(Gait, st.floats(-55, 55), st.floats(-55, 55), st.floats(0.75, 2.0),
                           st.floats(-0.125, 0.125))


@given(mirrored_gaits)
def test_symmetric_model_is_exactly_odd(g):
    model = SymmetricModel(SyntheticSurrogate())
    assert model.predict_mean_thrust(mirror_gait(g)) + model.predict_mean_thrust(g) == 0.0


def test_symmetric_model_matches_base_on_positive_side(surrogate):
    model = SymmetricModel(surrogate)
    gs = np.random.default_rng(1).uniform([0, 0, 0.75, -0.0625], [55, 55, 2.0, 0.125], (100, 4))
    np.testing.assert_array_equal(model.predict(gs), surrogate.predict(gs))
    assert model.predict_mean_thrust(Gait(0, 0, 1.3, 0)) == 0.0


def test_symmetric_time_history_is_negated():
    base = LstmForwardModel(random_lstm_weights(0, hidden_dim=6))
    model = SymmetricModel(base)
    g = Gait(30, 20, 1.2, 0.05)
    np.testing.assert_array_equal(model.predict_time_history(mirror_gait(g)), -base.predict_time_history(g))
    assert not np.any(model.predict_time_history(Gait(0, 0, 1.0, 0)))


# -- weight files -------------------------------------------------------------

def test_lstm_json_round_trip(tmp_path):
    w = random_lstm_weights(5, hidden_dim=7)
    path = tmp_path / "lstm.json"
    save_weights(w, path)
    doc = json.loads(path.read_text())
    assert doc["kind"] == "lstm" and doc["hidden_dim"] == 7 and doc["input_dim"] == 6
    assert doc["kernel"]["shape"] == [6, 28]
    back = load_weights(path)
    for name in ("kernel", "recurrent_kernel", "bias", "output_kernel", "mean", "std"):
        assert np.array_equal(getattr(back, name), getattr(w, name))
    assert back.output_bias == w.output_bias
    assert isinstance(load_model(path), LstmForwardModel)


def test_dnn_json_round_trip(tmp_path):
    w = random_dnn_weights(5, layers=(6, 5))
    path = tmp_path / "dnn.json"
    save_weights(w, path)
    back = load_weights(path)
    assert back.layer_sizes == [6, 5, 1]
    g = Gait(20, 10, 1.1, 0.0)
    assert dnn_forward(back, g) == dnn_forward(w, g)
    assert isinstance(load_model(path), DnnForwardModel)


@pytest.mark.parametrize("mutate, message", [
    (lambda d: d.update(format_version=9), "format_version"),
    (lambda d: d.update(kind="gru"), "kind"),
    (lambda d: d.update(gate_order="icfo"), "gate_order"),
    (lambda d: d.update(hidden_dim=5), "hidden_dim"),
    (lambda d: d["kernel"].update(shape=[6, 27]), "kernel"),
    (lambda d: d["bias"].update(data=[float("nan")] * 16), "non-finite"),
    (lambda d: d.pop("recurrent_kernel"), "recurrent_kernel"),
    (lambda d: d["normalization"].update(std=[1, 1, 1, 1, 1, 0]), "standard deviations"),
])
def test_weight_loader_rejects_malformed(mutate, message):
    doc = weights_to_dict(random_lstm_weights(0, hidden_dim=4))
    mutate(doc)
    with pytest.raises(ConfigurationError, match=message):
        weights_from_dict(doc)


def test_weight_loader_rejects_bad_json(tmp_path):
    p = tmp_path / "w.json"
    p.write_text("{not json")
    with pytest.raises(ConfigurationError):
        load_weights(p)
