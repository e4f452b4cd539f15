"""Gait-to-thrust surrogates.

Three interchangeable implementations of :class:`ForwardModel`:

* :class:`LstmForwardModel` runs an LSTM over the generated stroke/pitch
  time history and averages the per-step thrust outputs.
* :class:`DnnForwardModel` maps the four static kinematics straight to
  mean thrust through a ReLU multilayer perceptron.
* :class:`SyntheticSurrogate` is a closed-form stand-in used as ground
  truth in tests and benchmarks.

Network weights are plain JSON documents; see :func:`load_weights`.
"""

from __future__ import annotations

import json
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import ConfigurationError
from .kinematics import (
    DEFAULT_SAMPLES_PER_CYCLE,
    N_KINEMATICS,
    Gait,
    MotorLimits,
    TimeHistory,
    generate_time_histories,
)

FORMAT_VERSION = 1
LSTM_INPUT_DIM = N_KINEMATICS + 2


class ForwardModel(ABC):
    """Maps gaits to predicted mean thrust (newtons).

    Implementations must be deterministic and hold no mutable state so
    that predictions can run concurrently.
    """

    @abstractmethod
    def predict(self, gaits) -> np.ndarray:
        """Mean thrust for an (n, 4) array of gaits."""

    def predict_mean_thrust(self, gait: Gait) -> float:
        return float(self.predict(gait.as_array()[None, :])[0])

    def predict_time_history(self, gait: Gait) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} predicts mean thrust only")


def _as_gait_batch(gaits) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(gaits, dtype=float))
    if arr.ndim != 2 or arr.shape[1] != N_KINEMATICS:
        raise ConfigurationError(f"gaits must have shape (n, {N_KINEMATICS}), got {arr.shape}")
    return arr


def mean_thrust_from_history(thrust_history) -> float:
    values = np.asarray(thrust_history, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("thrust history is empty")
    return float(np.mean(values))


# --------------------------------------------------------------------------
# Synthetic surrogate
# --------------------------------------------------------------------------

class SyntheticSurrogate(ForwardModel):
    """Closed-form thrust landscape, version 1.

    With a = stroke/55, b = pitch/55, r = frequency/2 and offset o::

        T = K r [ a (c0 + c1|b|) h(o sgn a) + c2 b h(o sgn b) ]
        h(o) = 1 - q (o - o*)^2

    Thrust grows with stroke amplitude, pitch amplitude and frequency and
    peaks in the offset at o* = 0.03. The formula is odd under the mirror
    map (stroke, pitch, offset) -> (-stroke, -pitch, -offset), so negative
    thrust needs no special casing, and it keeps a nonzero stroke slope at
    zero amplitude so that searches started at rest can leave it.
    K = 2.25 puts the attainable maximum at 1.404 N (stroke 55, pitch 38.6,
    1.4 Hz, offset 0.03), where both amplitude limits meet.

    Only arithmetic operations are used, which keeps batched and
    single-gait predictions bitwise identical.
    """

    version = 1

    def __init__(self, gain=2.25, base_lift=0.4, pitch_lift=0.6, pitch_only=0.1,
                 offset_peak=0.03, offset_curvature=20.0):
        self.gain = gain
        self.base_lift = base_lift
        self.pitch_lift = pitch_lift
        self.pitch_only = pitch_only
        self.offset_peak = offset_peak
        self.offset_curvature = offset_curvature

    def _offset_factor(self, o):
        d = o - self.offset_peak
        return 1.0 - self.offset_curvature * d * d

    def predict(self, gaits) -> np.ndarray:
        g = _as_gait_batch(gaits)
        a = g[:, 0] / 55.0
        b = g[:, 1] / 55.0
        r = g[:, 2] / 2.0
        o = g[:, 3]
        stroke_term = a * (self.base_lift + self.pitch_lift * np.abs(b)) * self._offset_factor(o * np.sign(a))
        pitch_term = self.pitch_only * b * self._offset_factor(o * np.sign(b))
        return self.gain * r * (stroke_term + pitch_term)

    def __repr__(self):
        return f"SyntheticSurrogate(version={self.version}, gain={self.gain})"


class SymmetricModel(ForwardModel):
    """Extends a positive-thrust model to mirrored gaits.

    A gait whose orientation is negative is evaluated as ``-base(mirror(g))``.
    Orientation is the sign of the first nonzero of (stroke + pitch, stroke,
    offset); the mirror fixed point (zero amplitudes, zero offset) maps to
    zero thrust. This makes ``model(mirror(g)) == -model(g)`` exact.
    """

    def __init__(self, base: ForwardModel):
        self.base = base

    def predict(self, gaits) -> np.ndarray:
        g = _as_gait_batch(gaits)
        key = g[:, 0] + g[:, 1]
        orient = np.sign(key)
        for col in (0, 3):
            orient = np.where(orient == 0, np.sign(g[:, col]), orient)
        evaluated = g.copy()
        neg = orient < 0
        evaluated[neg] *= np.array([-1.0, -1.0, 1.0, -1.0])
        out = np.zeros(g.shape[0])
        live = orient != 0
        if np.any(live):
            out[live] = self.base.predict(evaluated[live])
        out[neg] = -out[neg]
        return out

    def predict_time_history(self, gait: Gait) -> np.ndarray:
        arr = gait.as_array()
        orient = np.sign(arr[0] + arr[1]) or np.sign(arr[0]) or np.sign(arr[3])
        if orient == 0:
            return np.zeros_like(self.base.predict_time_history(gait))
        if orient < 0:
            return -self.base.predict_time_history(Gait.from_array(arr * [-1.0, -1.0, 1.0, -1.0]))
        return self.base.predict_time_history(gait)

    def __repr__(self):
        return f"SymmetricModel({self.base!r})"


# --------------------------------------------------------------------------
# Network weights
# --------------------------------------------------------------------------

def _check_norm(mean, std, dim):
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    if mean.shape != (dim,) or std.shape != (dim,):
        raise ConfigurationError(f"normalization needs {dim} means and stds, got {mean.shape} / {std.shape}")
    if np.any(std <= 0):
        raise ConfigurationError("normalization standard deviations must be positive")
    return mean, std


@dataclass(frozen=True, eq=False)
class LstmWeights:
    """LSTM with gates packed as [input, forget, cell, output] along the last axis."""

    kernel: np.ndarray  # (input_dim, 4 * hidden)
    recurrent_kernel: np.ndarray  # (hidden, 4 * hidden)
    bias: np.ndarray  # (4 * hidden,)
    output_kernel: np.ndarray  # (hidden,)
    output_bias: float
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        kernel = np.asarray(self.kernel, dtype=float)
        rec = np.asarray(self.recurrent_kernel, dtype=float)
        if kernel.ndim != 2 or rec.ndim != 2:
            raise ConfigurationError("kernel and recurrent_kernel must be 2-D")
        input_dim, four_h = kernel.shape
        hidden = rec.shape[0]
        if four_h != 4 * hidden or rec.shape != (hidden, 4 * hidden):
            raise ConfigurationError(
                f"inconsistent LSTM shapes: kernel {kernel.shape}, recurrent_kernel {rec.shape}"
            )
        bias = np.asarray(self.bias, dtype=float)
        if bias.shape != (4 * hidden,):
            raise ConfigurationError(f"bias must have shape ({4 * hidden},), got {bias.shape}")
        out_k = np.asarray(self.output_kernel, dtype=float).ravel()
        if out_k.shape != (hidden,):
            raise ConfigurationError(f"output_kernel must have {hidden} entries, got {out_k.shape}")
        mean, std = _check_norm(self.mean, self.std, input_dim)
        for name, value in (("kernel", kernel), ("recurrent_kernel", rec), ("bias", bias),
                            ("output_kernel", out_k), ("mean", mean), ("std", std)):
            object.__setattr__(self, name, value)
        object.__setattr__(self, "output_bias", float(self.output_bias))

    @property
    def input_dim(self) -> int:
        return self.kernel.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.recurrent_kernel.shape[0]


@dataclass(frozen=True, eq=False)
class DnnWeights:
    """Dense ReLU network; the last layer is linear with a single output."""

    kernels: tuple
    biases: tuple
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        kernels = tuple(np.asarray(k, dtype=float) for k in self.kernels)
        biases = tuple(np.asarray(b, dtype=float).ravel() for b in self.biases)
        if not kernels or len(kernels) != len(biases):
            raise ConfigurationError("DNN needs matching, non-empty kernel and bias lists")
        width = kernels[0].shape[0] if kernels[0].ndim == 2 else None
        for i, (k, b) in enumerate(zip(kernels, biases)):
            if k.ndim != 2 or k.shape[0] != width or b.shape != (k.shape[1],):
                raise ConfigurationError(f"layer {i}: kernel {k.shape} / bias {b.shape} do not chain")
            width = k.shape[1]
        if width != 1:
            raise ConfigurationError("DNN output layer must have exactly one unit")
        mean, std = _check_norm(self.mean, self.std, kernels[0].shape[0])
        object.__setattr__(self, "kernels", kernels)
        object.__setattr__(self, "biases", biases)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @property
    def input_dim(self) -> int:
        return self.kernels[0].shape[0]

    @property
    def layer_sizes(self) -> list:
        return [k.shape[1] for k in self.kernels]


# --------------------------------------------------------------------------
# Inference
# --------------------------------------------------------------------------

def _lstm_inputs(weights: LstmWeights, histories: np.ndarray, gaits: np.ndarray) -> np.ndarray:
    n, steps, _ = histories.shape
    x = np.empty((n, steps, LSTM_INPUT_DIM))
    x[:, :, :N_KINEMATICS] = gaits[:, None, :]
    x[:, :, N_KINEMATICS:] = histories
    return (x - weights.mean) / weights.std


def lstm_forward_batch(weights: LstmWeights, histories, gaits) -> np.ndarray:
    """Thrust time histories (n, steps) for stacked stroke/pitch histories (n, steps, 2)."""
    histories = np.asarray(histories, dtype=float)
    gaits = _as_gait_batch(gaits)
    if histories.ndim != 3 or histories.shape[2] != 2 or histories.shape[0] != gaits.shape[0]:
        raise ConfigurationError(f"histories must be (n, steps, 2) matching gaits, got {histories.shape}")
    if weights.input_dim != LSTM_INPUT_DIM:
        raise ConfigurationError(f"LSTM expects input_dim {LSTM_INPUT_DIM}, weights have {weights.input_dim}")
    x = _lstm_inputs(weights, histories, gaits)
    n, steps, _ = x.shape
    hidden = weights.hidden_dim
    projected = x @ weights.kernel + weights.bias
    # sigmoid(z) = 0.5 * (1 + tanh(z / 2)) lets all four gates share one tanh call
    pre_scale = np.full(4 * hidden, 0.5)
    pre_scale[2 * hidden:3 * hidden] = 1.0
    post_scale = pre_scale
    post_shift = np.where(pre_scale == 0.5, 0.5, 0.0)
    h = np.zeros((n, hidden))
    c = np.zeros((n, hidden))
    hs = np.empty((n, steps, hidden))
    rec = weights.recurrent_kernel
    for t in range(steps):
        z = projected[:, t, :] + h @ rec
        act = np.tanh(z * pre_scale) * post_scale + post_shift
        i = act[:, :hidden]
        f = act[:, hidden:2 * hidden]
        g = act[:, 2 * hidden:3 * hidden]
        o = act[:, 3 * hidden:]
        c = f * c + i * g
        h = o * np.tanh(c)
        hs[:, t, :] = h
    return hs @ weights.output_kernel + weights.output_bias


def lstm_forward(weights: LstmWeights, history: TimeHistory, gait: Gait) -> np.ndarray:
    """Per-step thrust (N) for one gait and its stroke/pitch time history.

    The input at each step is the z-scored vector of the four static
    kinematics followed by the stroke and pitch angle at that step. Hidden
    and cell states start at zero.
    """
    return lstm_forward_batch(weights, history.points[None], gait.as_array()[None])[0]


def dnn_forward_batch(weights: DnnWeights, gaits) -> np.ndarray:
    g = _as_gait_batch(gaits)
    if weights.input_dim != N_KINEMATICS:
        raise ConfigurationError(f"DNN expects input_dim {N_KINEMATICS}, weights have {weights.input_dim}")
    a = (g - weights.mean) / weights.std
    last = len(weights.kernels) - 1
    for i, (k, b) in enumerate(zip(weights.kernels, weights.biases)):
        a = a @ k + b
        if i < last:
            a = np.maximum(a, 0.0)
    return a[:, 0]


def dnn_forward(weights: DnnWeights, gait: Gait) -> float:
    return float(dnn_forward_batch(weights, gait.as_array()[None])[0])


class LstmForwardModel(ForwardModel):
    def __init__(self, weights: LstmWeights, motor: MotorLimits | None = None,
                 samples_per_cycle: int = DEFAULT_SAMPLES_PER_CYCLE):
        self.weights = weights
        self.motor = motor or MotorLimits()
        self.samples_per_cycle = samples_per_cycle

    def thrust_histories(self, gaits) -> np.ndarray:
        g = _as_gait_batch(gaits)
        histories = generate_time_histories(g, self.motor, self.samples_per_cycle)
        return lstm_forward_batch(self.weights, histories, g)

    def predict(self, gaits) -> np.ndarray:
        return np.mean(self.thrust_histories(gaits), axis=1)

    def predict_time_history(self, gait: Gait) -> np.ndarray:
        return self.thrust_histories(gait.as_array()[None])[0]

    def __repr__(self):
        return f"LstmForwardModel(hidden_dim={self.weights.hidden_dim}, motor={self.motor})"


class DnnForwardModel(ForwardModel):
    def __init__(self, weights: DnnWeights):
        self.weights = weights

    def predict(self, gaits) -> np.ndarray:
        return dnn_forward_batch(self.weights, gaits)

    def __repr__(self):
        return f"DnnForwardModel(layers={self.weights.layer_sizes})"


# --------------------------------------------------------------------------
# Weight files
# --------------------------------------------------------------------------

def _encode(arr) -> dict:
    arr = np.asarray(arr, dtype=float)
    return {"shape": list(arr.shape), "data": arr.ravel().tolist()}


def _decode(entry, name) -> np.ndarray:
    try:
        shape = tuple(int(s) for s in entry["shape"])
        data = np.asarray(entry["data"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"array {name!r} needs 'shape' and numeric 'data'") from exc
    if data.size != math.prod(shape):
        raise ConfigurationError(f"array {name!r}: {data.size} values do not fill shape {shape}")
    if not np.all(np.isfinite(data)):
        raise ConfigurationError(f"array {name!r} contains non-finite values")
    return data.reshape(shape)


def weights_to_dict(weights) -> dict:
    norm = {"mean": weights.mean.tolist(), "std": weights.std.tolist()}
    if isinstance(weights, LstmWeights):
        return {
            "format_version": FORMAT_VERSION,
            "kind": "lstm",
            "input_dim": weights.input_dim,
            "hidden_dim": weights.hidden_dim,
            "gate_order": "ifco",
            "normalization": norm,
            "kernel": _encode(weights.kernel),
            "recurrent_kernel": _encode(weights.recurrent_kernel),
            "bias": _encode(weights.bias),
            "output_kernel": _encode(weights.output_kernel),
            "output_bias": _encode([weights.output_bias]),
        }
    if isinstance(weights, DnnWeights):
        return {
            "format_version": FORMAT_VERSION,
            "kind": "dnn",
            "input_dim": weights.input_dim,
            "layers": [{"kernel": _encode(k), "bias": _encode(b)} for k, b in zip(weights.kernels, weights.biases)],
            "normalization": norm,
        }
    raise TypeError(f"cannot serialize {type(weights).__name__}")


def weights_from_dict(doc: dict):
    if not isinstance(doc, dict):
        raise ConfigurationError("weight document must be a JSON object")
    if doc.get("format_version") != FORMAT_VERSION:
        raise ConfigurationError(f"unsupported format_version {doc.get('format_version')!r}")
    try:
        norm = doc["normalization"]
        mean, std = norm["mean"], norm["std"]
        input_dim = int(doc["input_dim"])
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"weight document missing field: {exc}") from exc
    kind = doc.get("kind")
    if kind == "lstm":
        if doc.get("gate_order", "ifco") != "ifco":
            raise ConfigurationError("only gate_order 'ifco' is supported")
        try:
            weights = LstmWeights(
                kernel=_decode(doc["kernel"], "kernel"),
                recurrent_kernel=_decode(doc["recurrent_kernel"], "recurrent_kernel"),
                bias=_decode(doc["bias"], "bias"),
                output_kernel=_decode(doc["output_kernel"], "output_kernel"),
                output_bias=float(_decode(doc["output_bias"], "output_bias").ravel()[0]),
                mean=mean,
                std=std,
            )
        except KeyError as exc:
            raise ConfigurationError(f"LSTM weight document missing array {exc}") from exc
        if weights.hidden_dim != int(doc.get("hidden_dim", -1)):
            raise ConfigurationError(f"hidden_dim {doc.get('hidden_dim')} does not match arrays ({weights.hidden_dim})")
    elif kind == "dnn":
        try:
            layers = doc["layers"]
            kernels = [_decode(layer["kernel"], f"layers[{i}].kernel") for i, layer in enumerate(layers)]
            biases = [_decode(layer["bias"], f"layers[{i}].bias") for i, layer in enumerate(layers)]
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"DNN weight document malformed: {exc}") from exc
        weights = DnnWeights(tuple(kernels), tuple(biases), mean, std)
    else:
        raise ConfigurationError(f"unknown weight kind {kind!r}")
    if weights.input_dim != input_dim:
        raise ConfigurationError(f"input_dim {input_dim} does not match arrays ({weights.input_dim})")
    return weights


def load_weights(path):
    """Read and shape-check an LSTM or DNN weight file."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: not valid JSON ({exc})") from exc
    return weights_from_dict(doc)


def save_weights(weights, path) -> None:
    Path(path).write_text(json.dumps(weights_to_dict(weights)))


def load_model(weights, motor: MotorLimits | None = None) -> ForwardModel:
    if isinstance(weights, (str, Path)):
        weights = load_weights(weights)
    if isinstance(weights, LstmWeights):
        return LstmForwardModel(weights, motor)
    return DnnForwardModel(weights)


# Rough location/scale of the inputs over the experimental grid; used for
# the z-scoring record of generated weights.
_INPUT_MEAN = np.array([27.8, 28.3, 1.375, 0.03125, 0.0, 0.0])
_INPUT_STD = np.array([17.5, 17.0, 0.43, 0.07, 20.0, 20.0])


def random_lstm_weights(seed=0, hidden_dim=100, scale=0.15) -> LstmWeights:
    """Seeded untrained LSTM weights for inference-equivalence and timing checks."""
    rng = np.random.default_rng(seed)
    h4 = 4 * hidden_dim
    return LstmWeights(
        kernel=rng.uniform(-scale, scale, (LSTM_INPUT_DIM, h4)),
        recurrent_kernel=rng.uniform(-scale, scale, (hidden_dim, h4)),
        bias=rng.uniform(-scale, scale, h4),
        output_kernel=rng.uniform(-scale, scale, hidden_dim),
        output_bias=0.6,
        mean=_INPUT_MEAN.copy(),
        std=_INPUT_STD.copy(),
    )


def random_dnn_weights(seed=0, layers=(100, 100, 100), scale=0.2) -> DnnWeights:
    rng = np.random.default_rng(seed)
    sizes = [N_KINEMATICS, *layers, 1]
    kernels = tuple(rng.uniform(-scale, scale, (a, b)) for a, b in zip(sizes[:-1], sizes[1:]))
    biases = tuple(rng.uniform(-scale, scale, b) for b in sizes[1:])
    return DnnWeights(kernels, biases, _INPUT_MEAN[:N_KINEMATICS].copy(), _INPUT_STD[:N_KINEMATICS].copy())
