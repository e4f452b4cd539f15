"""scikit-learn style wrappers over the functional core.

Forward models become regressors from an (n, 4) gait matrix to mean thrust,
the step-size normalization becomes a transformer, and the inverse search
becomes an estimator whose ``predict`` maps (target thrust, current gait)
rows to proposed gaits. None of them learn anything; ``fit`` validates the
inputs and records ``n_features_in_`` so the objects compose with sklearn
pipelines, ``clone`` and ``get_params``.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .forward_model import DnnForwardModel, LstmForwardModel, SyntheticSurrogate
from .kinematics import N_KINEMATICS, Gait, KinematicSpace, MotorLimits
from .loss import LossWeights
from .search import METHODS, InverseRequest, SearchConfig, propose_gait


def _check_gaits(X):
    X = check_array(X, dtype=np.float64, ensure_min_samples=1)
    if X.shape[1] != N_KINEMATICS:
        raise ValueError(f"expected {N_KINEMATICS} gait columns, got {X.shape[1]}")
    return X


class GaitNormalizer(TransformerMixin, BaseEstimator):
    """Divides each kinematic by its equivalent step size."""

    def __init__(self, step_sizes=(10.0, 10.0, 0.25, 0.0625)):
        self.step_sizes = step_sizes

    def fit(self, X, y=None):
        _check_gaits(X)
        steps = np.asarray(self.step_sizes, dtype=float)
        if steps.shape != (N_KINEMATICS,) or np.any(steps <= 0):
            raise ValueError("step_sizes must be four positive numbers")
        self.scale_ = steps
        self.n_features_in_ = N_KINEMATICS
        return self

    def transform(self, X):
        check_is_fitted(self, "scale_")
        return _check_gaits(X) / self.scale_

    def inverse_transform(self, X):
        check_is_fitted(self, "scale_")
        return _check_gaits(X) * self.scale_


class _ThrustRegressor(RegressorMixin, BaseEstimator):
    def _build(self):
        raise NotImplementedError

    def fit(self, X, y=None):
        _check_gaits(X)
        self.model_ = self._build()
        self.n_features_in_ = N_KINEMATICS
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return self.model_.predict(_check_gaits(X))


class SyntheticThrustRegressor(_ThrustRegressor):
    """Mean thrust from the closed-form surrogate."""

    def __init__(self, gain=2.25):
        self.gain = gain

    def _build(self):
        return SyntheticSurrogate(gain=self.gain)


class LstmThrustRegressor(_ThrustRegressor):
    """Mean thrust from LSTM weights applied to simulated motor histories."""

    def __init__(self, weights=None, max_velocity=400.0, max_acceleration=4000.0, samples_per_cycle=50):
        self.weights = weights
        self.max_velocity = max_velocity
        self.max_acceleration = max_acceleration
        self.samples_per_cycle = samples_per_cycle

    def _build(self):
        if self.weights is None:
            raise ValueError("LstmThrustRegressor needs weights")
        return LstmForwardModel(self.weights, MotorLimits(self.max_velocity, self.max_acceleration),
                                self.samples_per_cycle)


class DnnThrustRegressor(_ThrustRegressor):
    def __init__(self, weights=None):
        self.weights = weights

    def _build(self):
        if self.weights is None:
            raise ValueError("DnnThrustRegressor needs weights")
        return DnnForwardModel(self.weights)


class InverseGaitModel(BaseEstimator):
    """Proposes the next gait for a thrust target.

    ``predict`` takes rows ``[target_thrust, stroke, pitch, frequency,
    offset]`` and returns one proposed gait row each; rows are independent.
    ``predict_sequence`` chains requests, feeding each proposal forward as
    the next current gait.
    """

    def __init__(self, method="gps", thrust_weight=1.0, forward_model=None, space=None,
                 search_config=None, seed=0):
        self.method = method
        self.thrust_weight = thrust_weight
        self.forward_model = forward_model
        self.space = space
        self.search_config = search_config
        self.seed = seed

    def fit(self, X=None, y=None):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        self.weights_ = LossWeights.from_thrust_weight(self.thrust_weight)
        self.model_ = self.forward_model if self.forward_model is not None else SyntheticSurrogate()
        self.space_ = self.space if self.space is not None else KinematicSpace()
        self.config_ = self.search_config if self.search_config is not None else SearchConfig()
        self.n_features_in_ = 1 + N_KINEMATICS
        return self

    def _config(self, index):
        return replace(self.config_, rng_seed=self.seed * 1_000_000 + index)

    def propose(self, target_thrust, current_gait: Gait, index=0):
        """Full :class:`SearchResult` for a single request."""
        check_is_fitted(self, "model_")
        request = InverseRequest(float(target_thrust), current_gait, self.weights_)
        return propose_gait(request, self.method, self._config(index), self.model_, self.space_)

    def predict(self, X):
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != 1 + N_KINEMATICS:
            raise ValueError(f"expected {1 + N_KINEMATICS} columns (target, gait), got {X.shape[1]}")
        return np.array([self.propose(row[0], Gait.from_array(row[1:]), i).proposed_gait.as_array()
                         for i, row in enumerate(X)])

    def predict_sequence(self, targets, initial_gait: Gait):
        targets = check_array(np.asarray(targets, dtype=float).reshape(-1, 1)).ravel()
        gait = initial_gait
        out = []
        for i, t in enumerate(targets):
            gait = self.propose(t, gait, i).proposed_gait
            out.append(gait.as_array())
        return np.array(out)
