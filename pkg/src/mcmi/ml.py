"""Maximum-likelihood (certainty-equivalence) policy evaluation."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import ValidationError
from .mrp import ValueVector, dense_solve
from .validation import check_gamma, check_states, check_stream


class MlModel:
    """Visit and transition counts plus reward sums.

    Counts are held in a dense n x n array, so storage is quadratic in n.
    """

    def __init__(self, n):
        if n < 1:
            raise ValidationError("state count must be positive")
        self.n = int(n)
        self.transition_counts = np.zeros((n, n), np.int64)
        self.state_counts = np.zeros(n, np.int64)
        self.reward_sums = np.zeros(n)

    def update(self, step) -> "MlModel":
        s, r, m = int(step[0]), float(step[1]), int(step[2])
        if not (0 <= s < self.n and 0 <= m < self.n):
            raise IndexError(f"step ({s} -> {m}) outside [0, {self.n})")
        self.transition_counts[s, m] += 1
        self.state_counts[s] += 1
        self.reward_sums[s] += r
        return self

    def update_many(self, stream) -> "MlModel":
        stream = check_stream(stream)
        if not len(stream):
            return self
        if max(stream.states.max(), stream.next_states.max()) >= self.n:
            raise IndexError(f"stream references a state outside [0, {self.n})")
        np.add.at(self.transition_counts, (stream.states, stream.next_states), 1)
        self.state_counts += np.bincount(stream.states, minlength=self.n)
        # sequential accumulation keeps sums identical to repeated update()
        np.add.at(self.reward_sums, stream.states, stream.rewards)
        return self

    @property
    def visited(self) -> np.ndarray:
        return self.state_counts > 0

    def p_hat(self) -> np.ndarray:
        """Estimated transition matrix; unvisited rows are NaN (undefined)."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.transition_counts / self.state_counts[:, None]

    def r_hat(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.reward_sums / self.state_counts


def ml_update(model: MlModel, step) -> MlModel:
    return model.update(step)


def ml_value(model: MlModel, gamma) -> ValueVector:
    """Solve (I - gamma P_hat) v = r_hat.

    Unvisited states get a zero-reward self-loop, hence value 0, and are
    left out of the visited mask.
    """
    gamma = check_gamma(gamma)
    visited = model.visited
    if not visited.any():
        raise ValidationError("model has no visited states")
    P = model.p_hat()
    r = model.r_hat()
    idle = np.flatnonzero(~visited)
    P[idle] = 0.0
    P[idle, idle] = 1.0
    r[idle] = 0.0
    v = dense_solve(np.eye(model.n) - gamma * P, r)
    return ValueVector(v, visited)


class MaximumLikelihood(BaseEstimator):

    def __init__(self, gamma=0.8, n_states=None):
        self.gamma = gamma
        self.n_states = n_states

    def fit(self, X, y=None):
        X = check_stream(X)
        if not len(X):
            raise ValidationError("cannot fit on an empty stream")
        n = self.n_states or int(max(X.states.max(), X.next_states.max())) + 1
        self.model_ = MlModel(n).update_many(X)
        self.value_ = ml_value(self.model_, self.gamma)
        return self

    def partial_fit(self, X, y=None):
        X = check_stream(X)
        if not hasattr(self, "model_"):
            if self.n_states is None:
                raise ValidationError("partial_fit needs n_states")
            self.model_ = MlModel(self.n_states)
        self.model_.update_many(X)
        self.value_ = ml_value(self.model_, self.gamma)
        return self

    def predict(self, states):
        check_is_fitted(self, "value_")
        return self.value_.filled()[check_states(states, self.model_.n)]
