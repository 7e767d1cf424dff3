"""On-line TD(lambda) with accumulating eligibility traces."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import ValidationError
from .mrp import ValueVector
from .validation import check_gamma, check_lambda, check_states, check_stream


def _alpha_rule(alpha):
    if isinstance(alpha, str):
        if alpha != "harmonic":
            raise ValidationError(f"unknown step-size rule {alpha!r}")
        return lambda k: 1.0 / k
    if callable(alpha):
        return alpha
    a = float(alpha)
    if not 0.0 < a <= 1.0:
        raise ValidationError(f"alpha must lie in (0, 1], got {a}")
    return lambda k: a


def td_lambda(stream, n, gamma, lam, alpha=0.5, return_state=False):
    """Value estimates from one pass of TD(lambda) over ``stream``.

    ``alpha`` is a constant step size, ``"harmonic"`` (1/k at the k-th
    step) or a callable of k.  Estimates start at zero and traces reset
    at every trajectory boundary.
    """
    stream = check_stream(stream)
    gamma, lam = check_gamma(gamma), check_lambda(lam)
    step_size = _alpha_rule(alpha)
    if len(stream) and max(stream.states.max(), stream.next_states.max()) >= n:
        raise ValidationError(f"stream references a state outside [0, {n})")
    v = np.zeros(n)
    e = np.zeros(n)
    decay = gamma * lam
    delta = 0.0
    reset = stream.boundaries()
    rows = zip(stream.states.tolist(), stream.rewards.tolist(),
               stream.next_states.tolist(), reset.tolist())
    for k, (s, r, m, end) in enumerate(rows, start=1):
        delta = r + gamma * v[m] - v[s]
        e[s] += 1.0
        v += step_size(k) * delta * e
        if end:
            e[:] = 0.0
        else:
            e *= decay
    visited = np.zeros(n, bool)
    visited[stream.states] = True
    result = ValueVector(v, visited)
    if return_state:
        return result, e, delta
    return result


class TDLambda(BaseEstimator):
    """sklearn-style wrapper around :func:`td_lambda`.

    ``fit`` takes a step stream; ``predict`` maps state indices to values.
    """

    def __init__(self, gamma=0.8, lam=0.9, alpha=0.5, n_states=None):
        self.gamma = gamma
        self.lam = lam
        self.alpha = alpha
        self.n_states = n_states

    def fit(self, X, y=None):
        X = check_stream(X)
        n = self.n_states
        if n is None:
            n = int(max(X.states.max(), X.next_states.max())) + 1 if len(X) else 0
        self.value_, self.traces_, self.delta_last_ = td_lambda(
            X, n, self.gamma, self.lam, self.alpha, return_state=True)
        self.n_states_ = n
        return self

    def predict(self, states):
        check_is_fitted(self, "value_")
        return self.value_.filled()[check_states(states, self.n_states_)]
