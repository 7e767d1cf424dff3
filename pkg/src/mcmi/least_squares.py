"""Linear value-function approximation: LSTD(lambda) and least-squares MCMI."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import RankDeficientError, SingularSystemError, ValidationError
from .features import FeatureMatrix, parse_features
from .montecarlo import VisitedSet, mcmi_walk_estimates
from .mrp import dense_solve
from .rng import as_stream
from .validation import check_gamma, check_lambda, check_sampler, check_states, check_stream, \
    resolve_gamma


@dataclass(frozen=True, eq=False)
class WeightVector:
    w: np.ndarray
    residual: np.ndarray = None

    def __post_init__(self):
        if not np.all(np.isfinite(self.w)):
            raise ValidationError("weights must be finite")


def fit_weights(phi_m, v_m, sample_weight=None) -> WeightVector:
    """Least-squares w minimising ||phi_m w - v_m||, via the normal equations."""
    phi_m = np.asarray(phi_m, dtype=np.float64)
    v_m = np.asarray(v_m, dtype=np.float64)
    if phi_m.ndim != 2 or v_m.shape != (phi_m.shape[0],):
        raise ValidationError("phi_m must be m x k and v_m length m")
    m, k = phi_m.shape
    if m < k:
        raise RankDeficientError(f"{m} visited states cannot determine {k} weights", rank=m)
    rank = int(np.linalg.matrix_rank(phi_m))
    if rank < k:
        raise RankDeficientError(f"feature rows over visited states have rank {rank} < k = {k}",
                                 rank=rank)
    if sample_weight is None:
        a, y = phi_m, v_m
    else:
        sw = np.sqrt(np.asarray(sample_weight, dtype=np.float64))
        a, y = phi_m * sw[:, None], v_m * sw
    w = dense_solve(a.T @ a, a.T @ y)
    return WeightVector(w, v_m - phi_m @ w)


def lstd_evaluate(stream, features: FeatureMatrix, gamma, lam=0.0):
    """LSTD(lambda) weights and the value map n -> phi(n) . w.

    Eligibility z <- gamma lam z + phi(s_t) resets after each trajectory;
    A = sum z (phi(s_t) - gamma phi(s_t+1))^T and b = sum z r_t.
    """
    stream = check_stream(stream)
    gamma, lam = check_gamma(gamma), check_lambda(lam)
    if not len(stream):
        raise ValidationError("LSTD needs a nonempty stream")
    phi = features.rows(stream.states)
    phi_next = features.rows(stream.next_states)
    if lam == 0.0:
        z = phi
    else:
        z = np.empty_like(phi)
        trace = np.zeros(features.k)
        decay = gamma * lam
        reset = stream.boundaries()
        for t in range(len(stream)):
            trace = decay * trace + phi[t]
            z[t] = trace
            if reset[t]:
                trace = np.zeros(features.k)
    A = z.T @ (phi - gamma * phi_next)
    b = z.T @ stream.rewards
    rank = int(np.linalg.matrix_rank(A))
    if rank < features.k:
        raise RankDeficientError(
            f"LSTD matrix has rank {rank} < k = {features.k}; reduce k or sample more", rank=rank)
    try:
        w = dense_solve(A, b)
    except SingularSystemError as exc:
        raise RankDeficientError(str(exc), rank=rank) from exc
    weights = WeightVector(w)
    return weights, lambda states: features.rows(np.atleast_1d(states)) @ w


@dataclass(frozen=True, eq=False)
class LsMcmiResult:
    weights: WeightVector
    visited: VisitedSet
    estimates: np.ndarray   # v_M, per visited position
    starts: np.ndarray
    stats: object


def ls_mcmi_evaluate(sampler, features: FeatureMatrix, gamma=None, total_steps=20000, rng=0,
                     weighted=False, min_starts=0) -> LsMcmiResult:
    """MCMI over visited states followed by a least-squares fit of feature weights.

    ``weighted`` scales each visited state by its sub-walk count in the fit;
    states with fewer than ``min_starts`` sub-walks are left out.
    """
    res = mcmi_walk_estimates(sampler, gamma, total_steps, as_stream(rng))
    keep = res.starts >= max(int(min_starts), 1)
    states = res.visited.as_array()[keep]
    phi_m = features.rows(states)
    weights = fit_weights(phi_m, res.estimates[keep], res.starts[keep] if weighted else None)
    return LsMcmiResult(weights, res.visited, res.estimates, res.starts, res.stats)


class _LinearValueMixin:

    def predict(self, states):
        check_is_fitted(self, "coef_")
        return self.features_.rows(check_states(states)) @ self.coef_


class LSTD(_LinearValueMixin, BaseEstimator):

    def __init__(self, gamma=0.8, lam=0.0, features="identity", n_states=None, random_state=None):
        self.gamma = gamma
        self.lam = lam
        self.features = features
        self.n_states = n_states
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_stream(X)
        n = self.n_states
        if n is None and len(X):
            n = int(max(X.states.max(), X.next_states.max())) + 1
        self.features_ = parse_features(self.features, n, as_stream(self.random_state).seed)
        self.weights_, _ = lstd_evaluate(X, self.features_, self.gamma, self.lam)
        self.coef_ = self.weights_.w
        return self


class LSMCMI(_LinearValueMixin, BaseEstimator):

    def __init__(self, gamma=None, n_steps=20000, features="identity", weighted=False,
                 min_starts=0, random_state=None):
        self.gamma = gamma
        self.n_steps = n_steps
        self.features = features
        self.weighted = weighted
        self.min_starts = min_starts
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_sampler(X)
        rs = as_stream(self.random_state)
        self.features_ = parse_features(self.features, X.n_states, rs.seed)
        self.result_ = ls_mcmi_evaluate(X, self.features_, resolve_gamma(self.gamma, X),
                                        self.n_steps, rs, self.weighted, self.min_starts)
        self.coef_ = self.result_.weights.w
        self.visited_ = self.result_.visited
        return self

    @property
    def walks_completed_(self):
        return self.result_.stats.walks

    @property
    def mean_walk_length_(self):
        return self.result_.stats.mean_walk_length
