"""Monte Carlo matrix inversion (MCMI) value estimation.

Each walk starts at a uniformly drawn state and continues with
probability gamma per step.  Every visit opens a sub-walk that ends where
the walk ends, so on termination each visited state is credited the
reward observed at the terminal state once per visit.  The estimate for
state n is (credited reward) / ((1 - gamma) * (sub-walks started at n)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import ValidationError
from .mrp import Mrp, ValueVector
from .rng import SAMPLING, RngStream, as_stream
from .validation import check_sampler, check_states, resolve_gamma


class VisitedSet:
    """Insertion-ordered set of states with dense positions 0..m-1."""

    def __init__(self, states=()):
        self.states = []
        self._pos = {}
        for s in states:
            self.add(s)

    def add(self, state) -> int:
        pos = self._pos.get(state)
        if pos is None:
            pos = self._pos[state] = len(self.states)
            self.states.append(state)
        return pos

    def position(self, state) -> int:
        return self._pos[state]

    def __contains__(self, state):
        return state in self._pos

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    def as_array(self) -> np.ndarray:
        return np.array(self.states, dtype=np.int64)


@dataclass
class WalkAccumulators:
    """Per-walk visit counts ``t`` plus running sub-walk starts ``s`` and credit ``v``.

    All three are indexed by visited-set position and grow with it.
    """

    t: list
    s: list
    v: list

    @classmethod
    def empty(cls):
        return cls([], [], [])

    def grow(self, size):
        while len(self.s) < size:
            self.t.append(0)
            self.s.append(0)
            self.v.append(0.0)

    def commit(self, path, reward):
        for p in path:
            self.t[p] += 1
        for p in dict.fromkeys(path):
            c = self.t[p]
            self.s[p] += c
            self.v[p] += reward * c
            self.t[p] = 0


@dataclass
class WalkStats:
    walks: int
    visits: int

    @property
    def mean_walk_length(self) -> float:
        """Average number of transitions per walk."""
        return (self.visits - self.walks) / self.walks if self.walks else 0.0


def _walks(sampler, gamma, total_steps, src, visited, acc, on_walk=None):
    """Run walks until ``total_steps`` state visits have been sampled.

    A walk ends when the continue draw exceeds gamma, when it enters an
    absorbing state, or when the budget runs out (it then stops where it
    is).
    """
    visits = walks = 0
    is_absorbing, next_state = sampler.is_absorbing, sampler.next_state
    rand = src.random
    while visits < total_steps:
        state = sampler.initial_state(src)
        path = []
        while True:
            path.append(visited.add(state))
            visits += 1
            if is_absorbing(state) or visits >= total_steps or rand() > gamma:
                break
            state = next_state(state, rand())
        reward = sampler.reward(state, src)
        acc.grow(len(visited))
        acc.commit(path, reward)
        walks += 1
        if on_walk is not None:
            on_walk(path, reward, acc)
    return WalkStats(walks, visits)


def _finalize(acc, gamma):
    s = np.asarray(acc.s, dtype=np.float64)
    v = np.asarray(acc.v, dtype=np.float64)
    est = np.zeros(len(s))
    ok = s > 0
    est[ok] = v[ok] / ((1.0 - gamma) * s[ok])
    return est, s.astype(np.int64)


@dataclass(frozen=True, eq=False)
class McmiResult:
    visited: VisitedSet
    estimates: np.ndarray      # per visited position
    starts: np.ndarray         # s(n) per visited position
    stats: WalkStats


def mcmi_walk_estimates(sampler, gamma, total_steps, rng, on_walk=None) -> McmiResult:
    """MCMI restricted to visited states; storage grows with the visited count only."""
    if int(total_steps) < 1:
        raise ValidationError("total_steps must be at least 1")
    sampler = check_sampler(sampler)
    gamma = resolve_gamma(gamma, sampler)
    src = as_stream(rng).uniforms(SAMPLING) if not hasattr(rng, "random") else rng
    visited = VisitedSet()
    acc = WalkAccumulators.empty()
    stats = _walks(sampler, gamma, int(total_steps), src, visited, acc, on_walk)
    est, starts = _finalize(acc, gamma)
    return McmiResult(visited, est, starts, stats)


def mcmi_evaluate(sampler, gamma=None, total_steps=20000, rng=RngStream(0), on_walk=None,
                  return_result=False):
    """Length-n value estimates; states never started from are unvisited (0)."""
    res = mcmi_walk_estimates(sampler, gamma, total_steps, rng, on_walk)
    n = sampler.n_states
    values = np.zeros(n)
    mask = np.zeros(n, bool)
    idx = res.visited.as_array()
    values[idx] = res.estimates
    mask[idx] = res.starts > 0
    vv = ValueVector(values, mask)
    return (vv, res) if return_result else vv


def mcmi_single_state(sampler, state, gamma=None, num_walks=1000, rng=RngStream(0),
                      return_std=False):
    """Value of one state from walks that all start there.

    Returns mean terminal reward / (1 - gamma); no other state is
    estimated.  ``return_std`` adds the standard error.
    """
    sampler = check_sampler(sampler)
    gamma = resolve_gamma(gamma, sampler)
    num_walks = int(num_walks)
    if num_walks < 1:
        raise ValidationError("num_walks must be at least 1")
    if not 0 <= state < sampler.n_states:
        raise ValidationError(f"state {state} outside [0, {sampler.n_states})")
    rng = as_stream(rng) if not hasattr(rng, "random") else rng
    if isinstance(sampler, Mrp) and isinstance(rng, RngStream):
        rewards = _terminal_rewards_batched(sampler, state, gamma, num_walks, rng.generator(SAMPLING))
    else:
        src = rng.uniforms(SAMPLING) if isinstance(rng, RngStream) else rng
        rewards = np.empty(num_walks)
        for k in range(num_walks):
            cur = state
            while not sampler.is_absorbing(cur) and src.random() <= gamma:
                cur = sampler.next_state(cur, src.random())
            rewards[k] = sampler.reward(cur, src)
    scale = 1.0 / (1.0 - gamma)
    est = rewards.mean() * scale
    if not return_std:
        return float(est)
    se = rewards.std(ddof=1) / np.sqrt(num_walks) * scale if num_walks > 1 else 0.0
    return float(est), float(se)


def _terminal_rewards_batched(mrp, state, gamma, num_walks, gen):
    absorbing = np.zeros(mrp.n, bool)
    absorbing[list(mrp.absorbing)] = True
    cur = np.full(num_walks, state, np.int64)
    active = np.arange(num_walks)
    while len(active):
        x = gen.random(len(active))
        go = (x <= gamma) & ~absorbing[cur[active]]
        active = active[go]
        if len(active):
            cur[active] = mrp.transitions.next_states(cur[active], gen.random(len(active)))
    return np.asarray(mrp.rewards.sample_many(cur, gen), dtype=np.float64)


def mcmi_variance_pred(inverse_entry, gamma):
    """Variance of the per-walk statistic for one entry of (I - gamma P)^-1.

    entry / (1 - gamma) - entry**2, at most 1 / (4 (1 - gamma)**2).
    """
    gamma = float(gamma)
    x = float(inverse_entry)
    hi = 1.0 / (1.0 - gamma)
    if not 0.0 <= x <= hi * (1 + 1e-12):
        raise ValidationError(f"inverse entry {x} outside [0, {hi}]")
    return x * hi - x * x


class MCMI(BaseEstimator):
    """MCMI policy evaluation with a sampler as input.

    ``fit(X)`` runs walks on ``X`` (an ``Mrp`` or ``ProceduralMrp``);
    ``predict`` returns estimates, 0 for states never visited.
    """

    def __init__(self, gamma=None, n_steps=20000, random_state=None):
        self.gamma = gamma
        self.n_steps = n_steps
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_sampler(X)
        self.result_ = mcmi_walk_estimates(X, self.gamma, self.n_steps, as_stream(self.random_state))
        self.gamma_ = resolve_gamma(self.gamma, X)
        self.visited_ = self.result_.visited
        self.n_states_ = X.n_states
        return self

    @property
    def walks_completed_(self):
        return self.result_.stats.walks

    @property
    def mean_walk_length_(self):
        return self.result_.stats.mean_walk_length

    def value_vector(self) -> ValueVector:
        check_is_fitted(self, "result_")
        values = np.zeros(self.n_states_)
        mask = np.zeros(self.n_states_, bool)
        idx = self.visited_.as_array()
        values[idx] = self.result_.estimates
        mask[idx] = self.result_.starts > 0
        return ValueVector(values, mask)

    def predict(self, states):
        check_is_fitted(self, "result_")
        states = check_states(states, self.n_states_)
        est = self.result_.estimates
        out = np.zeros(len(states))
        for k, s in enumerate(states.tolist()):
            if s in self.visited_:
                out[k] = est[self.visited_.position(s)]
        return out
