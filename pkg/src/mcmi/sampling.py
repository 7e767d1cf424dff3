"""Trajectory sampling under the two restart strategies."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .exceptions import ValidationError
from .mrp import Mrp
from .rng import SAMPLING, RngStream, UniformSource


class StepRecord(NamedTuple):
    state: int
    reward: float
    next_state: int
    trajectory_id: int
    is_trajectory_end: bool


class SamplingStrategy(str, enum.Enum):
    ABSORBING_RESTARTS = "absorbing_restarts"
    SINGLE_RANDOM_WALK = "single_random_walk"


@dataclass(frozen=True, eq=False)
class StepStream:
    """Column-oriented sequence of ``StepRecord``s."""

    states: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    trajectory_ids: np.ndarray
    ends: np.ndarray

    def __len__(self):
        return len(self.states)

    def __iter__(self) -> Iterator[StepRecord]:
        cols = (self.states.tolist(), self.rewards.tolist(), self.next_states.tolist(),
                self.trajectory_ids.tolist(), self.ends.tolist())
        return (StepRecord(*rec) for rec in zip(*cols))

    def __getitem__(self, k) -> StepRecord:
        return StepRecord(int(self.states[k]), float(self.rewards[k]), int(self.next_states[k]),
                          int(self.trajectory_ids[k]), bool(self.ends[k]))

    @classmethod
    def from_records(cls, records) -> "StepStream":
        records = list(records)
        if not records:
            return cls(np.zeros(0, np.int64), np.zeros(0), np.zeros(0, np.int64),
                       np.zeros(0, np.int64), np.zeros(0, bool))
        s, r, m, tid, end = zip(*records)
        return cls(np.array(s, np.int64), np.array(r, np.float64), np.array(m, np.int64),
                   np.array(tid, np.int64), np.array(end, bool))

    def boundaries(self) -> np.ndarray:
        """Boolean mask: True where the trace/eligibility state must reset after the step."""
        after = self.ends.copy()
        if len(self) > 1:
            after[:-1] |= self.trajectory_ids[1:] != self.trajectory_ids[:-1]
        return after


def check_stream(stream) -> StepStream:
    """Coerce to a ``StepStream`` and verify that trajectories chain."""
    if not isinstance(stream, StepStream):
        stream = StepStream.from_records(stream)
    if len(stream) == 0:
        return stream
    if np.any(stream.states < 0) or np.any(stream.next_states < 0):
        raise ValidationError("negative state index in stream")
    same = (stream.trajectory_ids[1:] == stream.trajectory_ids[:-1]) & ~stream.ends[:-1]
    broken = same & (stream.next_states[:-1] != stream.states[1:])
    if np.any(broken):
        k = int(np.flatnonzero(broken)[0])
        raise ValidationError(
            f"stream breaks at record {k}: next_state {stream.next_states[k]} "
            f"but record {k + 1} starts in {stream.states[k + 1]} without a trajectory end")
    return stream


def sample_step(mrp, state: int, src: UniformSource) -> tuple[int, float]:
    """One transition from ``state``: successor first, then the reward at ``state``."""
    if not 0 <= state < mrp.n_states:
        raise IndexError(f"state {state} outside [0, {mrp.n_states})")
    nxt = mrp.next_state(state, src.random())
    return nxt, mrp.reward(state, src)


def _restart_states(mrp):
    if isinstance(mrp, Mrp):
        return np.arange(mrp.n)
    return np.asarray(mrp.reachable)


def check_strategy(mrp, strategy) -> SamplingStrategy:
    strategy = SamplingStrategy(strategy)
    states = _restart_states(mrp)
    absorbing = [s for s in states.tolist() if mrp.is_absorbing(s)]
    if strategy is SamplingStrategy.ABSORBING_RESTARTS:
        if not absorbing:
            raise ValidationError("absorbing_restarts requires at least one absorbing state")
        return strategy
    live = np.setdiff1d(states, absorbing)
    if len(live) > 1:
        pos = {s: k for k, s in enumerate(live.tolist())}
        rows, cols = [], []
        for s in live.tolist():
            for t in mrp.successors(s)[0].tolist():
                if t in pos:
                    rows.append(pos[s])
                    cols.append(pos[t])
        graph = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(live), len(live)))
        ncomp, _ = connected_components(graph, directed=True, connection="strong")
        if ncomp > 1:
            raise ValidationError(
                f"single_random_walk requires an irreducible chain; found {ncomp} "
                "strongly connected components among non-absorbing states")
    return strategy


def default_strategy(mrp) -> SamplingStrategy:
    states = _restart_states(mrp)
    if any(mrp.is_absorbing(s) for s in states.tolist()):
        return SamplingStrategy.ABSORBING_RESTARTS
    return SamplingStrategy.SINGLE_RANDOM_WALK


def sample_stream(mrp, strategy, total_steps: int, rng=RngStream(0)) -> StepStream:
    """Exactly ``total_steps`` records under ``strategy``.

    Restarts (and the initial state) are uniform over the states (over the
    reachable subset for procedural MRPs).  A record is flagged as a
    trajectory end only when it enters an absorbing state under
    absorbing restarts; the final, budget-truncated record is not.
    """
    strategy = check_strategy(mrp, strategy)
    if total_steps < 0:
        raise ValidationError("total_steps must be nonnegative")
    src = rng.uniforms(SAMPLING) if isinstance(rng, RngStream) else rng
    T = int(total_steps)
    states = np.empty(T, np.int64)
    nexts = np.empty(T, np.int64)
    rewards = np.empty(T)
    tids = np.empty(T, np.int64)
    ends = np.zeros(T, bool)
    restarts = strategy is SamplingStrategy.ABSORBING_RESTARTS
    tid = 0
    state = mrp.initial_state(src) if T else 0
    for k in range(T):
        nxt, r = sample_step(mrp, state, src)
        states[k], rewards[k], nexts[k], tids[k] = state, r, nxt, tid
        if restarts and mrp.is_absorbing(nxt):
            ends[k] = True
            tid += 1
            state = mrp.initial_state(src)
        else:
            state = nxt
    return StepStream(states, rewards, nexts, tids, ends)
