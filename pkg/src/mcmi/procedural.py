"""Lazily generated MRPs over huge nominal state spaces.

Only ``m`` designated states are reachable: every row, inside or outside
that subset, points into it.  Inside the subset the transition matrix is
the average of ``out_degree`` permutations, the first being a ring, so the
chain is irreducible and its stationary law is uniform over the subset.
Rewards and the rows of states outside the subset derive from
``(seed, state)`` alone.  Rows are cached on first use, so memory grows
with m and the states touched, never with ``n``.
"""

from __future__ import annotations

import numpy as np

from .exceptions import ValidationError
from .rng import MODEL, SUBSET, RngStream, UniformSource


class ProceduralMrp:

    def __init__(self, n, reachable_size, out_degree, seed=0, gamma=0.8,
                 reward_range=(0.0, 1.0), reward_stddev=0.0):
        if reachable_size < 1 or out_degree < 1:
            raise ValidationError("reachable_size and out_degree must be positive")
        if reachable_size > n:
            raise ValidationError(f"reachable_size {reachable_size} exceeds n {n}")
        if out_degree > reachable_size:
            raise ValidationError(f"out_degree {out_degree} exceeds reachable_size {reachable_size}")
        if not 0.0 < gamma < 1.0:
            raise ValidationError(f"gamma must lie in (0, 1), got {gamma}")
        if reward_stddev < 0:
            raise ValidationError("reward_stddev must be nonnegative")
        self.n = int(n)
        self.m = int(reachable_size)
        self.out_degree = int(out_degree)
        self.seed = int(seed)
        self.gamma = float(gamma)
        self.reward_range = tuple(reward_range)
        self.reward_stddev = float(reward_stddev)
        self._rows = {}
        self.reachable = self._draw_subset()

    @property
    def n_states(self):
        return self.n

    def _draw_subset(self):
        gen = RngStream(self.seed).generator(SUBSET)
        chosen = {}
        # rejection sampling keeps the cost O(m) regardless of n
        while len(chosen) < self.m:
            for s in gen.integers(0, self.n, size=2 * (self.m - len(chosen))).tolist():
                if len(chosen) == self.m:
                    break
                chosen.setdefault(s, None)
        subset = np.array(list(chosen), dtype=np.int64)
        subset.setflags(write=False)
        self._pos = {s: k for k, s in enumerate(subset.tolist())}
        ring = np.roll(np.arange(self.m), -1)
        self._perms = np.stack([ring] + [gen.permutation(self.m)
                                         for _ in range(self.out_degree - 1)])
        return subset

    def _row(self, state):
        row = self._rows.get(state)
        if row is None:
            if not 0 <= state < self.n:
                raise IndexError(f"state {state} outside [0, {self.n})")
            gen = RngStream(self.seed, state).generator(MODEL)
            k = self._pos.get(state)
            if k is None:
                pos = gen.choice(self.m, self.out_degree, replace=False)
            else:
                pos = self._perms[:, k]
            # coinciding permutation targets merge into one entry
            targets, hits = np.unique(self.reachable[pos], return_counts=True)
            probs = hits / self.out_degree
            lo, hi = self.reward_range
            mean = lo + (hi - lo) * gen.random()
            absorbing = len(targets) == 1 and targets[0] == state
            row = (targets, probs, np.cumsum(probs), float(mean), absorbing)
            self._rows[state] = row
        return row

    @property
    def materialized(self) -> int:
        return len(self._rows)

    def successors(self, state):
        targets, probs, *_ = self._row(state)
        return targets, probs

    def is_absorbing(self, state) -> bool:
        return self._row(state)[4]

    def initial_state(self, src: UniformSource) -> int:
        return int(self.reachable[src.below(self.m)])

    def next_state(self, state, u) -> int:
        targets, _, cum, _, _ = self._row(state)
        k = int(np.searchsorted(cum, u, side="right"))
        return int(targets[min(k, len(targets) - 1)])

    def reward_mean(self, state) -> float:
        return self._row(state)[3]

    def reward(self, state, src: UniformSource) -> float:
        mean = self._row(state)[3]
        if self.reward_stddev == 0.0:
            return mean
        return mean + self.reward_stddev * src.normal()

    def __repr__(self):
        return (f"ProceduralMrp(n={self.n}, reachable_size={self.m}, "
                f"out_degree={self.out_degree}, seed={self.seed}, gamma={self.gamma})")


def procedural_mrp(n, reachable_size, out_degree, seed=0, gamma=0.8, **kwargs) -> ProceduralMrp:
    return ProceduralMrp(n, reachable_size, out_degree, seed=seed, gamma=gamma, **kwargs)
