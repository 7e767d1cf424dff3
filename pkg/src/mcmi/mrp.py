"""Markov reward process model, generators, exact solve and error metric."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import SingularSystemError, ValidationError
from .rng import MODEL, RngStream, UniformSource

ROW_SUM_TOL = 1e-12
# Largest n for which the dense O(n^3) oracle is used.
DESK_LIMIT = 5000


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row-stochastic matrix in compressed sparse row form.

    Only strictly positive entries are stored.  ``cumulative`` holds the
    within-row running sums used for inverse-CDF sampling.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    probs: np.ndarray
    absorbing: frozenset = field(init=False)
    cumulative: np.ndarray = field(init=False, repr=False)
    _offset_cumulative: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.n
        indptr = np.asarray(self.indptr, dtype=np.int64)
        indices = np.asarray(self.indices, dtype=np.int64)
        probs = np.asarray(self.probs, dtype=np.float64)
        if n < 1:
            raise ValidationError(f"state count must be positive, got {n}")
        if indptr.shape != (n + 1,) or indptr[0] != 0 or np.any(np.diff(indptr) < 0):
            raise ValidationError("malformed row pointer array")
        if indices.shape != probs.shape or indptr[-1] != len(probs):
            raise ValidationError("indices and probabilities must align with the row pointers")
        if np.any(np.diff(indptr) == 0):
            empty = int(np.flatnonzero(np.diff(indptr) == 0)[0])
            raise ValidationError(f"row {empty} has no successors")
        if len(indices) and (indices.min() < 0 or indices.max() >= n):
            raise ValidationError(f"target index out of range [0, {n})")
        if not np.all(np.isfinite(probs)) or np.any(probs <= 0) or np.any(probs > 1):
            raise ValidationError("stored probabilities must lie in (0, 1]")
        rows = np.repeat(np.arange(n), np.diff(indptr))
        sums = np.bincount(rows, weights=probs, minlength=n)
        dev = np.abs(sums - 1.0)
        worst = int(np.argmax(dev))
        if dev[worst] > ROW_SUM_TOL:
            raise ValidationError(f"row {worst} sums to {float(sums[worst])!r}, not 1")
        order = np.lexsort((indices, rows))
        if np.any(order != np.arange(len(order))):
            indices, probs = indices[order], probs[order]
        dup = (np.diff(rows) == 0) & (np.diff(indices) == 0)
        if np.any(dup):
            raise ValidationError(f"row {int(rows[np.flatnonzero(dup)[0]])} lists a target twice")

        within = np.empty_like(probs)
        for i in range(n):
            np.cumsum(probs[indptr[i]:indptr[i + 1]], out=within[indptr[i]:indptr[i + 1]])
        deg = np.diff(indptr)
        absorbing = frozenset(
            int(i) for i in np.flatnonzero(deg == 1)
            if indices[indptr[i]] == i and probs[indptr[i]] == 1.0
        )
        set_ = object.__setattr__
        set_(self, "indptr", _frozen(indptr))
        set_(self, "indices", _frozen(indices))
        set_(self, "probs", _frozen(probs))
        set_(self, "absorbing", absorbing)
        set_(self, "cumulative", _frozen(within))
        set_(self, "_offset_cumulative", _frozen(rows + within))

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[tuple[int, float]]]) -> "TransitionMatrix":
        indptr = [0]
        indices, probs = [], []
        for row in rows:
            for target, p in row:
                if p < 0 or p > 1:
                    raise ValidationError(f"probability {p!r} outside [0, 1]")
                if p > 0:
                    indices.append(int(target))
                    probs.append(float(p))
            indptr.append(len(indices))
        return cls(len(rows), np.array(indptr), np.array(indices, dtype=np.int64),
                   np.array(probs, dtype=np.float64))

    @classmethod
    def from_dense(cls, P) -> "TransitionMatrix":
        P = np.asarray(P, dtype=np.float64)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValidationError(f"transition matrix must be square, got shape {P.shape}")
        if np.any(P < 0) or np.any(P > 1):
            raise ValidationError("probabilities must lie in [0, 1]")
        rows, cols = np.nonzero(P)
        indptr = np.concatenate(([0], np.cumsum(np.bincount(rows, minlength=P.shape[0]))))
        return cls(P.shape[0], indptr, cols, P[rows, cols])

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.probs[lo:hi]

    def rows(self) -> list[list[tuple[int, float]]]:
        return [list(zip(*(a.tolist() for a in self.row(i)))) for i in range(self.n)]

    def to_dense(self) -> np.ndarray:
        P = np.zeros((self.n, self.n))
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        P[rows, self.indices] = self.probs
        return P

    def next_state(self, state: int, u: float) -> int:
        """Successor of ``state`` for a uniform draw ``u`` in [0, 1)."""
        lo, hi = int(self.indptr[state]), int(self.indptr[state + 1])
        k = int(np.searchsorted(self.cumulative[lo:hi], u, side="right"))
        return int(self.indices[lo + min(k, hi - lo - 1)])

    def next_states(self, states: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Vectorised ``next_state``; rows are offset by their index so one search covers all."""
        states = np.asarray(states, dtype=np.int64)
        pos = np.searchsorted(self._offset_cumulative, states + u, side="right")
        pos = np.clip(pos, self.indptr[states], self.indptr[states + 1] - 1)
        return self.indices[pos]


class Noise(str, enum.Enum):
    DETERMINISTIC = "deterministic"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True, eq=False)
class RewardModel:
    mean: np.ndarray
    stddev: np.ndarray = None
    noise: Noise = None

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        if mean.ndim != 1:
            raise ValidationError("reward mean must be a vector")
        if not np.all(np.isfinite(mean)):
            raise ValidationError("reward means must be finite")
        std = np.zeros_like(mean) if self.stddev is None else np.asarray(self.stddev, dtype=np.float64)
        if std.shape != mean.shape:
            raise ValidationError("reward stddev and mean differ in length")
        if np.any(std < 0) or not np.all(np.isfinite(std)):
            raise ValidationError("reward stddev must be finite and nonnegative")
        noise = self.noise
        if noise is None:
            noise = Noise.GAUSSIAN if np.any(std > 0) else Noise.DETERMINISTIC
        noise = Noise(noise)
        if noise is Noise.DETERMINISTIC and np.any(std > 0):
            raise ValidationError("deterministic rewards require zero stddev")
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "stddev", _frozen(std))
        object.__setattr__(self, "noise", noise)

    def sample(self, state: int, src: UniformSource) -> float:
        if self.noise is Noise.DETERMINISTIC:
            return float(self.mean[state])
        return float(self.mean[state] + self.stddev[state] * src.normal())

    def sample_many(self, states: np.ndarray, gen: np.random.Generator) -> np.ndarray:
        if self.noise is Noise.DETERMINISTIC:
            return self.mean[states]
        return self.mean[states] + self.stddev[states] * gen.standard_normal(len(states))


@dataclass(frozen=True, eq=False)
class Mrp:
    """A discounted Markov reward process over ``n`` states.

    Also serves as a transition sampler for the walk-based estimators.
    """

    transitions: TransitionMatrix
    rewards: RewardModel
    gamma: float

    @property
    def n(self) -> int:
        return self.transitions.n

    n_states = n

    @property
    def absorbing(self) -> frozenset:
        return self.transitions.absorbing

    def is_absorbing(self, state: int) -> bool:
        return state in self.transitions.absorbing

    def initial_state(self, src: UniformSource) -> int:
        return src.below(self.n)

    def next_state(self, state: int, u: float) -> int:
        return self.transitions.next_state(state, u)

    def reward(self, state: int, src: UniformSource) -> float:
        return self.rewards.sample(state, src)

    def reward_mean(self, state: int) -> float:
        return float(self.rewards.mean[state])

    def successors(self, state: int):
        return self.transitions.row(state)

    def with_gamma(self, gamma: float) -> "Mrp":
        return make_mrp(self.transitions, self.rewards, gamma)


def make_mrp(transitions, rewards, gamma: float) -> Mrp:
    """Validating constructor.

    ``transitions`` may be a ``TransitionMatrix``, a dense array or a list
    of ``(target, prob)`` rows; ``rewards`` a ``RewardModel`` or a vector
    of deterministic means.
    """
    if not isinstance(transitions, TransitionMatrix):
        if len(transitions) and isinstance(transitions[0], (list, tuple)) and len(transitions[0]) \
                and isinstance(transitions[0][0], (list, tuple)):
            transitions = TransitionMatrix.from_rows(transitions)
        else:
            transitions = TransitionMatrix.from_dense(transitions)
    if not isinstance(rewards, RewardModel):
        rewards = RewardModel(np.asarray(rewards, dtype=np.float64))
    if len(rewards.mean) != transitions.n:
        raise ValidationError(
            f"dimension mismatch: {transitions.n} states but {len(rewards.mean)} rewards")
    gamma = float(gamma)
    if not 0.0 < gamma < 1.0:
        raise ValidationError(f"gamma must lie in (0, 1), got {gamma}")
    return Mrp(transitions, rewards, gamma)


def random_mrp(n: int, out_degree: int | None = None, reward_range=(0.0, 1.0),
               seed: RngStream | int = 0, gamma: float = 0.8,
               reward_stddev: float = 0.0) -> Mrp:
    """Random MRP with ``out_degree`` successors per state (dense when omitted).

    Successors are drawn uniformly without replacement, their
    probabilities are normalised uniform draws, and reward means are
    uniform on ``reward_range``.
    """
    out_degree = n if out_degree is None else out_degree
    if n < 1 or out_degree < 1:
        raise ValidationError("n and out_degree must be positive")
    if out_degree > n:
        raise ValidationError(f"out_degree {out_degree} exceeds n {n}")
    if not isinstance(seed, RngStream):
        seed = RngStream(int(seed))
    gen = seed.generator(MODEL)
    indices = np.empty(n * out_degree, dtype=np.int64)
    probs = np.empty(n * out_degree)
    for i in range(n):
        targets = np.sort(gen.choice(n, out_degree, replace=False))
        w = 1.0 - gen.random(out_degree)
        sl = slice(i * out_degree, (i + 1) * out_degree)
        indices[sl] = targets
        probs[sl] = w / w.sum()
    lo, hi = reward_range
    mean = lo + (hi - lo) * gen.random(n)
    transitions = TransitionMatrix(n, np.arange(n + 1) * out_degree, indices, probs)
    std = np.full(n, float(reward_stddev))
    return make_mrp(transitions, RewardModel(mean, std), gamma)


@dataclass(frozen=True, eq=False)
class ValueVector:
    values: np.ndarray
    visited_mask: np.ndarray = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        mask = np.ones(len(values), dtype=bool) if self.visited_mask is None \
            else np.asarray(self.visited_mask, dtype=bool)
        if mask.shape != values.shape:
            raise ValidationError("visited mask and values differ in length")
        if not np.all(np.isfinite(values[mask])):
            raise ValidationError("visited entries must be finite")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "visited_mask", _frozen(mask))

    def __len__(self):
        return len(self.values)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.filled(), dtype=dtype)

    def filled(self) -> np.ndarray:
        """Values with unvisited entries set to 0."""
        return np.where(self.visited_mask, self.values, 0.0)


def dense_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """LU with partial pivoting (LAPACK gesv)."""
    try:
        x = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"singular system: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("solve produced non-finite values")
    return x


def exact_value(mrp: Mrp) -> ValueVector:
    """Ground-truth values from a dense solve of (I - gamma P) v = r."""
    if mrp.n > DESK_LIMIT:
        raise ValidationError(f"n = {mrp.n} exceeds the dense-solve limit of {DESK_LIMIT}")
    A = np.eye(mrp.n) - mrp.gamma * mrp.transitions.to_dense()
    return ValueVector(dense_solve(A, mrp.rewards.mean))


def rel_residual_error(v_est, v_true) -> float:
    """||v_est - v_true||_2 / ||v_true||_2 with unvisited estimates counted as 0."""
    est = v_est.filled() if isinstance(v_est, ValueVector) else np.asarray(v_est, dtype=np.float64)
    true = v_true.filled() if isinstance(v_true, ValueVector) else np.asarray(v_true, dtype=np.float64)
    if est.shape != true.shape:
        raise ValidationError(f"length mismatch: {est.shape} vs {true.shape}")
    norm = np.linalg.norm(true)
    if norm == 0:
        raise ValidationError("true value vector has zero norm")
    return float(np.linalg.norm(est - true) / norm)


# --- JSON ------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, bool) or x is None:
        return json.dumps(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            raise ValidationError(f"cannot serialise non-finite value {x}")
        return format(x, ".17g")
    if isinstance(x, str):
        return json.dumps(x)
    if isinstance(x, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_fmt(v)}" for k, v in x.items()) + "}"
    if isinstance(x, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(v) for v in x) + "]"
    raise TypeError(f"unsupported type {type(x).__name__}")


def dumps(obj) -> str:
    """JSON text with every float written at 17 significant digits."""
    return _fmt(obj) + "\n"


def mrp_to_dict(mrp: Mrp) -> dict:
    return {
        "n": mrp.n,
        "gamma": mrp.gamma,
        "rows": [[[int(t), float(p)] for t, p in zip(*mrp.transitions.row(i))] for i in range(mrp.n)],
        "reward_mean": mrp.rewards.mean.tolist(),
        "reward_stddev": mrp.rewards.stddev.tolist(),
    }


def mrp_from_dict(d: dict) -> Mrp:
    try:
        n = int(d["n"])
        rows = d["rows"]
        mean = d["reward_mean"]
        gamma = d["gamma"]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"MRP document missing field: {exc}") from exc
    if len(rows) != n:
        raise ValidationError(f"n = {n} but {len(rows)} rows given")
    std = d.get("reward_stddev")
    transitions = TransitionMatrix.from_rows([[(int(t), float(p)) for t, p in row] for row in rows])
    return make_mrp(transitions, RewardModel(mean, std), gamma)


def save_mrp(mrp: Mrp, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps(mrp_to_dict(mrp)))


def load_mrp(path) -> Mrp:
    with open(path) as fh:
        return mrp_from_dict(json.load(fh))
