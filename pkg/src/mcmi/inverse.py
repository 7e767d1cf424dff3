"""Random-walk estimation of entries and rows of (I - M)^-1.

M is split elementwise into a substochastic walk matrix P' and a weight
matrix V (M = P' * V).  A walk from i moves to k with probability P'_ik
and stops with probability 1 - p_i, where p_i is the row sum of P'.  Its
statistic is the product of the V entries along the traversed edges
divided by 1 - p_terminal; its mean over walks ending in j is
((I - M)^-1)_ij.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ValidationError
from .mrp import Mrp, _frozen
from .rng import SAMPLING, RngStream, UniformSource

# Walks simulated together per vectorised batch; fixed so results do not
# depend on anything but the seed.
CHUNK = 1 << 18


@dataclass(frozen=True, eq=False)
class SplitMatrix:
    n: int
    indptr: np.ndarray
    indices: np.ndarray
    walk_probs: np.ndarray
    values: np.ndarray
    row_sums: np.ndarray = field(init=False)
    _cum: np.ndarray = field(init=False, repr=False)
    _offset_cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = int(self.n)
        indptr = np.asarray(self.indptr, np.int64)
        indices = np.asarray(self.indices, np.int64)
        probs = np.asarray(self.walk_probs, np.float64)
        values = np.asarray(self.values, np.float64)
        if indptr.shape != (n + 1,) or indptr[0] != 0 or np.any(np.diff(indptr) < 0) \
                or indptr[-1] != len(probs):
            raise ValidationError("malformed row pointer array")
        if not (indices.shape == probs.shape == values.shape):
            raise ValidationError("walk rows and value rows must align entry for entry")
        if len(indices) and (indices.min() < 0 or indices.max() >= n):
            raise ValidationError(f"target index out of range [0, {n})")
        if np.any(probs <= 0) or not np.all(np.isfinite(probs)) or not np.all(np.isfinite(values)):
            raise ValidationError("walk probabilities must be positive and finite")
        rows = np.repeat(np.arange(n), np.diff(indptr))
        p = np.bincount(rows, weights=probs, minlength=n)
        if np.any(p >= 1.0):
            bad = int(np.flatnonzero(p >= 1.0)[0])
            raise ValidationError(f"row {bad} of the walk matrix sums to {float(p[bad])!r}; need < 1")
        cum = np.empty_like(probs)
        for i in range(n):
            np.cumsum(probs[indptr[i]:indptr[i + 1]], out=cum[indptr[i]:indptr[i + 1]])
        set_ = object.__setattr__
        set_(self, "n", n)
        set_(self, "indptr", _frozen(indptr))
        set_(self, "indices", _frozen(indices))
        set_(self, "walk_probs", _frozen(probs))
        set_(self, "values", _frozen(values))
        set_(self, "row_sums", _frozen(p))
        set_(self, "_cum", _frozen(cum))
        set_(self, "_offset_cum", _frozen(rows + cum))

    def target(self) -> np.ndarray:
        """The matrix M = P' * V in dense form."""
        M = np.zeros((self.n, self.n))
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        M[rows, self.indices] = self.walk_probs * self.values
        return M

    def _move(self, state: int, u: float) -> int:
        lo, hi = int(self.indptr[state]), int(self.indptr[state + 1])
        k = min(int(np.searchsorted(self._cum[lo:hi], u, side="right")), hi - lo - 1)
        return lo + k


def split_from_parts(walk, values) -> SplitMatrix:
    """User-supplied split from dense P' and V (entries of V where P' = 0 are ignored)."""
    walk = np.asarray(walk, np.float64)
    values = np.asarray(values, np.float64)
    if walk.ndim != 2 or walk.shape[0] != walk.shape[1] or walk.shape != values.shape:
        raise ValidationError("P' and V must be square and of equal shape")
    if np.any(walk < 0):
        raise ValidationError("walk matrix must be nonnegative")
    rows, cols = np.nonzero(walk)
    indptr = np.concatenate(([0], np.cumsum(np.bincount(rows, minlength=walk.shape[0]))))
    return SplitMatrix(walk.shape[0], indptr, cols, walk[rows, cols], values[rows, cols])


def default_split(M) -> SplitMatrix:
    """P' = |M|, V = sign(M); requires every absolute row sum below 1."""
    M = np.asarray(M, np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValidationError(f"matrix must be square, got shape {M.shape}")
    sums = np.abs(M).sum(axis=1)
    if np.any(sums >= 1.0):
        bad = int(np.flatnonzero(sums >= 1.0)[0])
        raise ValidationError(
            f"row {bad} has absolute sum {float(sums[bad])!r} >= 1; supply a custom split")
    return split_from_parts(np.abs(M), np.sign(M))


def discounted_split(mrp: Mrp) -> SplitMatrix:
    """Split of gamma * P with all weights 1 (walks continue with probability gamma)."""
    t = mrp.transitions
    return SplitMatrix(t.n, t.indptr, t.indices, mrp.gamma * t.probs, np.ones(len(t.probs)))


@dataclass(frozen=True)
class WalkOutcome:
    start: int
    terminal: int
    weight: float
    length: int


@dataclass(frozen=True, eq=False)
class WalkBatch:
    terminal: np.ndarray
    product: np.ndarray  # product of V along the path
    weight: np.ndarray   # product / (1 - p_terminal)
    length: np.ndarray


def run_walk(split: SplitMatrix, start: int, rng) -> WalkOutcome:
    """A single walk; one uniform draw per step decides both stop and move."""
    src = rng.uniforms(SAMPLING) if isinstance(rng, RngStream) else rng
    state, prod, length = int(start), 1.0, 0
    p = split.row_sums
    while True:
        u = src.random()
        if u >= p[state]:
            break
        k = split._move(state, u)
        prod *= split.values[k]
        state = int(split.indices[k])
        length += 1
    return WalkOutcome(int(start), state, prod / (1.0 - p[state]), length)


def run_walks(split: SplitMatrix, starts, rng) -> WalkBatch:
    """Vectorised walks, one per entry of ``starts``."""
    gen = rng.generator(SAMPLING) if isinstance(rng, RngStream) else rng
    state = np.array(starts, dtype=np.int64)
    count = len(state)
    prod = np.ones(count)
    length = np.zeros(count, np.int64)
    active = np.arange(count)
    p = split.row_sums
    while len(active):
        cur = state[active]
        u = gen.random(len(active))
        go = u < p[cur]
        active, cur, u = active[go], cur[go], u[go]
        if not len(active):
            break
        pos = np.searchsorted(split._offset_cum, cur + u, side="right")
        pos = np.clip(pos, split.indptr[cur], split.indptr[cur + 1] - 1)
        prod[active] *= split.values[pos]
        state[active] = split.indices[pos]
        length[active] += 1
    return WalkBatch(state, prod, prod / (1.0 - p[state]), length)


def _chunks(total):
    while total > 0:
        size = min(CHUNK, total)
        yield size
        total -= size


def _check_walks(num_walks):
    if int(num_walks) < 1:
        raise ValidationError("num_walks must be at least 1")
    return int(num_walks)


def estimate_entry(split: SplitMatrix, i: int, j: int, num_walks: int, rng, return_std=False):
    """Sample mean of the walk statistic for entry (i, j).

    With ``return_std`` also returns the standard error of the mean.
    """
    num_walks = _check_walks(num_walks)
    gen = rng.generator(SAMPLING) if isinstance(rng, RngStream) else rng
    total = total_sq = 0.0
    for size in _chunks(num_walks):
        b = run_walks(split, np.full(size, i), gen)
        x = np.where(b.terminal == j, b.weight, 0.0)
        total += x.sum()
        total_sq += (x * x).sum()
    mean = total / num_walks
    if not return_std:
        return mean
    var = max(total_sq / num_walks - mean * mean, 0.0) * num_walks / max(num_walks - 1, 1)
    return mean, float(np.sqrt(var / num_walks))


def estimate_row(split: SplitMatrix, i: int, num_walks: int, rng) -> np.ndarray:
    """Row i of (I - M)^-1 from one shared set of walks.

    Path products are summed per terminal state and scaled by
    1 / (1 - p_j) once at the end, so with all V = 1 the row sums to
    1 / (1 - gamma) up to a few ulps.
    """
    num_walks = _check_walks(num_walks)
    gen = rng.generator(SAMPLING) if isinstance(rng, RngStream) else rng
    sums = np.zeros(split.n)
    for size in _chunks(num_walks):
        b = run_walks(split, np.full(size, i), gen)
        sums += np.bincount(b.terminal, weights=b.product, minlength=split.n)
    return sums / (1.0 - split.row_sums) / num_walks


def neumann_reference(M, tol: float = 1e-12, return_order: bool = False):
    """Partial Neumann sum sum_{k=0}^{K} M^k.

    K is the first index whose tail bound ||M^(K+1)||_inf / (1 - ||M||_inf)
    is at most ``tol``.
    """
    M = np.asarray(M, np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValidationError(f"matrix must be square, got shape {M.shape}")
    norm = np.abs(M).sum(axis=1).max() if M.size else 0.0
    if norm >= 1.0:
        raise ValidationError(f"||M||_inf = {float(norm)!r} >= 1; the series bound does not apply")
    total = np.eye(M.shape[0])
    power = np.eye(M.shape[0])
    K = 0
    while True:
        power = power @ M
        if np.abs(power).sum(axis=1).max() / (1.0 - norm) <= tol:
            break
        total += power
        K += 1
    return (total, K) if return_order else total
