"""Feature maps phi: state -> R^k."""

from __future__ import annotations

import json

import numpy as np

from .exceptions import ValidationError
from .rng import FEATURES, RngStream


class FeatureMatrix:
    """Base class; subclasses implement ``row``.  Rows must be pure functions of the state."""

    k: int

    def row(self, state: int) -> np.ndarray:
        raise NotImplementedError

    def rows(self, states) -> np.ndarray:
        states = np.asarray(states, dtype=np.int64)
        uniq, inv = np.unique(states, return_inverse=True)
        block = np.array([self.row(int(s)) for s in uniq.tolist()], dtype=np.float64)
        return block.reshape(len(uniq), self.k)[inv]


class IdentityFeatures(FeatureMatrix):

    def __init__(self, n):
        self.n = self.k = int(n)

    def row(self, state):
        e = np.zeros(self.k)
        e[state] = 1.0
        return e

    def rows(self, states):
        states = np.asarray(states, dtype=np.int64)
        out = np.zeros((len(states), self.k))
        out[np.arange(len(states)), states] = 1.0
        return out


class ExplicitFeatures(FeatureMatrix):
    """Rows given up front, either as an n x k array or a ``{state: row}`` mapping."""

    def __init__(self, rows, k=None):
        if isinstance(rows, dict):
            self._rows = {int(s): np.asarray(r, dtype=np.float64) for s, r in rows.items()}
        else:
            arr = np.asarray(rows, dtype=np.float64)
            if arr.ndim != 2:
                raise ValidationError("feature matrix must be two-dimensional")
            self._rows = {i: arr[i] for i in range(arr.shape[0])}
        widths = {len(r) for r in self._rows.values()}
        if k is None:
            if len(widths) != 1:
                raise ValidationError("feature rows differ in length")
            k = widths.pop()
        elif widths and widths != {k}:
            raise ValidationError(f"feature rows must all have length k = {k}")
        self.k = int(k)
        for r in self._rows.values():
            if not np.all(np.isfinite(r)):
                raise ValidationError("feature rows must be finite")

    def row(self, state):
        try:
            return self._rows[int(state)]
        except KeyError:
            raise ValidationError(f"no feature row for state {state}") from None


class GaussianFeatures(FeatureMatrix):
    """Standard-normal rows generated from ``(seed, state)``; cached on first use."""

    def __init__(self, k, seed=0):
        self.k = int(k)
        self.seed = int(seed)
        self._cache = {}

    def row(self, state):
        r = self._cache.get(state)
        if r is None:
            r = RngStream(self.seed, int(state)).generator(FEATURES).standard_normal(self.k)
            r.setflags(write=False)
            self._cache[state] = r
        return r


def parse_features(spec, n=None, seed=0) -> FeatureMatrix:
    """``identity``, ``gaussian:K`` or a path to a JSON feature file."""
    if isinstance(spec, FeatureMatrix):
        return spec
    if spec == "identity":
        if n is None:
            raise ValidationError("identity features need the state count")
        return IdentityFeatures(n)
    if isinstance(spec, str) and spec.startswith("gaussian:"):
        try:
            k = int(spec.split(":", 1)[1])
        except ValueError:
            raise ValidationError(f"bad feature spec {spec!r}") from None
        if k < 1:
            raise ValidationError("feature count must be positive")
        return GaussianFeatures(k, seed)
    return load_features(spec)


def load_features(path) -> ExplicitFeatures:
    with open(path) as fh:
        doc = json.load(fh)
    try:
        return ExplicitFeatures({int(s): r for s, r in doc["rows"].items()}, int(doc["k"]))
    except (KeyError, TypeError, AttributeError) as exc:
        raise ValidationError(f"malformed feature file: {exc}") from exc
