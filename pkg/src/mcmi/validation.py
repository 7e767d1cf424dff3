"""Input checks shared by the estimators."""

import numpy as np

from .exceptions import ValidationError
from .mrp import Mrp
from .procedural import ProceduralMrp
from .sampling import StepStream, check_stream  # noqa: F401  (re-exported)


def check_gamma(gamma):
    gamma = float(gamma)
    if not 0.0 < gamma < 1.0:
        raise ValidationError(f"gamma must lie in (0, 1), got {gamma}")
    return gamma


def check_lambda(lam):
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"lambda must lie in [0, 1], got {lam}")
    return lam


def check_sampler(X):
    """Anything with the sampler surface of ``Mrp`` / ``ProceduralMrp``."""
    needed = ("n_states", "initial_state", "next_state", "reward", "is_absorbing")
    if isinstance(X, (Mrp, ProceduralMrp)) or all(hasattr(X, a) for a in needed):
        return X
    raise TypeError(f"expected an MRP sampler, got {type(X).__name__}")


def resolve_gamma(gamma, sampler):
    if gamma is None:
        gamma = getattr(sampler, "gamma", None)
        if gamma is None:
            raise ValidationError("gamma not given and the sampler carries none")
    return check_gamma(gamma)


def check_states(states, n=None):
    states = np.atleast_1d(np.asarray(states))
    if states.dtype.kind not in "iu":
        raise ValidationError("state indices must be integers")
    if n is not None and (np.any(states < 0) or np.any(states >= n)):
        raise ValidationError(f"state index outside [0, {n})")
    return states.astype(np.int64)
