"""Input validation helpers, in the spirit of ``sklearn.utils.validation``."""
import numbers

import numpy as np


def check_probability(value, name, *, allow_zero=False, allow_one=False):
    """Return ``value`` as a float after checking it is a probability.

    Bounds are open by default; ``allow_zero``/``allow_one`` close them.
    """
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    lo_ok = value >= 0.0 if allow_zero else value > 0.0
    hi_ok = value <= 1.0 if allow_one else value < 1.0
    if not (lo_ok and hi_ok) or np.isnan(value):
        lo = "[" if allow_zero else "("
        hi = "]" if allow_one else ")"
        raise ValueError(f"{name} must lie in {lo}0, 1{hi}, got {value!r}")
    return value


def check_positive_int(value, name, *, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        # accept integral floats such as 1e10 coming from config files
        if isinstance(value, numbers.Real) and float(value).is_integer():
            value = int(value)
        else:
            raise TypeError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return value


def check_odd_distance(d, name="d"):
    """Surface-code distances here are odd integers >= 3."""
    d = check_positive_int(d, name, minimum=3)
    if d % 2 == 0:
        raise ValueError(f"{name} must be odd, got {d}")
    return d


def check_nonnegative_counts(values, name="counts"):
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.isfinite(arr)) or not np.all(np.mod(arr, 1) == 0):
            raise ValueError(f"{name} must contain integers")
        arr = arr.astype(np.int64)
    if np.any(arr < 0):
        raise ValueError(f"{name} must be nonnegative")
    return arr.astype(np.int64, copy=False)


def check_distribution(X):
    """Coerce ``X`` into a :class:`~msfactory.workload.TLoadDistribution`.

    Accepts a distribution, a ``{t: count}`` mapping, or a 1-D sequence of
    per-timestep demands (treated as a schedule).
    """
    from msfactory.workload import TLoadDistribution, from_schedule

    if isinstance(X, TLoadDistribution):
        return X
    if isinstance(X, dict):
        return TLoadDistribution(X)
    return from_schedule(check_nonnegative_counts(X, "schedule").tolist())
