"""Closed-form error, yield, count, area and time laws for Bravyi-Haah factories.

Everything in this module is a pure function of its arguments. The per-round
output count ``k = (K/X)**(1/levels)`` is real-valued throughout; only the
lattice simulator insists on integer port counts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from msfactory.exceptions import DistanceOverflow, NoConvergence
from msfactory.utils.validation import (
    check_odd_distance,
    check_positive_int,
    check_probability,
)

DEFAULT_DISTANCE_CAP = 1001

# A logical error rate equal to the target up to float rounding counts as met
# (3 * 0.01**2 evaluates to 3.0000000000000003e-4).
_TARGET_RTOL = 1e-12


@dataclass(frozen=True)
class BravyiHaahProtocol:
    """The ``3k + 8 -> k`` distillation circuit."""

    k: float

    def __post_init__(self):
        if not (self.k >= 1.0) or not math.isfinite(self.k):
            raise ValueError(f"protocol output count k must be >= 1, got {self.k!r}")

    @property
    def n(self) -> float:
        return 3 * self.k + 8

    @property
    def logical_qubits(self) -> float:
        """Logical qubits needed by one protocol instance (``6k + 14``)."""
        return 6 * self.k + 14


@dataclass(frozen=True)
class NoiseModel:
    """Physical error rates and the application's success requirement.

    Args:
        eps_in: Physical gate error rate, drives code-distance selection.
        eps_inject: Error rate of raw injected magic states. Defaults to
            ``eps_in``.
        p_success_target: Desired application success probability.
        n_gates: Logical gate count of the application.
    """

    eps_in: float
    eps_inject: float | None = None
    p_success_target: float = 0.5
    n_gates: int = 10**12

    def __post_init__(self):
        object.__setattr__(self, "eps_in", check_probability(self.eps_in, "eps_in"))
        eps_inject = self.eps_in if self.eps_inject is None else self.eps_inject
        object.__setattr__(self, "eps_inject", check_probability(eps_inject, "eps_inject"))
        object.__setattr__(
            self,
            "p_success_target",
            check_probability(self.p_success_target, "p_success_target", allow_one=True),
        )
        object.__setattr__(self, "n_gates", check_positive_int(self.n_gates, "n_gates"))
        target = self.target_error
        if not 0.0 < target <= 1.0:
            raise ValueError(f"derived target error must lie in (0, 1], got {target}")

    @property
    def target_error(self) -> float:
        return self.p_success_target / self.n_gates

    def with_eps(self, eps: float, *, inject_only: bool = False) -> "NoiseModel":
        """Copy with a new physical (and by default injection) error rate."""
        if inject_only:
            return NoiseModel(self.eps_in, eps, self.p_success_target, self.n_gates)
        return NoiseModel(eps, eps, self.p_success_target, self.n_gates)


@dataclass(frozen=True)
class FactoryArchitecture:
    """A design point: total capacity ``K``, ``X`` factories, ``levels`` rounds."""

    K: int
    X: int = 1
    levels: int = 1

    def __post_init__(self):
        check_positive_int(self.K, "K")
        check_positive_int(self.X, "X")
        check_positive_int(self.levels, "levels")
        if self.X > self.K:
            raise ValueError(f"need 1 <= X <= K, got K={self.K}, X={self.X}")

    @property
    def ratio(self) -> float:
        """Per-factory capacity ``K/X``."""
        return self.K / self.X

    @property
    def k(self) -> float:
        """Per-round protocol output count of each factory."""
        return self.ratio ** (1.0 / self.levels)

    @property
    def protocol(self) -> BravyiHaahProtocol:
        return BravyiHaahProtocol(self.k)


@dataclass(frozen=True)
class RoundProfile:
    round_index: int
    eps_out: float
    code_distance: int
    area_logical: float

    @property
    def area_physical(self) -> float:
        return self.area_logical * self.code_distance**2


@dataclass(frozen=True)
class ResourceEstimate:
    area_physical_qubits: float
    total_cycles: float

    @property
    def volume(self) -> float:
        return self.area_physical_qubits * self.total_cycles


def _as_protocol(protocol) -> BravyiHaahProtocol:
    if isinstance(protocol, BravyiHaahProtocol):
        return protocol
    return BravyiHaahProtocol(float(protocol))


# ---------------------------------------------------------------------------
# surface code


def logical_error_rate(d, eps_in):
    """Logical error rate ``d * (100 eps_in) ** ((d + 1) / 2)`` of a distance-d tile.

    The value is not clamped; it exceeds 1 when ``eps_in`` is near threshold.
    """
    d = check_odd_distance(d)
    if not eps_in >= 0.0:
        raise ValueError(f"eps_in must be nonnegative, got {eps_in!r}")
    return d * (100.0 * eps_in) ** ((d + 1) / 2)


def solve_code_distance(eps_in, eps_target, *, d_cap=DEFAULT_DISTANCE_CAP):
    """Smallest odd ``d >= 3`` whose logical error rate meets ``eps_target``.

    Raises:
        NoConvergence: ``100 * eps_in >= 1``, no distance suppresses errors.
        DistanceOverflow: the required distance exceeds ``d_cap``.
    """
    if not eps_in > 0.0:
        raise ValueError(f"eps_in must be positive, got {eps_in!r}")
    if not eps_target > 0.0:
        raise ValueError(f"eps_target must be positive, got {eps_target!r}")
    if 100.0 * eps_in >= 1.0:
        raise NoConvergence(f"eps_in={eps_in} is at or above the 1% surface-code threshold")
    bound = eps_target * (1.0 + _TARGET_RTOL)
    d = 3
    while d <= d_cap:
        if logical_error_rate(d, eps_in) <= bound:
            return d
        d += 2
    raise DistanceOverflow(
        f"eps_target={eps_target:g} at eps_in={eps_in:g} needs a distance above {d_cap}"
    )


@lru_cache(maxsize=64)
def _distance_table(eps_in, d_cap):
    ds = np.arange(3, d_cap + 1, 2)
    with np.errstate(under="ignore"):
        pl = ds * (100.0 * eps_in) ** ((ds + 1) / 2)
    # first odd d meeting a target == first index where the running minimum does
    return ds, np.minimum.accumulate(pl)


def solve_code_distances(eps_in, targets, *, d_cap=DEFAULT_DISTANCE_CAP):
    """Vectorized :func:`solve_code_distance`; entries that overflow become 0."""
    if 100.0 * eps_in >= 1.0:
        raise NoConvergence(f"eps_in={eps_in} is at or above the 1% surface-code threshold")
    ds, running_min = _distance_table(float(eps_in), int(d_cap))
    bound = np.asarray(targets, dtype=float) * (1.0 + _TARGET_RTOL)
    # running_min is non-increasing; search on its negation
    idx = np.searchsorted(-running_min, -bound, side="left")
    out = np.zeros(bound.shape, dtype=np.int64)
    ok = idx < ds.size
    out[ok] = ds[idx[ok]]
    return out


# ---------------------------------------------------------------------------
# single protocol


def bh_output_error(protocol, eps):
    """Output error ``(1 + 3k) eps**2`` of one protocol round."""
    p = _as_protocol(protocol)
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"eps must lie in [0, 1), got {eps!r}")
    return (1 + 3 * p.k) * eps * eps


def bh_error_threshold(protocol):
    """Input error at which one round stops improving fidelity."""
    p = _as_protocol(protocol)
    return 1.0 / (3 * p.k + 1)


def bh_success_prob(protocol, eps):
    """First-order success probability ``1 - (3k + 8) eps``, clamped at zero."""
    p = _as_protocol(protocol)
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"eps must lie in [0, 1), got {eps!r}")
    return max(0.0, 1.0 - p.n * eps)


# ---------------------------------------------------------------------------
# multi-level factories


def _check_round(arch, r, *, allow_zero=False):
    lo = 0 if allow_zero else 1
    if not lo <= r <= arch.levels:
        raise ValueError(f"round index must lie in [{lo}, {arch.levels}], got {r}")


def round_error(arch, noise, r):
    """Output error after round ``r`` of every factory; round 0 is the raw input."""
    _check_round(arch, r, allow_zero=True)
    eps = noise.eps_inject
    if r == 0:
        return eps
    return (1 + 3 * arch.k) ** (2**r - 1) * eps ** (2**r)


def yield_threshold(arch):
    """Injection error above which the factory produces nothing."""
    return 1.0 / (3 * arch.k + 8)


def effective_output(arch, noise):
    """Expected states per cycle after multiplying all rounds' success rates.

    Each factor is written ``n * (1/n - eps)`` so the sign flips exactly at
    :func:`yield_threshold`.
    """
    n = 3 * arch.k + 8
    thresh = 1.0 / n
    out = float(arch.K)
    for r in range(1, arch.levels + 1):
        eps_prev = round_error(arch, noise, r - 1)
        if eps_prev >= thresh:
            return 0.0
        out *= n * (thresh - eps_prev)
    return out


def protocol_count(protocol, levels):
    """Protocol instances in an ``levels``-deep block code."""
    p = _as_protocol(protocol)
    levels = check_positive_int(levels, "levels")
    return sum(p.k ** (r - 1) * p.n ** (levels - r) for r in range(1, levels + 1))


def round_logical_area(arch, r):
    """Logical qubits used by round ``r`` across all factories."""
    _check_round(arch, r)
    k = arch.k
    return arch.X * k ** (r - 1) * (3 * k + 8) ** (arch.levels - r) * (6 * k + 14)


def round_area(arch, r, d_r):
    """Physical qubits used by round ``r`` at code distance ``d_r``."""
    if not (isinstance(d_r, int) and d_r >= 1):
        raise ValueError(f"code distance must be a positive integer, got {d_r!r}")
    return round_logical_area(arch, r) * d_r**2


def factory_area(arch, round_profiles):
    """Physical footprint reserved for the factories over a whole cycle.

    The first round's logical layout is held at the first round's distance
    for the entire cycle, so later (smaller) rounds do not free any space.
    """
    if len(round_profiles) != arch.levels:
        raise ValueError(
            f"expected {arch.levels} round profiles, got {len(round_profiles)}"
        )
    return round_area(arch, 1, round_profiles[0].code_distance)


def distill_time(code_distances):
    """Cycles for one full distillation pass: ``11 * sum(d_r)``."""
    ds = list(code_distances)
    if not ds:
        raise ValueError("need at least one code distance")
    return 11 * sum(ds)


def round_profiles(arch, noise, *, d_cap=DEFAULT_DISTANCE_CAP, final_target=None):
    """Per-round error, distance and area for ``arch`` under ``noise``.

    Intermediate rounds pick their distance against their own output error.
    The last round is sized for ``final_target`` (the application target by
    default) rather than for the raw achieved error.
    """
    if final_target is None:
        final_target = noise.target_error
    profiles = []
    for r in range(1, arch.levels + 1):
        eps_r = round_error(arch, noise, r)
        sizing = final_target if r == arch.levels else eps_r
        d_r = solve_code_distance(noise.eps_in, sizing, d_cap=d_cap)
        profiles.append(
            RoundProfile(
                round_index=r,
                eps_out=eps_r,
                code_distance=d_r,
                area_logical=round_logical_area(arch, r),
            )
        )
    return profiles
