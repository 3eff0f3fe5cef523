"""Space-time volume optimization over factory capacity, count and level.

The search picks the lowest block-code level that can reach the application's
error target and then scans every integer ``(K, X)`` with ``1 <= X <= K <=
k_max`` that satisfies the protocol threshold. Volumes are screened with a
vectorized evaluation per ``K`` and the best candidates are re-scored with
:func:`evaluate_design`, so the returned point is exactly the scalar argmin.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from msfactory.distillation import (
    DEFAULT_DISTANCE_CAP,
    FactoryArchitecture,
    NoiseModel,
    ResourceEstimate,
    _TARGET_RTOL,
    distill_time,
    effective_output,
    factory_area,
    round_error,
    round_profiles,
    solve_code_distance,
    solve_code_distances,
)
from msfactory.exceptions import (
    DistanceOverflow,
    FactoryModelError,
    Infeasible,
    NoFeasibleLevel,
    StarvedFactory,
)
from msfactory.latency import CongestionModel, schedule_time, t_gate_latency
from msfactory.utils.validation import check_distribution, check_positive_int

PRESETS = ("surplus", "singlet", "optimized_unified", "optimized_distributed")
PRESET_ALIASES = {
    "surplus": "surplus",
    "singlet": "singlet",
    "unified": "optimized_unified",
    "optimized_unified": "optimized_unified",
    "distributed": "optimized_distributed",
    "optimized_distributed": "optimized_distributed",
}

# vectorized screen vs. scalar re-score: anything this close to the best
# screened volume is re-scored exactly
_SCREEN_RTOL = 1e-8


@dataclass(frozen=True)
class SearchConstraints:
    """Bounds of the design-space search.

    Args:
        l_max: Highest block-code level considered.
        k_max: Largest total capacity ``K``; ``None`` uses the workload's peak
            demand.
        require_X_le_K: Keep ``X <= K``.
        enforce_protocol_threshold: Keep ``K/X <= (1 - 8 eps) / (3 eps)``.
        search_all_levels: Search every feasible level instead of stopping at
            the lowest one.
        d_cap: Largest code distance the distance solver may return.
    """

    l_max: int = 5
    k_max: int | None = None
    require_X_le_K: bool = True
    enforce_protocol_threshold: bool = True
    search_all_levels: bool = False
    d_cap: int = DEFAULT_DISTANCE_CAP

    def __post_init__(self):
        check_positive_int(self.l_max, "l_max")
        if self.k_max is not None:
            check_positive_int(self.k_max, "k_max")
        check_positive_int(self.d_cap, "d_cap", minimum=3)

    def capacity_limit(self, dist):
        return self.k_max if self.k_max is not None else max(1, dist.t_peak)


@dataclass(frozen=True)
class DesignPoint:
    arch: FactoryArchitecture
    round_distances: tuple
    estimate: ResourceEstimate
    k_output: float
    eps_out: float
    preset: str = "custom"

    @property
    def t_distill(self):
        return distill_time(self.round_distances)

    @property
    def t_gate(self):
        return t_gate_latency(self.round_distances[-1])

    def as_dict(self):
        return {
            "preset": self.preset,
            "K": self.arch.K,
            "X": self.arch.X,
            "levels": self.arch.levels,
            "round_distances": list(self.round_distances),
            "area_physical": self.estimate.area_physical_qubits,
            "cycles": self.estimate.total_cycles,
            "volume": self.estimate.volume,
            "eps_out": self.eps_out,
            "k_output": self.k_output,
        }


def target_error(noise):
    return noise.p_success_target / noise.n_gates


def protocol_ratio_cap(noise):
    """Largest ``K/X`` below the single-round protocol threshold."""
    eps = noise.eps_inject
    return (1.0 - 8.0 * eps) / (3.0 * eps)


def _meets_target(err, target):
    return err <= target * (1.0 + _TARGET_RTOL)


def _final_error(ratio, level, eps):
    k = ratio ** (1.0 / level)
    return (1 + 3 * k) ** (2**level - 1) * eps ** (2**level)


def max_feasible_ratio(level, noise):
    """Largest per-factory capacity ``K/X`` whose final error meets the target.

    The final-round error is increasing in ``K/X``, so the inequality inverts
    in closed form. Returns 0 when even ``K/X = 1`` misses the target.
    """
    level = check_positive_int(level, "level")
    eps, target = noise.eps_inject, target_error(noise)
    if not _meets_target(_final_error(1.0, level, eps), target):
        return 0.0
    m = 2**level
    # (1 + 3 k)^(m-1) eps^m <= target  <=>  k <= (B - 1) / 3
    log_b = (math.log(target) - m * math.log(eps)) / (m - 1)
    if log_b > 700:
        return math.inf
    k = (math.exp(log_b) - 1.0) / 3.0
    return max(1.0, k**level)


def min_feasible_level(noise, constraints=SearchConstraints()):
    for level in range(1, constraints.l_max + 1):
        if max_feasible_ratio(level, noise) >= 1.0:
            return level
    raise NoFeasibleLevel(
        f"no level up to {constraints.l_max} reaches target {target_error(noise):.3g}"
        f" at eps_inject={noise.eps_inject:.3g}"
    )


def _design_level(K, X, noise, l_max):
    """Lowest level at which the fixed ratio ``K/X`` meets the target."""
    for level in range(1, l_max + 1):
        if _meets_target(_final_error(K / X, level, noise.eps_inject), target_error(noise)):
            return level
    raise NoFeasibleLevel(
        f"K={K}, X={X} misses target {target_error(noise):.3g} at every level up to {l_max}"
    )


def evaluate_design(
    arch,
    workload,
    noise,
    congestion=CongestionModel(),
    *,
    d_cap=DEFAULT_DISTANCE_CAP,
    enforce_target=True,
    use_yield=True,
    preset="custom",
):
    """Area, time and volume of ``arch`` running ``workload``.

    Raises:
        Infeasible: the final-round error misses the target (when enforced).
        StarvedFactory: the yield-adjusted output is zero.
    """
    dist = check_distribution(workload)
    eps_out = round_error(arch, noise, arch.levels)
    if enforce_target and not _meets_target(eps_out, target_error(noise)):
        raise Infeasible(
            f"K={arch.K}, X={arch.X}, levels={arch.levels} reaches {eps_out:.3g}"
            f" > target {target_error(noise):.3g}"
        )
    k_out = effective_output(arch, noise)
    if k_out <= 0.0:
        raise StarvedFactory(
            f"eps_inject={noise.eps_inject:.3g} is past the yield threshold of"
            f" K={arch.K}, X={arch.X}, levels={arch.levels}"
        )
    profiles = round_profiles(arch, noise, d_cap=d_cap)
    ds = tuple(p.code_distance for p in profiles)
    area = factory_area(arch, profiles)
    K_eff = k_out if use_yield else float(arch.K)
    cycles = schedule_time(dist, K_eff, arch.X, t_gate_latency(ds[-1]), distill_time(ds), congestion)
    return DesignPoint(arch, ds, ResourceEstimate(area, cycles), k_out, eps_out, preset)


def evaluate_fixed(design, workload, noise, congestion=CongestionModel(), *, use_yield=True):
    """Re-evaluate a built design under different noise.

    Hardware is fixed: capacity, factory count, level and code distances stay
    as designed, only the yield and achieved error move with ``noise``.
    """
    dist = check_distribution(workload)
    arch = design.arch
    k_out = effective_output(arch, noise)
    if k_out <= 0.0:
        raise StarvedFactory(
            f"eps_inject={noise.eps_inject:.3g} is past the yield threshold of"
            f" K={arch.K}, X={arch.X}, levels={arch.levels}"
        )
    ds = design.round_distances
    K_eff = k_out if use_yield else float(arch.K)
    cycles = schedule_time(dist, K_eff, arch.X, t_gate_latency(ds[-1]), distill_time(ds), congestion)
    return DesignPoint(
        arch, ds, replace(design.estimate, total_cycles=cycles), k_out,
        round_error(arch, noise, arch.levels), design.preset,
    )


# ---------------------------------------------------------------------------
# grid search


@dataclass
class _Screen:
    """Screened volumes of the candidate ``(K, X)`` pairs at one level."""

    level: int
    K: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    X: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    volume: np.ndarray = field(default_factory=lambda: np.empty(0))


def _candidate_pairs(k_max, unified, require_X_le_K, ratio_limit):
    """All integer ``(K, X)`` on the grid with ``K/X`` at most ``ratio_limit``."""
    if unified:
        Ks = np.arange(1, k_max + 1, dtype=np.int64)
        Xs = np.ones_like(Ks)
    else:
        Ks, Xs = np.meshgrid(np.arange(1, k_max + 1), np.arange(1, k_max + 1), indexing="ij")
        Ks, Xs = Ks.ravel().astype(np.int64), Xs.ravel().astype(np.int64)
        if require_X_le_K:
            keep = Xs <= Ks
            Ks, Xs = Ks[keep], Xs[keep]
    keep = Ks / Xs <= ratio_limit
    return Ks[keep], Xs[keep]


def _pair_terms(Ks, Xs, level, noise, d_cap, use_yield):
    """Feasibility mask and the workload-independent factors of the volume.

    Returns ``(ok, area, T_t, K_eff)`` with the same shape as ``Ks``.
    """
    eps, target = noise.eps_inject, target_error(noise)
    k = (Ks / Xs) ** (1.0 / level)
    final = (1 + 3 * k) ** (2**level - 1) * eps ** (2**level)
    # slightly loose; the scalar re-score makes the exact call
    ok = final <= target * (1.0 + 1e-9)

    n = 3 * k + 8
    thresh = 1.0 / n
    k_out = Ks.astype(float)
    for r in range(1, level + 1):
        eps_prev = eps if r == 1 else (1 + 3 * k) ** (2 ** (r - 1) - 1) * eps ** (2 ** (r - 1))
        k_out = k_out * np.where(eps_prev < thresh, n * (thresh - eps_prev), 0.0)
    ok &= k_out > 0

    ds = np.zeros((level, Ks.size), dtype=np.int64)
    for r in range(1, level):
        ds[r - 1] = solve_code_distances(
            noise.eps_in, (1 + 3 * k) ** (2**r - 1) * eps ** (2**r), d_cap=d_cap
        )
    ds[level - 1] = solve_code_distances(noise.eps_in, np.full(Ks.shape, target), d_cap=d_cap)
    ok &= np.all(ds > 0, axis=0)

    area = Xs * n ** (level - 1) * (6 * k + 14) * ds[0].astype(float) ** 2
    T_t = 4.0 * ds[level - 1] + 4.0
    K_eff = k_out if use_yield else Ks.astype(float)
    return ok, area, T_t, K_eff


def _exact_waves(K_eff, Xs, ts, counts):
    """``sum_t D[t] (s sqrt(K_eff/X) + sqrt(rest/X))`` for each candidate row."""
    s = np.floor(ts[None, :] / K_eff[:, None])
    rest = np.maximum(ts[None, :] - s * K_eff[:, None], 0.0)
    return (s * np.sqrt(K_eff / Xs)[:, None] + np.sqrt(rest / Xs[:, None])) @ counts


_CHUNK = 1024


def _screen_level(dist, noise, level, constraints, congestion, unified, use_yield, n_jobs):
    """Screen every grid point at ``level``, pruning with a volume lower bound.

    Each timestep satisfies ``s sqrt(K_eff) + sqrt(rest) >= t / sqrt(K_eff)``
    because ``rest < K_eff``, so the volume is at least
    ``area * c * T_t * T_count / sqrt(K_eff X)``. Candidates are evaluated in
    order of that bound and the scan stops once the bound exceeds the best
    volume seen; skipped points cannot be optimal.
    """
    k_max = constraints.capacity_limit(dist)
    r_max = max_feasible_ratio(level, noise)
    cap = protocol_ratio_cap(noise) if constraints.enforce_protocol_threshold else math.inf
    ts, counts = dist.arrays()
    active = ts > 0
    ts = ts[active].astype(float)
    counts = counts[active].astype(float)

    Ks, Xs = _candidate_pairs(k_max, unified, constraints.require_X_le_K,
                              min(cap, r_max * (1.0 + 1e-9)))
    screen = _Screen(level)
    if not Ks.size:
        return screen
    ok, area, T_t, K_eff = _pair_terms(Ks, Xs, level, noise, constraints.d_cap, use_yield)
    Ks, Xs, area, T_t, K_eff = Ks[ok], Xs[ok], area[ok], T_t[ok], K_eff[ok]
    if not Ks.size:
        return screen
    scale = area * congestion.c * T_t
    if not ts.size:
        screen.K, screen.X, screen.volume = Ks, Xs, np.zeros(Ks.size)
        return screen

    lower = scale * float(ts @ counts) / np.sqrt(K_eff * Xs)
    order = np.argsort(lower, kind="stable")
    chunks = [order[i:i + _CHUNK] for i in range(0, order.size, _CHUNK)]

    def run(idx):
        return scale[idx] * _exact_waves(K_eff[idx], Xs[idx], ts, counts)

    best = math.inf
    done_idx, done_vol = [], []
    pool = ThreadPoolExecutor(max_workers=n_jobs) if n_jobs and n_jobs > 1 else None
    try:
        step = n_jobs if pool else 1
        for i in range(0, len(chunks), step):
            batch = chunks[i:i + step]
            # prune on the bound; margin absorbs float rounding in both sides
            batch = [c[lower[c] <= best * (1.0 + 1e-9)] for c in batch]
            batch = [c for c in batch if c.size]
            if not batch:
                break
            vols = list(pool.map(run, batch)) if pool else [run(c) for c in batch]
            for c, v in zip(batch, vols):
                done_idx.append(c)
                done_vol.append(v)
                best = min(best, float(v.min()))
    finally:
        if pool:
            pool.shutdown()
    idx = np.concatenate(done_idx)
    screen.K, screen.X, screen.volume = Ks[idx], Xs[idx], np.concatenate(done_vol)
    return screen


def _rescore(screens, dist, noise, congestion, constraints, use_yield):
    """Exact argmin over screened candidates; ties go to smaller X, then K."""
    cand = [(v, lvl.level, K, X) for lvl in screens for K, X, v in zip(lvl.K, lvl.X, lvl.volume)]
    cand.sort(key=lambda c: (c[0], c[1], c[3], c[2]))
    best, best_key, bound = None, None, math.inf
    for v_screen, level, K, X in cand:
        if v_screen > bound:
            break
        arch = FactoryArchitecture(int(K), int(X), level)
        try:
            point = evaluate_design(
                arch, dist, noise, congestion, d_cap=constraints.d_cap, use_yield=use_yield
            )
        except (Infeasible, StarvedFactory, DistanceOverflow):
            continue
        key = (point.estimate.volume, level, int(X), int(K))
        if best_key is None or key < best_key:
            best, best_key = point, key
            bound = point.estimate.volume * (1.0 + _SCREEN_RTOL)
    return best


def optimize(
    workload,
    noise,
    constraints=SearchConstraints(),
    congestion=CongestionModel(),
    *,
    unified=False,
    use_yield=True,
    n_jobs=None,
):
    """Space-time optimal design point for ``workload``.

    Args:
        unified: Restrict the search to a single factory (``X = 1``).
        n_jobs: Threads used to screen capacities; the reduction is
            deterministic regardless.

    Raises:
        NoFeasibleLevel: no level up to ``l_max`` reaches the target, or no
            grid point at any searched level is feasible.
    """
    dist = check_distribution(workload)
    level0 = min_feasible_level(noise, constraints)
    levels = range(level0, constraints.l_max + 1) if constraints.search_all_levels else [level0]
    screens = [
        _screen_level(dist, noise, lvl, constraints, congestion, unified, use_yield, n_jobs)
        for lvl in levels
    ]
    best = _rescore(screens, dist, noise, congestion, constraints, use_yield)
    if best is None:
        raise NoFeasibleLevel(
            f"no feasible (K, X) with K <= {constraints.capacity_limit(dist)} at level {level0}"
        )
    return replace(best, preset="optimized_unified" if unified else "optimized_distributed")


def brute_force_optimize(workload, noise, constraints=SearchConstraints(), congestion=CongestionModel(),
                         *, unified=False, use_yield=True):
    """Reference exhaustive search calling :func:`evaluate_design` on every point."""
    dist = check_distribution(workload)
    level0 = min_feasible_level(noise, constraints)
    levels = range(level0, constraints.l_max + 1) if constraints.search_all_levels else [level0]
    cap = protocol_ratio_cap(noise) if constraints.enforce_protocol_threshold else math.inf
    k_max = constraints.capacity_limit(dist)
    best, best_key = None, None
    for level in levels:
        for K in range(1, k_max + 1):
            for X in [1] if unified else range(1, K + 1):
                if K / X > cap:
                    continue
                try:
                    p = evaluate_design(FactoryArchitecture(K, X, level), dist, noise, congestion,
                                        d_cap=constraints.d_cap, use_yield=use_yield)
                except (Infeasible, StarvedFactory, DistanceOverflow):
                    continue
                key = (p.estimate.volume, level, X, K)
                if best_key is None or key < best_key:
                    best, best_key = p, key
    return best


# ---------------------------------------------------------------------------
# presets


def preset(
    kind,
    workload,
    noise,
    constraints=SearchConstraints(),
    congestion=CongestionModel(),
    *,
    auto_escalate=False,
    use_yield=True,
    n_jobs=None,
):
    """Evaluate one of the four reference architectures.

    ``surplus`` serves the peak demand from one factory, ``singlet`` makes one
    state per cycle, the optimized kinds search ``(K, X)`` with or without
    distribution. Fixed presets run at the lowest level meeting the target for
    their own ``K/X``.

    Raises:
        Infeasible: the preset violates the protocol threshold
            ``K/X <= (1 - 8 eps)/(3 eps)``. With ``auto_escalate`` the threshold
            check is replaced by the level-aware yield threshold and the level
            is raised until the factory yields states.
    """
    kind = PRESET_ALIASES.get(kind, kind)
    if kind not in PRESETS:
        raise ValueError(f"unknown preset {kind!r}; choose from {', '.join(PRESETS)}")
    dist = check_distribution(workload)
    if kind in ("optimized_unified", "optimized_distributed"):
        return optimize(dist, noise, constraints, congestion,
                        unified=kind == "optimized_unified", use_yield=use_yield, n_jobs=n_jobs)
    K = max(1, dist.t_peak) if kind == "surplus" else 1
    level = _design_level(K, 1, noise, constraints.l_max)
    if not auto_escalate:
        if constraints.enforce_protocol_threshold and K > protocol_ratio_cap(noise):
            raise Infeasible(
                f"{kind} K={K} exceeds the protocol threshold"
                f" {protocol_ratio_cap(noise):.1f} at eps_inject={noise.eps_inject:.3g}"
            )
        return evaluate_design(FactoryArchitecture(K, 1, level), dist, noise, congestion,
                               d_cap=constraints.d_cap, use_yield=use_yield, preset=kind)
    last = None
    for lvl in range(level, constraints.l_max + 1):
        try:
            return evaluate_design(FactoryArchitecture(K, 1, lvl), dist, noise, congestion,
                                   d_cap=constraints.d_cap, use_yield=use_yield, preset=kind)
        except StarvedFactory as exc:
            last = exc
    raise Infeasible(f"{kind} yields nothing at every level up to {constraints.l_max}") from last


def compare_presets(workload, noise, constraints=SearchConstraints(), congestion=CongestionModel(),
                    kinds=PRESETS, **kwargs):
    """``{kind: DesignPoint or the FactoryModelError raised}`` for each preset."""
    out = {}
    for kind in kinds:
        try:
            out[PRESET_ALIASES.get(kind, kind)] = preset(kind, workload, noise, constraints,
                                                         congestion, **kwargs)
        except FactoryModelError as exc:
            out[PRESET_ALIASES.get(kind, kind)] = exc
    return out


# ---------------------------------------------------------------------------
# estimator


class FactoryOptimizer(BaseEstimator):
    """Fit a space-time optimal factory architecture to a T-load workload.

    Parameters mirror :class:`~msfactory.distillation.NoiseModel`,
    :class:`SearchConstraints` and :class:`~msfactory.latency.CongestionModel`.
    ``fit`` accepts a :class:`~msfactory.workload.TLoadDistribution`, a
    ``{t: count}`` mapping or a 1-D array of per-timestep demands.

    Attributes:
        design_: The fitted :class:`DesignPoint`.
        capacity_, n_factories_, levels_: Chosen ``K``, ``X`` and level.
        volume_: Space-time volume on the training workload.
    """

    def __init__(
        self,
        eps_in=1e-4,
        eps_inject=None,
        p_success=0.5,
        n_gates=10**12,
        l_max=5,
        k_max=None,
        congestion_c=1.0,
        unified=False,
        search_all_levels=False,
        use_yield=True,
        n_jobs=None,
    ):
        self.eps_in = eps_in
        self.eps_inject = eps_inject
        self.p_success = p_success
        self.n_gates = n_gates
        self.l_max = l_max
        self.k_max = k_max
        self.congestion_c = congestion_c
        self.unified = unified
        self.search_all_levels = search_all_levels
        self.use_yield = use_yield
        self.n_jobs = n_jobs

    def _noise(self):
        return NoiseModel(self.eps_in, self.eps_inject, self.p_success, self.n_gates)

    def _congestion(self):
        return CongestionModel(self.congestion_c)

    def fit(self, X, y=None):
        dist = check_distribution(X)
        constraints = SearchConstraints(
            l_max=self.l_max, k_max=self.k_max, search_all_levels=self.search_all_levels
        )
        self.design_ = optimize(dist, self._noise(), constraints, self._congestion(),
                                unified=self.unified, use_yield=self.use_yield, n_jobs=self.n_jobs)
        self.capacity_ = self.design_.arch.K
        self.n_factories_ = self.design_.arch.X
        self.levels_ = self.design_.arch.levels
        self.volume_ = self.design_.estimate.volume
        return self

    def predict(self, X):
        """Cycles spent on each timestep of a per-timestep demand array."""
        check_is_fitted(self, "design_")
        demand = np.asarray(X, dtype=np.int64).ravel()
        d = self.design_
        K_eff = d.k_output if self.use_yield else float(d.arch.K)
        from msfactory.latency import iterations_for_timestep

        model = self._congestion()
        return np.array([
            d.t_distill * iterations_for_timestep(int(t), K_eff, d.arch.X, d.t_gate, d.t_distill, model)
            for t in demand
        ])

    def score(self, X, y=None):
        """Negative space-time volume of the fitted design on ``X``."""
        check_is_fitted(self, "design_")
        point = evaluate_design(self.design_.arch, X, self._noise(), self._congestion(),
                                use_yield=self.use_yield)
        return -point.estimate.volume
