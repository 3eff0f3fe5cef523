"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run standalone with ``python tests/test_acceptance.py`` or through pytest.
"""
import functools
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from msfactory.distillation import (
    FactoryArchitecture,
    NoiseModel,
    bh_error_threshold,
    bh_output_error,
    effective_output,
    protocol_count,
    round_error,
    yield_threshold,
)
from msfactory.exceptions import DistanceOverflow, Infeasible, NoFeasibleLevel, StarvedFactory
from msfactory.latency import CongestionModel
from msfactory.optimizer import (
    SearchConstraints,
    compare_presets,
    evaluate_design,
    evaluate_fixed,
    optimize,
    preset,
    protocol_ratio_cap,
)
from msfactory.sim import (
    SimConfig,
    build_layout,
    calibrate_congestion,
    lower_bound_cycles,
    model_cycles,
    requests_from_counts,
    run,
)
from msfactory.sim.layout import factory_footprint
from msfactory.workload import TLoadDistribution, generate_ising_like, reference_workload, stats

# --- 1: closed forms ------------------------------------------------------


def _tree_count(k, levels):
    """Modules in a block code, wired round by round."""
    n = 3 * k + 8
    total, count = 0, n ** (levels - 1)
    for _ in range(levels):
        total += count
        count = count * k // n
    return total


def criterion_1():
    worst = 0.0
    for k in range(1, 11):
        for levels in range(1, 5):
            for eps in (1e-2, 1e-3, 1e-4):
                rec = eps
                for _ in range(levels):
                    rec = (1 + 3 * k) * rec * rec
                got = round_error(FactoryArchitecture(k**levels, 1, levels), NoiseModel(eps), levels)
                worst = max(worst, abs(got - rec) / rec)
    trees = all(protocol_count(k, lv) == _tree_count(k, lv) for k in range(1, 6) for lv in range(1, 5))
    fixed = all(bh_output_error(k, bh_error_threshold(k)) == bh_error_threshold(k) for k in range(1, 11))
    ok = worst <= 1e-12 and trees and fixed and protocol_count(2, 3) == 228
    return ok, f"max rel err {worst:.2e}, tree counts {trees}, fixed point {fixed}"


# --- 2: yield threshold ---------------------------------------------------


def criterion_2():
    rng = np.random.default_rng(2024)
    bad = 0
    for _ in range(200):
        K = int(rng.integers(1, 2000))
        X = int(rng.integers(1, K + 1))
        arch = FactoryArchitecture(K, X, int(rng.integers(1, 5)))
        th = yield_threshold(arch)
        probes = [math.nextafter(th, 0.0), th, math.nextafter(th, 1.0), float(rng.uniform(0, 2 * th))]
        for eps in probes:
            if (effective_output(arch, NoiseModel(1e-4, eps_inject=eps)) > 0) != (eps < th):
                bad += 1
    return bad == 0, f"{bad} mismatches over 200 designs x 4 probes"


# --- 3: fixture statistics ------------------------------------------------

# published rows: integers exact, moments as (value, significant figures printed)
TABLE = {
    "im": (500, 9068348, 20589, (440, 3), (107, 3), 778),
    "gse": (5, 775522, 546708, (1.419, 4), (1.464, 4), 12),
}


def _sig(x, figs):
    return float(f"{x:.{figs}g}")


def criterion_3():
    mism = []
    for key, (n, count, length, avg, std, peak) in TABLE.items():
        s = stats(reference_workload(key))
        got = (s.n_qubits, s.t_count, s.schedule_length, _sig(s.t_avg, avg[1]), _sig(s.t_std, std[1]), s.t_peak)
        if got != (n, count, length, avg[0], std[0], peak):
            mism.append((key, got))
    return not mism, f"mismatches {mism}" if mism else "all columns match"


# --- 4: optimizer exactness -----------------------------------------------


def _oracle(dist, noise, k_max, l_max):
    """Lowest level with a feasible grid point, then min (volume, X, K) there."""
    cap = protocol_ratio_cap(noise)
    for level in range(1, l_max + 1):
        best = None
        for K in range(1, k_max + 1):
            for X in range(1, K + 1):
                if K / X > cap:
                    continue
                try:
                    p = evaluate_design(FactoryArchitecture(K, X, level), dist, noise)
                except (Infeasible, StarvedFactory, DistanceOverflow):
                    continue
                key = (p.estimate.volume, X, K)
                if best is None or key < best[0]:
                    best = (key, p)
        if best is not None:
            return best[1]
    return None


def criterion_4():
    rng = np.random.default_rng(4)
    bad, checked = [], 0
    for i in range(20):
        ts = rng.choice(np.arange(0, 80), size=int(rng.integers(1, 9)), replace=False)
        dist = TLoadDistribution({int(t): int(rng.integers(1, 40)) for t in ts})
        noise = NoiseModel(float(10 ** rng.uniform(-5, -2.5)), n_gates=int(10 ** rng.uniform(6, 14)))
        k_max, l_max = int(rng.integers(10, 51)), int(rng.integers(1, 4))
        want = _oracle(dist, noise, k_max, l_max)
        try:
            got = optimize(dist, noise, SearchConstraints(k_max=k_max, l_max=l_max))
        except NoFeasibleLevel:
            got = None
        checked += 1
        if (want is None) != (got is None):
            bad.append(i)
        elif want is not None and (
            (got.arch, got.estimate.volume) != (want.arch, want.estimate.volume)
        ):
            bad.append(i)
    return not bad, f"{checked} instances, mismatches at {bad}"


# --- 5: preset dominance --------------------------------------------------

EPS_GRID = np.logspace(-5, -3, 9)


def criterion_5():
    chain_bad, big = [], 0
    for key in ("im", "gse"):
        w = reference_workload(key)
        for eps in EPS_GRID:
            r = compare_presets(w, NoiseModel(float(eps)))
            if any(isinstance(v, Exception) for v in r.values()):
                continue
            v = {k: p.estimate.volume for k, p in r.items()}
            if not v["optimized_distributed"] <= v["optimized_unified"] <= min(v["surplus"], v["singlet"]):
                chain_bad.append((key, eps))
            if key == "im" and v["surplus"] >= 5 * v["optimized_distributed"]:
                big += 1
    ok = not chain_bad and big >= 3
    return ok, f"chain violations {chain_bad}, IM points with >=5x over surplus: {big}/9"


# --- 6: level steps -------------------------------------------------------


def criterion_6():
    details = []
    ok = True
    for key in ("im", "gse"):
        w = reference_workload(key)
        eps = np.logspace(-3, -5, 61)
        pts = [optimize(w, NoiseModel(float(e))) for e in eps]
        lv = [p.arch.levels for p in pts]
        vol = np.array([p.estimate.volume for p in pts])
        ratio = vol[1:] / vol[:-1]
        steps = [i for i in range(len(lv) - 1) if lv[i + 1] < lv[i]]
        flat = [ratio[i] for i in range(len(lv) - 1) if lv[i + 1] == lv[i]]
        monotone = all(b <= a for a, b in zip(lv, lv[1:]))
        # every level drop must shrink volume by more than any same-level neighbour pair
        sharp = bool(steps) and all(ratio[i] < min(flat) for i in steps)
        ok &= monotone and sharp
        details.append(f"{key}: levels {lv[0]}->{lv[-1]}, step ratios "
                       f"{[round(float(ratio[i]), 3) for i in steps]}, smallest same-level ratio {min(flat):.3f}")
    return ok, "; ".join(details)


# --- 7: sensitivity -------------------------------------------------------


def _survives(design, w, eps):
    try:
        return math.isfinite(evaluate_fixed(design, w, NoiseModel(1e-5, eps_inject=eps)).estimate.volume)
    except StarvedFactory:
        return False


def criterion_7():
    w = reference_workload("im")
    surplus = preset("surplus", w, NoiseModel(1e-5))
    dist = evaluate_design(FactoryArchitecture(600, 200, surplus.arch.levels), w, NoiseModel(1e-5))
    th_s, th_d = yield_threshold(surplus.arch), yield_threshold(dist.arch)
    analytic = th_s < th_d
    evaluated = (
        _survives(surplus, w, math.nextafter(th_s, 0)) and not _survives(surplus, w, th_s)
        and _survives(dist, w, th_s) and _survives(dist, w, math.nextafter(th_d, 0))
        and not _survives(dist, w, th_d)
    )
    ok = analytic and evaluated and surplus.arch.K == 778
    return ok, f"surplus threshold {th_s:.4g}, distributed threshold {th_d:.4g}"


# --- 8 and 9: simulator ---------------------------------------------------

SIM_KS = (1, 2, 4, 8, 16, 32)
TEST_SEEDS = range(10)
CALIBRATION_SEEDS = range(10, 20)
SIM_DISTANCE = 7
SIM_T_DISTILL = 11 * SIM_DISTANCE
MODEL_RTOL = 1e-12


@functools.lru_cache(maxsize=None)
def _sim_sweep(seeds):
    counts = list(generate_ising_like(16, 5, seed=1).truncated(200).schedule)
    out = {}
    for K in SIM_KS:
        arch = FactoryArchitecture(K, 1, 1)
        lay = build_layout(arch, 16, "central", 40, 40)
        for s in seeds:
            cfg = SimConfig(arch, SIM_DISTANCE, SIM_T_DISTILL, s)
            sched = requests_from_counts(counts, lay, s)
            out[K, s] = (lower_bound_cycles(sched, cfg), run(sched, lay, cfg).total_cycles,
                         model_cycles(sched, cfg, CongestionModel(1.0)), sched, cfg)
    return out


def _calibrated_c():
    cal = _sim_sweep(tuple(CALIBRATION_SEEDS))
    return calibrate_congestion([v[1] for v in cal.values()], [v[2] for v in cal.values()])


def criterion_8():
    c = _calibrated_c()
    viol = []
    for (K, s), (lb, sim, _, sched, cfg) in _sim_sweep(tuple(TEST_SEEDS)).items():
        model = model_cycles(sched, cfg, CongestionModel(c))
        if not lb <= sim <= model * (1 + MODEL_RTOL):
            viol.append((K, s))
    return not viol, f"calibrated c = {c:.4f} on seeds 10-19; violations on seeds 0-9: {viol}"


def criterion_9():
    res = _sim_sweep(tuple(TEST_SEEDS))
    vols = []
    for K in SIM_KS:
        area = factory_footprint(FactoryArchitecture(K, 1, 1)) * SIM_DISTANCE**2
        vols.append(area * np.mean([res[K, s][1] for s in TEST_SEEDS]))
    best = int(np.argmin(vols))
    return 0 < best < len(SIM_KS) - 1, f"minimum at K={SIM_KS[best]}, volumes {[f'{v:.3g}' for v in vols]}"


# --- 10: determinism ------------------------------------------------------


def _cli_bytes(tmp, tag, argv, hash_seed):
    out = os.path.join(tmp, f"{tag}-{hash_seed}")
    env = dict(os.environ, PYTHONHASHSEED=str(hash_seed))
    proc = subprocess.run([sys.executable, "-m", "msfactory.cli", *argv, "--out", out],
                          env=env, capture_output=True, check=True)
    with open(out, "rb") as fh:
        return proc.stdout + fh.read()


def criterion_10(tmp):
    wl = os.path.join(tmp, "sched.json")
    subprocess.run([sys.executable, "-m", "msfactory.cli", "workload", "gen-ising", "--n-qubits", "12",
                    "--trotter-steps", "2", "--seed", "3", "--out", wl], check=True)
    commands = {
        "estimate": ["estimate", "--workload", "im", "--preset", "surplus", "--format", "json"],
        "optimize": ["optimize", "--workload", "gse", "--compare", "--format", "json"],
        "sweep": ["sweep", "--workload", "im", "--sweep", "eps=1e-5:1e-3:5", "--jobs", "3"],
        "stats": ["workload", "stats", "--workload", wl],
        "gen": ["workload", "gen-gse", "--n-orbitals", "8", "--seed", "5", "--length", "500"],
        "simulate": ["simulate", "--workload", wl, "--capacity", "6", "--factories", "2", "--placement",
                     "mesh", "--seed", "7", "--trace", os.path.join(tmp, "trace.jsonl"), "--format", "json"],
    }
    differing = []
    for tag, argv in commands.items():
        first = _cli_bytes(tmp, tag, argv, 1)
        trace = open(os.path.join(tmp, "trace.jsonl"), "rb").read() if tag == "simulate" else b""
        second = _cli_bytes(tmp, tag, argv, 2)
        trace2 = open(os.path.join(tmp, "trace.jsonl"), "rb").read() if tag == "simulate" else b""
        if first != second or trace != trace2:
            differing.append(tag)
    # in-process simulation with tracing
    lay = build_layout(FactoryArchitecture(4, 2, 1), 12, "mesh", 30, 30)
    sched = requests_from_counts([5, 9, 2, 12, 7], lay, 11)
    cfg = SimConfig(FactoryArchitecture(4, 2, 1), 5, 30, 11)
    if run(sched, lay, cfg, trace=True) != run(sched, lay, cfg, trace=True):
        differing.append("run")
    return not differing, f"{len(commands) + 1} runs compared, differing: {differing}"


# --- harness --------------------------------------------------------------

CRITERIA = {
    1: ("closed forms, tree counts, fixed point", criterion_1),
    2: ("yield threshold boundary", criterion_2),
    3: ("reference workload statistics", criterion_3),
    4: ("optimizer equals exhaustive search", criterion_4),
    5: ("preset dominance", criterion_5),
    6: ("level-transition steps", criterion_6),
    7: ("sensitivity threshold ordering", criterion_7),
    8: ("simulator bracketing", criterion_8),
    9: ("interior volume minimum", criterion_9),
    10: ("determinism", criterion_10),
}


def _evaluate(n, tmp):
    name, fn = CRITERIA[n]
    ok, detail = fn(tmp) if n == 10 else fn()
    return ok, f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {name}: {detail}"


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n, tmp_path, capsys):
    ok, line = _evaluate(n, str(tmp_path))
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        results = [_evaluate(n, tmp) for n in sorted(CRITERIA)]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
