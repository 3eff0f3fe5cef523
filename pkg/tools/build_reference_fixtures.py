"""Build the shipped reference histograms for the IM and GSE benchmarks.

The histograms are integer-exact: schedule length, T count and peak match the
published benchmark statistics, and the population standard deviation rounds
to the published value. Run from the repository root:

    python tools/build_reference_fixtures.py
"""
import json
import math
from pathlib import Path

import numpy as np

TARGETS = {
    "im": dict(name="ising-model-n500", n_qubits=500, L=20589, t_count=9068348,
               t_peak=778, std=107.0, std_tol=0.02, shape="normal"),
    "gse": dict(name="ground-state-estimation-n5", n_qubits=5, L=546708, t_count=775522,
                t_peak=12, std=1.464, std_tol=0.0002, shape="negbin"),
}


def _initial(spec, width):
    ts = np.arange(spec["t_peak"] + 1)
    mean = spec["t_count"] / spec["L"]
    if spec["shape"] == "normal":
        w = np.exp(-0.5 * ((ts - mean) / width) ** 2)
    else:
        p = mean / width**2
        r = mean * p / (1 - p)
        logw = (np.array([math.lgamma(t + r) - math.lgamma(r) - math.lgamma(t + 1) for t in ts])
                + r * math.log(p) + ts * math.log(1 - p))
        w = np.exp(logw)
    counts = np.floor(w / w.sum() * spec["L"]).astype(np.int64)
    counts[-1] = max(counts[-1], 1)
    counts[np.argmax(counts)] += spec["L"] - counts.sum()
    return ts, counts


def _moments(ts, counts):
    L = counts.sum()
    mean = (ts * counts).sum() / L
    return (ts * counts).sum(), math.sqrt(((ts - mean) ** 2 * counts).sum() / L)


def _fit_width(spec):
    lo, hi = 0.5 * spec["std"], 2.0 * spec["std"]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        _, std = _moments(*_initial(spec, mid))
        lo, hi = (mid, hi) if std < spec["std"] else (lo, mid)
    return 0.5 * (lo + hi)


def build(spec):
    ts, counts = _initial(spec, _fit_width(spec))
    mode = int(np.argmax(counts))
    top = len(ts) - 1
    # shift timesteps by one unit of demand, bins nearest the mode first, to
    # hit the T count; the peak bin is never emptied
    order = sorted(range(1, top), key=lambda i: abs(i - mode))
    diff = spec["t_count"] - int((ts * counts).sum())
    for src in order:
        if diff == 0:
            break
        step = 1 if diff > 0 else -1
        move = min(abs(diff), int(counts[src]))
        counts[src] -= move
        counts[src + step] += move
        diff -= step * move
    assert diff == 0
    # symmetric moves mode -> mode +- j change sum(t^2) by 2 j^2 per unit and
    # preserve L and the T count; coarse spreads first, then finer ones
    L = counts.sum()
    mean = spec["t_count"] / L
    want = L * (spec["std"] ** 2 + mean**2)
    mode = int(np.argmax(counts))
    for j in range(min(mode, top - mode - 1), 0, -1):
        have = float((ts**2 * counts).sum())
        units = int((want - have) / (2 * j * j))
        if units > 0:
            units = min(units, int(counts[mode]) // 2)
            counts[mode] -= 2 * units
            counts[mode - j] += units
            counts[mode + j] += units
        elif units < 0:
            units = min(-units, int(counts[mode - j]), int(counts[mode + j]))
            counts[mode] += 2 * units
            counts[mode - j] -= units
            counts[mode + j] -= units
    _, std = _moments(ts, counts)
    assert abs(std - spec["std"]) <= spec["std_tol"], std
    assert counts.min() >= 0 and counts[-1] >= 1
    return {
        "version": 1,
        "name": spec["name"],
        "n_qubits": spec["n_qubits"],
        "histogram": [[int(t), int(c)] for t, c in zip(ts, counts) if c],
    }


if __name__ == "__main__":
    out = Path(__file__).resolve().parents[1] / "src" / "msfactory" / "data"
    for key, spec in TARGETS.items():
        doc = build(spec)
        (out / f"{key}_reference.json").write_text(json.dumps(doc) + "\n")
        ts = np.array([p[0] for p in doc["histogram"]])
        cs = np.array([p[1] for p in doc["histogram"]])
        print(key, cs.sum(), _moments(ts, cs), ts.max())
