"""T-load distributions: construction, summary statistics, synthetic generators, I/O.

A distribution is a histogram ``D[t]`` counting the timesteps that demand
``t`` parallel T gates. The analytical model only needs the histogram; the
lattice simulator also needs the original per-timestep order, which is kept
in ``schedule`` when known.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from msfactory.exceptions import EmptySchedule, SchemaViolation, VersionMismatch
from msfactory.utils.validation import check_positive_int

FORMAT_VERSION = 1

# Moment fits for the synthetic generators, as fractions of the qubit count
# (highly parallel spin-chain simulation) or absolute (serial chemistry).
ISING_MEAN_PER_QUBIT = 0.88
ISING_STD_PER_QUBIT = 0.21
GSE_MEAN = 1.419
GSE_STD = 1.464
GSE_PEAK_PER_ORBITAL = 2.4


@dataclass(frozen=True)
class TLoadDistribution:
    """Histogram of per-timestep parallel T demand.

    Args:
        histogram: Mapping ``t -> number of timesteps demanding t T gates``.
            Zero-count entries are dropped; keys are stored sorted.
        name: Free-text label.
        n_qubits: Logical data-qubit count of the application, if known.
        schedule: Optional per-timestep demand in program order. When given
            it must agree with ``histogram``.
    """

    histogram: dict = field(default_factory=dict)
    name: str = ""
    n_qubits: int | None = None
    schedule: tuple | None = None

    def __post_init__(self):
        clean = {}
        for t, c in dict(self.histogram).items():
            t_i, c_i = int(t), int(c)
            if t_i != t or c_i != c:
                raise ValueError(f"histogram entries must be integers, got {t!r}: {c!r}")
            if t_i < 0 or c_i < 0:
                raise ValueError(f"histogram entries must be nonnegative, got {t!r}: {c!r}")
            if c_i:
                clean[t_i] = clean.get(t_i, 0) + c_i
        object.__setattr__(self, "histogram", dict(sorted(clean.items())))
        if self.n_qubits is not None:
            object.__setattr__(self, "n_qubits", check_positive_int(self.n_qubits, "n_qubits"))
        if self.schedule is not None:
            sched = tuple(int(v) for v in self.schedule)
            object.__setattr__(self, "schedule", sched)
            if _count(sched) != self.histogram:
                raise ValueError("schedule and histogram disagree")

    def __hash__(self):
        return hash((tuple(self.histogram.items()), self.name, self.n_qubits, self.schedule))

    def arrays(self):
        """Sorted ``(t, count)`` integer arrays."""
        ts = np.fromiter(self.histogram.keys(), dtype=np.int64, count=len(self.histogram))
        cs = np.fromiter(self.histogram.values(), dtype=np.int64, count=len(self.histogram))
        return ts, cs

    @property
    def schedule_length(self) -> int:
        return sum(self.histogram.values())

    @property
    def t_count(self) -> int:
        return sum(t * c for t, c in self.histogram.items())

    @property
    def t_peak(self) -> int:
        return max(self.histogram, default=0)

    @property
    def t_avg(self) -> float:
        L = self.schedule_length
        return self.t_count / L if L else 0.0

    @property
    def t_std(self) -> float:
        """Population standard deviation of demand over timesteps."""
        L = self.schedule_length
        if not L:
            return 0.0
        mean = self.t_count / L
        var = sum(c * (t - mean) ** 2 for t, c in self.histogram.items()) / L
        return math.sqrt(var)

    def truncated(self, n_steps):
        """First ``n_steps`` timesteps of the schedule."""
        if self.schedule is None:
            raise ValueError(f"distribution {self.name!r} has no schedule to truncate")
        return from_schedule(self.schedule[:n_steps], self.name, n_qubits=self.n_qubits)

    def scaled(self, factor):
        """Copy with every timestep count multiplied by ``factor``."""
        factor = check_positive_int(factor, "factor")
        return TLoadDistribution(
            {t: c * factor for t, c in self.histogram.items()}, self.name, self.n_qubits
        )


@dataclass(frozen=True)
class WorkloadStats:
    n_qubits: int
    t_count: int
    schedule_length: int
    t_avg: float
    t_std: float
    t_peak: int


def _count(values):
    out = {}
    for v in values:
        out[v] = out.get(v, 0) + 1
    return dict(sorted(out.items()))


def from_schedule(per_timestep_counts, name="", *, n_qubits=None):
    """Histogram a per-timestep demand list, keeping the list as ``schedule``."""
    values = [int(v) for v in per_timestep_counts]
    if not values:
        raise EmptySchedule("schedule must contain at least one timestep")
    if any(v < 0 for v in values):
        raise ValueError("per-timestep T demand must be nonnegative")
    return TLoadDistribution(_count(values), name, n_qubits, tuple(values))


def stats(dist, n_qubits=None):
    n = n_qubits if n_qubits is not None else dist.n_qubits
    if n is None:
        raise ValueError("n_qubits is required when the distribution does not carry it")
    return WorkloadStats(
        n_qubits=check_positive_int(n, "n_qubits"),
        t_count=dist.t_count,
        schedule_length=dist.schedule_length,
        t_avg=dist.t_avg,
        t_std=dist.t_std,
        t_peak=dist.t_peak,
    )


def generate_ising_like(n_qubits, trotter_steps, seed, *, timesteps_per_step=40):
    """Synthetic highly parallel schedule shaped like a spin-chain simulation.

    Each timestep demands a rounded normal draw with mean ``0.88 n`` and
    standard deviation ``0.21 n``, clipped to ``[0, 2 n]`` (S gates count as
    two T gates, so demand can exceed the qubit count).
    """
    n_qubits = check_positive_int(n_qubits, "n_qubits")
    trotter_steps = check_positive_int(trotter_steps, "trotter_steps")
    length = trotter_steps * check_positive_int(timesteps_per_step, "timesteps_per_step")
    rng = np.random.default_rng(seed)
    draws = rng.normal(ISING_MEAN_PER_QUBIT * n_qubits, ISING_STD_PER_QUBIT * n_qubits, length)
    demand = np.clip(np.rint(draws), 0, 2 * n_qubits).astype(np.int64)
    return from_schedule(demand.tolist(), f"ising-n{n_qubits}", n_qubits=n_qubits)


def generate_gse_like(n_spin_orbitals, seed, *, length=20000):
    """Synthetic serial schedule shaped like ground-state energy estimation.

    Demand is negative-binomial with mean ~1.42 and standard deviation ~1.46,
    capped at ``floor(2.4 * n_spin_orbitals)``.
    """
    n = check_positive_int(n_spin_orbitals, "n_spin_orbitals")
    length = check_positive_int(length, "length")
    p = GSE_MEAN / GSE_STD**2
    r = GSE_MEAN * p / (1.0 - p)
    rng = np.random.default_rng(seed)
    demand = np.minimum(rng.negative_binomial(r, p, length), math.floor(GSE_PEAK_PER_ORBITAL * n))
    return from_schedule(demand.tolist(), f"gse-n{n}", n_qubits=n)


# ---------------------------------------------------------------------------
# file format


def _fail(path, where, msg):
    raise SchemaViolation(f"{path}: {where}: {msg}")


def _check_int(path, where, value, *, minimum=0):
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(path, where, f"expected integer, got {value!r}")
    if value < minimum:
        _fail(path, where, f"must be >= {minimum}, got {value}")
    return value


def parse(doc, source="<workload>"):
    """Validate a decoded workload document and build the distribution."""
    if not isinstance(doc, dict):
        _fail(source, "top level", "expected a JSON object")
    if "version" not in doc:
        _fail(source, "version", "missing field")
    if doc["version"] != FORMAT_VERSION:
        raise VersionMismatch(
            f"{source}: version: unsupported workload version {doc['version']!r}"
            f" (expected {FORMAT_VERSION})"
        )
    name = doc.get("name", "")
    if not isinstance(name, str):
        _fail(source, "name", f"expected string, got {name!r}")
    if "n_qubits" not in doc:
        _fail(source, "n_qubits", "missing field")
    n_qubits = _check_int(source, "n_qubits", doc["n_qubits"], minimum=1)
    has_hist, has_sched = "histogram" in doc, "schedule" in doc
    if has_hist == has_sched:
        _fail(source, "histogram/schedule", "exactly one of the two is required")
    if has_sched:
        sched = doc["schedule"]
        if not isinstance(sched, list) or not sched:
            _fail(source, "schedule", "expected a nonempty list of integers")
        for i, v in enumerate(sched):
            _check_int(source, f"schedule[{i}]", v)
        return from_schedule(sched, name, n_qubits=n_qubits)
    hist = doc["histogram"]
    if not isinstance(hist, list):
        _fail(source, "histogram", "expected a list of [t, count] pairs")
    out, prev = {}, -1
    for i, pair in enumerate(hist):
        if not isinstance(pair, list) or len(pair) != 2:
            _fail(source, f"histogram[{i}]", f"expected [t, count], got {pair!r}")
        t = _check_int(source, f"histogram[{i}][0]", pair[0])
        c = _check_int(source, f"histogram[{i}][1]", pair[1])
        if t <= prev:
            _fail(source, f"histogram[{i}][0]", f"t keys must strictly increase ({t} after {prev})")
        prev = t
        out[t] = c
    return TLoadDistribution(out, name, n_qubits)


def load(path):
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return parse(doc, str(path))


def to_document(dist):
    if dist.n_qubits is None:
        raise ValueError("cannot serialize a distribution without n_qubits")
    doc = {"version": FORMAT_VERSION, "name": dist.name, "n_qubits": dist.n_qubits}
    if dist.schedule is not None:
        doc["schedule"] = list(dist.schedule)
    else:
        doc["histogram"] = [[t, c] for t, c in dist.histogram.items()]
    return doc


def save(dist, path):
    """Write ``dist`` as a version-1 workload file (schedule payload when known)."""
    Path(path).write_text(json.dumps(to_document(dist)) + "\n", encoding="utf-8")


REFERENCE_WORKLOADS = ("im", "gse")


def reference_workload(key):
    """Shipped reference histogram: ``"im"`` (spin chain) or ``"gse"`` (chemistry)."""
    from importlib.resources import files

    if key not in REFERENCE_WORKLOADS:
        raise ValueError(f"unknown reference workload {key!r}; choose from {REFERENCE_WORKLOADS}")
    doc = json.loads(files("msfactory.data").joinpath(f"{key}_reference.json").read_text("utf-8"))
    return parse(doc, f"<reference:{key}>")
