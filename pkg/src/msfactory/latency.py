"""Analytical execution time of a T-load distribution on a factory architecture.

Demand above the per-cycle supply stalls (contention); requests served in the
same wave interfere while routing (congestion), which costs ``c * sqrt(t)``
gate latencies for ``t`` simultaneous requests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from msfactory.distillation import distill_time, effective_output
from msfactory.exceptions import StarvedFactory
from msfactory.utils.validation import check_odd_distance


@dataclass(frozen=True)
class CongestionModel:
    """Routing constant ``c`` in ``C_g = c * sqrt(t)``."""

    c: float = 1.0

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ValueError(f"congestion constant must be positive, got {self.c!r}")


def cnot_latency(d):
    """Cycles a CNOT braid stays open: ``2d + 2``."""
    return 2 * check_odd_distance(d) + 2


def t_gate_latency(d):
    """Expected T-gate injection latency ``4d + 4`` (one CNOT, plus two with prob. 1/2)."""
    return 2 * cnot_latency(d)


def congestion_factor(t, model=CongestionModel()):
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    return model.c * math.sqrt(t)


def iterations_for_timestep(t, K_eff, X, T_t, T_distill, model=CongestionModel()):
    """Distillation iterations needed to serve ``t`` simultaneous T requests.

    ``s = floor(t / K_eff)`` full waves each cost ``c * sqrt(K_eff / X)`` gate
    latencies; the leftover ``t - s K_eff`` requests cost
    ``c * sqrt((t - s K_eff) / X)``. The sum is expressed in units of
    ``T_distill``.
    """
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if t == 0:
        return 0.0
    if not T_distill > 0:
        raise ValueError(f"T_distill must be positive, got {T_distill!r}")
    if not K_eff > 0:
        raise StarvedFactory(f"{t} requests but the factory yields {K_eff} states per cycle")
    s = math.floor(t / K_eff)
    rest = max(t - s * K_eff, 0.0)
    waves = s * math.sqrt(K_eff / X) + math.sqrt(rest / X)
    return (T_t / T_distill) * model.c * waves


def _wave_sums(ts, counts, K_eff, X):
    """``sum_t D[t] * (s sqrt(K_eff/X) + sqrt((t - s K_eff)/X))`` for arrays."""
    ts = np.asarray(ts, dtype=float)
    counts = np.asarray(counts, dtype=float)
    s = np.floor(ts / K_eff)
    rest = np.maximum(ts - s * K_eff, 0.0)
    return float(np.dot(counts, s * math.sqrt(K_eff / X) + np.sqrt(rest / X)))


def schedule_time(dist, K_eff, X, T_t, T_distill, model=CongestionModel()):
    """Total cycles ``T_distill * sum_t n_distill(t) * D[t]`` for explicit timings."""
    ts, counts = dist.arrays()
    active = ts > 0
    if not np.any(counts[active] > 0):
        return 0.0
    if not K_eff > 0:
        raise StarvedFactory("factory yield is zero but the workload demands T gates")
    per_cycle = (T_t / T_distill) * model.c * _wave_sums(ts[active], counts[active], K_eff, X)
    return T_distill * per_cycle


def total_time(dist, arch, noise, code_distances, model=CongestionModel(), *, use_yield=True):
    """Execution time in surface-code cycles of ``dist`` on ``arch``.

    ``code_distances`` are the per-round distances; the T-gate latency uses
    the last one. ``use_yield=False`` serves with the nominal capacity ``K``
    instead of the yield-adjusted output.
    """
    ds = list(code_distances)
    T_distill = distill_time(ds)
    T_t = t_gate_latency(ds[-1])
    K_eff = effective_output(arch, noise) if use_yield else float(arch.K)
    return schedule_time(dist, K_eff, arch.X, T_t, T_distill, model)


def contention_floor(dist, K_eff, T_t):
    """Congestion-free time: ``ceil(t / K_eff)`` waves of one gate latency each.

    Never exceeds :func:`schedule_time` for a single factory with integral
    ``K_eff`` and ``c >= 1``; with several factories or fractional yields the
    square-root terms can drop below one wave and the floor no longer holds.
    """
    ts, counts = dist.arrays()
    if not np.any(counts[ts > 0] > 0):
        return 0.0
    if not K_eff > 0:
        raise StarvedFactory("factory yield is zero but the workload demands T gates")
    return T_t * float(np.dot(counts, np.ceil(ts / K_eff)))
