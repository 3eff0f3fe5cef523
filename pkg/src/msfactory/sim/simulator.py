"""Event-driven lattice simulation of magic-state production, claiming and routing.

Ports are the factories' output buffers. Every ``t_distill_cycles`` cycles,
starting at cycle 0, all ports are refilled with one state each; a state left
unclaimed is overwritten (counted as expired). With ``t_distill_cycles == 0``
a port refills the moment its state is claimed.

A T request claims a state, then routes a braid from the port to its data
tile over free tiles (not a factory, not another data qubit, not on an open
braid). The braid holds its tiles and the port for one CNOT latency, or for
three with probability one half (the corrective branch). Requests of the
next timestep start only after every braid of the current one has closed.
The clock jumps between events, so idle cycles cost nothing.
"""
from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field

import numpy as np

from msfactory.distillation import FactoryArchitecture
from msfactory.exceptions import EmptySchedule, UnroutableRequest
from msfactory.latency import CongestionModel, schedule_time
from msfactory.utils.validation import check_odd_distance, check_positive_int
from msfactory.workload import from_schedule


@dataclass(frozen=True)
class SimConfig:
    """Timing and randomness of one simulation.

    Args:
        arch: Factory architecture; ``K/X`` must be an integer (ports per
            factory).
        code_distance: Odd distance setting the CNOT latency ``2d + 2``.
        t_distill_cycles: Replenishment period. 0 refills ports instantly.
        seed: Seed of the corrective-branch draws.
    """

    arch: FactoryArchitecture
    code_distance: int
    t_distill_cycles: int
    seed: int = 0

    def __post_init__(self):
        check_odd_distance(self.code_distance)
        if isinstance(self.t_distill_cycles, bool) or int(self.t_distill_cycles) != self.t_distill_cycles \
                or self.t_distill_cycles < 0:
            raise ValueError(f"t_distill_cycles must be a nonnegative integer, got {self.t_distill_cycles!r}")
        if self.arch.K % self.arch.X:
            raise ValueError(f"simulation needs an integer K/X, got K={self.arch.K}, X={self.arch.X}")

    @property
    def t_cnot(self):
        return 2 * self.code_distance + 2


@dataclass(frozen=True)
class SimResult:
    """Outcome of :func:`run`.

    Conservation holds at every cycle:
    ``states_produced - states_consumed - states_expired >= 0`` and
    ``states_consumed`` equals the number of requests.
    """

    total_cycles: int
    per_timestep_latency: tuple
    stall_events: int
    reroute_events: int
    max_concurrent_braids: int
    n_events: int
    states_produced: int
    states_consumed: int
    states_expired: int
    trace: tuple = field(default=(), repr=False)

    @property
    def mean_latency(self):
        lat = self.per_timestep_latency
        return sum(lat) / len(lat) if lat else 0.0

    def write_trace(self, path):
        """Write the recorded events as JSON lines."""
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.trace:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


class Stall:
    """Returned by :func:`reallocate_state` when no port holds a state."""

    def __repr__(self):
        return "STALL"


STALL = Stall()


def _manhattan(a, b):
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def nearest_port(tile, layout):
    """Statically assigned port of a data tile: nearest, ties to the lowest index."""
    return min(range(len(layout.output_ports)), key=lambda i: (_manhattan(tile, layout.output_ports[i]), i))


def reallocate_state(tile, layout, available, preferred=None):
    """Port a request at ``tile`` should claim, or :data:`STALL`.

    Args:
        available: Per-port flags, True when the port holds a claimable state.
        preferred: The request's static port; returned as is when available.
    """
    if preferred is not None and available[preferred]:
        return preferred
    best, best_key = STALL, None
    for i, ok in enumerate(available):
        if ok:
            key = (_manhattan(tile, layout.output_ports[i]), i)
            if best_key is None or key < best_key:
                best, best_key = i, key
    return best


class _Router:
    """A* over the tile grid with exclusive occupancy."""

    def __init__(self, layout):
        self.w, self.h = w, h = layout.width, layout.height
        passable = ~layout.blocked_mask()
        for x, y in layout.data_tiles:
            passable[y, x] = False
        flat = passable.ravel().tolist()
        self.occupied = [0] * (w * h)
        # free neighbours of every tile; data tiles and ports appear only as
        # endpoints, which route() handles separately
        self.nbrs = []
        for node in range(w * h):
            x, y = node % w, node // w
            out = []
            for nx, ny in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
                if 0 <= nx < w and 0 <= ny < h and flat[ny * w + nx]:
                    out.append(ny * w + nx)
            self.nbrs.append(out)

    def route(self, src, dst):
        """Shortest free path ``src -> dst`` as flat tile indices, endpoints included."""
        w = self.w
        sx, sy = src
        gx, gy = dst
        start, goal = sy * w + sx, gy * w + gx
        occupied, nbrs = self.occupied, self.nbrs
        if occupied[goal]:
            return None
        # tiles from which the goal is one step away
        x, y = gx, gy
        entry = {ny * w + nx for nx, ny in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1))
                 if 0 <= nx < w and 0 <= ny < self.h}
        if start in entry:
            return [start, goal]
        inf = 1 << 30
        g = [inf] * (w * self.h)
        parent = {}
        g[start] = 0
        heap = [(abs(sx - gx) + abs(sy - gy), 0, start)]
        pop, push = heapq.heappop, heapq.heappush
        while heap:
            _, gc, node = pop(heap)
            if gc > g[node]:
                continue
            if node in entry:
                path = [goal, node]
                while node != start:
                    node = parent[node]
                    path.append(node)
                return path[::-1]
            ng = gc + 1
            for nb in nbrs[node]:
                if occupied[nb] or ng >= g[nb]:
                    continue
                g[nb] = ng
                parent[nb] = node
                push(heap, (ng + abs(nb % w - gx) + abs(nb // w - gy), ng, nb))
        return None

    def hold(self, path, delta):
        # the first tile is the port on the factory boundary; the port's own
        # busy flag guards it
        for node in path[1:]:
            self.occupied[node] += delta


class _Ports:
    """State buffers and busy flags of every port, with global replenishment."""

    def __init__(self, n, period, record):
        self.n = n
        self.period = period
        self.has_state = [False] * n
        self.busy = [False] * n
        self.epoch = -1
        self.produced = self.consumed = self.expired = 0
        self.record = record

    def advance(self, clock):
        """Apply the latest replenishment at or before ``clock``."""
        epoch = 0 if self.period == 0 else clock // self.period
        if self.period == 0 and self.epoch == 0:
            return
        if epoch == self.epoch:
            return
        # ticks passed while nothing was waiting still produce (and overwrite)
        for e in range(max(self.epoch + 1, 0), epoch + 1):
            for i in range(self.n):
                if self.has_state[i]:
                    self.expired += 1
                self.has_state[i] = True
                self.produced += 1
                self.record(e * self.period, "produce", port=i)
        self.epoch = epoch

    def next_tick(self, clock):
        if self.period == 0:
            return math.inf
        return (clock // self.period + 1) * self.period

    def available(self):
        return [s and not b for s, b in zip(self.has_state, self.busy)]

    def claim(self, i, clock):
        self.has_state[i] = False
        self.busy[i] = True
        self.consumed += 1
        if self.period == 0:
            self.has_state[i] = True
            self.produced += 1
            self.record(clock, "produce", port=i)


def _check_schedule(schedule, layout):
    if not schedule:
        raise EmptySchedule("schedule must contain at least one timestep")
    tiles = set(layout.data_tiles)
    for n, step in enumerate(schedule):
        for tile in step:
            if tuple(tile) not in tiles:
                raise ValueError(f"timestep {n}: request names {tile!r}, which is not a data tile")


def run(schedule, layout, config, *, trace=False):
    """Simulate ``schedule`` (one list of data tiles per timestep) on ``layout``.

    Raises:
        UnroutableRequest: a request cannot reach any port on an otherwise
            empty lattice.
    """
    _check_schedule(schedule, layout)
    if len(layout.output_ports) != config.arch.K:
        raise ValueError(f"layout has {len(layout.output_ports)} ports, config needs K={config.arch.K}")
    records = []
    counters = {"events": 0}

    def record(cycle, kind, factory=None, port=None, tile=None):
        counters["events"] += 1
        if trace:
            if factory is None and port is not None:
                factory = layout.port_factory[port]
            records.append({"cycle": int(cycle), "kind": kind, "factory": factory, "port": port,
                            "tile": list(tile) if tile is not None else None})

    rng = np.random.default_rng(config.seed)
    router = _Router(layout)
    ports = _Ports(len(layout.output_ports), config.t_distill_cycles, record)
    static = {tile: nearest_port(tile, layout) for tile in layout.data_tiles}
    t_cnot = config.t_cnot
    clock = 0
    latencies = []
    stalls = reroutes = max_open = 0
    open_braids = []  # heap of (end, seq, port, path)
    seq = 0

    for step in schedule:
        start = clock
        pending = [tuple(t) for t in step]
        while pending or open_braids:
            while open_braids and open_braids[0][0] <= clock:
                end, _, port, path, tile = heapq.heappop(open_braids)
                router.hold(path, -1)
                ports.busy[port] = False
                record(end, "complete", port=port, tile=tile)
            ports.advance(clock)
            waiting = []
            exhausted = False
            for tile in pending:
                # claims only remove states, so after one stall the rest stall too
                port = STALL if exhausted else reallocate_state(
                    tile, layout, ports.available(), static[tile])
                if port is STALL:
                    exhausted = True
                    stalls += 1
                    record(clock, "stall", tile=tile)
                    waiting.append(tile)
                    continue
                path = router.route(layout.output_ports[port], tile)
                if path is None:
                    reroutes += 1
                    record(clock, "reroute", port=port, tile=tile)
                    waiting.append(tile)
                    continue
                hold = t_cnot if rng.random() >= 0.5 else 3 * t_cnot
                ports.claim(port, clock)
                record(clock, "claim", port=port, tile=tile)
                router.hold(path, +1)
                heapq.heappush(open_braids, (clock + hold, seq, port, path, tile))
                seq += 1
            pending = waiting
            max_open = max(max_open, len(open_braids))
            if not pending and not open_braids:
                break
            next_end = open_braids[0][0] if open_braids else math.inf
            nxt = min(next_end, ports.next_tick(clock)) if pending else next_end
            if nxt == math.inf:
                raise UnroutableRequest(
                    f"data tile {pending[0]} cannot reach any port on an idle lattice"
                )
            clock = nxt
        latencies.append(clock - start)

    return SimResult(
        total_cycles=int(clock),
        per_timestep_latency=tuple(int(v) for v in latencies),
        stall_events=stalls,
        reroute_events=reroutes,
        max_concurrent_braids=max_open,
        n_events=counters["events"],
        states_produced=ports.produced,
        states_consumed=ports.consumed,
        states_expired=ports.expired,
        trace=tuple(records),
    )


def requests_from_counts(counts, layout, seed):
    """Turn per-timestep demands into per-timestep lists of data tiles.

    Each timestep draws a fresh random order of the data qubits and takes the
    first ``t`` of them, cycling through the order again when ``t`` exceeds
    the qubit count.
    """
    rng = np.random.default_rng(seed)
    tiles = layout.data_tiles
    n = len(tiles)
    out = []
    for t in counts:
        t = int(t)
        if t < 0:
            raise ValueError(f"per-timestep demand must be nonnegative, got {t}")
        order = rng.permutation(n)
        out.append([tiles[order[j % n]] for j in range(t)])
    return out


def lower_bound_cycles(schedule, config):
    """Congestion-free floor: the same ports and replenishment, no routing.

    Every request is served by the first free port holding a state and keeps
    it for exactly one CNOT latency. With instant replenishment this is
    ``sum(ceil(t / K)) * (2d + 2)``.
    """
    K, period, t_cnot = config.arch.K, config.t_distill_cycles, config.t_cnot
    if period == 0:
        return sum(math.ceil(len(step) / K) for step in schedule) * t_cnot
    clock, epoch = 0, -1
    has_state = [False] * K
    busy_until = [0] * K
    for step in schedule:
        pending = len(step)
        step_end = clock
        while pending:
            e = clock // period
            if e != epoch:
                epoch = e
                has_state = [True] * K
            for i in range(K):
                if pending and has_state[i] and busy_until[i] <= clock:
                    has_state[i] = False
                    busy_until[i] = clock + t_cnot
                    step_end = max(step_end, clock + t_cnot)
                    pending -= 1
            if pending:
                frees = [b for b in busy_until if b > clock]
                clock = min(min(frees, default=math.inf), (e + 1) * period)
        clock = max(clock, step_end)
    return int(clock)


def model_cycles(schedule, config, congestion=CongestionModel()):
    """Analytical cycles for the same point: nominal ``K``, ``T_t = 4d + 4``."""
    counts = [len(step) for step in schedule]
    dist = from_schedule(counts)
    d = config.code_distance
    # T_distill cancels in the model; any positive value works for instant refill
    t_distill = config.t_distill_cycles or 1
    return schedule_time(dist, float(config.arch.K), config.arch.X, 4 * d + 4, t_distill, congestion)


def calibrate_congestion(simulated, modeled_at_unit_c):
    """Smallest ``c`` for which the model bounds every simulated run from above."""
    ratios = [s / m for s, m in zip(simulated, modeled_at_unit_c) if m > 0]
    if not ratios:
        raise ValueError("need at least one run with nonzero modeled time")
    return max(ratios)
