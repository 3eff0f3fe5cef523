"""Command-line interface: estimate, optimize, sweep, simulate, workload tools.

Exit codes: 0 success, 2 infeasible design, 3 input or schema error,
4 layout does not fit. Argument errors from argparse also exit with 2.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from msfactory import __version__
from msfactory.distillation import DEFAULT_DISTANCE_CAP, FactoryArchitecture, NoiseModel
from msfactory.exceptions import (
    DistanceOverflow,
    DoesNotFit,
    EmptySchedule,
    Infeasible,
    NoConvergence,
    SchemaViolation,
    StarvedFactory,
)
from msfactory.latency import CongestionModel
from msfactory.optimizer import (
    PRESET_ALIASES,
    PRESETS,
    SearchConstraints,
    _design_level,
    compare_presets,
    evaluate_design,
    optimize,
    preset,
)
from msfactory.workload import (
    REFERENCE_WORKLOADS,
    generate_gse_like,
    generate_ising_like,
    load,
    reference_workload,
    save,
    stats,
)

EXIT_OK, EXIT_INFEASIBLE, EXIT_INPUT, EXIT_LAYOUT = 0, 2, 3, 4

SWEEP_HEADER = (
    "variable", "preset", "K", "X", "levels", "area_physical", "cycles",
    "volume", "eps_out", "k_output", "feasible",
)
SWEEP_COMMENT = f"# msfactory sweep v1 (msfactory {__version__})"
SWEEP_VARIABLES = ("eps", "eps_inject", "eps_in", "K", "X")
PRESET_CHOICES = ("surplus", "singlet", "unified", "distributed")

_INFEASIBLE = (Infeasible, StarvedFactory, NoConvergence, DistanceOverflow)


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# shared flags


def _add_noise_flags(p):
    g = p.add_argument_group("noise")
    g.add_argument("--eps-in", type=float, default=1e-4,
                   help="physical error rate (default: %(default)g)")
    g.add_argument("--eps-inject", type=float, default=None,
                   help="injected-state error rate (default: same as --eps-in)")
    g.add_argument("--p-success", type=float, default=0.5,
                   help="target application success probability (default: %(default)g)")
    g.add_argument("--n-gates", type=float, default=1e12,
                   help="logical gate count of the application (default: %(default)g)")


def _add_arch_flags(p):
    g = p.add_argument_group("architecture")
    g.add_argument("--capacity", type=int, metavar="K", help="total states per distillation cycle")
    g.add_argument("--factories", type=int, metavar="X", default=1,
                   help="number of factories (default: %(default)s)")
    g.add_argument("--levels", type=int, metavar="L",
                   help="distillation levels (default: lowest level meeting the target)")


def _add_search_flags(p):
    g = p.add_argument_group("search")
    g.add_argument("--lmax", type=int, default=5, help="highest level searched (default: %(default)s)")
    g.add_argument("--kmax", type=int, default=None,
                   help="largest capacity searched (default: the workload's peak demand)")
    g.add_argument("--congestion-c", type=float, default=1.0,
                   help="routing congestion constant c (default: %(default)g)")


def _add_output_flags(p, formats=("text", "json")):
    p.add_argument("--format", choices=formats, default=formats[0])
    p.add_argument("--out", type=Path, default=None, help="write output here instead of stdout")


def _noise(args):
    return NoiseModel(args.eps_in, args.eps_inject, args.p_success, args.n_gates)


def _constraints(args):
    return SearchConstraints(l_max=args.lmax, k_max=args.kmax, d_cap=DEFAULT_DISTANCE_CAP)


def _workload(spec, *, need_schedule=False):
    """Load a workload file, or a shipped reference when ``spec`` names one."""
    path = Path(spec)
    if not path.exists() and spec in REFERENCE_WORKLOADS:
        dist = reference_workload(spec)
    else:
        try:
            dist = load(path)
        except OSError as exc:
            raise CliError(f"cannot read workload {spec}: {exc.strerror or exc}", EXIT_INPUT) from exc
    if need_schedule and dist.schedule is None:
        raise CliError(f"workload {spec} has no per-timestep schedule to simulate", EXIT_INPUT)
    return dist


def _emit(args, text):
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text, encoding="utf-8")


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _text_table(rows, columns):
    cells = [[_fmt(r.get(c, "")) for c in columns] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines) + "\n"


def _as_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _row(kind, result):
    if isinstance(result, Exception):
        return {"preset": kind, "feasible": False, "error": f"{type(result).__name__}: {result}"}
    row = result.as_dict()
    row["preset"] = kind
    row["feasible"] = True
    return row


REPORT_COLUMNS = ("preset", "K", "X", "levels", "round_distances", "area_physical", "cycles",
                  "volume", "eps_out", "k_output")


# ---------------------------------------------------------------------------
# estimate


def cmd_estimate(args):
    dist = _workload(args.workload)
    noise, congestion = _noise(args), CongestionModel(args.congestion_c)
    constraints = _constraints(args)
    if args.preset is not None:
        point = preset(args.preset, dist, noise, constraints, congestion)
    else:
        if args.capacity is None:
            raise CliError("estimate needs --capacity or --preset", EXIT_INPUT)
        levels = args.levels
        if levels is None:
            levels = _design_level(args.capacity, args.factories, noise, args.lmax)
        arch = FactoryArchitecture(args.capacity, args.factories, levels)
        point = evaluate_design(arch, dist, noise, congestion)
    row = _row(point.preset, point)
    if args.format == "json":
        _emit(args, _as_json(row))
    else:
        _emit(args, _text_table([row], REPORT_COLUMNS))
    return EXIT_OK


# ---------------------------------------------------------------------------
# optimize


def cmd_optimize(args):
    dist = _workload(args.workload)
    noise, congestion = _noise(args), CongestionModel(args.congestion_c)
    constraints = _constraints(args)
    kind = PRESET_ALIASES[args.preset or "distributed"]
    if kind not in ("optimized_unified", "optimized_distributed"):
        raise CliError("optimize takes --preset unified or distributed", EXIT_INPUT)
    if args.compare:
        results = compare_presets(dist, noise, constraints, congestion, kinds=PRESETS)
        rows = [_row(k, v) for k, v in results.items()]
        chosen = results[kind]
        if isinstance(chosen, Exception):
            raise chosen
    else:
        chosen = optimize(dist, noise, constraints, congestion, unified=kind == "optimized_unified")
        rows = [_row(kind, chosen)]
    if args.format == "json":
        _emit(args, _as_json(rows if args.compare else rows[0]))
    elif args.format == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(REPORT_COLUMNS) + ["feasible"], extrasaction="ignore",
                           lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (" ".join(map(str, v)) if isinstance(v, list) else v) for k, v in r.items()})
        _emit(args, buf.getvalue())
    else:
        feasible = [r for r in rows if r["feasible"]]
        text = _text_table(feasible, REPORT_COLUMNS)
        for r in rows:
            if not r["feasible"]:
                text += f"{r['preset']}: infeasible ({r['error']})\n"
        _emit(args, text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep


def parse_sweep(spec):
    """``VAR=start:stop:points[:lin]`` or ``VAR=v1,v2,...`` -> ``(VAR, values)``.

    Ranges are log-spaced unless suffixed with ``:lin``. Values must be
    strictly monotone.
    """
    if "=" not in spec:
        raise ValueError(f"sweep spec {spec!r} must look like VAR=start:stop:points")
    var, rng = spec.split("=", 1)
    var = var.strip()
    if var not in SWEEP_VARIABLES:
        raise ValueError(f"sweep variable must be one of {SWEEP_VARIABLES}, got {var!r}")
    if ":" in rng:
        parts = rng.split(":")
        scale = "log"
        if parts[-1] in ("log", "lin"):
            scale = parts.pop()
        if len(parts) != 3:
            raise ValueError(f"sweep range {rng!r} must be start:stop:points")
        start, stop, n = float(parts[0]), float(parts[1]), int(parts[2])
        if n < 1:
            raise ValueError("sweep needs at least one point")
        if scale == "log":
            if start <= 0 or stop <= 0:
                raise ValueError("log sweeps need positive endpoints")
            values = np.logspace(math.log10(start), math.log10(stop), n).tolist()
        else:
            values = np.linspace(start, stop, n).tolist()
    else:
        values = [float(v) for v in rng.split(",") if v.strip()]
    if var in ("K", "X"):
        values = [int(round(v)) for v in values]
    if not values:
        raise ValueError("sweep needs at least one value")
    diffs = np.diff(values)
    if values and len(values) > 1 and not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ValueError(f"sweep values must be strictly monotone, got {values}")
    return var, values


def _sweep_point(var, value, kinds, dist, args, congestion, constraints):
    noise = _noise(args)
    if var == "eps":
        noise = noise.with_eps(value)
    elif var == "eps_inject":
        noise = noise.with_eps(value, inject_only=True)
    elif var == "eps_in":
        noise = NoiseModel(value, noise.eps_inject, noise.p_success_target, noise.n_gates)
    rows = []
    if var in ("K", "X"):
        K = value if var == "K" else args.capacity
        X = value if var == "X" else args.factories
        try:
            if K is None:
                raise CliError("K-fixed sweeps need --capacity", EXIT_INPUT)
            levels = args.levels or _design_level(K, X, noise, args.lmax)
            result = evaluate_design(FactoryArchitecture(K, X, levels), dist, noise, congestion)
        except (*_INFEASIBLE, ValueError) as exc:
            result = exc
        return [(value, "custom", result)]
    for kind in kinds:
        try:
            result = preset(kind, dist, noise, constraints, congestion)
        except _INFEASIBLE as exc:
            result = exc
        rows.append((value, PRESET_ALIASES[kind], result))
    return rows


def cmd_sweep(args):
    if not args.sweep:
        raise CliError("sweep needs --sweep VAR=start:stop:points", EXIT_INPUT)
    try:
        var, values = parse_sweep(args.sweep)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INPUT) from exc
    dist = _workload(args.workload)
    congestion, constraints = CongestionModel(args.congestion_c), _constraints(args)
    kinds = args.preset or list(PRESET_CHOICES)

    def point(v):
        return _sweep_point(var, v, kinds, dist, args, congestion, constraints)

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            # map keeps input order, so rows are deterministic
            chunks = list(pool.map(point, values))
    else:
        chunks = [point(v) for v in values]
    buf = io.StringIO()
    buf.write(SWEEP_COMMENT + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for chunk in chunks:
        for value, kind, result in chunk:
            if isinstance(result, Exception):
                w.writerow([repr(value), kind, "", "", "", "", "", "", "", "", 0])
                continue
            a, e = result.arch, result.estimate
            w.writerow([repr(value), kind, a.K, a.X, a.levels, repr(float(e.area_physical_qubits)),
                        repr(float(e.total_cycles)), repr(float(e.volume)), repr(float(result.eps_out)),
                        repr(float(result.k_output)), 1])
    _emit(args, buf.getvalue())
    return EXIT_OK


def read_sweep_csv(text):
    """Parse sweep CSV text back into row dicts; checks the versioned header."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# msfactory sweep v1"):
        raise SchemaViolation("sweep CSV: line 1: missing '# msfactory sweep v1' header")
    reader = csv.DictReader(lines[1:])
    if tuple(reader.fieldnames or ()) != SWEEP_HEADER:
        raise SchemaViolation(f"sweep CSV: line 2: unexpected columns {reader.fieldnames}")
    rows = []
    for i, r in enumerate(reader, start=3):
        feasible = r["feasible"] == "1"
        out = {"variable": float(r["variable"]), "preset": r["preset"], "feasible": feasible}
        for col in ("K", "X", "levels"):
            out[col] = int(r[col]) if feasible else None
        for col in ("area_physical", "cycles", "volume", "eps_out", "k_output"):
            out[col] = float(r[col]) if feasible else None
        if not feasible and any(r[c] for c in SWEEP_HEADER[2:-1]):
            raise SchemaViolation(f"sweep CSV: line {i}: infeasible row carries numbers")
        rows.append(out)
    return rows


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args):
    from msfactory.sim import (
        SimConfig,
        build_layout,
        lower_bound_cycles,
        model_cycles,
        requests_from_counts,
        run,
    )

    dist = _workload(args.workload, need_schedule=True)
    counts = list(dist.schedule)
    if args.steps is not None:
        counts = counts[: args.steps]
    noise, congestion = _noise(args), CongestionModel(args.congestion_c)
    if args.capacity is None:
        raise CliError("simulate needs --capacity", EXIT_INPUT)
    levels = args.levels or _design_level(args.capacity, args.factories, noise, args.lmax)
    arch = FactoryArchitecture(args.capacity, args.factories, levels)
    if args.capacity % args.factories:
        raise CliError("simulate needs --capacity divisible by --factories", EXIT_INPUT)
    point = evaluate_design(arch, dist, noise, congestion)
    d = args.distance or point.round_distances[-1]
    t_distill = point.t_distill if args.t_distill is None else args.t_distill
    n_data = args.data_qubits or dist.n_qubits or max(counts)
    layout = build_layout(arch, n_data, args.placement, args.width, args.height)
    config = SimConfig(arch, d, t_distill, args.seed)
    schedule = requests_from_counts(counts, layout, args.seed)
    result = run(schedule, layout, config, trace=args.trace is not None)
    if args.trace is not None:
        result.write_trace(args.trace)
    report = {
        "K": arch.K, "X": arch.X, "levels": arch.levels,
        "code_distance": d, "t_distill_cycles": t_distill,
        "lattice": [layout.width, layout.height], "placement": args.placement,
        "seed": args.seed, "timesteps": len(counts),
        "simulated_cycles": result.total_cycles,
        "lower_bound_cycles": lower_bound_cycles(schedule, config),
        "model_cycles": model_cycles(schedule, config, congestion),
        "congestion_c": args.congestion_c,
        "stall_events": result.stall_events,
        "reroute_events": result.reroute_events,
        "max_concurrent_braids": result.max_concurrent_braids,
        "n_events": result.n_events,
        "states_produced": result.states_produced,
        "states_consumed": result.states_consumed,
        "states_expired": result.states_expired,
    }
    if args.format == "json":
        _emit(args, _as_json(report))
    else:
        _emit(args, "".join(f"{k}: {_fmt(v)}\n" for k, v in report.items()))
    return EXIT_OK


# ---------------------------------------------------------------------------
# workload


def cmd_workload_stats(args):
    dist = _workload(args.workload)
    s = stats(dist)
    row = {"name": dist.name, **s.__dict__}
    if args.format == "json":
        _emit(args, _as_json(row))
    else:
        _emit(args, "".join(f"{k}: {_fmt(v)}\n" for k, v in row.items()))
    return EXIT_OK


def _write_workload(args, dist):
    if args.out is None:
        raise CliError("generators need --out PATH", EXIT_INPUT)
    try:
        save(dist, args.out)
    except OSError as exc:
        raise CliError(f"cannot write {args.out}: {exc.strerror or exc}", EXIT_INPUT) from exc
    return EXIT_OK


def cmd_gen_ising(args):
    return _write_workload(args, generate_ising_like(args.n_qubits, args.trotter_steps, args.seed))


def cmd_gen_gse(args):
    return _write_workload(args, generate_gse_like(args.n_orbitals, args.seed, length=args.length))


# ---------------------------------------------------------------------------
# parser


def build_parser():
    parser = argparse.ArgumentParser(
        prog="msfactory",
        description="Model, optimize and simulate magic-state distillation factories.",
    )
    parser.add_argument("--version", action="version", version=f"msfactory {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="area, time and volume of one design point")
    p.add_argument("--workload", required=True, help="workload JSON file, or 'im'/'gse' for a reference")
    _add_noise_flags(p)
    _add_arch_flags(p)
    _add_search_flags(p)
    p.add_argument("--preset", choices=PRESET_CHOICES, help="evaluate a reference architecture")
    _add_output_flags(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("optimize", help="space-time optimal (K, X, levels)")
    p.add_argument("--workload", required=True)
    _add_noise_flags(p)
    _add_search_flags(p)
    p.add_argument("--preset", choices=("unified", "distributed"), default="distributed",
                   help="search with one factory or many (default: %(default)s)")
    p.add_argument("--compare", action="store_true", help="also report all four presets")
    _add_output_flags(p, ("text", "json", "csv"))
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep", help="CSV of presets over a swept variable")
    p.add_argument("--workload", required=True)
    p.add_argument("--sweep", required=True, metavar="VAR=start:stop:points",
                   help=f"VAR in {', '.join(SWEEP_VARIABLES)}; log-spaced unless ':lin' is appended;"
                        " or VAR=v1,v2,...")
    _add_noise_flags(p)
    _add_arch_flags(p)
    _add_search_flags(p)
    p.add_argument("--preset", choices=PRESET_CHOICES, action="append",
                   help="preset to include (repeatable; default: all four)")
    p.add_argument("--jobs", type=int, default=1, help="sweep points evaluated concurrently")
    p.add_argument("--format", choices=("csv",), default="csv")
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="lattice simulation with model and lower bound")
    p.add_argument("--workload", required=True, help="workload file carrying a schedule")
    _add_noise_flags(p)
    _add_arch_flags(p)
    _add_search_flags(p)
    p.add_argument("--distance", type=int, default=None,
                   help="code distance (default: the design's final-round distance)")
    p.add_argument("--t-distill", type=int, default=None,
                   help="replenishment period in cycles, 0 for instant (default: the design's)")
    p.add_argument("--steps", type=int, default=None, help="simulate only the first N timesteps")
    p.add_argument("--data-qubits", type=int, default=None)
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--height", type=int, default=None)
    p.add_argument("--placement", choices=("central", "mesh"), default="central")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", type=Path, default=None, help="write events as JSON lines")
    _add_output_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("workload", help="workload statistics and generators")
    wsub = p.add_subparsers(dest="workload_command", required=True)
    q = wsub.add_parser("stats", help="T-gate statistics of a workload")
    q.add_argument("--workload", required=True)
    _add_output_flags(q)
    q.set_defaults(func=cmd_workload_stats)
    q = wsub.add_parser("gen-ising", help="synthetic spin-chain-like schedule")
    q.add_argument("--n-qubits", type=int, required=True)
    q.add_argument("--trotter-steps", type=int, default=10)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", type=Path, default=None)
    q.set_defaults(func=cmd_gen_ising)
    q = wsub.add_parser("gen-gse", help="synthetic chemistry-like schedule")
    q.add_argument("--n-orbitals", type=int, required=True)
    q.add_argument("--length", type=int, default=20000)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", type=Path, default=None)
    q.set_defaults(func=cmd_gen_gse)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"msfactory: {exc}", file=sys.stderr)
        return exc.code
    except DoesNotFit as exc:
        print(f"msfactory: layout: {exc}", file=sys.stderr)
        return EXIT_LAYOUT
    except _INFEASIBLE as exc:
        print(f"msfactory: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (SchemaViolation, EmptySchedule, OSError, ValueError, TypeError) as exc:
        print(f"msfactory: input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
