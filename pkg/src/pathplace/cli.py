"""Command line interface: ``pathplace {trace,optimize,sweep,compare}``.

Exit codes: 0 success, 2 configuration error, 3 infeasible trace,
4 no feasible optimum.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .frames import Placement
from .placement import (
    VARIABLE_NAMES,
    NoFeasibleSolutionError,
    evaluate,
    optimize,
    percent_saving,
    sweep,
)

log = logging.getLogger("pathplace")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_NO_OPTIMUM = 4

AXES = "xyz"


def fmt(x) -> str:
    """Shortest round-trip decimal; empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in r])


def write_json(path: Path, data):
    with open(path, "w") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


def _out_dir(args, cfg: RunConfig) -> Path:
    out = Path(args.out or cfg.output.get("dir", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def parse_at(text: str, cfg: RunConfig) -> Placement:
    """``--at x_op=0.01,phi=0.5`` in SI units (m, rad); unspecified values
    come from the config's trace placement."""
    base = cfg.build_trace_placement().as_array()
    for item in filter(None, (s.strip() for s in text.split(","))):
        name, _, value = item.partition("=")
        if name not in VARIABLE_NAMES:
            raise ConfigError(f"unknown placement variable {name!r} in --at")
        try:
            base[VARIABLE_NAMES.index(name)] = float(value)
        except ValueError:
            raise ConfigError(f"bad value {value!r} for {name} in --at")
    return Placement.from_array(base)


def cmd_trace(cfg: RunConfig, out: Path, placement: Placement | None = None) -> int:
    problem = cfg.build_problem()
    placement = placement or cfg.build_trace_placement()
    outcome = evaluate(problem, placement, keep_pipeline=True)
    summary = outcome.to_dict()

    res = outcome.pipeline
    if res is not None:
        tr, act = res.trajectory, res.actuators
        header = ["t", "segment"]
        header += [f"p_{a}" for a in AXES] + [f"v_{a}" for a in AXES]
        for name in ("q", "q_dot", "tau", "I", "Ve", "P_T"):
            header += [f"{name}_{i + 1}" for i in range(3)]
        cur = np.column_stack([e.current for e in res.electric])
        volt = np.column_stack([e.voltage for e in res.electric])
        ptot = np.column_stack([e.p_total for e in res.electric])
        rows = []
        for k in range(len(tr)):
            rows.append(
                [tr.t[k], int(tr.segment[k]), *tr.position[k], *tr.velocity[k],
                 *act.q[k], *act.q_dot[k], *act.tau[k], *cur[k], *volt[k], *ptot[k]]
            )
        write_csv(out / "trace.csv", header, rows)
        for i, e in enumerate(res.electric):
            write_csv(
                out / f"electric_{i + 1}.csv",
                ["t", "I", "Ve", "P_J", "P_L", "P_EM", "P_T"],
                zip(tr.t, e.current, e.voltage, e.p_joule, e.p_inductive, e.p_emf, e.p_total),
            )
        summary["samples"] = len(tr)
    write_json(out / "energy.json", summary)

    if outcome.feasible:
        print(f"trace: E_t = {outcome.energy:.6g} J over T = {outcome.report.duration:.6g} s")
        return EXIT_OK
    print(f"trace: infeasible ({outcome.reason})")
    return EXIT_INFEASIBLE


def _starts(cfg: RunConfig, problem, seed: int | None) -> list:
    starts = cfg.build_starts() or [cfg.build_trace_placement()]
    x0s = [problem.free_values(s) for s in starts]
    if seed is None:
        return x0s
    rng = np.random.default_rng(seed)
    lo, hi = problem.free_lower, problem.free_upper
    return [
        np.clip(x + rng.uniform(-1.0, 1.0, size=len(x)) * cfg.placement.jitter * (hi - lo), lo, hi)
        for x in x0s
    ]


def cmd_optimize(cfg: RunConfig, out: Path, threads: int = 1, seed: int | None = None) -> int:
    problem = cfg.build_problem()
    try:
        res = optimize(problem, _starts(cfg, problem, seed), cfg.build_settings(), threads=threads)
    except NoFeasibleSolutionError as e:
        write_json(out / "optimize.json", {"error": str(e)})
        print(f"optimize: {e}")
        return EXIT_NO_OPTIMUM
    data = res.to_dict()
    data["free"] = problem.free_names
    write_json(out / "optimize.json", data)
    x = res.placement
    print(
        f"optimize: E_min = {res.energy:.6g} J at x={x.x_op:.6g} m, y={x.y_op:.6g} m, "
        f"z={x.z_op:.6g} m, phi={math.degrees(x.phi):.4g} deg ({res.evaluations} evaluations)"
    )
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, out: Path, threads: int = 1) -> int:
    problem = cfg.build_problem()
    grid = cfg.build_grid()
    outcomes = sweep(problem, grid, threads=threads)
    names = problem.free_names
    header = ["node", *names, "feasible", "failure_reason", "E_t",
              "margin_displacement", "margin_velocity", "margin_torque"]
    rows = []
    for k, (node, o) in enumerate(zip(grid.nodes(), outcomes)):
        m = o.constraints.margins if o.constraints else {}
        rows.append([k, *node, o.feasible, o.reason, o.energy,
                     m.get("displacement"), m.get("velocity"), m.get("torque")])
    write_csv(out / "sweep.csv", header, rows)
    feasible = [o.energy for o in outcomes if o.feasible]
    index = {
        "csv": "sweep.csv",
        "axes": [
            {"name": n, "min": a.min, "max": a.max, "step": a.step, "count": a.count,
             "values": a.values().tolist()}
            for n, a in zip(names, grid.axes)
        ],
        "shape": list(grid.shape),
        "nodes": grid.size,
        "feasible_nodes": len(feasible),
        "E_min_J": min(feasible) if feasible else None,
        "E_max_J": max(feasible) if feasible else None,
    }
    write_json(out / "sweep_index.json", index)
    print(f"sweep: {grid.size} nodes, {len(feasible)} feasible")
    return EXIT_OK


def parse_sizes(text: str) -> list[tuple[float, float]]:
    """``20x40,30x60`` -> [(W, L), ...] in meters (input in millimeters)."""
    sizes = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        w, _, l = item.partition("x")
        try:
            sizes.append((float(w) * 1e-3, float(l) * 1e-3))
        except ValueError:
            raise ConfigError(f"bad size {item!r}; expected WxL in mm")
    return sizes


def compare_sizes(cfg: RunConfig, sizes, threads: int = 1, seed: int | None = None) -> list[dict]:
    rows = []
    settings = cfg.build_settings()
    for W, L in sizes:
        problem = cfg.build_problem(length=L, width=W)
        starts = _starts(cfg, problem, seed)
        lo = optimize(problem, starts, settings, threads=threads)
        hi = optimize(problem, starts, settings, maximize=True, threads=threads)
        rows.append({
            "W": W, "L": L,
            "E_min": lo.energy, "E_max": hi.energy,
            "percent_saving": percent_saving(lo.energy, hi.energy),
            "x_min": lo.placement.as_array().tolist(),
            "x_max": hi.placement.as_array().tolist(),
        })
    return rows


def cmd_compare(cfg: RunConfig, out: Path, sizes=None, threads: int = 1, seed: int | None = None) -> int:
    if sizes is None:
        if cfg.compare is None:
            raise ConfigError("no sizes: give --sizes or a compare section", ("compare",))
        sizes = [(w, cfg.compare.aspect * w) for w in cfg.compare.widths]
    if not sizes:
        raise ConfigError("need at least one size", ("compare",))
    try:
        rows = compare_sizes(cfg, sizes, threads, seed)
    except NoFeasibleSolutionError as e:
        print(f"compare: {e}")
        return EXIT_NO_OPTIMUM
    write_csv(
        out / "compare.csv",
        ["W", "L", "E_min", "E_max", "percent_saving"],
        ([r["W"], r["L"], r["E_min"], r["E_max"], r["percent_saving"]] for r in rows),
    )
    write_json(out / "compare.json", {"rows": rows})
    for r in rows:
        print(f"compare: {r['W'] * 1e3:g}x{r['L'] * 1e3:g} mm  E_min={r['E_min']:.4g} J  "
              f"E_max={r['E_max']:.4g} J  saving={r['percent_saving']:.2f} %")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pathplace",
        description="Electric-energy path placement for manipulators.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="run configuration (JSON)")
    common.add_argument("--out", help="output directory (default: output.dir of the config)")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--seed", type=int, default=None, help="jitter start points with this seed")
    common.add_argument("-v", "--verbose", action="store_true")

    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("trace", parents=[common], help="evaluate one placement and dump per-sample traces")
    p.add_argument("--at", help="placement override, e.g. x_op=0.01,phi=0.5 (m, rad)")
    sub.add_parser("optimize", parents=[common], help="minimise energy over the placement box")
    sub.add_parser("sweep", parents=[common], help="evaluate energy on the placement grid")
    p = sub.add_parser("compare", parents=[common], help="E_min / E_max / saving for several rectangle sizes")
    p.add_argument("--sizes", help="comma separated WxL in mm, e.g. 20x40,30x60")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        out = _out_dir(args, cfg)
        if args.command == "trace":
            at = parse_at(args.at, cfg) if args.at else None
            return cmd_trace(cfg, out, at)
        if args.command == "optimize":
            return cmd_optimize(cfg, out, args.threads, args.seed)
        if args.command == "sweep":
            return cmd_sweep(cfg, out, args.threads)
        sizes = parse_sizes(args.sizes) if args.sizes else None
        return cmd_compare(cfg, out, sizes, args.threads, args.seed)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
