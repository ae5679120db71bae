"""Command-line entry point: ``combagg {sim,verify,render,kernel}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from .idla import IdlaError, idla_run
from .lattice import GraphKind, Region
from .potential import A_gf, SolverError, kernel_eval
from .render import inside_fraction, parse_overlay, render_svg
from .rotor import RotorError, RotorState, rotor_aggregate
from .sandpile import SandpileError, sandpile
from .verify import CHECKS, run_check

log = logging.getLogger("combagg")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _unit_interval(text: str) -> float:
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("must lie in (0, 1)")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="combagg", description="Aggregation models on the comb lattice.")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("sim", help="run one model and write its cluster")
    sim.add_argument("model", choices=["sandpile", "idla", "rotor"])
    sim.add_argument("--n", type=_positive_int, required=True)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--tol", type=float, default=1e-8, help="sandpile stop tolerance")
    sim.add_argument("--rotors", default="all-first", help="all-first | toward-origin | file:PATH")
    sim.add_argument("--graph", choices=["comb", "line"], default="comb")
    sim.add_argument("--out", type=Path, help="cluster CSV path (stdout if omitted)")
    sim.add_argument("--format", choices=["csv", "json"], default="csv", help="what goes to stdout without --out")

    ver = sub.add_parser("verify", help="run an acceptance check and print a JSON report")
    ver.add_argument("check", choices=CHECKS)
    ver.add_argument("--n", type=_positive_int)
    ver.add_argument("--eps", type=_unit_interval)
    ver.add_argument("--trials", type=_positive_int)
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--jobs", type=_positive_int, default=1)
    ver.add_argument("--tmax", type=int, help="series length for the kernel check")
    ver.add_argument("--out", type=Path, help="also write the report here")

    ren = sub.add_parser("render", help="draw a cluster CSV as SVG")
    ren.add_argument("input", type=Path)
    ren.add_argument("--overlay", help="ball:N draws the limit-shape outline for mass N")
    ren.add_argument("--out", type=Path, help="SVG path (stdout if omitted)")

    ker = sub.add_parser("kernel", help="evaluate the generating functions at z")
    ker.add_argument("--z", type=_unit_interval, required=True)
    ker.add_argument("--at", default="1,0", help="vertex x,y for A(x, o | z)")
    return p


def _graph(name: str) -> GraphKind:
    return GraphKind.LINE if name == "line" else GraphKind.COMB2


def _vertex(text: str) -> tuple[int, int]:
    try:
        x, y = (int(s) for s in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"expected x,y, got {text!r}") from exc
    return x, y


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, newline="\n")


def cmd_sim(args) -> int:
    kind = _graph(args.graph)
    t0 = time.perf_counter()
    extra: dict[str, str] = {}
    if args.model == "sandpile":
        res = sandpile(args.n, kind=kind, stop_tol=args.tol)
        cluster = res.cluster
        extra["odometer"] = res.u.to_csv()
        extra["mass"] = res.mass.to_csv()
    elif args.model == "idla":
        if kind is GraphKind.LINE:
            raise ConfigError("idla runs on the comb only")
        cluster = idla_run(args.n, args.seed).cluster
    else:
        try:
            initial = RotorState.parse(args.rotors, kind)
        except (OSError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        run = rotor_aggregate(args.n, initial)
        cluster = run.cluster
        region, odo = run.odometer_field()
        extra["odometer"] = "x,y,value\n" + "".join(f"{x},{y},{v}\n" for (x, y), v in zip(region, odo.tolist()))
    wall = time.perf_counter() - t0
    xmin, xmax, ymin, ymax = cluster.extent()
    meta = {
        "model": args.model,
        "graph": args.graph,
        "n": args.n,
        "seed": args.seed if args.model == "idla" else None,
        "rotors": args.rotors if args.model == "rotor" else None,
        "wall_s": round(wall, 3),
        "cluster_size": len(cluster),
        "extents": {"xmin": xmin, "xmax": xmax, "ymin": ymin, "ymax": ymax},
    }
    log.info("sim %s n=%d size=%d in %.3fs", args.model, args.n, len(cluster), wall)
    if args.out is None:
        _emit(cluster.to_csv() if args.format == "csv" else json.dumps(meta, indent=2) + "\n", None)
        return EXIT_OK
    cluster.to_csv(args.out)
    stem = args.out.with_suffix("")
    for name, text in extra.items():
        Path(f"{stem}.{name}.csv").write_text(text, newline="\n")
    Path(f"{stem}.json").write_text(json.dumps(meta, indent=2) + "\n")
    return EXIT_OK


def cmd_verify(args) -> int:
    report = run_check(
        args.check, n=args.n, eps=args.eps, trials=args.trials, seed=args.seed, jobs=args.jobs, t_max=args.tmax
    )
    text = json.dumps(report, indent=2, default=float) + "\n"
    sys.stdout.write(text)
    if args.out is not None:
        args.out.write_text(text)
    return EXIT_OK if report["pass"] else EXIT_FAIL


def cmd_render(args) -> int:
    try:
        region = Region.from_csv(args.input)
        overlay = parse_overlay(args.overlay)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if overlay is not None:
        log.info("%.1f%% of squares inside ball:%g", 100 * inside_fraction(region, overlay), overlay)
    _emit(render_svg(region, overlay), args.out)
    return EXIT_OK


def cmd_kernel(args) -> int:
    p = kernel_eval(args.z)
    at = _vertex(args.at)
    out = {"z": p.z, "F1": p.F1, "F2": p.F2, "G": p.G, "A": A_gf(at, args.z), "at": list(at)}
    sys.stdout.write(json.dumps(out) + "\n")
    return EXIT_OK


COMMANDS = {"sim": cmd_sim, "verify": cmd_verify, "render": cmd_render, "kernel": cmd_kernel}


def main(argv=None) -> int:
    parser = build_parser()
    level = os.environ.get("AGG_LOG", "WARNING").upper()
    if not isinstance(logging.getLevelName(level), int):
        parser.error(f"AGG_LOG={level!r} is not a log level")
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"combagg: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SandpileError, IdlaError, RotorError, SolverError) as exc:
        print(f"combagg: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
