"""Command-line interface.

Exit codes: 0 success or feasible, 2 usage or input error, 3 infeasible,
4 unknown (depth bound hit), 5 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from . import applications as apps
from . import io
from .core import FLOAT, MODES, RATIONAL, ModeMismatchError, ThermoReachError, ValidationError, to_fraction
from .gep import (
    MissingEnergiesError,
    absolute,
    entropy_production_series,
    gep_table,
    renyi,
    shannon,
    standard_families,
    tsallis,
    vacancy,
    verify_monotone,
)
from .reach import build_reach_set, is_reachable
from .thermalization import apply_sequence, evolve_generator, make_detailed_balance_generator, sample_mtp_schedule, Trajectory

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_UNKNOWN = 4
EXIT_INTERNAL = 5


class UsageError(ThermoReachError):
    pass


class InvariantViolation(ThermoReachError):
    pass


# -- argument helpers ------------------------------------------------------------


def _number_list(text: str) -> list:
    try:
        return [to_fraction(x.strip()) for x in text.split(",") if x.strip()]
    except ValidationError as exc:
        raise UsageError(f"cannot parse number list {text!r}: {exc}") from exc


def _grid(text: str | None):
    """``"a,b,c"`` or ``"start:stop:n"`` (inclusive linspace); ``None`` keeps the default."""
    if text is None:
        return None
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"grid {text!r}: expected start:stop:n")
        try:
            return list(np.linspace(float(parts[0]), float(parts[1]), int(parts[2])))
        except ValueError as exc:
            raise UsageError(f"grid {text!r}: {exc}") from exc
    return [float(x) for x in _number_list(text)]


def _family(text: str):
    name, _, param = text.partition(":")
    name = name.strip().lower()
    if name == "shannon":
        return shannon()
    if name == "vacancy":
        return vacancy()
    if name == "absolute":
        return absolute(float(to_fraction(param)) if param else None)
    if name in ("renyi", "tsallis"):
        if not param:
            raise UsageError(f"family {name} needs a parameter, e.g. {name}:2")
        value = float(to_fraction(param))
        return renyi(value) if name == "renyi" else tsallis(value)
    raise UsageError(f"unknown divergence family {text!r}")


def _mode(args) -> str:
    return args.mode or RATIONAL


def _context(args, required: bool = True):
    mode = _mode(args)
    tol = args.tolerance
    if args.context:
        return io.context_from_dict(io.read_json(args.context), mode=args.mode, tol=tol)
    if args.gamma:
        data = {"gamma": [str(x) for x in _number_list(args.gamma)], "mode": mode}
        if tol is not None:
            data["tolerance"] = tol
        return io.context_from_dict(data)
    if args.energies:
        if args.beta is None:
            raise UsageError("--energies needs --beta")
        data = {"energies": [float(x) for x in _number_list(args.energies)], "beta": args.beta, "mode": mode}
        if tol is not None:
            data["tolerance"] = tol
        return io.context_from_dict(data)
    if required:
        raise UsageError("need a context: --context FILE, --gamma LIST, or --energies LIST --beta B")
    return None


def _population(path: str, ctx, where: str):
    return io.population_from_json(io.read_json(path), ctx, where)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _metadata(args) -> dict:
    return {
        "version": __version__,
        "command": args.command,
        "mode": _mode(args),
        "tolerance": args.tolerance if args.tolerance is not None else 1e-9,
        "seed": args.seed,
    }


# -- subcommands -------------------------------------------------------------------


def cmd_reach(args) -> int:
    ctx = _context(args)
    p = _population(args.source, ctx, "--from")
    rs = build_reach_set(p, ctx, args.depth_bound)
    fmt = args.format or "json"
    if fmt == "json":
        payload = io.reach_set_to_dict(rs)
        payload["metadata"] = _metadata(args)
        _emit(io.dumps(payload), args.out)
    else:
        cols = ["order"] + [f"p_{k + 1}" for k in range(ctx.d)] + ["path_length"]
        rows = [[" ".join(str(k + 1) for k in order), *e.state.values, len(e.path)] for order, e in rs.entries()]
        _emit(io.table_to_csv(cols, rows), args.out)
    return EXIT_UNKNOWN if rs.bound_hit else EXIT_OK


def cmd_check(args) -> int:
    ctx = _context(args)
    p = _population(args.source, ctx, "--from")
    q = _population(args.target, ctx, "--to")
    rs = build_reach_set(p, ctx, args.depth_bound)
    dec = is_reachable(q, rs, certify=not args.no_certify)
    payload = io.decision_to_dict(dec)
    payload["metadata"] = _metadata(args)
    _emit(io.dumps(payload), args.out)
    if dec.status == "unknown":
        return EXIT_UNKNOWN
    if not dec.reachable:
        return EXIT_INFEASIBLE
    if args.protocol_out:
        io.write_protocol(args.protocol_out, dec.protocol, context=ctx, initial=p, final=dec.final_state,
                          tolerance=ctx.tol)
    if not args.no_certify and not dec.certified:
        raise InvariantViolation("synthesized protocol failed its monotonicity certificate")
    return EXIT_OK


def cmd_protocol(args) -> int:
    raw = io.read_json(args.replay)
    if args.context or args.gamma or args.energies:
        ctx = _context(args)
    elif "context" in raw:
        ctx = io.context_from_dict(raw["context"], mode=args.mode, tol=args.tolerance)
    else:
        raise UsageError("protocol file has no embedded context; pass --context, --gamma or --energies")
    seq = io.protocol_from_dict(raw, ctx.mode)
    if args.source:
        p = _population(args.source, ctx, "--from")
    elif "initial" in raw:
        p = io.population_from_json(raw["initial"], ctx, "protocol.initial")
    else:
        raise UsageError("protocol file has no embedded initial state; pass --from")
    for k, s in enumerate(seq):
        if max(s.i, s.j) >= ctx.d:
            raise UsageError(f"protocol.steps[{k}]: level {max(s.i, s.j) + 1} exceeds d={ctx.d}")
    final, traj = apply_sequence(p, ctx, seq, args.samples)
    expected = None
    if args.expect:
        expected = _population(args.expect, ctx, "--expect")
    elif "final" in raw:
        expected = io.population_from_json(raw["final"], ctx, "protocol.final")
    tol = args.tolerance if args.tolerance is not None else float(raw.get("tolerance", ctx.tol))
    error = None if expected is None else max(abs(float(a) - float(b)) for a, b in zip(final, expected))
    fmt = args.format or "csv"
    if fmt == "csv":
        _emit(io.trajectory_to_csv(traj), args.out)
    else:
        payload = {"final": final, "steps": len(seq), "metadata": _metadata(args)}
        if expected is not None:
            payload.update({"expected": expected, "max_error": error, "tolerance": tol})
        _emit(io.dumps(payload), args.out)
    if error is not None and error > tol:
        print(f"replay mismatch: max error {error:.3e} exceeds {tol:.3e}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


def cmd_gep(args) -> int:
    ctx = _context(args)
    traj = io.trajectory_from_csv(Path(args.trajectory).read_text(encoding="utf-8"), ctx)
    fams = [_family(f) for f in args.families.split(",")] if args.families else standard_families()
    report = verify_monotone(traj, ctx, fams, args.tolerance if args.tolerance is not None else 1e-9)
    payload = {"report": report.to_dict(), "metadata": _metadata(args)}
    if ctx.energies is not None and ctx.beta is not None and len(traj) >= 3:
        try:
            series = entropy_production_series(traj, ctx)
            payload["entropy_production_min"] = min(v for _, v in series)
        except (MissingEnergiesError, ValidationError) as exc:
            payload["entropy_production_note"] = str(exc)
    if args.table_out:
        pointwise = [f for f in fams if not (f.kind == "absolute" and f.param is None)]
        io.write_table(args.table_out, ["t"] + [f.label for f in pointwise], gep_table(traj, ctx, pointwise))
    _emit(io.dumps(payload), args.out)
    return EXIT_OK if report.ok else EXIT_INFEASIBLE


def cmd_simulate(args) -> int:
    ctx = _context(args)
    p = _population(args.source, ctx, "--from")
    seed = args.seed if args.seed is not None else 0
    if args.generator:
        gen = make_detailed_balance_generator(ctx, seed, args.density)
        n = max(args.samples, 1)
        times = [args.time * k / n for k in range(n + 1)]
        states = [p] + [evolve_generator(p, gen, t, ctx) for t in times[1:]]
        traj = Trajectory(tuple(times), tuple(states), {"clock": "physical"})
        seq = None
    else:
        seq = sample_mtp_schedule(ctx, seed, args.steps)
        _, traj = apply_sequence(p, ctx, seq, args.samples)
    if args.protocol_out and seq is not None:
        io.write_protocol(args.protocol_out, seq, context=ctx, initial=p, final=traj.final, tolerance=ctx.tol)
    fmt = args.format or "csv"
    if fmt == "csv":
        _emit(io.trajectory_to_csv(traj), args.out)
    else:
        payload = {"final": traj.final, "samples": len(traj), "metadata": _metadata(args)}
        if seq is not None:
            payload["protocol"] = seq
        _emit(io.dumps(payload), args.out)
    return EXIT_OK


def _run_app(args):
    name = args.app
    if name == "work-extraction":
        return apps.work_extraction_curve(args.beta_s_delta, args.beta_e_delta, _grid(args.w_grid), args.eps_tol)
    if name == "cooling":
        return apps.cooling_curve(_grid(args.beta_grid))
    if name == "catalysis":
        return apps.catalysis_curve(_grid(args.beta_e_grid), args.catalyst_gap, args.catalyst_beta, args.tol)
    if name == "hbac":
        target = [str(x) for x in _number_list(args.target)] if args.target else None
        return apps.hbac_optimize(args.beta_delta, target, args.tol)
    if name == "photoisomerization":
        energies = [float(x) for x in _number_list(args.levels)]
        first = None
        for p00 in _number_list(args.p00):
            res = apps.photoisomerization_yield(p00, energies, args.beta, args.mc_samples, args.seed or 0)
            if first is None:
                first = res
                first.protocols = {f"{float(p00):.6g}": res.protocols["mtp"]}
            else:
                first.rows.extend(res.rows)
                first.protocols[f"{float(p00):.6g}"] = res.protocols["mtp"]
        return first
    raise UsageError(f"unknown application {name!r}")


def cmd_app(args) -> int:
    if args.mode == FLOAT:
        raise UsageError("applications run in rational mode; their feasibility oracles are exact")
    res = _run_app(args)
    if args.protocol_dir:
        out_dir = Path(args.protocol_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for key, entry in sorted(res.protocols.items()):
            io.write_protocol(out_dir / f"{res.name}_{key}.json", entry["protocol"], context=entry["context"],
                              initial=entry["initial"], final=entry["final"], tolerance=1e-9)
    fmt = args.format or "csv"
    if fmt == "csv":
        _emit(io.table_to_csv(res.columns, res.table()), args.out)
    else:
        meta = {k: v for k, v in res.metadata.items() if k != "seconds"}
        protocols = {
            k: {kk: vv for kk, vv in entry.items() if kk not in ("context",)}
            for k, entry in res.protocols.items()
        }
        payload = {"name": res.name, "columns": res.columns, "rows": res.rows, "parameters": meta,
                   "protocols": protocols, "metadata": _metadata(args)}
        _emit(io.dumps(payload), args.out)
    bad = [k for k, e in res.protocols.items() if e.get("replay_error", 0.0) > 1e-9]
    if bad:
        raise InvariantViolation(f"protocol replay drifted for {bad}")
    return EXIT_OK


# -- parser ----------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mode", choices=MODES, default=None, help="arithmetic mode (default rational)")
    common.add_argument("--tolerance", type=float, default=None, help="float tolerance (default 1e-9)")
    common.add_argument("--depth-bound", type=int, default=None, help="reach-set BFS depth bound")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", default=None, help="output path (default stdout)")
    common.add_argument("--format", choices=("json", "csv"), default=None)

    ctx_opts = argparse.ArgumentParser(add_help=False)
    ctx_opts.add_argument("--context", help="context JSON file")
    ctx_opts.add_argument("--gamma", help="comma-separated Gibbs weights, e.g. 1/2,1/3,1/6")
    ctx_opts.add_argument("--energies", help="comma-separated ascending energies")
    ctx_opts.add_argument("--beta", type=float, help="inverse temperature")

    parser = _Parser(prog="thermoreach", description="Markovian thermal reachability toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("reach", parents=[common, ctx_opts], help="build the reach set of a state")
    p.add_argument("--from", dest="source", required=True, help="initial population JSON")

    p = sub.add_parser("check", parents=[common, ctx_opts], help="decide reachability and synthesize a protocol")
    p.add_argument("--from", dest="source", required=True)
    p.add_argument("--to", dest="target", required=True)
    p.add_argument("--protocol-out", help="write the synthesized protocol here")
    p.add_argument("--no-certify", action="store_true", help="skip the monotonicity certificate")

    p = sub.add_parser("protocol", parents=[common, ctx_opts], help="replay a protocol file")
    p.add_argument("--replay", required=True, help="protocol JSON")
    p.add_argument("--from", dest="source", help="initial population (default: embedded in the file)")
    p.add_argument("--expect", help="expected final population (default: embedded in the file)")
    p.add_argument("--samples", type=int, default=4, help="interior samples per step")

    p = sub.add_parser("gep", parents=[common, ctx_opts], help="check GEP monotonicity along a trajectory")
    p.add_argument("--trajectory", required=True, help="trajectory CSV (t,p_1..p_d)")
    p.add_argument("--families", help="e.g. absolute,shannon,renyi:2,tsallis:0.5,vacancy")
    p.add_argument("--table-out", help="write per-sample family values as CSV")

    p = sub.add_parser("simulate", parents=[common, ctx_opts], help="sample a random Markovian thermal trajectory")
    p.add_argument("--from", dest="source", required=True)
    p.add_argument("--steps", type=int, default=10, help="elementary steps in a random schedule")
    p.add_argument("--samples", type=int, default=4, help="samples per step (generator mode: total)")
    p.add_argument("--generator", action="store_true", help="evolve under a random detailed-balance generator")
    p.add_argument("--time", type=float, default=1.0, help="evolution time in generator mode")
    p.add_argument("--density", type=float, default=1.0, help="edge density of the random generator")
    p.add_argument("--protocol-out", help="write the sampled schedule here")

    app_common = argparse.ArgumentParser(add_help=False, parents=[common])
    app_common.add_argument("--protocol-dir", help="write one replayable protocol file per feasible point")
    p = sub.add_parser("app", help="run a case study sweep")
    apps_sub = p.add_subparsers(dest="app", required=True, parser_class=_Parser)
    a = apps_sub.add_parser("work-extraction", parents=[app_common])
    a.add_argument("--beta-s-delta", type=float, default=2.0)
    a.add_argument("--beta-e-delta", type=float, default=1.0)
    a.add_argument("--w-grid", help="W/Delta grid: a,b,c or start:stop:n")
    a.add_argument("--eps-tol", type=float, default=1e-6)
    a = apps_sub.add_parser("cooling", parents=[app_common])
    a.add_argument("--beta-grid", help="beta*Delta grid: a,b,c or start:stop:n")
    a = apps_sub.add_parser("catalysis", parents=[app_common])
    a.add_argument("--beta-e-grid", help="beta_E grid: a,b,c or start:stop:n")
    a.add_argument("--catalyst-gap", type=float, default=1.0)
    a.add_argument("--catalyst-beta", type=float, default=None)
    a.add_argument("--tol", type=float, default=1e-6)
    a = apps_sub.add_parser("hbac", parents=[app_common])
    a.add_argument("--beta-delta", type=float, default=1.0)
    a.add_argument("--target", help="target qubit populations, e.g. 0.8,0.2")
    a.add_argument("--tol", type=float, default=1e-6)
    a = apps_sub.add_parser("photoisomerization", parents=[app_common])
    a.add_argument("--p00", default="0.2", help="one or more initial ground populations")
    a.add_argument("--levels", default="0,0.4,1.0", help="energies of trans, cis, excited")
    a.add_argument("--beta", type=float, default=2.0)
    a.add_argument("--mc-samples", type=int, default=0)
    return parser


COMMANDS = {
    "reach": cmd_reach,
    "check": cmd_check,
    "protocol": cmd_protocol,
    "gep": cmd_gep,
    "simulate": cmd_simulate,
    "app": cmd_app,
}


def run_command(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    start = time.perf_counter()
    try:
        code = COMMANDS[args.command](args)
    except (UsageError, ValidationError, ModeMismatchError, OSError) as exc:
        print(f"thermoreach: error: {exc}", file=sys.stderr)
        code = EXIT_USAGE
    except (InvariantViolation, ThermoReachError) as exc:
        print(f"thermoreach: invariant violation: {exc}", file=sys.stderr)
        code = EXIT_INTERNAL
    meta = _metadata(args)
    meta.update({"exit_code": code, "wall_time_s": round(time.perf_counter() - start, 6)})
    print(json.dumps({"metadata": meta}, sort_keys=True), file=sys.stderr)
    return code


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
