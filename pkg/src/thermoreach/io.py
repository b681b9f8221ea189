"""JSON and CSV serialization.

Output is byte-stable: keys are sorted, rationals are written as ``"num/den"``
strings, floats use their shortest round-trip representation, and level
indices in protocol files are 1-based.
"""

from __future__ import annotations

import csv
import io
import json
import math
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

from .core import (
    FLOAT,
    MODES,
    RATIONAL,
    GibbsContext,
    Population,
    ValidationError,
    context_from_gamma,
    make_gibbs_context,
    to_fraction,
    validate_population,
)
from .gep import MonotonicityReport
from .majorization import ThermoCurve
from .thermalization import ControlSequence, ElementaryControl, Trajectory


class SchemaError(ValidationError):
    """Malformed input file; the message names the offending field."""


def format_scalar(x) -> str:
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else str(x.numerator)
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def to_jsonable(obj: Any) -> Any:
    """Recursively convert package objects into JSON-ready values."""
    if isinstance(obj, Fraction):
        return format_scalar(obj)
    if isinstance(obj, float):
        return format_scalar(obj) if not math.isfinite(obj) else obj
    if isinstance(obj, Population):
        return [format_scalar(v) for v in obj]
    if isinstance(obj, ControlSequence):
        return protocol_to_dict(obj)
    if isinstance(obj, MonotonicityReport):
        return obj.to_dict()
    if isinstance(obj, GibbsContext):
        return context_to_dict(obj)
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalars
        return to_jsonable(obj.item())
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def write_json(path: str | Path, obj: Any) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def read_json(path: str | Path) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc


# -- contexts and populations ------------------------------------------------


def context_to_dict(ctx: GibbsContext) -> dict:
    out: dict[str, Any] = {"mode": ctx.mode, "tolerance": ctx.tol}
    if ctx.exact:
        out["gamma"] = [[str(g.numerator), str(g.denominator)] for g in ctx.gamma]
    else:
        out["gamma"] = [repr(g) for g in ctx.gamma]
    if ctx.energies is not None:
        out["energies"] = list(ctx.energies)
    if ctx.beta is not None:
        out["beta"] = ctx.beta
    return out


def _parse_number(value, where: str):
    try:
        return to_fraction(value)
    except ValidationError as exc:
        raise SchemaError(f"{where}: {exc}") from exc


def context_from_dict(data: dict, mode: str | None = None, tol: float | None = None) -> GibbsContext:
    """Read ``{"mode", "energies", "beta"}`` or ``{"gamma": [["num", "den"], ...]}``."""
    if not isinstance(data, dict):
        raise SchemaError("context: expected a JSON object")
    mode = mode or data.get("mode", RATIONAL)
    if mode not in MODES:
        raise SchemaError(f"context.mode: unknown mode {mode!r}")
    tol = tol if tol is not None else float(data.get("tolerance", 1e-9))
    energies = data.get("energies")
    beta = data.get("beta")
    if "gamma" in data:
        gamma = data["gamma"]
        if not isinstance(gamma, list):
            raise SchemaError("context.gamma: expected a list")
        vals = [_parse_number(g, f"context.gamma[{k}]") for k, g in enumerate(gamma)]
        if mode == FLOAT:
            vals = [float(v) for v in vals]
        try:
            return context_from_gamma(vals, mode, energies=energies, beta=beta, tol=tol)
        except ValidationError as exc:
            raise SchemaError(f"context.gamma: {exc}") from exc
    if energies is None or beta is None:
        raise SchemaError("context: need either 'gamma' or both 'energies' and 'beta'")
    try:
        return make_gibbs_context([float(e) for e in energies], float(beta), mode, tol=tol)
    except ValidationError as exc:
        raise SchemaError(f"context: {exc}") from exc


def population_from_json(data: Any, ctx: GibbsContext, where: str = "population") -> Population:
    if isinstance(data, dict):
        for key in ("p", "population", "state", "values"):
            if key in data:
                data = data[key]
                break
        else:
            raise SchemaError(f"{where}: expected a list or an object with key 'p'")
    if not isinstance(data, list):
        raise SchemaError(f"{where}: expected a list of numbers")
    vals = [_parse_number(v, f"{where}[{k}]") for k, v in enumerate(data)]
    try:
        return validate_population(vals if ctx.exact else [float(v) for v in vals], ctx)
    except ValidationError as exc:
        raise SchemaError(f"{where}: {exc}") from exc


def population_to_json(p: Population) -> list[str]:
    return [format_scalar(v) for v in p]


# -- protocols -----------------------------------------------------------------


def protocol_to_dict(seq: ControlSequence, **extra) -> dict:
    steps = []
    for s in seq:
        tau = s.tau_rel
        steps.append({
            "i": s.i + 1,
            "j": s.j + 1,
            "lambda": format_scalar(s.lam if not isinstance(s.lam, int) else Fraction(s.lam)),
            "tau_rel": "inf" if math.isinf(tau) else round(tau, 12),
        })
    out = {"steps": steps}
    out.update({k: to_jsonable(v) for k, v in extra.items()})
    return out


def protocol_from_dict(data: dict, mode: str = RATIONAL) -> ControlSequence:
    if not isinstance(data, dict) or "steps" not in data:
        raise SchemaError("protocol: expected an object with a 'steps' list")
    if not isinstance(data["steps"], list):
        raise SchemaError("protocol.steps: expected a list")
    steps = []
    for k, s in enumerate(data["steps"]):
        where = f"protocol.steps[{k}]"
        if not isinstance(s, dict):
            raise SchemaError(f"{where}: expected an object")
        unknown = set(s) - {"i", "j", "lambda", "tau_rel"}
        if unknown:
            raise SchemaError(f"{where}: unknown field(s) {sorted(unknown)}")
        try:
            i, j = int(s["i"]) - 1, int(s["j"]) - 1
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"{where}: 'i' and 'j' must be integers") from exc
        lam = _parse_number(s.get("lambda", "1"), f"{where}.lambda")
        if mode == FLOAT:
            lam = float(lam)
        try:
            steps.append(ElementaryControl(i, j, lam))
        except ValidationError as exc:
            raise SchemaError(f"{where}: {exc}") from exc
    return ControlSequence(tuple(steps))


def write_protocol(path: str | Path, seq: ControlSequence, **extra) -> None:
    write_json(path, protocol_to_dict(seq, **extra))


def read_protocol(path: str | Path, mode: str = RATIONAL) -> ControlSequence:
    return protocol_from_dict(read_json(path), mode)


# -- tables ------------------------------------------------------------------------


def table_to_csv(columns: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_scalar(v) if isinstance(v, (float, Fraction)) else v for v in row])
    return buf.getvalue()


def write_table(path: str | Path, columns: Sequence[str], rows: Sequence[Sequence]) -> None:
    Path(path).write_text(table_to_csv(columns, rows), encoding="utf-8")


def trajectory_to_csv(traj: Trajectory) -> str:
    d = len(traj.states[0])
    cols = ["t"] + [f"p_{k + 1}" for k in range(d)]
    return table_to_csv(cols, [[t, *s.values] for t, s in zip(traj.times, traj.states)])


def trajectory_from_csv(text: str, ctx: GibbsContext) -> Trajectory:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration as exc:
        raise SchemaError("trajectory: empty file") from exc
    expected = ["t"] + [f"p_{k + 1}" for k in range(ctx.d)]
    if [h.strip() for h in header] != expected:
        raise SchemaError(f"trajectory line 1: expected header {','.join(expected)}")
    times, states = [], []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != ctx.d + 1:
            raise SchemaError(f"trajectory line {lineno}: expected {ctx.d + 1} fields, got {len(row)}")
        where = f"trajectory line {lineno}"
        t = _parse_number(row[0], where)
        vals = [_parse_number(v, where) for v in row[1:]]
        try:
            states.append(validate_population(vals if ctx.exact else [float(v) for v in vals], ctx))
        except ValidationError as exc:
            raise SchemaError(f"{where}: {exc}") from exc
        times.append(t if ctx.exact else float(t))
    try:
        return Trajectory(tuple(times), tuple(states))
    except ValidationError as exc:
        raise SchemaError(f"trajectory: {exc}") from exc


def curve_to_csv(curve: ThermoCurve) -> str:
    return table_to_csv(["x", "y"], [[x, y] for x, y in curve.points])


# -- reach-engine artefacts -----------------------------------------------------------


def _order_json(order) -> list[int]:
    return [k + 1 for k in order]


def reach_set_to_dict(rs) -> dict:
    frontier = []
    for order, members in rs.frontier.items():
        frontier.append({
            "order": _order_json(order),
            "members": [
                {"state": population_to_json(e.state), "path": [[i + 1, j + 1] for i, j in e.path]}
                for e in members
            ],
        })
    diag = {k: v for k, v in rs.stats.items() if k != "seconds"}
    diag.update({"depth": rs.depth, "depth_bound": rs.depth_bound, "bound_hit": rs.bound_hit})
    return {
        "context": context_to_dict(rs.ctx),
        "source": population_to_json(rs.source),
        "frontier": frontier,
        "diagnostics": diag,
    }


def decision_to_dict(dec) -> dict:
    out: dict[str, Any] = {"status": dec.status, "reachable": dec.reachable}
    if dec.witness_order is not None:
        out["witness_order"] = _order_json(dec.witness_order)
    if dec.witness_state is not None:
        out["witness_state"] = population_to_json(dec.witness_state)
    if dec.protocol is not None:
        out["protocol"] = protocol_to_dict(dec.protocol)
    if dec.final_state is not None:
        out["final_state"] = population_to_json(dec.final_state)
    if dec.residual is not None:
        out["residual"] = dec.residual
    if dec.certificate is not None:
        out["certificate"] = dec.certificate.to_dict()
    return out
