"""Case-study drivers: work extraction, cooling, catalysis, HBAC, photoisomerization.

Every driver returns a :class:`SweepResult` whose rows are plot-ready and
whose feasible points carry replayable protocols.  Optimal parameters are
found by bisection on a yes/no feasibility predicate (thermomajorization for
thermal processes, reach-set membership for Markovian ones); the endpoints
of every bisection are checked explicitly.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .core import (
    GibbsContext,
    Population,
    ThermoReachError,
    make_gibbs_context,
    product_context,
    product_population,
    rationalize,
)
from .majorization import curve_value, thermo_curve, thermomajorizes
from .reach import ReachSet, build_reach_set, is_reachable, maximize_linear, reachable_intervals
from .thermalization import ControlSequence, apply_sequence, sample_mtp_schedule


class BisectionError(ThermoReachError):
    """A feasibility predicate failed its endpoint check."""


@dataclass
class SweepResult:
    name: str
    columns: list
    rows: list = field(default_factory=list)
    protocols: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def column(self, key: str) -> list:
        return [row[key] for row in self.rows]

    def table(self) -> list[list]:
        return [[row[c] for c in self.columns] for row in self.rows]


def bisect_boundary(pred: Callable, feasible, infeasible, tol) -> tuple:
    """Shrink ``[feasible, infeasible]`` (either orientation) to width ``tol``.

    Returns ``(last feasible point, number of predicate calls)``.
    """
    if not pred(feasible):
        raise BisectionError(f"predicate is false at the feasible endpoint {float(feasible)}")
    if pred(infeasible):
        raise BisectionError(f"predicate is true at the infeasible endpoint {float(infeasible)}")
    calls = 2
    while abs(infeasible - feasible) > tol:
        mid = (feasible + infeasible) / 2
        calls += 1
        if pred(mid):
            feasible = mid
        else:
            infeasible = mid
    return feasible, calls


def _require_complete(rs: ReachSet, where: str) -> None:
    if rs.bound_hit:
        raise ThermoReachError(f"{where}: reach set hit depth bound {rs.depth_bound}; result would be unsound")


def qubit_context(gap: float, beta: float, mode: str = "rational") -> GibbsContext:
    return make_gibbs_context([0.0, gap], beta, mode)


def _replay_check(source: Population, ctx: GibbsContext, decision, target: Population) -> dict:
    final, _ = apply_sequence(source, ctx, decision.protocol, 1)
    err = max(abs(float(a) - float(b)) for a, b in zip(final, target))
    return {
        "context": ctx,
        "initial": source,
        "final": target,
        "replay_error": err,
        "certified": decision.certified,
        "steps": len(decision.protocol),
    }


# ---------------------------------------------------------------------------
# epsilon-deterministic work extraction
# ---------------------------------------------------------------------------


def work_extraction_setup(w: float, beta_s_delta: float = 2.0, beta_e_delta: float = 1.0, delta: float = 1.0):
    """Composite (system, battery) context, initial state and target family.

    Level order is ``(s, b)`` with the battery as the fast index, i.e.
    ``|0,0>, |0,W>, |D,0>, |D,W>``.
    """
    sys_env = qubit_context(delta, beta_e_delta / delta)
    battery = qubit_context(w, beta_e_delta / delta)
    ctx = product_context(sys_env, battery)
    p_s = qubit_context(delta, beta_s_delta / delta).thermal()
    source = product_population(p_s, Population((Fraction(1), Fraction(0))))
    gamma_s = sys_env.thermal()

    def target(eps) -> Population:
        eps = Fraction(eps)
        return product_population(gamma_s, Population((eps, 1 - eps)))

    return ctx, source, target, battery.gamma


def epsilon_tp_exact(w: float, beta_s_delta: float = 2.0, beta_e_delta: float = 1.0, delta: float = 1.0) -> Fraction:
    """Closed-form thermal-process error ``1 - curve(p_S x (1,0))(gamma_B excited)``.

    The target's curve has a single interior elbow at the battery-excited
    thermal weight with height ``1 - eps``, so thermomajorization reduces to
    one inequality.
    """
    ctx, source, _, g_b = work_extraction_setup(w, beta_s_delta, beta_e_delta, delta)
    return 1 - curve_value(thermo_curve(source, ctx), g_b[1])


def epsilon_mtp_exact(w: float, beta_s_delta: float = 2.0, beta_e_delta: float = 1.0, delta: float = 1.0,
                      rs: ReachSet | None = None) -> Fraction:
    """Minimal Markovian error from the exact segment intersection of the reach set."""
    ctx, source, target, g_b = work_extraction_setup(w, beta_s_delta, beta_e_delta, delta)
    rs = rs or build_reach_set(source, ctx)
    _require_complete(rs, "work extraction")
    # segment from eps=0 to eps=g_b[0]
    ivs = reachable_intervals(rs, target(0), target(g_b[0]))
    if not ivs:
        raise ThermoReachError("thermal target unexpectedly unreachable")
    return min(lo for lo, _ in ivs) * g_b[0]


def work_extraction_curve(
    beta_s_delta: float = 2.0,
    beta_e_delta: float = 1.0,
    w_grid: Sequence[float] | None = None,
    eps_tol: float = 1e-6,
    delta: float = 1.0,
) -> SweepResult:
    """Minimal failure probability ``eps`` versus extracted work ``W``."""
    if w_grid is None:
        w_grid = np.linspace(1e-3, 1.5, 50) * delta
    res = SweepResult(
        "work_extraction",
        ["w_over_delta", "eps_tp", "eps_mtp"],
        metadata={
            "beta_s_delta": beta_s_delta,
            "beta_e_delta": beta_e_delta,
            "eps_tol": eps_tol,
            "level_order": ["(s0,b0)", "(s0,b1)", "(s1,b0)", "(s1,b1)"],
        },
    )
    tol = Fraction(eps_tol)
    t0 = time.perf_counter()
    for w in w_grid:
        w = float(w)
        ctx, source, target, g_b = work_extraction_setup(w, beta_s_delta, beta_e_delta, delta)
        hi = Fraction(g_b[0])
        eps_tp, _ = bisect_boundary(lambda e: thermomajorizes(source, target(e), ctx), hi, Fraction(0), tol)
        rs = build_reach_set(source, ctx)
        _require_complete(rs, "work extraction")

        def mtp_ok(e):
            dec = is_reachable(target(e), rs, certify=False)
            if dec.status == "unknown":
                raise ThermoReachError("membership unknown: reach set incomplete")
            return dec.reachable

        eps_mtp, _ = bisect_boundary(mtp_ok, hi, Fraction(0), tol)
        dec = is_reachable(target(eps_mtp), rs)
        res.rows.append({"w_over_delta": w / delta, "eps_tp": float(eps_tp), "eps_mtp": float(eps_mtp)})
        res.protocols[f"{w / delta:.6g}"] = {
            "eps": eps_mtp,
            "protocol": dec.protocol,
            **_replay_check(source, ctx, dec, target(eps_mtp)),
        }
    res.metadata["seconds"] = time.perf_counter() - t0
    return res


# ---------------------------------------------------------------------------
# cooling of a four-level ladder after population inversion
# ---------------------------------------------------------------------------


def cooling_point(beta_delta: float, delta: float = 1.0, levels: int = 4):
    ctx = make_gibbs_context([k * delta for k in range(levels)], beta_delta / delta)
    inverted = Population(tuple(reversed(ctx.gamma)))
    g0 = ctx.gamma[0]
    dp_tp = curve_value(thermo_curve(inverted, ctx), g0) - g0
    rs = build_reach_set(inverted, ctx)
    _require_complete(rs, "cooling")
    opt = maximize_linear(rs, [1] + [0] * (levels - 1))
    return ctx, inverted, dp_tp, opt.value - g0, opt


def cooling_curve(beta_grid: Sequence[float] | None = None, delta: float = 1.0) -> SweepResult:
    """Optimal ground-population gain after inverting a thermal four-level state."""
    if beta_grid is None:
        beta_grid = np.linspace(0.05, 3.0, 20)
    res = SweepResult("cooling", ["beta_delta", "dp0_tp", "dp0_mtp"], metadata={"delta": delta, "levels": 4})
    t0 = time.perf_counter()
    for b in beta_grid:
        ctx, inverted, dp_tp, dp_mtp, opt = cooling_point(float(b), delta)
        res.rows.append({"beta_delta": float(b), "dp0_tp": float(dp_tp), "dp0_mtp": float(dp_mtp)})
        res.protocols[f"{float(b):.6g}"] = {
            "dp0_tp": dp_tp,
            "dp0_mtp": dp_mtp,
            "protocol": opt.protocol,
            **_replay_check(inverted, ctx, opt.decision, opt.state),
        }
    res.metadata["seconds"] = time.perf_counter() - t0
    return res


# ---------------------------------------------------------------------------
# catalytic cooling of a qubit
# ---------------------------------------------------------------------------


def _thermal_qubit_pop(beta: float, gap: float = 1.0) -> Population:
    x = rationalize(1.0 / (1.0 + math.exp(-beta * gap)))
    return Population((x, 1 - x))


def catalysis_point(beta_e: float, catalyst_gap: float = 1.0, catalyst_beta: float | None = None,
                    tol: float = 1e-6, beta_max: float | None = None) -> dict:
    """Best final inverse temperature of a qubit starting at ``beta_e / 2``.

    Returns the thermal-process, plain Markovian and catalysed Markovian
    values, each found by bisection on ``beta_fin``.
    """
    beta_c = beta_e if catalyst_beta is None else catalyst_beta
    beta_max = beta_max if beta_max is not None else 20.0 * beta_e + 20.0
    sys_ctx = qubit_context(1.0, beta_e)
    start = _thermal_qubit_pop(beta_e / 2)
    cat_ctx = qubit_context(catalyst_gap, beta_e)
    catalyst = _thermal_qubit_pop(beta_c, catalyst_gap)
    joint = product_context(sys_ctx, cat_ctx)
    joint_start = product_population(start, catalyst)

    def tp_ok(b):
        return thermomajorizes(start, _thermal_qubit_pop(b), sys_ctx)

    rs2 = build_reach_set(start, sys_ctx)
    rs4 = build_reach_set(joint_start, joint)
    _require_complete(rs2, "catalysis")
    _require_complete(rs4, "catalysis")

    def mtp_ok(b):
        return is_reachable(_thermal_qubit_pop(b), rs2, certify=False).reachable

    def cat_ok(b):
        return is_reachable(product_population(_thermal_qubit_pop(b), catalyst), rs4, certify=False).reachable

    lo = beta_e / 2
    b_tp, _ = bisect_boundary(tp_ok, lo, beta_max, tol)
    b_mtp, _ = bisect_boundary(mtp_ok, lo, beta_max, tol)
    b_cat, _ = bisect_boundary(cat_ok, lo, beta_max, tol)
    target = product_population(_thermal_qubit_pop(b_cat), catalyst)
    dec = is_reachable(target, rs4)
    return {
        "beta_e": beta_e,
        "beta_fin_tp": b_tp,
        "beta_fin_mtp": b_mtp,
        "beta_fin_cat": b_cat,
        "protocol": dec.protocol,
        "check": _replay_check(joint_start, joint, dec, target),
    }


def catalysis_curve(beta_e_grid: Sequence[float] | None = None, catalyst_gap: float = 1.0,
                    catalyst_beta: float | None = None, tol: float = 1e-6) -> SweepResult:
    if beta_e_grid is None:
        beta_e_grid = np.linspace(0.25, 3.0, 12)
    res = SweepResult(
        "catalysis",
        ["beta_e", "beta_fin_tp", "beta_fin_cat", "beta_fin_mtp"],
        metadata={"catalyst_gap": catalyst_gap, "catalyst_beta": catalyst_beta or "beta_e", "tol": tol,
                  "level_order": ["(s0,c0)", "(s0,c1)", "(s1,c0)", "(s1,c1)"]},
    )
    t0 = time.perf_counter()
    for b in beta_e_grid:
        pt = catalysis_point(float(b), catalyst_gap, catalyst_beta, tol)
        res.rows.append({k: pt[k] for k in res.columns})
        res.protocols[f"{float(b):.6g}"] = {"beta_fin": pt["beta_fin_cat"], "protocol": pt["protocol"], **pt["check"]}
    res.metadata["seconds"] = time.perf_counter() - t0
    return res


# ---------------------------------------------------------------------------
# heat-bath algorithmic cooling with one ancilla
# ---------------------------------------------------------------------------

IDENTITY_X = (1, 0, 3, 2)  # Pauli X on the ancilla, levels |00>,|01>,|10>,|11>


def _hbac_round(p: Population, qubit: GibbsContext, tol: Fraction):
    ctx = product_context(qubit, qubit)
    g0 = qubit.gamma[0]
    base = product_population(p, qubit.thermal()).values

    def target(x):
        return product_population(Population((x, 1 - x)), qubit.thermal())

    results = {}
    for perm in itertools.permutations(range(4)):
        s = Population(tuple(base[k] for k in perm))
        rs = build_reach_set(s, ctx)
        _require_complete(rs, "hbac")
        ok = lambda x, rs=rs: is_reachable(target(x), rs, certify=False).reachable
        x_bis, _ = bisect_boundary(ok, g0, Fraction(1), tol) if not ok(Fraction(1)) else (Fraction(1), 1)
        ivs = reachable_intervals(rs, target(g0), target(Fraction(1)))
        x_exact = g0 + (1 - g0) * max(hi for _, hi in ivs)
        results[perm] = {"source": s, "rs": rs, "x_bisect": x_bis, "x_exact": x_exact}
    return ctx, target, results


def hbac_optimize(beta_delta: float = 1.0, p_target: Sequence | None = None, tol: float = 1e-6) -> SweepResult:
    """Optimal permutation + Markovian reset for a qubit target and a qubit ancilla.

    ``p_target`` defaults to the optimal output of a first round started from
    the thermal state; a thermal target makes ``p x gamma`` degenerate, so
    permutations would only be optimal in pairs.
    """
    qubit = qubit_context(1.0, beta_delta)
    ftol = Fraction(tol)
    warmup = None
    if p_target is None:
        _, _, first = _hbac_round(qubit.thermal(), qubit, ftol)
        x1 = max(r["x_exact"] for r in first.values())
        p = Population((x1, 1 - x1))
        warmup = x1
    else:
        p = qubit.population(p_target)
    ctx, target, results = _hbac_round(p, qubit, ftol)
    best = max(r["x_exact"] for r in results.values())
    optimal = sorted(perm for perm, r in results.items() if r["x_exact"] == best)
    res = SweepResult(
        "hbac",
        ["permutation", "ground_bisect", "ground_exact", "optimal"],
        metadata={
            "beta_delta": beta_delta,
            "target_state": [str(v) for v in p],
            "warmup_ground": str(warmup) if warmup is not None else None,
            "n_optimal": len(optimal),
            "optimal_permutations": optimal,
            "level_order": ["|00>", "|01>", "|10>", "|11>"],
        },
    )
    for perm, r in sorted(results.items()):
        res.rows.append({
            "permutation": "".join(str(k) for k in perm),
            "ground_bisect": float(r["x_bisect"]),
            "ground_exact": float(r["x_exact"]),
            "optimal": perm in optimal,
        })
    for perm in optimal:
        r = results[perm]
        q = target(r["x_exact"])
        dec = is_reachable(q, r["rs"])
        res.protocols["".join(map(str, perm))] = {
            "ground": r["x_exact"],
            "protocol": dec.protocol,
            **_replay_check(r["source"], ctx, dec, q),
        }
    return res


# ---------------------------------------------------------------------------
# photoisomerization yield
# ---------------------------------------------------------------------------


def photoisomerization_setup(p00: float, energies: Sequence[float] = (0.0, 0.4, 1.0), beta: float = 2.0):
    ctx = make_gibbs_context(list(energies), beta)
    a = Fraction(str(p00)) if not isinstance(p00, Fraction) else p00
    return ctx, Population((a, Fraction(0), 1 - a))


def photoisomerization_yield(
    p00: float,
    energies: Sequence[float] = (0.0, 0.4, 1.0),
    beta: float = 2.0,
    mc_samples: int = 0,
    seed: int = 0,
) -> SweepResult:
    """Largest cis population under thermal and Markovian thermal processes.

    With ``mc_samples`` random schedules are also replayed to give an
    empirical lower bound for the Markovian yield.
    """
    ctx, p = photoisomerization_setup(p00, energies, beta)
    y_tp = curve_value(thermo_curve(p, ctx), ctx.gamma[1])
    rs = build_reach_set(p, ctx)
    _require_complete(rs, "photoisomerization")
    opt = maximize_linear(rs, [0, 1, 0])
    row = {"p00": float(p00), "yield_tp": float(y_tp), "yield_mtp": float(opt.value)}
    columns = ["p00", "yield_tp", "yield_mtp"]
    if mc_samples:
        row["yield_mc"] = monte_carlo_max(p, ctx.with_mode("float"), [0, 1, 0], mc_samples, seed)
        columns.append("yield_mc")
    res = SweepResult(
        "photoisomerization",
        columns,
        rows=[row],
        metadata={"energies": list(energies), "beta": beta, "mc_samples": mc_samples, "seed": seed},
    )
    res.protocols["mtp"] = {"protocol": opt.protocol, **_replay_check(p, ctx, opt.decision, opt.state)}
    res.metadata["yield_tp_exact"] = str(y_tp)
    res.metadata["yield_mtp_exact"] = str(opt.value)
    return res


def monte_carlo_max(p: Population, ctx: GibbsContext, c: Sequence[float], n: int, seed: int = 0,
                    max_steps: int = 20) -> float:
    """Best ``c . q`` over ``n`` random schedules from ``p`` (float replay).

    Half of the schedules use full thermalizations only, which reach the
    extreme states far more often than uniform weights.
    """
    rng = np.random.default_rng(seed)
    start = Population(tuple(float(v) for v in p), "float")
    best = -math.inf
    coeffs = [float(x) for x in c]
    for k in range(n):
        seq = sample_mtp_schedule(ctx, int(rng.integers(2**63)), int(rng.integers(1, max_steps + 1)))
        if k % 2:
            seq = ControlSequence(tuple(type(s)(s.i, s.j, 1.0) for s in seq))
        final, _ = apply_sequence(start, ctx, seq, 0)
        best = max(best, sum(a * x for a, x in zip(coeffs, final)))
    return best
