"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected and repeated in the pytest terminal summary.
Set ``THERMOREACH_STRETCH=1`` to run the non-gating d=7 build.
"""

from __future__ import annotations

import math
import os
import time
from fractions import Fraction as F

import numpy as np
import pytest

from thermoreach.applications import (
    IDENTITY_X,
    catalysis_curve,
    cooling_curve,
    cooling_point,
    epsilon_mtp_exact,
    epsilon_tp_exact,
    hbac_optimize,
    monte_carlo_max,
    photoisomerization_yield,
    work_extraction_curve,
)
from thermoreach.core import FLOAT, context_from_gamma, make_gibbs_context, snap_population, validate_population
from thermoreach.gep import standard_families, verify_monotone
from thermoreach.majorization import sigma_a_dominates, thermomajorizes
from thermoreach.reach import build_reach_set, is_reachable
from thermoreach.thermalization import (
    ControlSequence,
    ElementaryControl,
    apply_sequence,
    evolve_generator,
    make_detailed_balance_generator,
    sample_mtp_schedule,
)

from conftest import random_context, random_population

RESULTS: list[str] = []


def record(n: int, title: str, ok: bool, detail: str) -> None:
    line = f"[criterion {n:2d}] {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    RESULTS.append(line)
    print(line)


def tri_context():
    return context_from_gamma([F(1, 2), F(1, 3), F(1, 6)])


# 1 ---------------------------------------------------------------------------


def test_01_two_level_exactness():
    t0 = time.perf_counter()
    ctx = context_from_gamma([F(2, 3), F(1, 3)])
    p = validate_population([F(1, 2), F(1, 2)], ctx)
    rs = build_reach_set(p, ctx)
    rng = np.random.default_rng(101)
    accepted = rejected = 0
    for _ in range(1000):
        s = F(int(rng.integers(0, 10**9 + 1)), 10**9)
        q = validate_population([(1 - s) * a + s * g for a, g in zip(p.values, ctx.gamma)], ctx)
        dec = is_reachable(q, rs)
        accepted += dec.certified and dec.residual == 0
    for k in range(1000):
        offset = F(1, 10**6) + F(int(rng.integers(0, 10**6)), 10**7)
        x0 = F(1, 2) - offset if k % 2 else F(2, 3) + offset
        q = validate_population([x0, 1 - x0], ctx)
        rejected += is_reachable(q, rs).status == "unreachable"
    dt = time.perf_counter() - t0
    ok = accepted == 1000 and rejected == 1000 and dt < 5
    record(1, "d=2 exactness", ok, f"{accepted}/1000 on-segment accepted, {rejected}/1000 off-segment rejected, {dt:.2f}s (<5s)")
    assert ok


# 2 ---------------------------------------------------------------------------


def test_02_certificate_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    fams = standard_families()
    failures = 0
    worst = 0.0
    for k in range(1000):
        d = int(rng.integers(3, 6))
        mode = "rational" if k % 2 == 0 else FLOAT
        ctx = random_context(rng, d, mode)
        p = random_population(rng, ctx, sparse=bool(k % 3 == 0))
        seq = sample_mtp_schedule(ctx, int(rng.integers(2**32)), int(rng.integers(1, 21)))
        if k % 4 == 1:
            seq = ControlSequence(tuple(ElementaryControl(s.i, s.j, ctx.one()) for s in seq))
        _, traj = apply_sequence(p, ctx, seq, 2)
        rep = verify_monotone(traj, ctx, fams, 1e-9)
        worst = max(worst, rep.worst_violation)
        failures += not rep.ok
    dt = time.perf_counter() - t0
    ok = failures == 0 and dt < 120
    record(2, "GEP certificate suite", ok,
           f"{1000 - failures}/1000 trajectories monotone in {len(fams)} families (worst drop {worst:.1e}), {dt:.1f}s (<120s)")
    assert ok


# 3 ---------------------------------------------------------------------------


def test_03_monte_carlo_completeness():
    t0 = time.perf_counter()
    ctx = tri_context()
    fctx = ctx.with_mode(FLOAT)
    rng = np.random.default_rng(303)
    total = accepted = certified = checked = 0
    for _ in range(5):
        p = snap_population(rng.dirichlet(np.ones(3)), ctx)
        rs = build_reach_set(p, ctx)
        pf = validate_population(p.as_floats(), fctx)
        for k in range(2000):
            if k % 2 == 0:
                seq = sample_mtp_schedule(ctx, int(rng.integers(2**32)), int(rng.integers(1, 21)))
                if k % 4 == 0:
                    seq = ControlSequence(tuple(ElementaryControl(s.i, s.j, 1) for s in seq))
                q, _ = apply_sequence(p, ctx, seq, 0)
            else:
                gen = make_detailed_balance_generator(ctx, int(rng.integers(2**32)), 1.0)
                qf = evolve_generator(pf, gen, float(rng.uniform(0.01, 5.0)), fctx)
                q = snap_population(qf.values, ctx)
            total += 1
            dec = is_reachable(q, rs, certify=(k % 100 == 0))
            accepted += dec.reachable
            if k % 100 == 0:
                checked += 1
                certified += dec.certified
    dt = time.perf_counter() - t0
    ok = accepted == total == 10_000 and certified == checked and dt < 600
    record(3, "Monte Carlo completeness", ok,
           f"{accepted}/{total} endpoints accepted, {certified}/{checked} certified protocols, {dt:.1f}s (<600s)")
    assert ok


# 4 ---------------------------------------------------------------------------


def test_04_curve_sigma_equivalence():
    rng = np.random.default_rng(404)
    agree = n_true = 0
    for k in range(10_000):
        d = int(rng.integers(2, 7))
        ctx = random_context(rng, d)
        p = random_population(rng, ctx, sparse=bool(k % 5 == 0))
        kind = k % 3
        if kind == 0:
            q = random_population(rng, ctx, sparse=bool(k % 7 == 0))
        elif kind == 1:
            t = F(int(rng.integers(0, 1001)), 1000)
            q = validate_population([(1 - t) * a + t * g for a, g in zip(p.values, ctx.gamma)], ctx)
        else:
            seq = sample_mtp_schedule(ctx, int(rng.integers(2**32)), int(rng.integers(1, 4)))
            q, _ = apply_sequence(p, ctx, seq, 0)
            if k % 2:
                p, q = q, p
        a = thermomajorizes(p, q, ctx)
        b = sigma_a_dominates(p, q, ctx)
        agree += a == b
        n_true += a
    ok = agree == 10_000
    record(4, "curve/sigma_a equivalence", ok, f"{agree}/10000 verdicts agree exactly ({n_true} dominating pairs)")
    assert ok


# 5 ---------------------------------------------------------------------------


def test_05_cooling():
    t0 = time.perf_counter()
    _, _, dp_tp, _, _ = cooling_point(math.log(2))
    res = cooling_curve()
    ordered = all(r["dp0_tp"] >= r["dp0_mtp"] >= 0 for r in res.rows)
    small = cooling_curve([1e-1, 1e-2, 1e-3])
    tp_small = [r["dp0_tp"] for r in small.rows]
    mtp_small = [r["dp0_mtp"] for r in small.rows]
    vanish = (tp_small == sorted(tp_small, reverse=True) and mtp_small == sorted(mtp_small, reverse=True)
              and tp_small[-1] < 1e-3 and mtp_small[-1] < 1e-3)
    replay = all(e["replay_error"] <= 1e-9 and e["certified"] for e in res.protocols.values())
    dt = time.perf_counter() - t0
    ok = abs(float(dp_tp) - 49 / 120) <= 1e-9 and ordered and vanish and replay and dt < 300
    record(5, "cooling", ok,
           f"dp0_TP(ln2)={dp_tp} (49/120), TP>=MTP>=0 on {len(res.rows)} points: {ordered}, "
           f"->0 as beta->0: {vanish} ({tp_small[-1]:.1e}, {mtp_small[-1]:.1e}), replays ok: {replay}, {dt:.1f}s (<300s)")
    assert ok


# 6 ---------------------------------------------------------------------------


def test_06_work_extraction():
    t0 = time.perf_counter()
    res = work_extraction_curve()
    w = res.column("w_over_delta")
    tp = res.column("eps_tp")
    mtp = res.column("eps_mtp")
    slack = res.metadata["eps_tol"]
    # bisection values resolve the boundary to eps_tol; the exact oracles are compared without slack
    mono = all(b >= a - slack for a, b in zip(tp, tp[1:])) and all(b >= a - slack for a, b in zip(mtp, mtp[1:]))
    exact_tp = [epsilon_tp_exact(x) for x in w]
    exact_mtp = [epsilon_mtp_exact(x) for x in w]
    exact_mono = all(b >= a for a, b in zip(exact_tp, exact_tp[1:])) and all(b >= a for a, b in zip(exact_mtp, exact_mtp[1:]))
    above = all(m >= t - slack for m, t in zip(mtp, tp)) and all(m >= t for m, t in zip(exact_mtp, exact_tp))
    oracle = float(epsilon_tp_exact(1e-3))
    match = abs(tp[0] - oracle) <= 1e-5
    margin = mtp[0] - tp[0]
    replay = all(e["replay_error"] <= 1e-9 and e["certified"] for e in res.protocols.values())
    dt = time.perf_counter() - t0
    ok = mono and exact_mono and above and match and margin >= 0.05 and replay and dt < 600
    record(6, "work extraction", ok,
           f"monotone: {mono and exact_mono}, MTP>=TP: {above}, eps_TP(1e-3)={tp[0]:.6g} vs oracle {oracle:.6g}, "
           f"eps_MTP(1e-3)={mtp[0]:.4f} (margin {margin:.3f} >= 0.05), {dt:.1f}s (<600s)")
    assert ok


# 7 ---------------------------------------------------------------------------


def test_07_catalysis():
    t0 = time.perf_counter()
    res = catalysis_curve()
    rows = res.rows
    mtp_err = max(abs(r["beta_fin_mtp"] - r["beta_e"]) for r in rows)
    cat_above = all(r["beta_fin_cat"] > r["beta_e"] for r in rows)
    tp_above = all(r["beta_fin_tp"] >= r["beta_fin_cat"] for r in rows)
    replay = all(e["replay_error"] <= 1e-9 and e["certified"] for e in res.protocols.values())
    dt = time.perf_counter() - t0
    ok = mtp_err <= 1e-6 and cat_above and tp_above and replay and dt < 900
    record(7, "catalysis", ok,
           f"max|beta_MTP-beta_E|={mtp_err:.1e} (<=1e-6), cat>beta_E: {cat_above}, TP>=cat: {tp_above}, "
           f"{len(rows)} points, {dt:.1f}s (<900s)")
    assert ok


# 8 ---------------------------------------------------------------------------


def test_08_hbac():
    t0 = time.perf_counter()
    counts = {}
    protocol_ok = False
    for bd in (1.0, 0.5, 2.0):
        res = hbac_optimize(bd)
        counts[bd] = res.metadata["n_optimal"]
        if bd == 1.0:
            has_x = IDENTITY_X in res.metadata["optimal_permutations"]
            seq = res.protocols["1032"]["protocol"]
            pairs = [s.pair for s in seq]
            protocol_ok = (
                has_x and len(seq) == 3 and all(s.is_full for s in seq)
                and pairs[0] == (0, 3) and sorted(pairs[1:]) == [(0, 1), (2, 3)]
                and res.protocols["1032"]["certified"]
            )
    dt = time.perf_counter() - t0
    ok = all(c == 5 for c in counts.values()) and protocol_ok and dt < 600
    record(8, "HBAC / SR-gamma", ok,
           f"optimal permutation counts {counts}, I(x)X protocol = T(00,11) then ancilla resets: {protocol_ok}, {dt:.1f}s (<600s)")
    assert ok


# 9 ---------------------------------------------------------------------------


def test_09_photoisomerization():
    t0 = time.perf_counter()
    res = photoisomerization_yield(0.2, (0.0, 0.4, 1.0), 2.0)
    row = res.rows[0]
    from thermoreach.applications import photoisomerization_setup

    ctx, p = photoisomerization_setup(0.2)
    mc = monte_carlo_max(p, ctx.with_mode(FLOAT), [0, 1, 0], 10_000, seed=909)
    gap = row["yield_tp"] - row["yield_mtp"]
    consistent = mc <= row["yield_mtp"] + 1e-9
    dt = time.perf_counter() - t0
    ok = gap > 0 and row["yield_tp"] - mc > 0 and consistent and res.protocols["mtp"]["certified"] and dt < 300
    record(9, "photoisomerization", ok,
           f"yield_TP={row['yield_tp']:.6f} > yield_MTP={row['yield_mtp']:.6f} (gap {gap:.4f}), "
           f"MC lower bound {mc:.6f} <= MTP: {consistent}, {dt:.1f}s (<300s)")
    assert ok


# 10 --------------------------------------------------------------------------


def _random_build(d: int, seed: int):
    rng = np.random.default_rng(seed)
    ctx = make_gibbs_context(list(np.arange(d) * 0.5), 1.0)
    p = snap_population(rng.dirichlet(np.ones(d)), ctx)
    t0 = time.perf_counter()
    rs = build_reach_set(p, ctx)
    return rs, time.perf_counter() - t0


def test_10_performance_envelope():
    rs5, t5 = _random_build(5, 1005)
    rs6, t6 = _random_build(6, 1006)
    ok = (not rs5.bound_hit and t5 < 60) and (not rs6.bound_hit and t6 < 1800)
    record(10, "performance envelope", ok,
           f"d=5 {t5:.1f}s (<60s, {rs5.stats['distinct_states']} states), "
           f"d=6 {t6:.1f}s (<1800s, {rs6.stats['distinct_states']} states)")
    assert ok


@pytest.mark.skipif(not os.environ.get("THERMOREACH_STRETCH"), reason="non-gating d=7 stretch target")
def test_10b_stretch_d7():
    rs7, t7 = _random_build(7, 1007)
    print(f"[stretch] d=7 build {t7:.1f}s, {rs7.stats['distinct_states']} states, bound hit: {rs7.bound_hit}")
