"""Achievable set under Markovian thermal processes.

The set is stored as a finite union over beta-orders: for each order a small
antichain of maximal states (under thermomajorization) reached by full
two-level thermalizations.  A state ``q`` is reachable when some order
compatible with ``q`` holds a member that thermomajorizes it; the remaining
descent within that order is synthesised explicitly from partial
thermalizations and every positive answer is replayed and checked against
the complete absolute-value monotone family.
"""

from __future__ import annotations

import itertools
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from gmpy2 import mpq

from .core import (
    GibbsContext,
    ModeMismatchError,
    Population,
    ThermoReachError,
    ValidationError,
    coerce_population,
)
from .gep import MonotonicityReport, absolute, verify_monotone
from .majorization import (
    BetaOrder,
    cumulative,
    dominates_in_order,
    is_compatible,
    iter_compatible_orders,
)
from .thermalization import ControlSequence, ElementaryControl, _partial_raw, apply_sequence

log = logging.getLogger(__name__)

MAX_EXACT_D = 7


class DescentStall(ThermoReachError):
    """Same-order descent stopped making progress before reaching its target."""

    def __init__(self, message: str, residual, sequence: ControlSequence):
        super().__init__(message)
        self.residual = residual
        self.sequence = sequence


@dataclass(frozen=True)
class FrontierEntry:
    state: Population
    path: tuple  # full-thermalization pairs (i, j), 0-based

    @property
    def protocol(self) -> ControlSequence:
        return ControlSequence.full(self.path)


@dataclass(frozen=True)
class ReachSet:
    source: Population
    ctx: GibbsContext
    frontier: dict  # BetaOrder -> tuple[FrontierEntry, ...]
    depth: int
    bound_hit: bool
    depth_bound: int
    stats: dict = field(default_factory=dict, compare=False)

    @property
    def orders(self) -> list:
        return list(self.frontier)

    def states(self) -> list[Population]:
        seen = {}
        for entries in self.frontier.values():
            for e in entries:
                seen.setdefault(e.state.values, e.state)
        return [seen[k] for k in sorted(seen)]

    def entries(self):
        for order, members in self.frontier.items():
            for e in members:
                yield order, e


@dataclass
class ReachDecision:
    """Answer to a membership query.

    ``status`` is ``"reachable"``, ``"unreachable"`` or ``"unknown"`` (the
    latter when the reach set hit its depth bound and no witness was found).
    """

    status: str
    witness_order: BetaOrder | None = None
    witness_state: Population | None = None
    protocol: ControlSequence | None = None
    final_state: Population | None = None
    residual: float | None = None
    certificate: MonotonicityReport | None = None

    @property
    def reachable(self) -> bool:
        return self.status == "reachable"

    @property
    def certified(self) -> bool:
        return self.certificate is not None and self.certificate.ok


def default_depth_bound(d: int) -> int:
    return 2 * d * math.comb(d, 2)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("THERMOREACH_THREADS", "1")))
    except ValueError:
        return 1


def _exact_orders(values, inv_g) -> list:
    r = [v * w for v, w in zip(values, inv_g)]
    idx = sorted(range(len(r)), key=lambda i: (-r[i], i))
    blocks = [[idx[0]]]
    for prev, cur in zip(idx, idx[1:]):
        if r[prev] == r[cur]:
            blocks[-1].append(cur)
        else:
            blocks.append([cur])
    if all(len(b) == 1 for b in blocks):
        return [tuple(idx)]
    return [
        tuple(i for part in parts for i in part)
        for parts in itertools.product(*(itertools.permutations(sorted(b)) for b in blocks))
    ]


def _prefix(values, order) -> tuple:
    acc = 0
    out = []
    for i in order[:-1]:
        acc = acc + values[i]
        out.append(acc)
    return tuple(out)


def _expand(args):
    """Children of one node: ``(pair, child, [(order, prefix), ...])``."""
    values, weights, inv_g, ctx = args
    out = []
    for (i, j), w in weights:
        mass = values[i] + values[j]
        if mass == 0:
            continue
        child = list(values)
        child[i] = mass * w
        child[j] = mass - child[i]
        child = tuple(child)
        if child == values:
            continue
        orders = _exact_orders(child, inv_g) if inv_g is not None else list(iter_compatible_orders(child, ctx))
        out.append(((i, j), child, [(o, _prefix(child, o)) for o in orders]))
    return out


def _to_fraction(x) -> Fraction:
    return Fraction(int(x.numerator), int(x.denominator))


def build_reach_set(
    p: Population,
    ctx: GibbsContext,
    depth_bound: int | None = None,
    *,
    threads: int | None = None,
) -> ReachSet:
    """Breadth-first closure of ``p`` under full two-level thermalizations.

    Every pair of levels is tried at every node.  Each result is inserted into
    the antichain of every beta-order it is compatible with; dominated
    members are dropped.  The search stops at a fixpoint (a level that
    inserts nothing) or after ``depth_bound`` levels, in which case
    ``bound_hit`` is set.  Rational mode runs on GMP rationals internally.
    """
    p = coerce_population(p, ctx)
    d = ctx.d
    if d > MAX_EXACT_D:
        log.warning("exhaustive reach-set construction for d=%d > %d may be very slow", d, MAX_EXACT_D)
    bound = default_depth_bound(d) if depth_bound is None else int(depth_bound)
    if bound < 1:
        raise ValidationError("depth_bound must be at least 1")
    workers = _threads() if threads is None else max(1, threads)
    start = time.perf_counter()

    if ctx.exact:
        gamma = [mpq(g.numerator, g.denominator) for g in ctx.gamma]
        src = tuple(mpq(v.numerator, v.denominator) for v in p.values)
        inv_g = [1 / g for g in gamma]
        le = lambda a, b: a <= b  # noqa: E731
    else:
        gamma = list(ctx.gamma)
        src = tuple(p.values)
        inv_g = None
        tol = ctx.tol
        le = lambda a, b: a <= b + tol  # noqa: E731
    weights = [((i, j), gamma[i] / (gamma[i] + gamma[j])) for i in range(d) for j in range(i + 1, d)]

    # order -> {state values: (path, prefix sums in that order)}
    chains: dict[BetaOrder, dict] = {}
    seen: set = set()
    n_children = 0

    def dominated(pa, pb) -> bool:
        return all(le(b, a) for a, b in zip(pa, pb))

    def insert(values, placed, path) -> bool:
        added = False
        for order, pre in placed:
            members = chains.setdefault(order, {})
            if any(dominated(mp, pre) for _, mp in members.values()):
                continue
            for v in [v for v, (_, mp) in members.items() if dominated(pre, mp)]:
                del members[v]
            members[values] = (path, pre)
            added = True
        return added

    def alive(values, placed) -> bool:
        return any(values in chains.get(order, ()) for order, _ in placed)

    seen.add(src)
    src_orders = _exact_orders(src, inv_g) if inv_g is not None else list(iter_compatible_orders(src, ctx))
    src_placed = [(o, _prefix(src, o)) for o in src_orders]
    insert(src, src_placed, ())
    level = [(src, (), src_placed)]
    depth = 0
    bound_hit = False
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while level:
            level = [node for node in level if alive(node[0], node[2])]
            if not level:
                break
            if depth >= bound:
                bound_hit = True
                break
            jobs = [(v, weights, inv_g, ctx) for v, _, _ in level]
            if pool is not None and len(jobs) >= 4 * workers:
                expanded = list(pool.map(_expand, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
            else:
                expanded = [_expand(job) for job in jobs]
            nxt = []
            for (_, path, _), children in zip(level, expanded):
                for pair, child, placed in children:
                    n_children += 1
                    if ctx.exact:
                        if child in seen:
                            continue
                        seen.add(child)
                    if insert(child, placed, path + (pair,)):
                        nxt.append((child, path + (pair,), placed))
            depth += 1
            level = nxt
    finally:
        if pool is not None:
            pool.shutdown()

    convert = (lambda v: tuple(_to_fraction(x) for x in v)) if ctx.exact else tuple
    frontier = {}
    for order in sorted(chains):
        members = sorted(((convert(v), pth) for v, (pth, _) in chains[order].items()),
                         key=lambda e: (e[0], len(e[1]), e[1]))
        if members:
            frontier[order] = tuple(FrontierEntry(Population(v, ctx.mode), pth) for v, pth in members)
    stats = {
        "children_generated": n_children,
        "distinct_states": len(seen) if ctx.exact else n_children + 1,
        "orders": len(frontier),
        "frontier_entries": sum(len(v) for v in frontier.values()),
        "seconds": time.perf_counter() - start,
    }
    return ReachSet(p, ctx, frontier, depth, bound_hit, bound, stats)


def _linf(a: Sequence, b: Sequence):
    return max(abs(x - y) for x, y in zip(a, b))


def default_eps(ctx: GibbsContext) -> float:
    return 1e-12 if ctx.exact else 1e-9


def same_order_descent(
    r: Population,
    q: Population,
    ctx: GibbsContext,
    pi: BetaOrder,
    eps_target: float | None = None,
    max_sweeps: int = 5000,
) -> ControlSequence:
    """Partial thermalizations of ``pi``-adjacent pairs taking ``r`` down to ``q``.

    Each sweep visits ``k = 1 .. d-1`` and lowers the ``k``-th cumulative sum
    towards the target as far as the adjacent pair allows.  Stops when the
    largest population difference is at most ``eps_target`` (or zero in
    rational mode); raises :class:`DescentStall` if a sweep makes no progress.
    """
    r = coerce_population(r, ctx)
    q = coerce_population(q, ctx)
    pi = tuple(pi)
    if sorted(pi) != list(range(ctx.d)):
        raise ValidationError(f"{pi} is not a permutation of the levels")
    if not (is_compatible(r.values, pi, ctx) and is_compatible(q.values, pi, ctx)):
        raise ValidationError("order is not compatible with both states")
    if not dominates_in_order(r.values, q.values, pi, ctx):
        raise ValidationError("start state does not thermomajorize the target")
    eps = default_eps(ctx) if eps_target is None else eps_target
    g = ctx.gamma
    cur = list(r.values)
    target = cumulative(q.values, pi)
    steps: list[ElementaryControl] = []
    one = ctx.one()
    for _ in range(max_sweeps):
        if ctx.exact and cur == list(q.values):
            return ControlSequence(tuple(steps))
        residual = _linf(cur, q.values)
        if residual <= eps:
            return ControlSequence(tuple(steps))
        progressed = False
        acc = ctx.zero()
        for k in range(ctx.d - 1):
            a, b = pi[k], pi[k + 1]
            Rk = acc + cur[a]
            excess = Rk - target[k]
            if excess > 0:
                mass = cur[a] + cur[b]
                eq_a = mass * g[a] / (g[a] + g[b])
                room = cur[a] - eq_a
                if room > 0:
                    lam = excess / room
                    if lam >= 1:
                        lam = one
                    cur = list(_partial_raw(cur, g, a, b, lam))
                    steps.append(ElementaryControl(a, b, lam))
                    progressed = True
            acc = acc + cur[a]
        if not progressed:
            break
    residual = _linf(cur, q.values)
    if residual <= eps:
        return ControlSequence(tuple(steps))
    raise DescentStall(
        f"descent stalled with residual {float(residual):.3e} > {eps:.1e}",
        residual,
        ControlSequence(tuple(steps)),
    )


def _witnesses(q_values, rs: ReachSet):
    ctx = rs.ctx
    found = []
    for order in iter_compatible_orders(q_values, ctx):
        for entry in rs.frontier.get(order, ()):
            if dominates_in_order(entry.state.values, q_values, order, ctx):
                found.append((len(entry.path), order, entry))
    found.sort(key=lambda w: (w[0], w[1]))
    return found


def is_reachable(
    q: Population,
    rs: ReachSet,
    *,
    eps_target: float | None = None,
    certify: bool = True,
    samples_per_step: int = 1,
) -> ReachDecision:
    """Decide whether ``q`` lies in the achievable set ``rs``.

    With ``certify`` the returned protocol is replayed from the source and the
    trajectory is checked against all ``sigma_a``; candidates are tried in
    order of increasing frontier path length until one certifies.
    """
    ctx = rs.ctx
    if isinstance(q, Population) and q.mode != ctx.mode:
        raise ModeMismatchError(f"query is {q.mode}, reach set is {ctx.mode}")
    q = coerce_population(q, ctx)
    witnesses = _witnesses(q.values, rs)
    if not witnesses:
        return ReachDecision("unknown" if rs.bound_hit else "unreachable")
    if not certify:
        _, order, entry = witnesses[0]
        return ReachDecision("reachable", order, entry.state)
    eps = default_eps(ctx) if eps_target is None else eps_target
    best = None
    for _, order, entry in witnesses:
        try:
            tail = same_order_descent(entry.state, q, ctx, order, eps)
        except DescentStall as stall:
            log.debug("descent stall from %s: %s", entry.state, stall)
            continue
        protocol = entry.protocol + tail
        final, traj = apply_sequence(rs.source, ctx, protocol, samples_per_step)
        residual = _linf(final.values, q.values)
        if len(traj) > 1:
            report = verify_monotone(traj, ctx, [absolute()], tol=1e-9)
        else:
            report = MonotonicityReport(["absolute"], list(traj.times), 1e-9)
        decision = ReachDecision(
            "reachable", order, entry.state, protocol, final, float(residual), report
        )
        if report.ok and residual <= eps:
            return decision
        best = best or decision
    if best is not None:
        return best
    _, order, entry = witnesses[0]
    return ReachDecision("reachable", order, entry.state)


# ---------------------------------------------------------------------------
# Extreme points
# ---------------------------------------------------------------------------


def _solve_exact(A: list[list[Fraction]], b: list[Fraction]):
    """Gauss-Jordan elimination over the rationals; ``None`` if singular."""
    n = len(A)
    M = [row[:] + [rhs] for row, rhs in zip(A, b)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            return None
        M[col], M[piv] = M[piv], M[col]
        pv = M[col][col]
        if pv != 1:
            M[col] = [v / pv for v in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [v - f * w for v, w in zip(M[r], M[col])]
    return [M[r][n] for r in range(n)]


def order_polytope_constraints(order: BetaOrder, bound_sums: Sequence[Fraction], gamma: Sequence[Fraction]):
    """H-representation ``A y <= b`` in cumulative-sum coordinates ``y_1..y_{d-1}``.

    Rows: concavity of the curve at every interior elbow (the order stays
    compatible) and the upper bounds ``y_k <= bound_sums[k]``.  Positivity of
    the last population follows from ``y_{d-1} <= bound_sums[d-2] <= 1``.
    """
    d = len(order)
    n = d - 1
    g = [gamma[i] for i in order]
    rows, rhs = [], []
    # slope_k >= slope_{k+1}: (y_k - y_{k-1})/g_k >= (y_{k+1} - y_k)/g_{k+1}
    for k in range(1, d):
        row = [Fraction(0)] * n
        c = Fraction(0)
        # -(y_k - y_{k-1})/g_{k-1 idx} + (y_{k+1} - y_k)/g_k <= 0, indices 0-based on g
        gk, gk1 = g[k - 1], g[k]
        # y_k coefficient
        row[k - 1] += -1 / gk - 1 / gk1
        if k - 2 >= 0:
            row[k - 2] += 1 / gk
        if k < n:
            row[k] += 1 / gk1
        else:
            c -= 1 / gk1  # y_d = 1 moves to the right-hand side
        rows.append(row)
        rhs.append(c)
    for k in range(n):
        row = [Fraction(0)] * n
        row[k] = Fraction(1)
        rows.append(row)
        rhs.append(Fraction(bound_sums[k]))
    return rows, rhs


def polytope_vertices(rows, rhs) -> list[tuple]:
    """All vertices of a bounded polytope ``{y : rows y <= rhs}`` (exact).

    Enumerates every square subsystem of tight constraints; fine for the at
    most twelve rows that arise for ``d <= 7``.
    """
    m = len(rows)
    n = len(rows[0])
    out = set()
    for combo in itertools.combinations(range(m), n):
        sol = _solve_exact([rows[c] for c in combo], [rhs[c] for c in combo])
        if sol is None:
            continue
        if all(sum(a * y for a, y in zip(row, sol)) <= b for row, b in zip(rows, rhs)):
            out.add(tuple(sol))
    return sorted(out)


def order_polytope_vertices(order: BetaOrder, m_values: Sequence[Fraction], ctx: GibbsContext) -> list[tuple]:
    """Vertices, as populations, of ``{q : order compatible with q, m thermomajorizes q}``."""
    bound = cumulative(m_values, order)[:-1]
    rows, rhs = order_polytope_constraints(order, bound, ctx.gamma)
    verts = []
    for y in polytope_vertices(rows, rhs):
        cums = [Fraction(0)] + list(y) + [Fraction(1)]
        q = [Fraction(0)] * ctx.d
        for k, lvl in enumerate(order):
            q[lvl] = cums[k + 1] - cums[k]
        verts.append(tuple(q))
    return verts


def extreme_points(rs: ReachSet) -> list[Population]:
    """Union of the vertices of every per-order polytope, deduplicated.

    A linear (more generally convex) objective over the achievable set attains
    its maximum at one of these points.
    """
    ctx = rs.ctx
    if not ctx.exact:
        raise ModeMismatchError("extreme points need rational mode")
    if rs.bound_hit:
        log.warning("reach set hit its depth bound; extreme points may be incomplete")
    pts = set()
    for order, entry in rs.entries():
        pts.update(order_polytope_vertices(order, entry.state.values, ctx))
    return [Population(v, ctx.mode) for v in sorted(pts)]


@dataclass
class LinearOptimum:
    state: Population
    value: object
    protocol: ControlSequence | None
    decision: ReachDecision | None = None

    def __iter__(self):
        return iter((self.state, self.value, self.protocol))


def maximize_linear(rs: ReachSet, c: Sequence, *, synthesize: bool = True) -> LinearOptimum:
    """Maximise ``c . q`` over the achievable set.

    Ties prefer the source state, then the lexicographically smallest point.
    """
    ctx = rs.ctx
    if len(c) != ctx.d:
        raise ValidationError(f"objective has {len(c)} entries, context has {ctx.d}")
    coeffs = [ctx.num(x) for x in c]
    pts = extreme_points(rs)
    best_val = None
    best = []
    for pt in pts:
        val = sum(a * x for a, x in zip(coeffs, pt.values))
        if best_val is None or val > best_val:
            best_val, best = val, [pt]
        elif val == best_val:
            best.append(pt)
    if any(pt.values == rs.source.values for pt in best):
        choice = rs.source
    else:
        choice = min(best, key=lambda pt: pt.values)
    if not synthesize:
        return LinearOptimum(choice, best_val, None)
    decision = is_reachable(choice, rs)
    if not decision.reachable:
        raise ThermoReachError(f"extreme point {choice} was not accepted by the membership test")
    return LinearOptimum(choice, best_val, decision.protocol, decision)


def _linear_interval(coef_pairs, lo, hi):
    """Intersect ``{s in [lo, hi] : a + b s >= 0}`` over all ``(a, b)`` rows."""
    for a, b in coef_pairs:
        if b == 0:
            if a < 0:
                return None
        elif b > 0:
            lo = max(lo, -a / b)
        else:
            hi = min(hi, -a / b)
        if lo > hi:
            return None
    return lo, hi


def reachable_intervals(rs: ReachSet, start: Population, end: Population) -> list[tuple]:
    """Exact parameter intervals of the segment ``(1 - s) start + s end`` inside the set.

    One interval per frontier entry whose order and dominance constraints admit
    some ``s`` in ``[0, 1]``; their union is the reachable part of the
    segment.  Rational mode only.
    """
    ctx = rs.ctx
    if not ctx.exact:
        raise ModeMismatchError("exact segment intersection needs rational mode")
    a = coerce_population(start, ctx).values
    b = coerce_population(end, ctx).values
    g = ctx.gamma
    diff = [y - x for x, y in zip(a, b)]
    out = []
    for order, entry in rs.entries():
        rows = []
        for u, v in zip(order, order[1:]):
            # ratio_u(s) - ratio_v(s) >= 0
            rows.append((a[u] / g[u] - a[v] / g[v], diff[u] / g[u] - diff[v] / g[v]))
        M = cumulative(entry.state.values, order)
        A = cumulative(a, order)
        D = cumulative(diff, order)
        for k in range(ctx.d - 1):
            rows.append((M[k] - A[k], -D[k]))
        iv = _linear_interval(rows, Fraction(0), Fraction(1))
        if iv is not None:
            out.append(iv)
    return sorted(set(out))
