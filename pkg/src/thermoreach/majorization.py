"""Beta-orders, thermomajorization curves and the absolute-value monotones."""

from __future__ import annotations

import bisect
import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

from .core import GibbsContext, Population, Scalar, ValidationError, coerce_population

BetaOrder = tuple  # permutation of range(d), highest ratio p_i/gamma_i first


@dataclass(frozen=True)
class ThermoCurve:
    """Concave polyline through ``d + 1`` elbows from ``(0, 0)`` to ``(1, 1)``."""

    points: tuple
    order: BetaOrder

    @property
    def xs(self) -> tuple:
        return tuple(x for x, _ in self.points)

    @property
    def ys(self) -> tuple:
        return tuple(y for _, y in self.points)


def ratios(p: Sequence[Scalar], gamma: Sequence[Scalar]) -> list:
    return [pi / gi for pi, gi in zip(p, gamma)]


def tie_blocks(p: Sequence[Scalar], ctx: GibbsContext) -> list[list[int]]:
    """Level indices grouped by equal ratio, blocks in decreasing ratio.

    Within a block indices are ascending.  In float mode two consecutive
    sorted ratios tie when they differ by at most ``tol * max(1, r)``.
    """
    r = ratios(p, ctx.gamma)
    idx = sorted(range(len(r)), key=lambda i: (-r[i], i))
    blocks: list[list[int]] = [[idx[0]]]
    for prev, cur in zip(idx, idx[1:]):
        if ctx.exact:
            same = r[prev] == r[cur]
        else:
            same = r[prev] - r[cur] <= ctx.tol * max(1.0, abs(r[prev]))
        if same:
            blocks[-1].append(cur)
        else:
            blocks.append([cur])
    for b in blocks:
        b.sort()
    return blocks


def canonical_beta_order(p: Population, ctx: GibbsContext) -> BetaOrder:
    """Sort levels by ``p_i / gamma_i`` descending, ties by smaller index."""
    p = coerce_population(p, ctx)
    return tuple(i for block in tie_blocks(p.values, ctx) for i in block)


def iter_compatible_orders(values: Sequence[Scalar], ctx: GibbsContext) -> Iterator[BetaOrder]:
    blocks = tie_blocks(values, ctx)
    for parts in itertools.product(*(itertools.permutations(b) for b in blocks)):
        yield tuple(i for part in parts for i in part)


def all_compatible_orders(p: Population, ctx: GibbsContext) -> list[BetaOrder]:
    """Every permutation compatible with ``p`` (product of tie-block factorials)."""
    p = coerce_population(p, ctx)
    return sorted(iter_compatible_orders(p.values, ctx))


def is_compatible(values: Sequence[Scalar], order: BetaOrder, ctx: GibbsContext) -> bool:
    r = ratios(values, ctx.gamma)
    for a, b in zip(order, order[1:]):
        if ctx.exact:
            if r[a] < r[b]:
                return False
        elif r[a] < r[b] - ctx.tol * max(1.0, abs(r[b])):
            return False
    return True


def cumulative(values: Sequence[Scalar], order: BetaOrder) -> list:
    """Partial sums of ``values`` taken in ``order`` (length ``d``)."""
    out = []
    acc = 0
    for i in order:
        acc = acc + values[i]
        out.append(acc)
    return out


def thermo_curve(p: Population, ctx: GibbsContext) -> ThermoCurve:
    """Thermomajorization curve of ``p`` built on its canonical beta-order."""
    p = coerce_population(p, ctx)
    order = canonical_beta_order(p, ctx)
    return _curve_in_order(p.values, order, ctx)


def _curve_in_order(values: Sequence[Scalar], order: BetaOrder, ctx: GibbsContext) -> ThermoCurve:
    zero = ctx.zero()
    xs = [zero] + cumulative(ctx.gamma, order)
    ys = [zero] + cumulative(values, order)
    # the last elbow is (1, 1) by normalisation; pin it to avoid float drift
    xs[-1] = ctx.one()
    ys[-1] = ctx.one()
    return ThermoCurve(tuple(zip(xs, ys)), tuple(order))


def curve_value(curve: ThermoCurve, x: Scalar) -> Scalar:
    """Evaluate the piecewise-linear curve at ``x`` in ``[0, 1]``."""
    xs = curve.xs
    if x < xs[0] or x > xs[-1]:
        raise ValidationError(f"x={x} outside [0, 1]")
    k = bisect.bisect_left(xs, x)
    if xs[k] == x:
        return curve.points[k][1]
    x0, y0 = curve.points[k - 1]
    x1, y1 = curve.points[k]
    return y0 + (y1 - y0) * (x - x0) / (x1 - x0)


def _curve_at(curve: ThermoCurve, x: Scalar) -> Scalar:
    # clamp tiny float overshoot of elbow coordinates
    xs = curve.xs
    if x <= xs[0]:
        return curve.points[0][1]
    if x >= xs[-1]:
        return curve.points[-1][1]
    return curve_value(curve, x)


def thermomajorizes(p: Population, q: Population, ctx: GibbsContext) -> bool:
    """True iff the curve of ``p`` lies on or above the curve of ``q``.

    Both curves are concave, so comparing at the elbows of ``q`` suffices.
    """
    p = coerce_population(p, ctx)
    q = coerce_population(q, ctx)
    cp = thermo_curve(p, ctx)
    cq = thermo_curve(q, ctx)
    return all(ctx.le(y, _curve_at(cp, x)) for x, y in cq.points[1:-1])


def dominates_in_order(m: Sequence[Scalar], q: Sequence[Scalar], order: BetaOrder, ctx: GibbsContext) -> bool:
    """Fast thermomajorization test when ``order`` is compatible with both states."""
    acc_m = acc_q = 0
    for i in order[:-1]:
        acc_m = acc_m + m[i]
        acc_q = acc_q + q[i]
        if not ctx.le(acc_q, acc_m):
            return False
    return True


def sigma_a(p: Population, ctx: GibbsContext, a: Scalar) -> Scalar:
    """Absolute-value monotone ``-sum_i |p_i - a gamma_i / gamma_min|``."""
    a = ctx.num(a)
    if a < 0 or a > 1:
        raise ValidationError(f"a={a} outside [0, 1]")
    p = coerce_population(p, ctx)
    return _sigma_a_raw(p.values, ctx, a)


def _sigma_a_raw(values: Sequence[Scalar], ctx: GibbsContext, a: Scalar) -> Scalar:
    gmin = ctx.gamma_min
    total = ctx.zero()
    for pi, gi in zip(values, ctx.gamma):
        total += abs(pi - a * gi / gmin)
    return -total


def kink_points(values: Sequence[Scalar], ctx: GibbsContext) -> set:
    """Values of ``a`` in ``[0, 1]`` where ``sigma_a`` changes slope."""
    gmin = ctx.gamma_min
    out = {ctx.zero(), ctx.one()}
    for pi, gi in zip(values, ctx.gamma):
        a = pi * gmin / gi
        if 0 <= a <= 1:
            out.add(a)
    return out


def sigma_a_dominates(p: Population, q: Population, ctx: GibbsContext) -> bool:
    """True iff ``sigma_a(p) <= sigma_a(q)`` for every ``a`` in ``[0, 1]``.

    Both sides are piecewise linear in ``a``; checking the union of their
    kinks and the interval endpoints is exact.
    """
    p = coerce_population(p, ctx)
    q = coerce_population(q, ctx)
    grid = kink_points(p.values, ctx) | kink_points(q.values, ctx)
    return all(ctx.le(_sigma_a_raw(p.values, ctx, a), _sigma_a_raw(q.values, ctx, a)) for a in grid)
