"""Generalized entropy-production monotones and trajectory checks.

Each family is an h-divergence ``Sigma_h(p) = -sum_i gamma_i h(p_i / gamma_i)``
for a convex ``h``; all of them must be non-decreasing along any Markovian
thermal trajectory.  The ``absolute`` family with ``a=None`` stands for the
whole one-parameter family ``sigma_a``, ``a`` in ``[0, 1]``, which implies
all the others.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .core import GibbsContext, Population, ThermoReachError, ValidationError, coerce_population
from .majorization import _sigma_a_raw, kink_points, sigma_a
from .thermalization import Trajectory

SHANNON = "shannon"
RENYI = "renyi"
TSALLIS = "tsallis"
VACANCY = "vacancy"
ABSOLUTE = "absolute"
KINDS = (SHANNON, RENYI, TSALLIS, VACANCY, ABSOLUTE)


@dataclass(frozen=True)
class DivergenceFamily:
    """One monotone.

    For Renyi, ``form="relative"`` gives ``-S_alpha(p||gamma)`` with
    ``S_alpha = sgn(alpha) / (alpha - 1) * log sum p^alpha gamma^(1 - alpha)``;
    ``form="power"`` gives the bare power-sum h-divergence.  ``signed=False``
    drops the ``sgn(alpha)`` factor (the alternative convention; it is *not*
    monotone for ``alpha < 0``).
    """

    kind: str
    param: object = None
    form: str = "relative"
    signed: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown divergence family {self.kind!r}")
        if self.kind in (RENYI, TSALLIS):
            if self.param is None:
                raise ValidationError(f"{self.kind} needs a parameter")
            if float(self.param) == 1.0:
                raise ValidationError(f"{self.kind} at parameter 1 is the Shannon case; use shannon")
        if self.form not in ("relative", "power"):
            raise ValidationError(f"unknown form {self.form!r}")

    @property
    def label(self) -> str:
        if self.kind in (SHANNON, VACANCY):
            return self.kind
        if self.kind == ABSOLUTE and self.param is None:
            return "absolute"
        tag = f"{self.kind}({self.param})"
        if self.kind == RENYI and self.form == "power":
            tag += "[power]"
        if self.kind == RENYI and not self.signed:
            tag += "[unsigned]"
        return tag


def shannon() -> DivergenceFamily:
    return DivergenceFamily(SHANNON)


def renyi(alpha: float, form: str = "relative", signed: bool = True) -> DivergenceFamily:
    return DivergenceFamily(RENYI, float(alpha), form, signed)


def tsallis(q: float) -> DivergenceFamily:
    return DivergenceFamily(TSALLIS, float(q))


def vacancy() -> DivergenceFamily:
    return DivergenceFamily(VACANCY)


def absolute(a=None) -> DivergenceFamily:
    return DivergenceFamily(ABSOLUTE, a)


def standard_families() -> list[DivergenceFamily]:
    """The set exercised by the certificate suite."""
    return [
        absolute(),
        shannon(),
        renyi(-1.0),
        renyi(0.5),
        renyi(2.0),
        tsallis(0.5),
        tsallis(2.0),
        vacancy(),
    ]


def _sgn(x: float) -> float:
    return (x > 0) - (x < 0)


def _power_sum(p: Sequence[float], g: Sequence[float], alpha: float) -> float:
    total = 0.0
    for pi, gi in zip(p, g):
        if pi == 0.0:
            if alpha < 0:
                return math.inf
            if alpha == 0:
                continue
            continue
        total += pi**alpha * gi ** (1.0 - alpha)
    return total


def h_divergence(p: Population, ctx: GibbsContext, fam: DivergenceFamily):
    """Value of ``fam`` at ``p``; ``-inf`` where the divergence is unbounded.

    The absolute family returns an exact scalar in rational mode; all other
    families return floats.
    """
    p = coerce_population(p, ctx)
    if fam.kind == ABSOLUTE:
        if fam.param is None:
            raise ValidationError("absolute family needs a value of a for a point evaluation")
        return sigma_a(p, ctx, fam.param)
    return _h_float(p.as_floats(), [float(g) for g in ctx.gamma], fam)


def _h_float(p: Sequence[float], g: Sequence[float], fam: DivergenceFamily) -> float:
    if fam.kind == SHANNON:
        return -math.fsum(pi * math.log(pi / gi) for pi, gi in zip(p, g) if pi > 0)
    if fam.kind == VACANCY:
        if any(pi <= 0 for pi in p):
            return -math.inf
        return math.fsum(gi * math.log(pi / gi) for pi, gi in zip(p, g))
    if fam.kind == RENYI:
        alpha = float(fam.param)
        s = _sgn(alpha) if fam.signed else 1.0
        P = _power_sum(p, g, alpha)
        if fam.form == "power":
            if math.isinf(P):
                coeff = -s / (alpha - 1.0)
                return math.copysign(math.inf, coeff) if coeff else 0.0
            return -s * P / (alpha - 1.0)
        if s == 0:
            return 0.0
        logP = math.log(P) if P > 0 else -math.inf
        if math.isinf(logP):
            coeff = -s / (alpha - 1.0)
            return math.copysign(math.inf, coeff * logP)
        return -s * logP / (alpha - 1.0)
    if fam.kind == TSALLIS:
        q = float(fam.param)
        P = _power_sum(p, g, q)
        if math.isinf(P):
            return math.copysign(math.inf, -_sgn(q) / (q - 1.0))
        return -_sgn(q) * (P - 1.0) / (q - 1.0)
    raise ValidationError(f"unsupported family {fam.kind!r}")


@dataclass
class MonotonicityReport:
    """Outcome of a monotonicity check along a trajectory.

    ``violations`` holds ``(t, family label, magnitude)`` for every step whose
    drop exceeds ``tol``; magnitudes are relative to ``max(1, |value|)``.
    """

    families: list
    times: list
    tol: float
    worst_violation: float = 0.0
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "families": list(self.families),
            "n_samples": len(self.times),
            "tolerance": self.tol,
            "worst_violation": self.worst_violation,
            "ok": self.ok,
            "violations": [{"t": float(t), "family": f, "magnitude": m} for t, f, m in self.violations],
        }


def _drop(before: float, after: float) -> float:
    if before == after:
        return 0.0
    if before == -math.inf:
        return 0.0
    if after == -math.inf:
        return math.inf
    return (before - after) / max(1.0, abs(before))


def verify_monotone(
    traj: Trajectory,
    ctx: GibbsContext,
    fams: Sequence[DivergenceFamily] | None = None,
    tol: float = 1e-9,
) -> MonotonicityReport:
    """Check that every family is non-decreasing between consecutive samples.

    For the complete absolute family the check between two samples runs over
    the union of the two samples' kink points, which is exact for these
    piecewise-linear functions of ``a``.
    """
    if len(traj) < 2:
        raise ValidationError("monotonicity needs at least two samples")
    fams = list(fams) if fams is not None else standard_families()
    report = MonotonicityReport([f.label for f in fams], list(traj.times), tol)
    states = [coerce_population(s, ctx) for s in traj.states]
    floats = [s.as_floats() for s in states]
    g = [float(x) for x in ctx.gamma]
    worst = 0.0
    for fam in fams:
        if fam.kind == ABSOLUTE:
            fixed_a = None if fam.param is None else ctx.num(fam.param)
            for k in range(len(states) - 1):
                a_grid = [fixed_a] if fixed_a is not None else (
                    kink_points(states[k].values, ctx) | kink_points(states[k + 1].values, ctx)
                )
                step_worst = 0.0
                for a in a_grid:
                    before = _sigma_a_raw(states[k].values, ctx, a)
                    after = _sigma_a_raw(states[k + 1].values, ctx, a)
                    if ctx.exact:
                        diff = before - after
                        if diff > 0:
                            step_worst = max(step_worst, float(diff) or 5e-324)
                    else:
                        step_worst = max(step_worst, before - after)
                worst = max(worst, step_worst)
                threshold = 0.0 if ctx.exact else tol
                if step_worst > threshold:
                    report.violations.append((traj.times[k + 1], fam.label, step_worst))
            continue
        values = [_h_float(f, g, fam) for f in floats]
        for k in range(len(values) - 1):
            d = _drop(values[k], values[k + 1])
            worst = max(worst, d)
            if d > tol:
                report.violations.append((traj.times[k + 1], fam.label, d))
    report.worst_violation = worst
    return report


class MissingEnergiesError(ThermoReachError, ValueError):
    pass


def diagonal_entropy(p: Sequence[float]) -> float:
    return -math.fsum(x * math.log(x) for x in p if x > 0)


def entropy_production_series(traj: Trajectory, ctx: GibbsContext) -> list[tuple[float, float]]:
    """Diagonal entropy production rate ``dS_d/dt - beta J`` at every sample.

    ``S_d = -sum p log p`` and ``J = sum_i E_i dp_i/dt``; derivatives use
    central differences on the sample grid (one-sided at the ends).
    """
    if ctx.energies is None or ctx.beta is None:
        raise MissingEnergiesError("entropy production needs an energy ladder and beta; build the context from energies")
    if len(traj) < 3:
        raise ValidationError("entropy production needs at least three samples")
    t = [float(x) for x in traj.times]
    ps = [coerce_population(s, ctx).as_floats() for s in traj.states]
    S = [diagonal_entropy(p) for p in ps]
    U = [math.fsum(e * x for e, x in zip(ctx.energies, p)) for p in ps]
    n = len(t)
    out = []
    for k in range(n):
        lo, hi = max(k - 1, 0), min(k + 1, n - 1)
        dt = t[hi] - t[lo]
        if dt <= 0:
            raise ValidationError("trajectory times must be strictly increasing for finite differences")
        dS = (S[hi] - S[lo]) / dt
        J = (U[hi] - U[lo]) / dt
        out.append((t[k], dS - ctx.beta * J))
    return out


def gep_table(traj: Trajectory, ctx: GibbsContext, fams: Sequence[DivergenceFamily]) -> list[list]:
    """Rows ``[t, Sigma_f1(t), ...]`` for CSV export; absolute families need ``a``."""
    rows = []
    for t, s in zip(traj.times, traj.states):
        row = [t]
        for fam in fams:
            row.append(h_divergence(s, ctx, fam))
        rows.append(row)
    return rows
