"""Two-level thermalizations, control sequences and random Markovian dynamics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy.linalg import expm

from .core import (
    GibbsContext,
    Population,
    Scalar,
    ValidationError,
    coerce_population,
    rationalize,
    snap_population,
)


@dataclass(frozen=True)
class ElementaryControl:
    """Partial thermalization of levels ``i`` and ``j`` (0-based) with weight ``lam``.

    ``lam = 1 - exp(-t / tau)``; ``lam == 1`` is the infinite-time limit.
    """

    i: int
    j: int
    lam: Scalar = 1

    def __post_init__(self):
        if self.i == self.j:
            raise ValidationError(f"elementary control needs two distinct levels, got ({self.i}, {self.j})")
        if self.i < 0 or self.j < 0:
            raise ValidationError("level indices must be non-negative")
        if not 0 <= self.lam <= 1:
            raise ValidationError(f"lambda={self.lam} outside [0, 1]")

    @property
    def tau_rel(self) -> float:
        """Duration in units of the step's relaxation time."""
        lam = float(self.lam)
        return math.inf if lam >= 1 else -math.log1p(-lam)

    @property
    def pair(self) -> tuple[int, int]:
        return (min(self.i, self.j), max(self.i, self.j))

    @property
    def is_full(self) -> bool:
        return self.lam == 1


@dataclass(frozen=True)
class ControlSequence:
    steps: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self) -> Iterator[ElementaryControl]:
        return iter(self.steps)

    def __getitem__(self, k):
        return self.steps[k]

    def __add__(self, other: "ControlSequence") -> "ControlSequence":
        return ControlSequence(self.steps + tuple(other.steps))

    @classmethod
    def full(cls, pairs: Iterable[tuple[int, int]]) -> "ControlSequence":
        return cls(tuple(ElementaryControl(i, j, 1) for i, j in pairs))


@dataclass(frozen=True)
class Trajectory:
    """Sampled path ``p(t)``; ``times[k]`` is non-decreasing."""

    times: tuple
    states: tuple
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValidationError("times and states differ in length")
        if any(b < a for a, b in zip(self.times, self.times[1:])):
            raise ValidationError("trajectory times must be non-decreasing")

    def __len__(self) -> int:
        return len(self.states)

    @property
    def final(self) -> Population:
        return self.states[-1]

    def reversed(self) -> "Trajectory":
        t_end = self.times[-1]
        times = tuple(t_end - t for t in reversed(self.times))
        return Trajectory(times, tuple(reversed(self.states)), dict(self.meta))


@dataclass(frozen=True)
class MtpGenerator:
    """Rate matrix with ``dp/dt = Q p``: columns sum to zero, ``Q gamma = 0``."""

    Q: np.ndarray = field(compare=False)

    def __eq__(self, other):
        return isinstance(other, MtpGenerator) and np.array_equal(self.Q, other.Q)

    def __hash__(self):
        return hash(self.Q.tobytes())


def _check_pair(ctx: GibbsContext, i: int, j: int) -> None:
    if i == j:
        raise ValidationError(f"need two distinct levels, got ({i}, {j})")
    if not (0 <= i < ctx.d and 0 <= j < ctx.d):
        raise ValidationError(f"level pair ({i}, {j}) out of range for d={ctx.d}")


def _full_raw(values: Sequence[Scalar], gamma: Sequence[Scalar], i: int, j: int) -> tuple:
    out = list(values)
    mass = values[i] + values[j]
    gi, gj = gamma[i], gamma[j]
    out[i] = mass * gi / (gi + gj)
    out[j] = mass - out[i]
    return tuple(out)


def _partial_raw(values: Sequence[Scalar], gamma: Sequence[Scalar], i: int, j: int, lam: Scalar) -> tuple:
    if lam == 1:
        return _full_raw(values, gamma, i, j)
    out = list(values)
    if lam == 0:
        return tuple(out)
    mass = values[i] + values[j]
    gi, gj = gamma[i], gamma[j]
    target_i = mass * gi / (gi + gj)
    out[i] = values[i] + lam * (target_i - values[i])
    out[j] = mass - out[i]
    return tuple(out)


def full_thermalize(p: Population, ctx: GibbsContext, i: int, j: int) -> Population:
    """Equilibrate levels ``i`` and ``j`` with each other, keeping their total mass."""
    p = coerce_population(p, ctx)
    _check_pair(ctx, i, j)
    return Population(_full_raw(p.values, ctx.gamma, i, j), ctx.mode)


def partial_thermalize(p: Population, ctx: GibbsContext, i: int, j: int, lam) -> Population:
    """Convex combination ``(1 - lam) p + lam T_ij p``."""
    p = coerce_population(p, ctx)
    _check_pair(ctx, i, j)
    lam = ctx.num(lam)
    if not 0 <= lam <= 1:
        raise ValidationError(f"lambda={lam} outside [0, 1]")
    return Population(_partial_raw(p.values, ctx.gamma, i, j, lam), ctx.mode)


def apply_sequence(
    p: Population,
    ctx: GibbsContext,
    seq: ControlSequence | Sequence[ElementaryControl],
    samples_per_step: int = 4,
) -> tuple[Population, Trajectory]:
    """Run ``seq`` from ``p`` and sample every step uniformly in ``lambda``.

    The time axis is a cumulative step clock: step ``k`` occupies ``[k, k+1]``
    and the sample at local fraction ``u`` has applied weight ``u * lam``.
    This is a monotone reparametrisation of physical time that stays finite
    for ``lam = 1`` steps.
    """
    p = coerce_population(p, ctx)
    if samples_per_step < 0:
        raise ValidationError("samples_per_step must be non-negative")
    zero, one = ctx.zero(), ctx.one()
    times = [zero]
    states = [p]
    current = p.values
    n = samples_per_step + 1
    for k, step in enumerate(seq):
        _check_pair(ctx, step.i, step.j)
        lam = ctx.num(step.lam)
        if not 0 <= lam <= 1:
            raise ValidationError(f"lambda={lam} outside [0, 1]")
        full = _full_raw(current, ctx.gamma, step.i, step.j)
        for m in range(1, n + 1):
            u = ctx.num(m) / n
            w = u * lam
            if m == n:
                nxt = _partial_raw(current, ctx.gamma, step.i, step.j, lam)
            else:
                nxt = tuple(c + w * (f - c) for c, f in zip(current, full))
            times.append(k + u if ctx.exact else k + float(u))
            states.append(Population(nxt, ctx.mode))
        current = states[-1].values
    return states[-1], Trajectory(tuple(times), tuple(states), {"clock": "step"})


def make_detailed_balance_generator(ctx: GibbsContext, seed=None, density: float = 1.0) -> MtpGenerator:
    """Random rate matrix obeying detailed balance with respect to ``gamma``.

    Each edge ``{i, j}`` in a random subset of ``round(density * C(d, 2))`` pairs
    gets a log-uniform symmetric strength ``k``; rates are ``Q_ij = k gamma_i``.
    """
    if not 0 <= density <= 1:
        raise ValidationError(f"density={density} outside [0, 1]")
    rng = np.random.default_rng(seed)
    d = ctx.d
    g = np.array([float(x) for x in ctx.gamma])
    pairs = [(i, j) for i in range(d) for j in range(i + 1, d)]
    n_edges = int(round(density * len(pairs)))
    chosen = rng.choice(len(pairs), size=n_edges, replace=False) if n_edges else []
    Q = np.zeros((d, d))
    for e in sorted(int(c) for c in chosen):
        i, j = pairs[e]
        k = 10.0 ** rng.uniform(-1.0, 1.0)
        Q[i, j] = k * g[i]
        Q[j, i] = k * g[j]
    Q -= np.diag(Q.sum(axis=0))
    return MtpGenerator(Q)


def evolve_generator(p: Population, gen: MtpGenerator | np.ndarray, t: float, ctx: GibbsContext) -> Population:
    """Apply ``expm(Q t)`` to ``p`` (Pade scaling-and-squaring)."""
    if t < 0:
        raise ValidationError(f"t={t} must be non-negative")
    p = coerce_population(p, ctx)
    Q = gen.Q if isinstance(gen, MtpGenerator) else np.asarray(gen, dtype=float)
    if t == 0:
        return p
    vec = np.array(p.as_floats())
    out = expm(Q * float(t)) @ vec
    return snap_population(out, ctx)


def sample_mtp_schedule(ctx: GibbsContext, seed=None, n_steps: int = 10) -> ControlSequence:
    """Uniformly random pairs with ``lam ~ U(0, 1)``; deterministic for a fixed seed.

    In rational mode each weight is rationalized to at most six digits.
    """
    if n_steps < 0:
        raise ValidationError("n_steps must be non-negative")
    rng = np.random.default_rng(seed)
    steps = []
    for _ in range(n_steps):
        i, j = (int(v) for v in rng.choice(ctx.d, size=2, replace=False))
        u = float(rng.uniform(0.0, 1.0))
        lam = rationalize(u, 1e-6) if ctx.exact and u > 0 else u
        steps.append(ElementaryControl(i, j, lam))
    return ControlSequence(tuple(steps))
