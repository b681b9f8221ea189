"""Numeric backends and validated domain types.

Two arithmetic modes are supported.  ``"rational"`` stores every number as a
:class:`fractions.Fraction` and compares exactly; ``"float"`` stores Python
floats and compares with an absolute tolerance ``tol`` (default ``1e-9``).
The mode is a property of a :class:`GibbsContext` and every population built
against that context inherits it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational, Real
from typing import Iterable, Iterator, Sequence, Union

RATIONAL = "rational"
FLOAT = "float"
MODES = (RATIONAL, FLOAT)

DEFAULT_TOL = 1e-9
DEFAULT_REL_TOL = 1e-15

Scalar = Union[Fraction, float]
NumberLike = Union[Scalar, int, str]


class ThermoReachError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(ThermoReachError, ValueError):
    """Input violates a documented precondition."""


class ModeMismatchError(ThermoReachError, ValueError):
    """Objects from different arithmetic modes or contexts were combined."""


def rationalize(x: Real, rel_tol: float = DEFAULT_REL_TOL) -> Fraction:
    """Return the first continued-fraction convergent of ``x`` within ``rel_tol``.

    Convergent denominators grow monotonically, so the first convergent that
    satisfies ``|h/k - x| <= rel_tol * x`` has the smallest denominator among
    all convergents that do.

    >>> rationalize(0.5)
    Fraction(1, 2)
    >>> rationalize(0.333333333333333, 1e-12)
    Fraction(1, 3)
    """
    if not x > 0:
        raise ValidationError(f"rationalize requires x > 0, got {x!r}")
    if not rel_tol > 0:
        raise ValidationError(f"rationalize requires rel_tol > 0, got {rel_tol!r}")
    exact = Fraction(x)
    bound = exact * Fraction(rel_tol)
    num, den = exact.numerator, exact.denominator
    h_prev, h = 0, 1
    k_prev, k = 1, 0
    while den:
        a, rem = divmod(num, den)
        h_prev, h = h, a * h + h_prev
        k_prev, k = k, a * k + k_prev
        candidate = Fraction(h, k)
        if abs(candidate - exact) <= bound:
            return candidate
        num, den = den, rem
    return exact


def to_fraction(value: NumberLike) -> Fraction:
    """Convert user input to an exact rational.

    Strings such as ``"1/3"`` or ``"0.25"`` are parsed exactly.  Floats are
    read through their shortest decimal representation, so ``0.1`` becomes
    ``1/10`` rather than its binary expansion.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ValidationError("booleans are not numbers here")
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValidationError(f"cannot parse rational {value!r}") from exc
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValidationError(f"non-finite value {value!r}")
        return Fraction(repr(value))
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return Fraction(int(value[0]), int(value[1]))
    try:
        return to_fraction(float(value))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"cannot interpret {value!r} as a number") from exc


def to_float(value: NumberLike) -> float:
    if isinstance(value, str):
        return float(to_fraction(value))
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return int(value[0]) / int(value[1])
    return float(value)


@dataclass(frozen=True)
class GibbsContext:
    """Thermal fixed point ``gamma`` together with its arithmetic mode.

    ``energies`` and ``beta`` are optional: a context may be given by its
    thermal distribution alone (e.g. ``[1/2, 1/3, 1/6]``), in which case
    energy-dependent quantities such as the heat current are unavailable.
    Energies of composite systems need not be sorted.
    """

    gamma: tuple
    mode: str = RATIONAL
    energies: tuple | None = None
    beta: float | None = None
    tol: float = DEFAULT_TOL
    rel_tol: float | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"unknown arithmetic mode {self.mode!r}")
        if len(self.gamma) < 2:
            raise ValidationError("a context needs at least two levels")
        if self.energies is not None and len(self.energies) != len(self.gamma):
            raise ValidationError("energies and gamma differ in length")
        kind = Fraction if self.mode == RATIONAL else float
        if not all(isinstance(g, kind) for g in self.gamma):
            raise ModeMismatchError(f"gamma entries must all be {kind.__name__} in {self.mode} mode")
        if any(g <= 0 for g in self.gamma):
            raise ValidationError("gamma entries must be strictly positive")
        total = sum(self.gamma)
        if self.mode == RATIONAL and total != 1:
            raise ValidationError(f"gamma sums to {total}, not exactly 1")
        if self.mode == FLOAT and abs(total - 1.0) > self.tol:
            raise ValidationError(f"gamma sums to {total}, not 1 within {self.tol}")

    @property
    def d(self) -> int:
        return len(self.gamma)

    @property
    def exact(self) -> bool:
        return self.mode == RATIONAL

    @property
    def gamma_min(self) -> Scalar:
        return min(self.gamma)

    # Scalar helpers -------------------------------------------------------
    def num(self, value: NumberLike) -> Scalar:
        """Coerce ``value`` into this context's scalar type."""
        return to_fraction(value) if self.exact else to_float(value)

    def zero(self) -> Scalar:
        return Fraction(0) if self.exact else 0.0

    def one(self) -> Scalar:
        return Fraction(1) if self.exact else 1.0

    def le(self, a: Scalar, b: Scalar) -> bool:
        return a <= b if self.exact else a <= b + self.tol

    def lt(self, a: Scalar, b: Scalar) -> bool:
        return a < b if self.exact else a < b - self.tol

    def eq(self, a: Scalar, b: Scalar) -> bool:
        return a == b if self.exact else abs(a - b) <= self.tol

    def check(self, p: "Population") -> "Population":
        """Raise unless ``p`` belongs to this context's mode and dimension."""
        if not isinstance(p, Population):
            raise ValidationError(f"expected a Population, got {type(p).__name__}")
        if p.mode != self.mode:
            raise ModeMismatchError(f"population is {p.mode}, context is {self.mode}")
        if len(p) != self.d:
            raise ValidationError(f"population has {len(p)} levels, context has {self.d}")
        return p

    def population(self, values: Iterable[NumberLike]) -> "Population":
        return validate_population(list(values), self)

    def thermal(self) -> "Population":
        return Population(tuple(self.gamma), self.mode)

    def with_mode(self, mode: str) -> "GibbsContext":
        """Same physical context converted to another arithmetic mode."""
        if mode == self.mode:
            return self
        if mode == FLOAT:
            gamma = tuple(float(g) for g in self.gamma)
        else:
            gamma = _exact_normalise([rationalize(g, self.rel_tol or DEFAULT_REL_TOL) for g in self.gamma])
        return GibbsContext(gamma, mode, self.energies, self.beta, self.tol, self.rel_tol)


@dataclass(frozen=True)
class Population:
    """A probability vector over the ``d`` levels of a context."""

    values: tuple
    mode: str = field(default=RATIONAL)

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self) -> Iterator[Scalar]:
        return iter(self.values)

    def __getitem__(self, k):
        return self.values[k]

    def as_floats(self) -> list[float]:
        return [float(v) for v in self.values]

    def __repr__(self) -> str:
        inner = ", ".join(str(v) for v in self.values)
        return f"Population([{inner}], {self.mode})"


def _exact_normalise(weights: Sequence[Fraction]) -> tuple:
    total = sum(weights)
    return tuple(w / total for w in weights)


def make_gibbs_context(
    energies: Sequence[float],
    beta: float,
    mode: str = RATIONAL,
    *,
    tol: float = DEFAULT_TOL,
    rel_tol: float = DEFAULT_REL_TOL,
    require_ascending: bool = True,
) -> GibbsContext:
    """Build the Gibbs distribution ``exp(-beta E_i) / Z``.

    In rational mode every Boltzmann weight is rationalized with ``rel_tol``
    and then normalised exactly, so downstream comparisons are exact.
    ``require_ascending=False`` is used for composite systems whose natural
    tensor ordering is not sorted by energy.
    """
    energies = tuple(float(e) for e in energies)
    if len(energies) < 2:
        raise ValidationError("need at least two energy levels")
    if require_ascending and any(b < a for a, b in zip(energies, energies[1:])):
        raise ValidationError(f"energies must be ascending, got {energies}")
    if beta < 0:
        raise ValidationError(f"beta must be non-negative, got {beta}")
    e0 = min(energies)
    weights = [math.exp(-beta * (e - e0)) for e in energies]
    if mode == RATIONAL:
        gamma = _exact_normalise([rationalize(w, rel_tol) for w in weights])
    elif mode == FLOAT:
        z = math.fsum(weights)
        gamma = tuple(w / z for w in weights)
    else:
        raise ValidationError(f"unknown arithmetic mode {mode!r}")
    return GibbsContext(gamma, mode, energies, float(beta), tol, rel_tol if mode == RATIONAL else None)


def context_from_gamma(
    gamma: Sequence[NumberLike],
    mode: str = RATIONAL,
    *,
    energies: Sequence[float] | None = None,
    beta: float | None = None,
    tol: float = DEFAULT_TOL,
) -> GibbsContext:
    """Accept a thermal distribution verbatim (e.g. ``["1/2", "1/3", "1/6"]``)."""
    if mode == RATIONAL:
        values = tuple(to_fraction(g) for g in gamma)
    elif mode == FLOAT:
        values = tuple(to_float(g) for g in gamma)
    else:
        raise ValidationError(f"unknown arithmetic mode {mode!r}")
    en = tuple(float(e) for e in energies) if energies is not None else None
    return GibbsContext(values, mode, en, None if beta is None else float(beta), tol)


def product_context(first: GibbsContext, second: GibbsContext) -> GibbsContext:
    """Composite context with ``second`` as the fast (last) index."""
    if first.mode != second.mode:
        raise ModeMismatchError("cannot combine contexts of different modes")
    gamma = tuple(a * b for a in first.gamma for b in second.gamma)
    if first.mode == FLOAT:
        s = math.fsum(gamma)
        gamma = tuple(g / s for g in gamma)
    energies = None
    if first.energies is not None and second.energies is not None:
        energies = tuple(a + b for a in first.energies for b in second.energies)
    beta = first.beta if first.beta == second.beta else None
    return GibbsContext(gamma, first.mode, energies, beta, min(first.tol, second.tol), first.rel_tol)


def product_population(p: Population, q: Population) -> Population:
    if p.mode != q.mode:
        raise ModeMismatchError("cannot combine populations of different modes")
    return Population(tuple(a * b for a in p for b in q), p.mode)


def validate_population(values: Sequence[NumberLike] | Population, ctx: GibbsContext) -> Population:
    """Check and coerce ``values`` into a :class:`Population` of ``ctx``.

    Float mode clamps entries in ``[-tol, tol]`` to zero and renormalises.
    """
    if isinstance(values, Population):
        if values.mode != ctx.mode:
            raise ModeMismatchError(f"population is {values.mode}, context is {ctx.mode}")
        values = values.values
    values = list(values)
    if len(values) != ctx.d:
        raise ValidationError(f"expected {ctx.d} entries, got {len(values)}")
    if ctx.exact:
        p = [to_fraction(v) for v in values]
        neg = [v for v in p if v < 0]
        if neg:
            raise ValidationError(f"negative population entry {neg[0]}")
        total = sum(p)
        if total != 1:
            raise ValidationError(f"populations sum to {total} ({float(total):.12g}), not 1")
        return Population(tuple(p), RATIONAL)
    p = [to_float(v) for v in values]
    if any(not math.isfinite(v) for v in p):
        raise ValidationError("non-finite population entry")
    low = min(p)
    if low < -ctx.tol:
        raise ValidationError(f"negative population entry {low}")
    total = math.fsum(p)
    if abs(total - 1.0) > ctx.tol:
        raise ValidationError(f"populations sum to {total}, not 1")
    p = [0.0 if v <= ctx.tol else v for v in p]
    total = math.fsum(p)
    return Population(tuple(v / total for v in p), FLOAT)


def coerce_population(values, ctx: GibbsContext) -> Population:
    """Like :func:`validate_population` but passes matching Populations through."""
    if isinstance(values, Population) and values.mode == ctx.mode and len(values) == ctx.d:
        return values
    return validate_population(values, ctx)


def snap_population(values: Sequence[float], ctx: GibbsContext) -> Population:
    """Convert float output of a numerical routine into ``ctx``'s mode.

    In rational mode each entry is rationalized and the residual of the sum is
    absorbed by the largest entry so that the result sums to exactly one.
    """
    vals = [max(float(v), 0.0) for v in values]
    total = math.fsum(vals)
    vals = [v / total for v in vals]
    if not ctx.exact:
        return Population(tuple(vals), FLOAT)
    fr = [Fraction(v).limit_denominator(10**15) if v > 0 else Fraction(0) for v in vals]
    k = max(range(len(fr)), key=lambda i: fr[i])
    fr[k] += 1 - sum(fr)
    return Population(tuple(fr), RATIONAL)
