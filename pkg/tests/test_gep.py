from __future__ import annotations

import math
from fractions import Fraction as F

import numpy as np
import pytest

from thermoreach.core import FLOAT, ValidationError, make_gibbs_context, validate_population
from thermoreach.gep import (
    MissingEnergiesError,
    absolute,
    entropy_production_series,
    h_divergence,
    renyi,
    shannon,
    standard_families,
    tsallis,
    vacancy,
    verify_monotone,
)
from thermoreach.majorization import sigma_a
from thermoreach.thermalization import (
    ControlSequence,
    Trajectory,
    apply_sequence,
    evolve_generator,
    make_detailed_balance_generator,
    sample_mtp_schedule,
)

from conftest import random_context, random_population


def test_values_at_thermal(tri):
    g = tri.thermal()
    for fam in (shannon(), vacancy(), renyi(2.0), renyi(-1.0), renyi(0.5), tsallis(0.5), tsallis(2.0)):
        assert h_divergence(g, tri, fam) == pytest.approx(0.0, abs=1e-14)


def test_renyi_two_relative(seg2):
    p = validate_population(["1/2", "1/2"], seg2)
    assert h_divergence(p, seg2, renyi(2.0)) == pytest.approx(-math.log(9 / 8), abs=1e-14)


def test_absolute_matches_sigma(tri):
    rng = np.random.default_rng(1)
    for _ in range(50):
        p = random_population(rng, tri)
        a = F(int(rng.integers(0, 1000)), 1000)
        assert h_divergence(p, tri, absolute(a)) == sigma_a(p, tri, a)


def test_unbounded_values(tri):
    p = validate_population([1, 0, 0], tri)
    assert h_divergence(p, tri, vacancy()) == -math.inf
    assert h_divergence(p, tri, renyi(-1.0)) == -math.inf


def test_family_validation():
    with pytest.raises(ValidationError):
        renyi(1.0)
    with pytest.raises(ValidationError):
        tsallis(1.0)


def test_unsigned_renyi_negative_alpha_not_monotone(tri):
    # without the sgn(alpha) factor the alpha < 0 branch increases under relaxation
    p = validate_population(["1/10", "3/5", "3/10"], tri)
    q = apply_sequence(p, tri, ControlSequence.full([(0, 1)]), 0)[0]
    signed = renyi(-1.0)
    unsigned = renyi(-1.0, signed=False)
    assert h_divergence(q, tri, signed) >= h_divergence(p, tri, signed)
    assert h_divergence(q, tri, unsigned) < h_divergence(p, tri, unsigned)


def test_constant_trajectory(tri):
    p = validate_population(["1/10", "3/5", "3/10"], tri)
    traj = Trajectory((0, 1, 2), (p, p, p))
    assert verify_monotone(traj, tri).ok


def test_relaxation_and_reversal(tri):
    p = validate_population(["1/10", "3/5", "3/10"], tri)
    _, traj = apply_sequence(p, tri, ControlSequence.full([(0, 1), (1, 2)]), 3)
    assert verify_monotone(traj, tri).ok
    rep = verify_monotone(traj.reversed(), tri)
    assert not rep.ok
    assert {f for _, f, _ in rep.violations} >= {"absolute", "shannon"}
    assert rep.worst_violation > 0


def test_random_sequences_monotone():
    rng = np.random.default_rng(12)
    for k in range(60):
        ctx = random_context(rng, int(rng.integers(3, 6)), "rational" if k % 3 == 0 else FLOAT)
        p = random_population(rng, ctx, sparse=True)
        seq = sample_mtp_schedule(ctx, k, int(rng.integers(1, 21)))
        _, traj = apply_sequence(p, ctx, seq, 3)
        rep = verify_monotone(traj, ctx, standard_families(), 1e-9)
        assert rep.ok, rep.violations[:3]


def test_entropy_production_relaxation():
    ctx = make_gibbs_context([0.0, math.log(2)], 1.0, FLOAT)  # gamma = (2/3, 1/3)
    g = np.array(ctx.gamma)
    Q = np.outer(g, np.ones(2)) - np.eye(2)
    from thermoreach.thermalization import MtpGenerator

    p0 = validate_population([1.0, 0.0], ctx)
    ts = np.linspace(0.05, 3.0, 200)
    states = [evolve_generator(p0, MtpGenerator(Q), float(t), ctx) for t in ts]
    traj = Trajectory(tuple(float(t) for t in ts), tuple(states))
    series = entropy_production_series(traj, ctx)
    assert all(v > 0 for _, v in series)
    # closed form: p1(t) = (1 - e^-t)/3, sigma = dp1/dt * log((p0/p1) * (g1/g0))
    for t, v in [s for s in series[1:-1] if s[0] > 0.3]:
        p1 = (1 - math.exp(-t)) / 3
        exact = math.exp(-t) / 3 * math.log((1 - p1) / p1 * 0.5)
        assert v == pytest.approx(exact, rel=2e-3, abs=1e-6)
    rev = entropy_production_series(traj.reversed(), ctx)
    assert all(v < 0 for _, v in rev)
    eq = Trajectory((0.0, 1.0, 2.0), (ctx.thermal(),) * 3)
    assert all(v == pytest.approx(0.0, abs=1e-15) for _, v in entropy_production_series(eq, ctx))


def test_entropy_production_needs_energies(tri):
    traj = Trajectory((0, 1, 2), (tri.thermal(),) * 3)
    with pytest.raises(MissingEnergiesError):
        entropy_production_series(traj, tri)


def test_generator_trajectory_monotone(tri):
    ctx = tri.with_mode(FLOAT)
    p = validate_population([0.05, 0.15, 0.8], ctx)
    gen = make_detailed_balance_generator(ctx, 5)
    ts = [0.1 * k for k in range(30)]
    traj = Trajectory(tuple(ts), tuple(evolve_generator(p, gen, t, ctx) for t in ts))
    assert verify_monotone(traj, ctx).ok
