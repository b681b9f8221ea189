from __future__ import annotations

from fractions import Fraction as F

import numpy as np
import pytest

from thermoreach.core import context_from_gamma, make_gibbs_context, snap_population


@pytest.fixture
def tri():
    """Three-level context with gamma = (1/2, 1/3, 1/6)."""
    return context_from_gamma([F(1, 2), F(1, 3), F(1, 6)])


@pytest.fixture
def seg2():
    return context_from_gamma([F(2, 3), F(1, 3)])


def random_context(rng, d: int, mode: str = "rational"):
    energies = np.sort(rng.uniform(0.0, 2.0, size=d))
    energies[0] = 0.0
    return make_gibbs_context(list(energies), float(rng.uniform(0.2, 2.0)), mode)


def random_population(rng, ctx, sparse: bool = False):
    x = rng.dirichlet(np.ones(ctx.d))
    if sparse:
        x[rng.random(ctx.d) < 0.3] = 0.0
        if x.sum() == 0:
            x[0] = 1.0
        x = x / x.sum()
    return snap_population(x, ctx)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
