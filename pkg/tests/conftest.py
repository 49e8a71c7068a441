from __future__ import annotations

import sys

import numpy as np
import pytest

from topmanifold.climber import InitialFieldSpec, climb_samples, sample_initial_field
from topmanifold.models import fourlevel


@pytest.fixture(scope="session")
def preset4():
    return fourlevel()


@pytest.fixture(scope="session")
def optima4(preset4):
    """Two converged optima per landscape on the four-level system."""
    out = {}
    for kind in ("STL", "OCL", "UTL"):
        ls = preset4.landscape(kind)
        fields = []
        for seed in (101, 102):
            E0 = sample_initial_field(InitialFieldSpec(rng_seed=seed), preset4.grid)
            rep = climb_samples(ls, E0.samples)
            assert rep.converged
            fields.append(rep.field.samples)
        out[kind] = (ls, fields)
    return out


def random_field(rng, n_controls=1, L=50, scale=1.0):
    return scale * rng.standard_normal((n_controls, L))


ACCEPTANCE: list[str] = []


@pytest.fixture(scope="session")
def acceptance():
    """Record one pass/fail line per acceptance criterion and echo it immediately."""

    def record(criterion: str, passed: bool, detail: str) -> bool:
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}"
        ACCEPTANCE.append(line)
        sys.__stdout__.write("\n" + line + "\n")
        sys.__stdout__.flush()
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
