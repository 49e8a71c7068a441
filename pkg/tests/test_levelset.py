from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from topmanifold.climber import climb_samples
from topmanifold.core import inner, norm, two_level_system
from topmanifold.levelset import (
    DegenerateProjectorError,
    LevelSetParams,
    connect_samples,
    explore_samples,
    project_out_gradient,
    walk_far_samples,
)
from topmanifold.core import ValidationError
from topmanifold.objectives import STL, Landscape, basis_state

vec = arrays(np.float64, (2, 16), elements=st.floats(-10, 10, allow_nan=False))


def _projector(g, dt):
    return lambda f: project_out_gradient(g, f, dt)


@settings(max_examples=60, deadline=None)
@given(vec, vec, st.floats(0.01, 2.0))
def test_projection_orthogonal_to_gradient(g, f, dt):
    if norm(g, dt) < 1e-3:
        return
    v = project_out_gradient(g, f, dt)
    assert abs(inner(v, g, dt)) <= 1e-9 * max(1.0, norm(f, dt) * norm(g, dt))


@settings(max_examples=60, deadline=None)
@given(vec, vec, st.floats(0.01, 2.0))
def test_projection_idempotent(g, f, dt):
    if norm(g, dt) < 1e-3:
        return
    v = project_out_gradient(g, f, dt)
    np.testing.assert_allclose(project_out_gradient(g, v, dt), v, atol=1e-9 * max(1.0, norm(f, dt)))


@settings(max_examples=40, deadline=None)
@given(vec, vec, vec, st.floats(0.01, 2.0))
def test_projection_self_adjoint(g, a, b, dt):
    if norm(g, dt) < 1e-3:
        return
    lhs = inner(project_out_gradient(g, a, dt), b, dt)
    rhs = inner(a, project_out_gradient(g, b, dt), dt)
    assert abs(lhs - rhs) <= 1e-8 * max(1.0, norm(a, dt) * norm(b, dt))


def test_projection_of_gradient_is_zero():
    g = np.random.default_rng(0).standard_normal((1, 10))
    np.testing.assert_allclose(project_out_gradient(g, 3 * g, 0.1), 0, atol=1e-12)


def test_zero_gradient_is_degenerate():
    with pytest.raises(DegenerateProjectorError):
        project_out_gradient(np.zeros((1, 5)), np.ones((1, 5)), 0.1)


def test_params_validation():
    with pytest.raises(ValidationError):
        LevelSetParams(step=0.0)


def test_connect_reaches_target(optima4):
    ls, (a, b) = optima4["UTL"]
    p = LevelSetParams()
    rep = connect_samples(ls, a, b, p)
    assert rep.outcome == "reached_target"
    assert rep.level_steps_monotone()
    assert rep.J_min_recorded >= 1 - p.epsilon - p.eps_dm
    assert max(rep.J_values) <= 1 + 1e-12
    assert rep.R >= 1 - 1e-12
    np.testing.assert_array_equal(rep.path[0], a)
    np.testing.assert_array_equal(rep.final, b)


def test_connect_to_itself(optima4):
    ls, (a, _) = optima4["STL"]
    rep = connect_samples(ls, a, a)
    assert rep.outcome == "reached_target" and rep.path_length == 0.0


def test_connect_rejects_low_target(optima4, preset4):
    ls, (a, _) = optima4["STL"]
    with pytest.raises(ValidationError):
        connect_samples(ls, a, np.zeros(ls.shape))


def test_short_far_walk_moves_outward(optima4):
    ls, (a, _) = optima4["OCL"]
    p = LevelSetParams(budget=150, seed=3)
    rep = walk_far_samples(ls, a, p)
    assert rep.outcome == "budget_exhausted"
    assert rep.level_steps_monotone(increasing=True)
    assert rep.J_min_recorded >= 1 - p.epsilon - p.eps_dm
    assert rep.d_E > 0.5


def test_short_exploration(optima4):
    ls, (a, _) = optima4["STL"]
    rep = explore_samples(ls, a, window=0.5, n_max=4, params=LevelSetParams(seed=1))
    assert rep.outcome == "completed" and len(rep.windows) == 4
    for w in rep.windows:
        assert not w["trapped"]
        assert w["d_P"] == pytest.approx(0.5, rel=0.2)
        assert 1 - 1e-12 <= w["R"] <= 1.2


def test_exploration_reproducible(optima4):
    ls, (a, _) = optima4["UTL"]
    r1 = explore_samples(ls, a, window=0.2, n_max=2, params=LevelSetParams(seed=9))
    r2 = explore_samples(ls, a, window=0.2, n_max=2, params=LevelSetParams(seed=9))
    np.testing.assert_array_equal(r1.final, r2.final)


def test_long_exploration_ignores_rounding_in_s():
    # after ~10^4 steps the accumulated s is off by more than 1e-12 but less than min_step
    ls = Landscape(two_level_system(), STL(basis_state(2, 0), basis_state(2, 1)), 5.0, 20)
    a = climb_samples(ls, np.random.default_rng(0).standard_normal((1, 20)), epsilon=1e-3).field.samples
    rep = explore_samples(ls, a, window=2.0, n_max=80, params=LevelSetParams(seed=3))
    assert rep.outcome == "completed"
    assert not any(w["trapped"] for w in rep.windows)
