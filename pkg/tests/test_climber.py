from __future__ import annotations

import numpy as np
import pytest

from topmanifold.climber import (
    AscentFlow,
    InitialFieldSpec,
    climb,
    climb_samples,
    pairwise_distances,
    sample_initial_field,
)
from topmanifold.core import ControlField, ValidationError, fluence, norm


def test_initial_field_unit_fluence(preset4):
    for seed in range(5):
        f = sample_initial_field(InitialFieldSpec(rng_seed=seed), preset4.grid)
        assert fluence(f) == pytest.approx(1.0, abs=1e-12)


def test_initial_field_deterministic(preset4):
    a = sample_initial_field(InitialFieldSpec(rng_seed=4), preset4.grid)
    b = sample_initial_field(InitialFieldSpec(rng_seed=4), preset4.grid)
    np.testing.assert_array_equal(a.samples, b.samples)


def test_log_fluence_range(preset4):
    spec = InitialFieldSpec(log10_fluence_range=(-2.0, 2.0))
    F = [fluence(sample_initial_field(spec, preset4.grid, np.random.default_rng(s))) for s in range(30)]
    assert 0.01 <= min(F) and max(F) <= 100


def test_spec_validation():
    with pytest.raises(ValidationError):
        InitialFieldSpec(frequency_range=(3.0, 1.0))
    with pytest.raises(ValidationError):
        InitialFieldSpec(target_fluence=0.0)


def test_flow_is_unit_speed(preset4):
    ls = preset4.landscape("STL")
    E = sample_initial_field(InitialFieldSpec(rng_seed=1), preset4.grid).samples
    J, d = AscentFlow(ls)(E)
    assert norm(d, ls.dt) == pytest.approx(1.0, abs=1e-12)
    assert J == pytest.approx(ls.value(E), abs=1e-14)


@pytest.mark.parametrize("kind", ["STL", "OCL", "UTL"])
def test_climb_converges_monotonically(preset4, kind):
    ls = preset4.landscape(kind)
    E0 = sample_initial_field(InitialFieldSpec(rng_seed=2), preset4.grid)
    rep = climb(preset4.system, preset4.objectives[kind], E0)
    assert rep.converged and rep.J >= 0.999
    assert ls.value(rep.field.samples) == pytest.approx(rep.J, abs=1e-12)
    assert np.all(np.diff(rep.J_history) >= -1e-12)
    assert np.all(np.diff(rep.s_history) > 0)
    d = rep.to_dict(max_points=5)
    assert len(d["J_history"]) <= 5 and d["converged"]


def test_climb_respects_budget(preset4):
    ls = preset4.landscape("STL")
    E0 = sample_initial_field(InitialFieldSpec(rng_seed=3), preset4.grid)
    rep = climb_samples(ls, E0.samples, max_s=0.05)
    assert not rep.converged and rep.reason == "max_s"
    assert rep.s_max <= 0.05 + 1e-12


def test_climb_rejects_bad_epsilon(preset4):
    with pytest.raises(ValidationError):
        climb_samples(preset4.landscape("STL"), np.zeros(preset4.landscape("STL").shape), epsilon=0.0)


def test_pairwise_distances():
    fs = [ControlField(np.full((1, 4), v), 4.0) for v in (0.0, 1.0, 3.0)]
    np.testing.assert_allclose(pairwise_distances(fs), [2.0, 6.0, 4.0])
    with pytest.raises(ValidationError):
        pairwise_distances(fs[:1])
