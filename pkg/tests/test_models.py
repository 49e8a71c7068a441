from __future__ import annotations

import numpy as np
import pytest

from topmanifold.core import ValidationError, is_hermitian
from topmanifold.models import (
    expi_hermitian,
    fivelevel_random_signs,
    load_preset,
    random_traceless_hermitian,
    spin_operators,
)


def test_fourlevel_matrices():
    p = load_preset("fourlevel")
    np.testing.assert_array_equal(np.diag(p.system.H0).real, [-2.25, -0.75, 0.25, 2.75])
    mu = p.system.dipoles[0].real
    assert mu[0, 3] == 0.25 and mu[0, 1] == 1.0 and mu[1, 3] == 0.5
    assert (p.duration, p.n_steps) == (50.0, 500)
    assert p.init_spec.frequency_range == (0.5, 5.5)
    W = p.objectives["UTL"].target
    np.testing.assert_allclose(W * np.exp(1j * np.pi / 4), np.eye(4)[[0, 1, 3, 2]], atol=1e-15)


def test_two_spin_drift():
    p = load_preset("two_spin")
    ops = spin_operators()
    np.testing.assert_allclose(p.system.H0, 2 * np.pi * ops["Iz"] @ ops["Sz"], atol=1e-15)
    assert p.system.n_controls == 4
    assert (p.duration, p.init_spec.frequency_range) == (20.0, (2.5, 3.5))


def test_spin_operators_commutation():
    ops = spin_operators()
    comm = ops["Ix"] @ ops["Iy"] - ops["Iy"] @ ops["Ix"]
    np.testing.assert_allclose(comm, 1j * ops["Iz"], atol=1e-15)
    np.testing.assert_allclose(ops["Ix"] @ ops["Sx"], ops["Sx"] @ ops["Ix"], atol=1e-15)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_fivelevel_dipole_structure(seed):
    p = fivelevel_random_signs(seed)
    mu = p.system.dipoles[0].real
    np.testing.assert_array_equal(mu, mu.T)
    off = np.abs(np.subtract.outer(np.arange(5), np.arange(5))) != 1
    assert np.all(mu[off] == 0)
    assert set(np.abs(np.diag(mu, 1))) == {1.0}
    W = p.objectives["UTL"].target
    assert np.linalg.norm(W.conj().T @ W - np.eye(5)) <= 1e-12


def test_preset_determinism():
    a, b = fivelevel_random_signs(3), fivelevel_random_signs(3)
    np.testing.assert_array_equal(a.system.dipoles[0], b.system.dipoles[0])
    np.testing.assert_array_equal(a.objectives["UTL"].target, b.objectives["UTL"].target)


@pytest.mark.parametrize("N", [2, 5, 8])
def test_random_traceless_hermitian(N):
    G = random_traceless_hermitian(N, 11)
    np.testing.assert_array_equal(G + G.conj().T, 2 * G)
    assert abs(np.trace(G)) <= 1e-14
    assert is_hermitian(G)
    W = expi_hermitian(G)
    assert np.linalg.norm(W.conj().T @ W - np.eye(N)) <= 1e-12


def test_unknown_preset():
    with pytest.raises(ValidationError):
        load_preset("sixlevel")


def test_missing_landscape():
    with pytest.raises(ValidationError):
        load_preset("fourlevel").landscape("XYZ")
