from __future__ import annotations

import numpy as np
import pytest
from scipy.stats import unitary_group

from topmanifold.core import ControlField, PropagationResult, QuantumSystem, ValidationError, propagate
from topmanifold.models import FOURLEVEL_H0, FOURLEVEL_MU, fourlevel, spin_operators, two_spin
from topmanifold.objectives import OCL, STL, UTL, Landscape, basis_state, gradient, value


def _final(U):
    return PropagationResult(U_traj=np.stack([np.eye(len(U)), U]), mu_traj=None, mu_avg=None, dt=1.0)


@pytest.fixture(scope="module")
def objs():
    return fourlevel().objectives


class TestValues:
    def test_utl_perfect(self, objs):
        assert value(objs["UTL"], _final(objs["UTL"].target)) == pytest.approx(1.0, abs=1e-15)

    def test_stl_orthogonal(self, objs):
        assert value(objs["STL"], _final(np.eye(4))) == 0.0

    def test_ocl_full_transfer(self, objs):
        P = np.eye(4)[[2, 3, 0, 1]]
        assert value(objs["OCL"], _final(P)) == pytest.approx(1.0, abs=1e-15)

    def test_ocl_saddle_value(self, objs):
        # exchange level 1 with level 3 only: half the population arrives
        P = np.eye(4)[[2, 1, 0, 3]]
        assert value(objs["OCL"], _final(P)) == pytest.approx(0.5, abs=1e-15)

    def test_utl_frobenius_identity(self, objs):
        W = objs["UTL"].target
        for seed in range(20):
            U = unitary_group.rvs(4, random_state=seed)
            J = value(objs["UTL"], _final(U))
            assert J == pytest.approx(1 - np.linalg.norm(W - U) ** 2 / 16, abs=1e-12)

    def test_range(self, objs):
        for seed in range(20):
            U = unitary_group.rvs(4, random_state=100 + seed)
            for obj in objs.values():
                assert -1e-12 <= value(obj, _final(U)) <= 1 + 1e-12

    def test_gauge_invariance(self, objs):
        U = unitary_group.rvs(4, random_state=3)
        stl = objs["STL"]
        shifted = STL(np.exp(0.7j) * stl.initial_state, np.exp(-1.1j) * stl.final_state)
        assert value(shifted, _final(U)) == pytest.approx(value(stl, _final(U)), abs=1e-14)
        assert value(objs["OCL"], _final(np.exp(0.3j) * U)) == pytest.approx(value(objs["OCL"], _final(U)), abs=1e-14)

    def test_dimension_mismatch(self, objs):
        with pytest.raises(ValidationError):
            value(objs["STL"], _final(np.eye(3)))


class TestValidation:
    def test_unnormalized_state(self):
        with pytest.raises(ValidationError):
            STL(np.array([1.0, 1.0]), basis_state(2, 0))

    def test_ocl_needs_density_matrix(self):
        with pytest.raises(ValidationError):
            OCL(np.diag([1.0, 1.0]), np.eye(2))
        with pytest.raises(ValidationError):
            OCL(np.diag([1.5, -0.5]), np.eye(2))

    def test_utl_needs_unitary(self):
        with pytest.raises(ValidationError):
            UTL(np.diag([1.0, 2.0]))


class TestKinematicCritical:
    def test_utl_gradient_vanishes_at_target(self, objs):
        obj = objs["UTL"]
        A, c = obj.costate(obj.target[None])
        rng = np.random.default_rng(0)
        X = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        X = X + X.conj().T
        assert abs(np.trace(A[0] @ X).imag) <= 1e-14

    def test_stl_gradient_vanishes_at_perfect_transfer(self, objs):
        obj = objs["STL"]
        U = np.eye(4)[[3, 1, 2, 0]].astype(complex)
        A, c = obj.costate(U[None])
        rng = np.random.default_rng(1)
        X = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        X = X + X.conj().T
        assert abs(np.trace(A[0] @ X).imag) <= 1e-14


def _fd_check(landscape, X, h=1e-6, idx=None):
    J, g = landscape.value_and_gradient(X)
    flat = np.ravel(X)
    idx = range(flat.size) if idx is None else idx
    fd = np.zeros(flat.size)
    for k in idx:
        e = np.zeros(flat.size)
        e[k] = h
        fd[k] = (landscape.value((flat + e).reshape(X.shape)) - landscape.value((flat - e).reshape(X.shape))) / (2 * h)
    return np.ravel(g)[list(idx)], fd[list(idx)]


class TestGradient:
    @pytest.mark.parametrize("kind", ["STL", "OCL", "UTL"])
    def test_finite_difference_short_grid(self, kind):
        p = fourlevel()
        ls = Landscape(p.system, p.objectives[kind], 10.0, 40)
        X = np.random.default_rng(5).standard_normal(ls.shape)
        g, fd = _fd_check(ls, X)
        np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-9)

    @pytest.mark.parametrize("kind", ["STL", "OCL", "UTL"])
    def test_multi_control_finite_difference(self, kind):
        p = two_spin()
        ls = Landscape(p.system, p.objectives[kind], 4.0, 20)
        X = np.random.default_rng(6).standard_normal(ls.shape)
        g, fd = _fd_check(ls, X)
        np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-9)

    def test_landscape_matches_propagation_result(self):
        p = fourlevel()
        ls = Landscape(p.system, p.objectives["OCL"], 10.0, 60)
        X = np.random.default_rng(7).standard_normal(ls.shape)
        prop = propagate(p.system, ControlField(X, 10.0))
        J, g = ls.value_and_gradient(X)
        assert J == pytest.approx(value(p.objectives["OCL"], prop), abs=1e-13)
        np.testing.assert_allclose(g, gradient(p.objectives["OCL"], prop), atol=1e-13)

    def test_pointwise_gradient_close_on_fine_grid(self):
        p = fourlevel()
        sys, obj = p.system, p.objectives["STL"]
        X = np.random.default_rng(8).standard_normal((1, 400)) * 0.3
        prop = propagate(sys, ControlField(X, 10.0))
        g_exact = gradient(obj, prop)
        g_left = gradient(obj, prop, pointwise=True)
        cos = np.sum(g_exact * g_left) / np.linalg.norm(g_exact) / np.linalg.norm(g_left)
        assert cos > 0.99

    def test_batch_matches_single(self):
        p = fourlevel()
        ls = Landscape(p.system, p.objectives["UTL"], 10.0, 30)
        X = np.random.default_rng(9).standard_normal((3,) + ls.shape)
        J, g = ls.value_and_gradient(X)
        for b in range(3):
            Jb, gb = ls.value_and_gradient(X[b])
            assert J[b] == pytest.approx(Jb, abs=1e-14)
            np.testing.assert_allclose(g[b], gb, atol=1e-14)
