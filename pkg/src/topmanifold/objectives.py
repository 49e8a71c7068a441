"""Landscape objectives (state transfer, observable, unitary gate) and their gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    ControlField,
    PropagationResult,
    QuantumSystem,
    ValidationError,
    is_hermitian,
    eigenbasis_dipoles,
    factorize,
    propagate_final,
    step_average_kernel,
)


def _dag(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


class Objective:
    """Base for objectives that depend on the final propagator only.

    Subclasses provide ``value_U`` and ``costate``.  For a batch of final
    propagators ``U`` of shape ``(B, N, N)``, ``costate(U)`` returns ``(A, c)``
    such that the functional derivative is ``c * Im tr[A mu(t)]``.
    """

    kind: str = ""
    dim: int = 0

    def value_U(self, U: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def costate(self, U: np.ndarray) -> tuple[np.ndarray, float]:
        raise NotImplementedError

    def check_dim(self, dim: int):
        if dim != self.dim:
            raise ValidationError(f"objective is {self.dim}-dimensional, system is {dim}-dimensional")


def _unit(vec, name: str) -> np.ndarray:
    v = np.array(vec, dtype=complex).ravel()
    if abs(np.vdot(v, v).real - 1.0) > 1e-12:
        raise ValidationError(f"{name} must be normalized")
    return v


def basis_state(dim: int, index: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


@dataclass(frozen=True, eq=False)
class STL(Objective):
    """Transition probability ``|<f|U(T)|i>|^2``."""

    initial_state: np.ndarray
    final_state: np.ndarray
    kind = "STL"

    def __post_init__(self):
        i = _unit(self.initial_state, "initial_state")
        f = _unit(self.final_state, "final_state")
        if i.shape != f.shape:
            raise ValidationError("initial and final states differ in dimension")
        object.__setattr__(self, "initial_state", i)
        object.__setattr__(self, "final_state", f)

    @property
    def dim(self) -> int:
        return self.initial_state.shape[0]

    def value_U(self, U):
        amp = np.einsum("i,...ij,j->...", self.final_state.conj(), U, self.initial_state)
        return np.abs(amp) ** 2

    def costate(self, U):
        Pf = np.outer(self.final_state, self.final_state.conj())
        Pi = np.outer(self.initial_state, self.initial_state.conj())
        return _dag(U) @ Pf @ U @ Pi, 2.0


@dataclass(frozen=True, eq=False)
class OCL(Objective):
    """Observable expectation ``tr[U rho0 U^† theta]``."""

    rho0: np.ndarray
    theta: np.ndarray
    kind = "OCL"

    def __post_init__(self):
        rho = np.array(self.rho0, dtype=complex)
        theta = np.array(self.theta, dtype=complex)
        if rho.shape != theta.shape or rho.ndim != 2:
            raise ValidationError("rho0 and theta must be square matrices of equal size")
        if not is_hermitian(rho) or not is_hermitian(theta):
            raise ValidationError("rho0 and theta must be Hermitian")
        if abs(np.trace(rho).real - 1.0) > 1e-12 or np.linalg.eigvalsh(rho).min() < -1e-12:
            raise ValidationError("rho0 must be a density matrix")
        object.__setattr__(self, "rho0", rho)
        object.__setattr__(self, "theta", theta)

    @property
    def dim(self) -> int:
        return self.rho0.shape[0]

    def value_U(self, U):
        return np.einsum("...ij,jk,...lk,li->...", U, self.rho0, U.conj(), self.theta).real

    def costate(self, U):
        return _dag(U) @ self.theta @ U @ self.rho0, 2.0


@dataclass(frozen=True, eq=False)
class UTL(Objective):
    """Gate fidelity ``1/2 + Re tr(W^† U(T)) / (2N)``."""

    target: np.ndarray
    kind = "UTL"

    def __post_init__(self):
        W = np.array(self.target, dtype=complex)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValidationError("target must be a square matrix")
        if np.linalg.norm(W.conj().T @ W - np.eye(W.shape[0])) > 1e-10:
            raise ValidationError("target must be unitary")
        object.__setattr__(self, "target", W)

    @property
    def dim(self) -> int:
        return self.target.shape[0]

    def value_U(self, U):
        N = self.dim
        return 0.5 + np.einsum("ij,...ij->...", self.target.conj(), U).real / (2 * N)

    def costate(self, U):
        return self.target.conj().T @ U, -1.0 / (2 * self.dim)


def value(obj: Objective, prop: PropagationResult) -> float:
    obj.check_dim(prop.dim)
    return float(obj.value_U(prop.U_final))


def _gradient_from(obj, U_final, mu_ops, dt):
    """``mu_ops`` has shape ``(B, C, L, N, N)``; result ``(B, C, L)``."""
    A, c = obj.costate(U_final)
    # tr[A mu] = sum_ij A_ij mu_ji
    tr = np.einsum("bij,bckji->bck", A, mu_ops)
    return c * tr.imag * dt


def gradient(obj: Objective, prop: PropagationResult, pointwise: bool = False) -> np.ndarray:
    """Discrete gradient ``dJ/dE[c, k]`` (includes the ``dt`` factor).

    By default each entry integrates the functional derivative exactly over
    its step, which is the true gradient of the discretized objective.
    ``pointwise=True`` samples the functional derivative at ``t_k`` instead.
    """
    obj.check_dim(prop.dim)
    mu = prop.mu_traj if pointwise else prop.mu_avg
    return _gradient_from(obj, prop.U_final[None], mu[None], prop.dt)[0]


class Landscape:
    """An objective over the control fields of a system on a fixed grid.

    All methods accept raw sample arrays, ``(C, L)`` or a batch ``(B, C, L)``.
    """

    def __init__(self, system: QuantumSystem, objective: Objective, duration: float, n_steps: int):
        objective.check_dim(system.dim)
        self.system = system
        self.objective = objective
        self.duration = float(duration)
        self.n_steps = int(n_steps)
        self.n_evals = 0

    @property
    def dt(self) -> float:
        return self.duration / self.n_steps

    @property
    def shape(self) -> tuple[int, int]:
        return (self.system.n_controls, self.n_steps)

    def field(self, samples) -> ControlField:
        return ControlField(np.asarray(samples).reshape(self.shape), self.duration)

    def value(self, samples):
        samples = np.asarray(samples, dtype=float)
        single = samples.ndim == 2
        batch = samples[None] if single else samples
        U = propagate_final(self.system, batch, self.dt)
        J = self.objective.value_U(U)
        return float(J[0]) if single else J

    def value_and_gradient(self, samples):
        samples = np.asarray(samples, dtype=float)
        single = samples.ndim == 2
        batch = samples[None] if single else samples
        w, V, U_traj = factorize(self.system, batch, self.dt)
        self.n_evals += batch.shape[0]
        U = U_traj[:, -1]
        J = self.objective.value_U(U)
        A, c = self.objective.costate(U)
        # tr[A mu_avg_k] = tr[(R A R^†) (M o Phi)] with R = V^† U(t_k)
        R = V.conj().swapaxes(-1, -2) @ U_traj[:, :-1]
        RAR = R @ A[:, None] @ R.conj().swapaxes(-1, -2)
        M = eigenbasis_dipoles(self.system, V) * step_average_kernel(w, self.dt)[:, None]
        tr = (RAR.swapaxes(-1, -2)[:, None] * M).sum(axis=(-1, -2))
        g = c * tr.imag * self.dt
        if single:
            return float(J[0]), g[0]
        return J, g

    def gradient(self, samples):
        return self.value_and_gradient(samples)[1]
