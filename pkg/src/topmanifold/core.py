"""Control fields, quantum systems and piecewise-constant propagation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-12


class ValidationError(ValueError):
    """Raised when a field, system or objective violates its invariants."""


def _as_samples(samples) -> np.ndarray:
    arr = np.array(samples, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValidationError(f"field samples must be 1-D or 2-D, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class ControlField:
    """Real control field(s) on a uniform grid of ``L`` steps over ``[0, T]``.

    ``samples[c, k]`` is the amplitude of control ``c`` on ``[t_k, t_{k+1})``.
    """

    samples: np.ndarray
    duration: float

    def __post_init__(self):
        arr = _as_samples(self.samples)
        if arr.shape[1] < 2:
            raise ValidationError("a control field needs at least 2 time steps")
        if not self.duration > 0:
            raise ValidationError(f"duration must be positive, got {self.duration}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("field samples must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "duration", float(self.duration))

    @property
    def n_controls(self) -> int:
        return self.samples.shape[0]

    @property
    def n_steps(self) -> int:
        return self.samples.shape[1]

    @property
    def dt(self) -> float:
        return self.duration / self.n_steps

    @property
    def times(self) -> np.ndarray:
        """Left grid points ``t_k = k * dt``, ``k = 0..L-1``."""
        return np.arange(self.n_steps) * self.dt

    def like(self, samples) -> "ControlField":
        """A new field on the same grid."""
        return ControlField(np.asarray(samples, dtype=float).reshape(self.samples.shape), self.duration)

    def compatible(self, other: "ControlField") -> bool:
        return self.samples.shape == other.samples.shape and np.isclose(self.duration, other.duration, rtol=1e-14)

    @classmethod
    def zeros(cls, duration: float, n_steps: int, n_controls: int = 1) -> "ControlField":
        return cls(np.zeros((n_controls, n_steps)), duration)


def inner(a: np.ndarray, b: np.ndarray, dt: float) -> float:
    """Discrete L2 inner product ``sum(a * b) * dt``."""
    return float(np.vdot(np.ravel(a), np.ravel(b)).real * dt)


def norm(a: np.ndarray, dt: float) -> float:
    return float(np.sqrt(max(inner(a, a, dt), 0.0)))


def fluence(field: ControlField) -> float:
    """Field fluence, ``sum_c sum_k E[c, k]**2 * dt``."""
    return inner(field.samples, field.samples, field.dt)


def distance(a: ControlField, b: ControlField) -> float:
    if not a.compatible(b):
        raise ValidationError("fields live on different grids")
    return norm(a.samples - b.samples, a.dt)


def is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.linalg.norm(m - m.conj().T) <= tol)


@dataclass(frozen=True)
class QuantumSystem:
    """Drift Hamiltonian ``H0`` with control operators; ``H(t) = H0 - sum_c dipoles[c] * E_c(t)``."""

    H0: np.ndarray
    dipoles: tuple = field(default_factory=tuple)

    def __post_init__(self):
        H0 = np.array(self.H0, dtype=complex)
        if isinstance(self.dipoles, np.ndarray) and self.dipoles.ndim == 2:
            dipoles = [self.dipoles]
        else:
            dipoles = list(self.dipoles)
        mus = [np.array(m, dtype=complex) for m in dipoles]
        if H0.ndim != 2 or H0.shape[0] != H0.shape[1]:
            raise ValidationError(f"H0 must be square, got shape {H0.shape}")
        if not mus:
            raise ValidationError("a system needs at least one control operator")
        if not is_hermitian(H0):
            raise ValidationError("H0 is not Hermitian")
        for c, mu in enumerate(mus):
            if mu.shape != H0.shape:
                raise ValidationError(f"dipole {c} has shape {mu.shape}, expected {H0.shape}")
            if not is_hermitian(mu):
                raise ValidationError(f"dipole {c} is not Hermitian")
        H0.setflags(write=False)
        stack = np.stack(mus)
        stack.setflags(write=False)
        object.__setattr__(self, "H0", H0)
        object.__setattr__(self, "dipoles", tuple(stack))
        object.__setattr__(self, "_dipole_stack", stack)

    @property
    def dim(self) -> int:
        return self.H0.shape[0]

    @property
    def n_controls(self) -> int:
        return len(self.dipoles)

    @property
    def dipole_stack(self) -> np.ndarray:
        return self._dipole_stack

    @property
    def is_real(self) -> bool:
        return not (np.any(self.H0.imag) or np.any(self._dipole_stack.imag))


@dataclass(frozen=True)
class PropagationResult:
    """Stored propagator trajectory.

    ``mu_traj[c, k]`` is ``U(t_k)^† mu_c U(t_k)`` at the left grid point and
    ``mu_avg[c, k]`` is the same operator averaged exactly over step ``k``;
    the latter makes gradients exact for the piecewise-constant field.
    """

    U_traj: np.ndarray
    mu_traj: np.ndarray | None
    mu_avg: np.ndarray | None
    dt: float

    @property
    def U_final(self) -> np.ndarray:
        return self.U_traj[-1]

    @property
    def dim(self) -> int:
        return self.U_traj.shape[-1]


def _check_compatible(system: QuantumSystem, samples: np.ndarray):
    if samples.shape[-2] != system.n_controls:
        raise ValidationError(
            f"field has {samples.shape[-2]} controls, system has {system.n_controls}"
        )
    if not np.all(np.isfinite(samples)):
        raise ValidationError("field samples must be finite")


def _step_eig(system: QuantumSystem, samples: np.ndarray):
    """Eigendecompose every step generator; ``samples`` has shape ``(B, C, L)``."""
    H0, mus = system.H0, system.dipole_stack
    if system.is_real:
        # real symmetric generators diagonalize about a third faster
        H0, mus = H0.real, mus.real
    gen = H0[None, None] - np.einsum("bck,cij->bkij", samples, mus)
    return np.linalg.eigh(gen)


def _chain(steps: np.ndarray) -> np.ndarray:
    """Left-multiply step propagators ``(B, L, N, N)`` into ``(B, L+1, N, N)``.

    Blocked prefix product: running products inside blocks of ~sqrt(L) steps
    are formed for all blocks at once, then the block totals are chained.
    """
    B, L, N, _ = steps.shape
    b = max(1, int(np.ceil(np.sqrt(L))))
    nb = -(-L // b)
    pad = nb * b - L
    if pad:
        steps = np.concatenate([steps, np.broadcast_to(np.eye(N, dtype=complex), (B, pad, N, N))], axis=1)
    blocks = steps.reshape(B, nb, b, N, N)
    local = np.empty_like(blocks)
    local[:, :, 0] = blocks[:, :, 0]
    for j in range(1, b):
        local[:, :, j] = blocks[:, :, j] @ local[:, :, j - 1]
    starts = np.empty((B, nb, N, N), dtype=complex)
    starts[:, 0] = np.eye(N)
    for i in range(1, nb):
        starts[:, i] = local[:, i - 1, -1] @ starts[:, i - 1]
    out = np.empty((B, L + 1, N, N), dtype=complex)
    out[:, 0] = np.eye(N)
    out[:, 1:] = (local @ starts[:, :, None]).reshape(B, nb * b, N, N)[:, :L]
    return out


def propagate_final(system: QuantumSystem, samples: np.ndarray, dt: float) -> np.ndarray:
    """Final propagators for a batch ``(B, C, L)`` of fields, shape ``(B, N, N)``."""
    samples = np.asarray(samples, dtype=float)
    _check_compatible(system, samples)
    w, V = _step_eig(system, samples)
    steps = (V * np.exp(-1j * w * dt)[..., None, :]) @ V.conj().swapaxes(-1, -2)
    B, L = steps.shape[:2]
    # pairwise tree product; step k+1 acts after step k, so later steps go on the left
    while L > 1:
        if L % 2:
            tail = steps[:, -1:]
            steps = steps[:, :-1]
        else:
            tail = None
        steps = steps[:, 1::2] @ steps[:, 0::2]
        if tail is not None:
            steps = np.concatenate([steps, tail], axis=1)
        L = steps.shape[1]
    return steps[:, 0]


def factorize(system: QuantumSystem, samples: np.ndarray, dt: float):
    """Eigendecomposed step generators and the propagator trajectory.

    Returns ``(w, V, U_traj)``: eigenvalues ``(B, L, N)``, eigenvectors
    ``(B, L, N, N)`` and ``U(t_0..t_L)`` as ``(B, L+1, N, N)``.
    """
    samples = np.asarray(samples, dtype=float)
    _check_compatible(system, samples)
    w, V = _step_eig(system, samples)
    steps = (V * np.exp(-1j * w * dt)[..., None, :]) @ V.conj().swapaxes(-1, -2)
    return w, V, _chain(steps)


def step_average_kernel(w: np.ndarray, dt: float) -> np.ndarray:
    """``Phi[a, b] = (exp(i x) - 1) / (i x)`` with ``x = (w_a - w_b) dt``.

    Averaging ``exp(i H tau) X exp(-i H tau)`` over one step multiplies ``X``
    entrywise by ``Phi`` in the eigenbasis of ``H``.
    """
    x = (w[..., :, None] - w[..., None, :]) * dt
    small = np.abs(x) < 1e-8
    x_safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 + 0.5j * x, (np.exp(1j * x_safe) - 1.0) / (1j * x_safe))


def eigenbasis_dipoles(system: QuantumSystem, V: np.ndarray) -> np.ndarray:
    """``V^† mu_c V`` for every step, shape ``(B, C, L, N, N)``."""
    Vh = V.conj().swapaxes(-1, -2)
    return (Vh[:, None] @ system.dipole_stack[None, :, None]) @ V[:, None]


def propagate_batch(system: QuantumSystem, samples: np.ndarray, dt: float, with_pointwise: bool = True):
    """Propagate a batch of fields ``(B, C, L)``.

    Returns ``(U_traj, mu_avg, mu_traj)`` with shapes ``(B, L+1, N, N)`` and
    ``(B, C, L, N, N)``; ``mu_traj`` is ``None`` unless ``with_pointwise``.
    """
    w, V, U_traj = factorize(system, samples, dt)
    U_left = U_traj[:, :-1]
    # R = V^† U_k maps the lab frame at t_k into the step eigenbasis
    R = V.conj().swapaxes(-1, -2) @ U_left
    Rh = R.conj().swapaxes(-1, -2)
    M = eigenbasis_dipoles(system, V) * step_average_kernel(w, dt)[:, None]
    mu_avg = Rh[:, None] @ M @ R[:, None]
    if not with_pointwise:
        return U_traj, mu_avg, None
    Uh = U_left.conj().swapaxes(-1, -2)
    mu_traj = Uh[:, None] @ system.dipole_stack[None, :, None] @ U_left[:, None]
    return U_traj, mu_avg, mu_traj


def propagate(system: QuantumSystem, field: ControlField) -> PropagationResult:
    """Solve ``dU/dt = -i (H0 - sum_c mu_c E_c(t)) U`` with ``U(0) = I``.

    Each step uses the exact exponential of the Hermitian step generator.
    """
    if field.n_controls != system.n_controls:
        raise ValidationError(
            f"field has {field.n_controls} controls, system has {system.n_controls}"
        )
    U_traj, mu_avg, mu_traj = propagate_batch(system, field.samples[None], field.dt)
    return PropagationResult(U_traj=U_traj[0], mu_traj=mu_traj[0], mu_avg=mu_avg[0], dt=field.dt)


def propagate_reference(system: QuantumSystem, field: ControlField, substeps: int = 100) -> np.ndarray:
    """Final propagator from a fine-step integration used as a convergence reference.

    Each piecewise-constant step is split into ``substeps`` fourth-order
    Runge-Kutta steps of the Schrödinger equation.
    """
    h = field.dt / substeps
    U = np.eye(system.dim, dtype=complex)
    for k in range(field.n_steps):
        H = system.H0 - np.tensordot(field.samples[:, k], system.dipole_stack, axes=1)
        A = -1j * h * H
        # RK4 for a constant generator is the 4th-order Taylor polynomial of exp(A)
        A2 = A @ A
        P = np.eye(system.dim) + A + A2 / 2 + A2 @ A / 6 + A2 @ A2 / 24
        step = np.linalg.matrix_power(P, substeps)
        U = step @ U
    return U


def unitarity_error(U: np.ndarray) -> float:
    return float(np.linalg.norm(U.conj().T @ U - np.eye(U.shape[0])))


def two_level_system() -> QuantumSystem:
    """Field-free degenerate qubit driven by ``sigma_x``; its propagator is known in closed form."""
    return QuantumSystem(np.zeros((2, 2)), [np.array([[0, 1], [1, 0]])])


def analytic_two_level(field: ControlField) -> np.ndarray:
    """Closed-form ``U(T)`` for :func:`two_level_system`."""
    if field.n_controls != 1:
        raise ValidationError("the two-level closed form takes a single control")
    phi = float(np.sum(field.samples[0]) * field.dt)
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, 1j * s], [1j * s, c]])


def stack_samples(fields: Sequence[ControlField]) -> np.ndarray:
    return np.stack([f.samples for f in fields])
