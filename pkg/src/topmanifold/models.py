"""Benchmark systems and their objectives as named presets."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .climber import InitialFieldSpec
from .core import QuantumSystem, ValidationError
from .objectives import OCL, STL, UTL, Landscape, Objective, basis_state

LANDSCAPES = ("STL", "OCL", "UTL")


@dataclass(frozen=True)
class Preset:
    name: str
    system: QuantumSystem
    objectives: dict[str, Objective]
    duration: float
    n_steps: int
    init_spec: InitialFieldSpec = field(default_factory=InitialFieldSpec)

    @property
    def grid(self) -> tuple[float, int, int]:
        return (self.duration, self.n_steps, self.system.n_controls)

    def landscape(self, kind: str) -> Landscape:
        try:
            obj = self.objectives[kind.upper()]
        except KeyError:
            raise ValidationError(f"preset {self.name!r} has no {kind} objective") from None
        return Landscape(self.system, obj, self.duration, self.n_steps)


def random_traceless_hermitian(N: int, seed) -> np.ndarray:
    """Hermitian ``N x N`` matrix with zero trace from seeded normal entries."""
    if N < 2:
        raise ValidationError("N must be at least 2")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    G = (X + X.conj().T) / 2
    G -= np.trace(G).real / N * np.eye(N)
    # enforce exact Hermiticity after the shift
    return (G + G.conj().T) / 2


def expi_hermitian(G: np.ndarray) -> np.ndarray:
    """``exp(i G)`` for Hermitian ``G`` through its eigendecomposition."""
    w, V = np.linalg.eigh(G)
    return (V * np.exp(1j * w)) @ V.conj().T


FOURLEVEL_H0 = np.diag([-2.25, -0.75, 0.25, 2.75])
FOURLEVEL_MU = np.array(
    [
        [0.0, 1.0, 0.5, 0.25],
        [1.0, 0.0, 1.0, 0.5],
        [0.5, 1.0, 0.0, 1.0],
        [0.25, 0.5, 1.0, 0.0],
    ]
)


def fourlevel() -> Preset:
    swap34 = np.eye(4)[[0, 1, 3, 2]]
    objectives = {
        "STL": STL(basis_state(4, 0), basis_state(4, 3)),
        "OCL": OCL(np.diag([0.5, 0.5, 0, 0]), np.diag([0, 0, 1.0, 1.0])),
        "UTL": UTL(np.exp(-1j * np.pi / 4) * swap34),
    }
    return Preset(
        name="fourlevel",
        system=QuantumSystem(FOURLEVEL_H0, [FOURLEVEL_MU]),
        objectives=objectives,
        duration=50.0,
        n_steps=500,
        init_spec=InitialFieldSpec(frequency_range=(0.5, 5.5)),
    )


def fivelevel_random_signs(seed: int = 0) -> Preset:
    """Five levels with nearest-neighbour couplings of seeded sign."""
    rng = np.random.default_rng([5, seed])
    signs = rng.choice([-1.0, 1.0], size=4)
    mu = np.diag(signs, 1) + np.diag(signs, -1)
    G = random_traceless_hermitian(5, [55, seed])
    objectives = {
        "STL": STL(basis_state(5, 0), basis_state(5, 4)),
        "OCL": OCL(np.diag([0.5, 0.5, 0, 0, 0]), np.diag([0, 0, 0, 1.0, 1.0])),
        "UTL": UTL(expi_hermitian(G)),
    }
    return Preset(
        name="fivelevel_random_signs",
        system=QuantumSystem(np.diag([-8.0, -6.0, -2.0, 4.0, 12.0]), [mu]),
        objectives=objectives,
        duration=50.0,
        n_steps=500,
        init_spec=InitialFieldSpec(frequency_range=(1.0, 9.0)),
    )


_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]]),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def spin_operators() -> dict[str, np.ndarray]:
    """``I_j = sigma_j/2 (x) 1`` and ``S_j = 1 (x) sigma_j/2``."""
    eye = np.eye(2)
    ops = {}
    for j, s in _PAULI.items():
        ops["I" + j] = np.kron(s / 2, eye)
        ops["S" + j] = np.kron(eye, s / 2)
    return ops


def two_spin(J_IS: float = 1.0) -> Preset:
    """Coupled spins with four local controls ``(u_x^I, u_y^I, u_x^S, u_y^S)``.

    The control terms enter as ``+u * op``; with the ``H0 - mu E`` convention
    each control operator is stored as ``-op``.
    """
    ops = spin_operators()
    H0 = 2 * np.pi * J_IS * ops["Iz"] @ ops["Sz"]
    dipoles = [-ops[k] for k in ("Ix", "Iy", "Sx", "Sy")]
    cnot = np.eye(4)[[0, 1, 3, 2]]
    objectives = {
        "STL": STL(basis_state(4, 0), basis_state(4, 3)),
        "OCL": OCL(np.diag([0.5, 0.5, 0, 0]), np.diag([0, 0, 1.0, 1.0])),
        "UTL": UTL(np.exp(-1j * np.pi / 4) * cnot),
    }
    return Preset(
        name="two_spin",
        system=QuantumSystem(H0, dipoles),
        objectives=objectives,
        duration=20.0,
        n_steps=500,
        init_spec=InitialFieldSpec(frequency_range=(2.5, 3.5)),
    )


PRESETS = {
    "fourlevel": fourlevel,
    "fivelevel_random_signs": fivelevel_random_signs,
    "fivelevel": fivelevel_random_signs,
    "two_spin": two_spin,
}


def load_preset(name: str, seed: int | None = None) -> Preset:
    """Look up a preset; ``seed`` only affects ``fivelevel_random_signs``."""
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ValidationError(f"unknown preset {name!r}; known: {sorted(PRESETS)}") from None
    if factory is fivelevel_random_signs:
        return factory(0 if seed is None else seed)
    return factory()
