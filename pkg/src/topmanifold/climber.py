"""Random initial fields and gradient-flow ascent to the top of the landscape."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ControlField, QuantumSystem, ValidationError, distance, norm
from .objectives import Landscape, Objective

G_FLOOR = 1e-8
MAX_EVALS = 100_000


@dataclass(frozen=True)
class InitialFieldSpec:
    """Random superposition of cosines, rescaled to a fixed fluence.

    When ``log10_fluence_range`` is set the target fluence is drawn per field
    with ``log10(F0)`` uniform on that range instead of using ``target_fluence``.
    """

    n_components: int = 100
    amplitude_range: tuple[float, float] = (0.0, 1.0)
    phase_range: tuple[float, float] = (0.0, 2 * np.pi)
    frequency_range: tuple[float, float] = (0.5, 5.5)
    target_fluence: float = 1.0
    log10_fluence_range: tuple[float, float] | None = None
    rng_seed: int | Sequence[int] | None = 0

    def __post_init__(self):
        if self.n_components < 1:
            raise ValidationError("need at least one frequency component")
        lo, hi = self.frequency_range
        if not lo < hi:
            raise ValidationError("frequency range must satisfy lo < hi")
        if not self.target_fluence > 0:
            raise ValidationError("target fluence must be positive")


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_initial_field(
    spec: InitialFieldSpec, grid: tuple[float, int, int], rng: np.random.Generator | None = None
) -> ControlField:
    """Draw ``E(t) = A sum_m a_m cos(w_m t + phi_m)`` independently per control.

    ``grid`` is ``(T, L, n_controls)``.  ``A`` is chosen so that the total
    fluence equals the target.
    """
    T, L, n_controls = grid
    rng = _rng(spec.rng_seed) if rng is None else rng
    t = np.arange(L) * (T / L)
    samples = np.empty((n_controls, L))
    for c in range(n_controls):
        a = rng.uniform(*spec.amplitude_range, size=spec.n_components)
        phi = rng.uniform(*spec.phase_range, size=spec.n_components)
        w = rng.uniform(*spec.frequency_range, size=spec.n_components)
        samples[c] = a @ np.cos(np.outer(w, t) + phi[:, None])
    if spec.log10_fluence_range is not None:
        F0 = 10.0 ** rng.uniform(*spec.log10_fluence_range)
    else:
        F0 = spec.target_fluence
    F = np.sum(samples**2) * (T / L)
    samples *= np.sqrt(F0 / F)
    return ControlField(samples, T)


@dataclass
class ClimbReport:
    field: ControlField
    J_history: list[float]
    s_history: list[float]
    converged: bool
    iterations: int
    n_evals: int
    reason: str = ""

    @property
    def s_max(self) -> float:
        return self.s_history[-1]

    @property
    def J(self) -> float:
        return self.J_history[-1]

    def to_dict(self, max_points: int = 1000) -> dict:
        idx = np.unique(np.linspace(0, len(self.J_history) - 1, min(max_points, len(self.J_history))).astype(int))
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "n_evals": self.n_evals,
            "s_max": self.s_max,
            "J_final": self.J,
            "fluence_final": float(np.sum(self.field.samples**2) * self.field.dt),
            "reason": self.reason,
            "s_history": [self.s_history[i] for i in idx],
            "J_history": [self.J_history[i] for i in idx],
        }


# Dormand-Prince 5(4) tableau
_DP_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_DP_E = _DP_B - np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


class AscentFlow:
    """Normalized gradient flow ``dE/ds = g / max(||g||, g_floor)``.

    ``g`` is the functional derivative, i.e. the discrete gradient divided by
    ``dt``, so ``||dE/ds||_2 = 1`` in the field metric away from critical points.
    """

    def __init__(self, landscape: Landscape, g_floor: float = G_FLOOR):
        self.landscape = landscape
        self.g_floor = g_floor
        self.n_evals = 0
        self.last_norm = None

    def __call__(self, E: np.ndarray):
        J, g = self.landscape.value_and_gradient(E)
        self.n_evals += 1 if np.ndim(E) == 2 else len(E)
        dt = self.landscape.dt
        d = g / dt
        if np.ndim(E) == 2:
            self.last_norm = norm(d, dt)
            return J, d / max(self.last_norm, self.g_floor)
        n = np.sqrt(np.sum(d**2, axis=(-1, -2)) * dt)
        self.last_norm = n
        return J, d / np.maximum(n, self.g_floor)[:, None, None]


def climb_samples(
    landscape: Landscape,
    E0: np.ndarray,
    epsilon: float = 1e-3,
    max_s: float = 1e3,
    rtol: float = 1e-6,
    atol: float = 1e-9,
    h0: float = 0.05,
    max_evals: int = MAX_EVALS,
    J_target: float | None = None,
) -> ClimbReport:
    """Integrate the ascent flow with adaptive Dormand-Prince steps.

    Stops once ``J >= J_target`` (default ``1 - epsilon``).  A step that
    lowers ``J`` is rejected like one that fails the error test, which keeps
    the recorded history monotone.
    """
    if not 0 < epsilon < 0.5:
        raise ValidationError(f"epsilon must lie in (0, 0.5), got {epsilon}")
    target = 1.0 - epsilon if J_target is None else J_target
    flow = AscentFlow(landscape)
    dt = landscape.dt
    E = np.array(E0, dtype=float).reshape(landscape.shape)
    J, k1 = flow(E)
    s = 0.0
    Js, ss = [J], [s]
    h = h0
    iterations = 0
    reason = ""
    while J < target:
        if s >= max_s:
            reason = "max_s"
            break
        if flow.n_evals >= max_evals:
            reason = "max_evals"
            break
        h = min(h, max_s - s)
        ks = [k1]
        for i in range(1, 7):
            Ei = E + h * sum(a * k for a, k in zip(_DP_A[i], ks))
            Ji, ki = flow(Ei)
            ks.append(ki)
        E_new = Ei  # stage 7 sits at the 5th-order solution (FSAL)
        J_new, k_new = Ji, ks[-1]
        err_vec = h * sum(e * k for e, k in zip(_DP_E, ks) if e != 0.0)
        scale = atol + rtol * max(norm(E, dt), norm(E_new, dt))
        err = norm(err_vec, dt) / scale
        if err <= 1.0 and J_new >= J - 1e-12:
            E, J, k1 = E_new, J_new, k_new
            s += h
            iterations += 1
            Js.append(J)
            ss.append(s)
            fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            h *= fac
        else:
            h *= max(0.1, 0.9 * err ** -0.25) if err > 1.0 else 0.5
            if h < 1e-12:
                reason = "step_underflow"
                break
    converged = J >= target
    return ClimbReport(
        field=landscape.field(E),
        J_history=Js,
        s_history=ss,
        converged=bool(converged),
        iterations=iterations,
        n_evals=flow.n_evals,
        reason="" if converged else reason,
    )


def climb(
    system: QuantumSystem,
    objective: Objective,
    field0: ControlField,
    epsilon: float = 1e-3,
    max_s: float = 1e3,
    **kwargs,
) -> ClimbReport:
    """Drive ``field0`` up the landscape until ``J >= 1 - epsilon``."""
    landscape = Landscape(system, objective, field0.duration, field0.n_steps)
    return climb_samples(landscape, field0.samples, epsilon=epsilon, max_s=max_s, **kwargs)


def pairwise_distances(pool: Sequence[ControlField]) -> list[float]:
    """All ``||E_i - E_j||_2`` for ``i < j``."""
    if len(pool) < 2:
        raise ValidationError("need at least two fields")
    return [distance(a, b) for a, b in itertools.combinations(pool, 2)]
