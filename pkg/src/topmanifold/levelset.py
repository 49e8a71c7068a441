"""Motion inside the level set ``J = const`` near the top of the landscape.

Every step moves along ``[1 - P] f``, the guiding function ``f`` with its
component along the gradient removed.  Steps that lose too much ``J`` are
halved; when the accumulated drift exceeds ``eps_dm`` the field is pushed
back up by gradient ascent before moving on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .climber import climb_samples
from .core import ControlField, QuantumSystem, ValidationError, inner, norm
from .objectives import Landscape, Objective


class DegenerateProjectorError(ValidationError):
    """The gradient vanishes, so no direction is singled out for removal."""


def project_out_gradient(grad: np.ndarray, f: np.ndarray, dt: float = 1.0) -> np.ndarray:
    """``f - (<grad, f> / <grad, grad>) grad`` under the ``dt``-weighted inner product."""
    grad = np.asarray(grad, dtype=float)
    f = np.asarray(f, dtype=float)
    if grad.shape != f.shape:
        raise ValidationError(f"shape mismatch {grad.shape} vs {f.shape}")
    gg = inner(grad, grad, dt)
    if not gg > 0:
        raise DegenerateProjectorError("gradient is zero")
    return f - (inner(grad, f, dt) / gg) * grad


def random_direction(shape, dt: float, rng: np.random.Generator) -> np.ndarray:
    """White-noise field scaled to unit L2 norm."""
    v = rng.standard_normal(shape)
    return v / norm(v, dt)


@dataclass
class LevelSetParams:
    epsilon: float = 1e-3
    eps_dm: float = 1e-3
    tau1: float = 1e-4
    tau2: float | None = None
    tau2_rel: float = 1e-2
    tau2_floor: float = 1e-3
    step: float = 1e-2
    min_step: float = 1e-7
    budget: int = 20_000
    fluence_cap: float = 1e3
    record_every: int = 1
    seed: int | None = 0

    def __post_init__(self):
        for name in ("epsilon", "eps_dm", "tau1", "step"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")


@dataclass
class ConnectReport:
    """Outcome of one level-set run.

    ``D_history[k]`` is the monitored squared distance after event ``k`` and
    ``step_kinds[k]`` says whether that event was a level-set step
    (``"level"``) or a re-ascent (``"recover"``).  ``path`` holds every
    ``record_every``-th field plus the endpoints; ``path_length`` is the exact
    chord sum over all steps taken.
    """

    outcome: str
    path: list[np.ndarray]
    s_values: list[float]
    J_values: list[float]
    D_history: list[float]
    step_kinds: list[str]
    path_length: float
    d_E: float
    n_falloffs: int = 0
    n_rejections: int = 0
    near_target: bool = False
    J_min_recorded: float = 1.0
    dt: float = 1.0
    windows: list[dict] = field(default_factory=list)

    @property
    def R(self) -> float:
        if self.d_E <= 0:
            return 1.0
        return self.path_length / self.d_E

    @property
    def s(self) -> float:
        return self.s_values[-1]

    @property
    def final(self) -> np.ndarray:
        return self.path[-1]

    def level_steps_monotone(self, increasing: bool = False, slack: float = 1e-9) -> bool:
        D = self.D_history
        for k in range(1, len(D)):
            if self.step_kinds[k] != "level":
                continue
            if increasing and D[k] < D[k - 1] - slack:
                return False
            if not increasing and D[k] > D[k - 1] + slack:
                return False
        return True

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "R": self.R,
            "path_length": self.path_length,
            "d_E": self.d_E,
            "s": self.s,
            "n_falloffs": self.n_falloffs,
            "n_rejections": self.n_rejections,
            "near_target": self.near_target,
            "J_min": self.J_min_recorded,
            "n_recorded": len(self.path),
            "D_history": list(map(float, self.D_history)),
            "step_kinds": list(self.step_kinds),
            "windows": self.windows,
        }


class _LevelSetRun:
    """Shared stepping machinery for the connect, far-walk and random modes."""

    def __init__(self, landscape: Landscape, E0: np.ndarray, params: LevelSetParams):
        self.ls = landscape
        self.p = params
        self.dt = landscape.dt
        self.E = np.array(E0, dtype=float).reshape(landscape.shape)
        self.J, self.g = landscape.value_and_gradient(self.E)
        if self.J < 1 - params.epsilon:
            raise ValidationError(f"start field has J = {self.J:.6g}, below the top manifold 1 - {params.epsilon}")
        self.J_ref = self.J
        self.J_floor = 1 - params.epsilon - params.eps_dm
        self.s = 0.0
        self.length = 0.0
        self.n_steps = 0
        self.n_falloffs = 0
        self.n_rejections = 0
        self.J_min = self.J
        self.path = [self.E.copy()]
        self.s_values = [0.0]
        self.J_values = [self.J]
        self.D_history: list[float] = []
        self.step_kinds: list[str] = []
        self.last_direction_norm = np.inf

    def record(self, force: bool = False):
        if force or self.n_steps % self.p.record_every == 0:
            if not (self.path and self.path[-1] is self.E):
                self.path.append(self.E.copy())
                self.s_values.append(self.s)
                self.J_values.append(self.J)

    def direction(self, f: np.ndarray) -> np.ndarray | None:
        """Projected guiding direction, or ``None`` at an exact critical point."""
        try:
            v = project_out_gradient(self.g, f, self.dt)
        except DegenerateProjectorError:
            v = np.array(f, dtype=float)
        self.last_direction_norm = norm(v, self.dt)
        return v

    def step(self, v: np.ndarray, h: float, accept=None) -> bool:
        """Try ``E + h v`` with halving; ``accept(E_new)`` may veto a trial."""
        while h >= self.p.min_step:
            E_new = self.E + h * v
            J_new, g_new = self.ls.value_and_gradient(E_new)
            ok = self.J - J_new <= self.p.eps_dm / 10 and J_new >= self.J_floor
            if ok and (accept is None or accept(E_new)):
                self.length += h * norm(v, self.dt)
                self.E, self.J, self.g = E_new, J_new, g_new
                self.s += h
                self.n_steps += 1
                self.J_min = min(self.J_min, J_new)
                return True
            self.n_rejections += 1
            h /= 2
        return False

    def recover_if_fallen(self) -> bool:
        if self.J >= self.J_ref - self.p.eps_dm:
            return False
        rep = climb_samples(self.ls, self.E, epsilon=self.p.epsilon)
        E_new = rep.field.samples
        # unit-speed ascent flow: its arc length is the elapsed s
        self.length += rep.s_max
        self.E = np.array(E_new)
        self.J, self.g = self.ls.value_and_gradient(self.E)
        self.n_falloffs += 1
        self.record(force=True)
        return True

    def report(self, outcome: str, d_E: float, **extra) -> ConnectReport:
        self.record(force=True)
        return ConnectReport(
            outcome=outcome,
            path=self.path,
            s_values=self.s_values,
            J_values=self.J_values,
            D_history=self.D_history,
            step_kinds=self.step_kinds,
            path_length=self.length,
            d_E=d_E,
            n_falloffs=self.n_falloffs,
            n_rejections=self.n_rejections,
            J_min_recorded=self.J_min,
            dt=self.dt,
            **extra,
        )


def connect_samples(landscape: Landscape, E_start, E_target, params: LevelSetParams | None = None) -> ConnectReport:
    """Move from ``E_start`` toward ``E_target`` inside the level set.

    The guiding function is the unit vector toward the target, so the squared
    distance ``D`` never grows along level-set steps.
    """
    p = params or LevelSetParams()
    E_target = np.array(E_target, dtype=float).reshape(landscape.shape)
    J_target = landscape.value(E_target)
    if J_target < 1 - p.epsilon:
        raise ValidationError(f"target field has J = {J_target:.6g}, below the top manifold")
    run = _LevelSetRun(landscape, E_start, p)
    dt = run.dt
    d0 = norm(E_target - run.E, dt)
    tau2 = p.tau2 if p.tau2 is not None else max(p.tau2_rel * d0, p.tau2_floor)
    run.D_history.append(d0**2)
    run.step_kinds.append("start")
    near_target = False

    def dist():
        return norm(E_target - run.E, dt)

    while True:
        d = dist()
        if d < tau2:
            outcome = "reached_target"
            if d > 0:
                alphas = np.linspace(0.1, 1.0, 10)
                hop = run.E[None] + alphas[:, None, None] * (E_target - run.E)[None]
                if np.all(landscape.value(hop) >= 1 - p.epsilon):
                    run.record(force=True)
                    run.length += d
                    run.E = E_target.copy()
                    run.J, run.g = landscape.value_and_gradient(run.E)
                    run.D_history.append(0.0)
                    run.step_kinds.append("hop")
                else:
                    near_target = True
            break
        if run.n_steps >= p.budget:
            outcome = "budget_exhausted"
            break
        f = (E_target - run.E) / d
        v = run.direction(f)
        if run.last_direction_norm < p.tau1:
            outcome = "trapped"
            break
        D_now = d**2

        def no_increase(E_new):
            return norm(E_target - E_new, dt) ** 2 <= D_now + 1e-12

        if not run.step(v, min(p.step, d), accept=no_increase):
            outcome = "trapped"
            break
        run.D_history.append(dist() ** 2)
        run.step_kinds.append("level")
        run.record()
        if run.recover_if_fallen():
            run.D_history.append(dist() ** 2)
            run.step_kinds.append("recover")
    return run.report(outcome, d_E=d0, near_target=near_target)


def connect_dmorph(
    system: QuantumSystem,
    objective: Objective,
    E_start: ControlField,
    E_target: ControlField,
    params: LevelSetParams | None = None,
) -> ConnectReport:
    if not E_start.compatible(E_target):
        raise ValidationError("endpoints live on different grids")
    ls = Landscape(system, objective, E_start.duration, E_start.n_steps)
    return connect_samples(ls, E_start.samples, E_target.samples, params)


def walk_far_samples(landscape: Landscape, E_start, params: LevelSetParams | None = None) -> ConnectReport:
    """Move away from ``E_start`` until the fluence exceeds ``params.fluence_cap``.

    The first step follows a random direction; afterwards the guiding
    function points away from the start, so ``D_far`` never shrinks.
    """
    p = params or LevelSetParams()
    rng = np.random.default_rng(p.seed)
    run = _LevelSetRun(landscape, E_start, p)
    dt = run.dt
    E0 = run.E.copy()
    run.D_history.append(0.0)
    run.step_kinds.append("start")
    f = random_direction(landscape.shape, dt, rng)
    outcome = "budget_exhausted"
    while run.n_steps < p.budget:
        if norm(run.E, dt) ** 2 > p.fluence_cap:
            outcome = "fluence_cap"
            break
        if run.n_steps > 0:
            delta = run.E - E0
            f = delta / norm(delta, dt)
        v = run.direction(f)
        if run.last_direction_norm < p.tau1:
            outcome = "trapped"
            break
        D_now = norm(run.E - E0, dt) ** 2

        def no_decrease(E_new):
            return norm(E_new - E0, dt) ** 2 >= D_now - 1e-12

        if not run.step(v, p.step, accept=no_decrease):
            outcome = "trapped"
            break
        run.D_history.append(norm(run.E - E0, dt) ** 2)
        run.step_kinds.append("level")
        run.record()
        if run.recover_if_fallen():
            run.D_history.append(norm(run.E - E0, dt) ** 2)
            run.step_kinds.append("recover")
    return run.report(outcome, d_E=norm(run.E - E0, dt))


def walk_far(system, objective, E_start: ControlField, params: LevelSetParams | None = None) -> ConnectReport:
    ls = Landscape(system, objective, E_start.duration, E_start.n_steps)
    return walk_far_samples(ls, E_start.samples, params)


def explore_samples(
    landscape: Landscape,
    E_start,
    window: float = 1.0,
    n_max: int = 100,
    params: LevelSetParams | None = None,
) -> ConnectReport:
    """Random exploration: a fresh unit white-noise guiding field per window of length ``window`` in ``s``."""
    p = params or LevelSetParams()
    rng = np.random.default_rng(p.seed)
    run = _LevelSetRun(landscape, E_start, p)
    dt = run.dt
    E0 = run.E.copy()
    run.D_history.append(0.0)
    run.step_kinds.append("start")
    windows = []
    for n in range(1, n_max + 1):
        f = random_direction(landscape.shape, dt, rng)
        E_w, len_w, s_end = run.E.copy(), run.length, n * window
        trapped = False
        # s accumulates rounding over many steps; a sub-min_step remainder is not a step
        while s_end - run.s >= p.min_step:
            v = run.direction(f)
            if run.last_direction_norm < p.tau1 or not run.step(v, min(p.step, s_end - run.s)):
                trapped = True
                break
            run.D_history.append(norm(run.E - E0, dt) ** 2)
            run.step_kinds.append("level")
            run.record()
            if run.recover_if_fallen():
                run.D_history.append(norm(run.E - E0, dt) ** 2)
                run.step_kinds.append("recover")
        d_P = run.length - len_w
        d_E = norm(run.E - E_w, dt)
        windows.append(
            {"window": n, "d_P": d_P, "d_E": d_E, "R": d_P / d_E if d_E > 0 else 1.0, "trapped": trapped, "J_end": run.J}
        )
        run.s = s_end
    outcome = "trapped" if any(w["trapped"] for w in windows) else "completed"
    return run.report(outcome, d_E=norm(run.E - E0, dt), windows=windows)


def explore_stochastic(system, objective, E_start: ControlField, window=1.0, n_max=100, params=None) -> ConnectReport:
    ls = Landscape(system, objective, E_start.duration, E_start.n_steps)
    return explore_samples(ls, E_start.samples, window, n_max, params)
