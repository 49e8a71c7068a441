"""String method: relax a chain of images up onto the top manifold.

The chain starts as a straight line (or a circular arc) between two optimal
fields.  Each iteration lifts every interior image below the top by one
gradient-flow step, redistributes the images to equal arc length, and inserts
one image where linear interpolation of ``J`` along a segment is most
optimistic compared with the true objective.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .climber import AscentFlow
from .core import ValidationError
from .objectives import Landscape

log = logging.getLogger(__name__)

INSERTION_GRID = np.linspace(0.1, 0.9, 9)
MAX_IMAGES = 256


def _norms(X: np.ndarray, dt: float) -> np.ndarray:
    return np.sqrt(np.sum(X**2, axis=(-1, -2)) * dt)


def segment_lengths(images: np.ndarray, dt: float) -> np.ndarray:
    return _norms(np.diff(images, axis=0), dt)


@dataclass
class StringState:
    """Images ``(n, C, L)`` along the string; ``images[0]`` and ``images[-1]`` stay fixed."""

    images: np.ndarray
    dt: float
    J: np.ndarray | None = None
    iteration: int = 0
    eps_st: float = 1e-3
    status: str = "running"
    reason: str = ""
    n_insertions: int = 0
    history: list[dict] = field(default_factory=list)

    @property
    def n_st(self) -> int:
        """Number of segments, so there are ``n_st + 1`` images."""
        return len(self.images) - 1

    @property
    def path_length(self) -> float:
        return float(segment_lengths(self.images, self.dt).sum())

    @property
    def d_E(self) -> float:
        return float(_norms(self.images[-1] - self.images[0], self.dt))

    @property
    def R(self) -> float:
        d = self.d_E
        return self.path_length / d if d > 0 else 1.0

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "reason": self.reason,
            "iterations": self.iteration,
            "n_st": self.n_st,
            "n_insertions": self.n_insertions,
            "R_st": self.R,
            "path_length": self.path_length,
            "d_E": self.d_E,
            "J": None if self.J is None else [float(j) for j in self.J],
        }


def _check_pair(E_start, E_target):
    E_start = np.asarray(E_start, dtype=float)
    E_target = np.asarray(E_target, dtype=float)
    if E_start.shape != E_target.shape:
        raise ValidationError(f"endpoint shapes differ: {E_start.shape} vs {E_target.shape}")
    return E_start, E_target


def init_straight(E_start, E_target, n_st0: int = 20, dt: float = 1.0) -> StringState:
    """``n_st0 + 1`` equally spaced images on the segment between the endpoints."""
    E_start, E_target = _check_pair(E_start, E_target)
    if n_st0 < 1:
        raise ValidationError("need at least one segment")
    a = np.arange(n_st0 + 1) / n_st0
    images = (1 - a)[:, None, None] * E_start[None] + a[:, None, None] * E_target[None]
    images[0], images[-1] = E_start, E_target
    return StringState(images=images, dt=dt)


def arc_ratio(theta: float) -> float:
    """Length of the major arc over its chord for minor central angle ``theta``."""
    return (2 * np.pi - theta) / (2 * np.sin(theta / 2))


def solve_arc_angle(target_R: float) -> float:
    """Central angle ``theta`` in ``(0, 2 pi)`` with ``arc_ratio(theta) == target_R``.

    The ratio falls monotonically from infinity to 1 across the interval
    (angles above ``pi`` correspond to minor arcs).
    """
    if not target_R > 1:
        raise ValidationError(f"an arc is longer than its chord; target_R must exceed 1, got {target_R}")
    lo, hi = 1e-12, 2 * np.pi - 1e-12
    return float(brentq(lambda th: arc_ratio(th) - target_R, lo, hi, xtol=1e-14, rtol=1e-15))


def init_arc(E_start, E_target, target_R: float, plane_seed=0, n_st0: int = 32, dt: float = 1.0) -> StringState:
    """Images equally spaced along a circular arc of length ratio ``target_R``.

    The circle lies in the plane spanned by the chord and a random direction
    orthogonalized against it.
    """
    E_start, E_target = _check_pair(E_start, E_target)
    theta = solve_arc_angle(target_R)
    chord = E_target - E_start
    d = float(_norms(chord, dt))
    if d == 0:
        raise ValidationError("endpoints coincide; no arc through them")
    u = chord / d
    rng = np.random.default_rng(plane_seed)
    n = rng.standard_normal(chord.shape)
    n -= np.sum(n * u) * dt * u
    n /= float(_norms(n, dt))
    r = d / (2 * np.sin(theta / 2))
    mid = (E_start + E_target) / 2
    center = mid - r * np.cos(theta / 2) * n
    psi = np.pi / 2 + theta / 2 + (2 * np.pi - theta) * np.arange(n_st0 + 1) / n_st0
    images = center[None] + r * (np.cos(psi)[:, None, None] * u[None] + np.sin(psi)[:, None, None] * n[None])
    images[0], images[-1] = E_start, E_target
    return StringState(images=images, dt=dt)


def redistribute(images: np.ndarray, dt: float, n_out: int | None = None, spread_tol: float = 0.01, max_passes: int = 30):
    """Resample interior images at equal arc length along a natural cubic spline.

    The spline is parameterized by cumulative chord length; resampling is
    repeated until adjacent distances agree to ``spread_tol`` (max minus min
    over mean).  Endpoints are returned untouched.
    """
    n_out = len(images) if n_out is None else n_out
    pts = np.array(images)
    first, last = images[0], images[-1]
    shape = pts.shape[1:]
    for _ in range(max_passes):
        seg = segment_lengths(pts, dt)
        total = seg.sum()
        if total == 0:
            out = np.repeat(first[None], n_out, axis=0)
            break
        keep = np.concatenate([[True], seg > 1e-14 * total])
        pts_k = pts[keep]
        knots = np.concatenate([[0.0], np.cumsum(seg[keep[1:]])]) / total
        knots[-1] = 1.0
        if len(pts_k) < 3:
            spline = None
        else:
            spline = CubicSpline(knots, pts_k.reshape(len(pts_k), -1), bc_type="natural")
        targets = np.linspace(0, 1, n_out)
        if spline is None:
            out = np.interp(targets, knots, [0, 1])[:, None] * (pts_k[-1] - pts_k[0]).ravel() + pts_k[0].ravel()
            out = out.reshape((n_out,) + shape)
        else:
            out = spline(targets).reshape((n_out,) + shape)
        out[0], out[-1] = first, last
        seg_out = segment_lengths(out, dt)
        pts = out
        if seg_out.mean() == 0 or (seg_out.max() - seg_out.min()) / seg_out.mean() <= spread_tol:
            break
    pts[0], pts[-1] = first, last
    return pts


@dataclass
class StringParams:
    eps_st: float = 1e-3
    step: float = 0.05
    max_iters: int = 1000
    insertion_grid: np.ndarray = field(default_factory=lambda: INSERTION_GRID.copy())
    max_images: int = MAX_IMAGES
    max_halvings: int = 5
    armijo: float = 0.1
    chunk: int = 64


def _values(landscape: Landscape, X: np.ndarray, chunk: int) -> np.ndarray:
    return np.concatenate([np.atleast_1d(landscape.value(X[i : i + chunk])) for i in range(0, len(X), chunk)])


def gap_scan(landscape: Landscape, images: np.ndarray, J: np.ndarray, grid=INSERTION_GRID, chunk: int = 64):
    """``J_int(alpha) - J(alpha)`` on every segment; returns ``(gaps, J_true)`` of shape ``(n_seg, n_alpha)``."""
    a = np.asarray(grid)[None, :, None, None]
    pts = (1 - a) * images[:-1, None] + a * images[1:, None]
    n_seg, n_a = pts.shape[:2]
    J_true = _values(landscape, pts.reshape((n_seg * n_a,) + images.shape[1:]), chunk).reshape(n_seg, n_a)
    J_int = (1 - grid)[None, :] * J[:-1, None] + grid[None, :] * J[1:, None]
    return J_int - J_true, J_true


def _rk4_lift(flow: AscentFlow, X: np.ndarray, J0: np.ndarray, k1: np.ndarray, h: np.ndarray, chunk: int):
    """One RK4 step of the ascent flow for a batch of images with per-image step ``h``."""
    hh = h[:, None, None]

    def f(Y):
        parts = [flow(Y[i : i + chunk]) for i in range(0, len(Y), chunk)]
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])

    _, k2 = f(X + 0.5 * hh * k1)
    _, k3 = f(X + 0.5 * hh * k2)
    _, k4 = f(X + hh * k3)
    return X + hh / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def relax(landscape: Landscape, state: StringState, params: StringParams | None = None, callback=None) -> StringState:
    """Run string iterations until every image and interpolation gap is within tolerance."""
    p = params or StringParams()
    state.eps_st = p.eps_st
    dt = landscape.dt
    top = 1 - p.eps_st
    flow = AscentFlow(landscape)
    images = np.array(state.images)
    first, last = images[0].copy(), images[-1].copy()
    J = _values(landscape, images, p.chunk)
    scan_valid = None  # gaps from the last scan if images have not moved since

    if float(_norms(last - first, dt)) == 0.0:
        state.images, state.J, state.status = images, J, "converged"
        return state

    for it in range(p.max_iters + 1):
        state.iteration = it
        if np.all(J >= top):
            gaps = scan_valid if scan_valid is not None else gap_scan(landscape, images, J, p.insertion_grid, p.chunk)[0]
            if gaps.max() <= p.eps_st:
                state.images, state.J, state.status = images, J, "converged"
                return state
        if it == p.max_iters:
            break

        # (II) lift interior images still below the top
        low = np.where(J[1:-1] < top)[0] + 1
        if len(low):
            X = images[low]
            J0, k1, gn = [], [], []
            for i in range(0, len(X), p.chunk):
                a, b = flow(X[i : i + p.chunk])
                J0.append(np.atleast_1d(a))
                k1.append(b)
                gn.append(np.atleast_1d(flow.last_norm))
            J0, k1, gn = np.concatenate(J0), np.concatenate(k1), np.concatenate(gn)
            h = np.full(len(low), p.step)
            pending = np.arange(len(low))
            X_new = X.copy()
            J_new = J0.copy()
            for n_half in range(p.max_halvings + 1):
                trial = _rk4_lift(flow, X[pending], J0[pending], k1[pending], h[pending], p.chunk)
                J_trial = _values(landscape, trial, p.chunk)
                # sufficient rise; overshooting a ridge can leave J nearly unchanged
                need = 0.0 if n_half == p.max_halvings else p.armijo * h[pending] * gn[pending]
                ok = J_trial - J0[pending] >= need
                X_new[pending[ok]] = trial[ok]
                J_new[pending[ok]] = J_trial[ok]
                pending = pending[~ok]
                if not len(pending):
                    break
                h[pending] /= 2
            images[low] = X_new
            J[low] = J_new

        # (III) equal arc length
        images = redistribute(images, dt)
        images[0], images[-1] = first, last
        J = _values(landscape, images, p.chunk)

        # (IV) at most one insertion, at the worst gap
        gaps, J_true = gap_scan(landscape, images, J, p.insertion_grid, p.chunk)
        scan_valid = gaps
        worst = np.unravel_index(np.argmax(gaps), gaps.shape)
        if gaps[worst] > p.eps_st:
            if len(images) >= p.max_images:
                state.images, state.J, state.status = images, J, "failed"
                state.reason = "max_images"
                return state
            seg, ia = worst
            alpha = p.insertion_grid[ia]
            new = (1 - alpha) * images[seg] + alpha * images[seg + 1]
            images = np.concatenate([images[: seg + 1], new[None], images[seg + 1 :]])
            images = redistribute(images, dt)
            images[0], images[-1] = first, last
            J = _values(landscape, images, p.chunk)
            state.n_insertions += 1
            scan_valid = None
        state.history.append({"iteration": it, "n_images": len(images), "J_min": float(J.min())})
        if callback is not None:
            callback(it, images, J)

    state.images, state.J, state.status = images, J, "failed"
    state.reason = "max_iters"
    return state


def dense_check(landscape: Landscape, state: StringState, per_segment: int = 10, chunk: int = 64) -> np.ndarray:
    """``J`` at ``per_segment`` midpoints of every segment of a string."""
    a = (np.arange(per_segment) + 0.5) / per_segment
    pts = (1 - a)[None, :, None, None] * state.images[:-1, None] + a[None, :, None, None] * state.images[1:, None]
    return _values(landscape, pts.reshape((-1,) + state.images.shape[1:]), chunk)


def connect_string(landscape: Landscape, E_start, E_target, n_st0: int = 20, params: StringParams | None = None):
    state = init_straight(E_start, E_target, n_st0, dt=landscape.dt)
    return relax(landscape, state, params)
