"""Path metrics: straightness ratio, distance profiles between paths, PCA projection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .core import ControlField, ValidationError


def _as_stack(path) -> tuple[np.ndarray, float]:
    """Return ``(n, C, L)`` samples and ``dt`` from fields or a raw array."""
    if isinstance(path, np.ndarray):
        return np.asarray(path, dtype=float), 1.0
    path = list(path)
    if not path:
        raise ValidationError("empty path")
    if isinstance(path[0], ControlField):
        dt = path[0].dt
        for f in path[1:]:
            if not path[0].compatible(f):
                raise ValidationError("fields along a path must share one grid")
        return np.stack([f.samples for f in path]), dt
    return np.asarray(path, dtype=float), 1.0


def _norms(X: np.ndarray, dt: float) -> np.ndarray:
    return np.sqrt(np.sum(X.reshape(len(X), -1) ** 2, axis=1) * dt)


@dataclass(frozen=True)
class PathMetrics:
    d_P: float
    d_E: float
    segments: np.ndarray
    degenerate: bool = False

    @property
    def R(self) -> float:
        return self.d_P / self.d_E if self.d_E > 0 else 1.0

    def to_dict(self) -> dict:
        return {"d_P": self.d_P, "d_E": self.d_E, "R": self.R, "degenerate": self.degenerate}


def ratio_R(path, dt: float | None = None) -> PathMetrics:
    """Chord-sum length of a sampled path over the distance between its ends.

    ``path`` is a sequence of ``ControlField`` or an array whose first axis
    indexes the points; for raw arrays ``dt`` sets the metric weight.
    """
    X, dt0 = _as_stack(path)
    dt = dt0 if dt is None else dt
    if len(X) < 2:
        raise ValidationError("a path needs at least two points")
    seg = _norms(np.diff(X, axis=0), dt)
    d_E = float(_norms((X[-1] - X[0])[None], dt)[0])
    return PathMetrics(d_P=float(seg.sum()), d_E=d_E, segments=seg, degenerate=d_E == 0.0)


def resample_by_arclength(path, n: int = 101, dt: float | None = None) -> np.ndarray:
    """Points at uniform relative arc length ``s in [0, 1]`` on a cubic spline through the path."""
    X, dt0 = _as_stack(path)
    dt = dt0 if dt is None else dt
    seg = _norms(np.diff(X, axis=0), dt)
    keep = np.concatenate([[True], seg > 0])
    X, seg = X[keep], seg[keep[1:]]
    total = seg.sum()
    if total == 0:
        return np.repeat(X[:1], n, axis=0)
    knots = np.concatenate([[0.0], np.cumsum(seg)]) / total
    knots[-1] = 1.0
    s = np.linspace(0, 1, n)
    flat = X.reshape(len(X), -1)
    if len(X) < 3:
        out = flat[0] + s[:, None] * (flat[-1] - flat[0])
    else:
        out = CubicSpline(knots, flat, bc_type="natural")(s)
    out = out.reshape((n,) + X.shape[1:])
    out[0], out[-1] = X[0], X[-1]
    return out


@dataclass(frozen=True)
class DistanceProfile:
    s: np.ndarray
    d: np.ndarray

    @property
    def mean(self) -> float:
        return float(np.trapezoid(self.d, self.s))

    @property
    def max(self) -> float:
        return float(self.d.max())


def path_distance(path_a, path_b, n: int = 101, dt: float | None = None, atol: float = 1e-9) -> DistanceProfile:
    """``d(s) = ||a(s) - b(s)||`` with both paths parameterized by relative arc length."""
    A, dta = _as_stack(path_a)
    B, _ = _as_stack(path_b)
    dt = dta if dt is None else dt
    if A.shape[1:] != B.shape[1:]:
        raise ValidationError("paths live on different grids")
    ends = _norms(np.stack([A[0] - B[0], A[-1] - B[-1]]), dt)
    if ends.max() > atol:
        raise ValidationError(f"paths do not share endpoints (mismatch {ends.max():.3g})")
    a = resample_by_arclength(A, n, dt)
    b = resample_by_arclength(B, n, dt)
    return DistanceProfile(s=np.linspace(0, 1, n), d=_norms(a - b, dt))


@dataclass(frozen=True)
class PcaProjection:
    """Top principal directions of a set of fields measured from a reference.

    ``basis`` rows are orthonormal in the weighted field metric; ``percent``
    is each direction's share of the total squared deviation.
    """

    basis: np.ndarray
    coords: np.ndarray
    percent: np.ndarray
    reference: np.ndarray
    dt: float

    def project(self, X) -> np.ndarray:
        X, _ = _as_stack(X)
        diff = (X - self.reference).reshape(len(X), -1)
        return diff @ self.basis.reshape(len(self.basis), -1).T * self.dt

    def reconstruct(self, coords: np.ndarray) -> np.ndarray:
        out = np.asarray(coords) @ self.basis.reshape(len(self.basis), -1)
        return out.reshape((len(out),) + self.reference.shape) + self.reference

    def to_rows(self) -> list[tuple]:
        return [(i, *map(float, c)) for i, c in enumerate(self.coords)]


def pca_project(fields, reference=None, n_components: int = 3, dt: float | None = None) -> PcaProjection:
    """Project fields onto the leading singular directions of their offsets from ``reference``.

    ``reference`` defaults to the last field.  Coordinates are inner products
    of the offsets with the basis, so the reference maps to the origin.
    """
    X, dt0 = _as_stack(fields)
    dt = dt0 if dt is None else dt
    if len(X) < 4:
        raise ValidationError("PCA projection needs at least four fields")
    if reference is None:
        ref = X[-1]
    elif isinstance(reference, ControlField):
        ref = reference.samples
    else:
        ref = np.asarray(reference, dtype=float)
    if ref.shape != X.shape[1:]:
        raise ValidationError("reference shape does not match the fields")
    M = (X - ref).reshape(len(X), -1) * np.sqrt(dt)
    _, sv, Vt = np.linalg.svd(M, full_matrices=False)
    total = np.sum(sv**2)
    if total <= 0:
        raise ValidationError("all fields coincide with the reference")
    k = min(n_components, len(sv))
    basis = Vt[:k] / np.sqrt(dt)
    percent = 100 * sv[:k] ** 2 / total
    if k < n_components:
        pad = n_components - k
        basis = np.concatenate([basis, np.zeros((pad, basis.shape[1]))])
        percent = np.concatenate([percent, np.zeros(pad)])
    basis = basis.reshape((n_components,) + ref.shape)
    coords = M @ Vt[:k].T
    if coords.shape[1] < n_components:
        coords = np.pad(coords, ((0, 0), (0, n_components - coords.shape[1])))
    return PcaProjection(basis=basis, coords=coords, percent=percent, reference=ref, dt=dt)


def joint_pca(paths: Sequence, reference=None, n_components: int = 3, dt: float | None = None):
    """Fit one projection on the union of several paths; returns it and per-path coordinates."""
    stacks = [_as_stack(p) for p in paths]
    dt = stacks[0][1] if dt is None else dt
    X = np.concatenate([s for s, _ in stacks])
    if reference is None:
        reference = stacks[0][0][-1]
    proj = pca_project(X, reference, n_components, dt)
    return proj, [proj.project(s) for s, _ in stacks]


def summarize_values(values: Sequence[float]) -> dict:
    v = np.asarray([x for x in values if x is not None and np.isfinite(x)], dtype=float)
    if v.size == 0:
        return {"n": 0, "min": None, "avg": None, "max": None}
    return {"n": int(v.size), "min": float(v.min()), "avg": float(v.mean()), "max": float(v.max())}
