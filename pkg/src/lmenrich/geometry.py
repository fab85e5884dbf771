"""Contour schemes and interpolating curves through ordered landmarks.

Anchors of a component are parameterized uniformly, ``u_i = i``. Open
components span ``[0, n - 1]``; closed components are periodic with period
``n`` so the segment from the last anchor back to the first is part of the
curve.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import BSpline, make_interp_spline

from .exceptions import ConfigurationError, DegenerateGeometryError, DomainError

FIT_KINDS = ("line", "bspline")

_TANGENT_EPS = 1e-12


@dataclass(frozen=True)
class ComponentSpec:
    name: str
    start: int
    stop: int  # inclusive
    closed: bool = False
    isolated: bool = False
    fit_kind: str = "bspline"
    degree: int = 3

    def __post_init__(self):
        if self.stop < self.start or self.start < 0:
            raise ConfigurationError(f"{self.name}: bad anchor range {self.start}-{self.stop}")
        if self.closed and self.isolated:
            raise ConfigurationError(f"{self.name}: a component cannot be closed and isolated")
        if self.isolated and self.n_anchors != 1:
            raise ConfigurationError(f"{self.name}: isolated components hold exactly one anchor")
        if not self.isolated and self.n_anchors < 2:
            raise ConfigurationError(f"{self.name}: contour components need at least 2 anchors")
        if self.fit_kind not in FIT_KINDS:
            raise ConfigurationError(f"{self.name}: unknown fit kind {self.fit_kind!r}")
        if self.degree < 1:
            raise ConfigurationError(f"{self.name}: degree must be positive")

    @property
    def n_anchors(self) -> int:
        return self.stop - self.start + 1

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.start, self.stop + 1)


@dataclass(frozen=True)
class ContourScheme:
    """Declarative layout of a landmark set."""

    scheme_id: str
    components: Tuple[ComponentSpec, ...]
    outer_eye_corners: Optional[Tuple[int, int]] = None
    inner_eye_corners: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if not self.components:
            raise ConfigurationError(f"{self.scheme_id}: scheme has no components")
        covered = np.zeros(self.n_points, dtype=int)
        for comp in self.components:
            covered[comp.start:comp.stop + 1] += 1
        if np.any(covered > 1):
            raise ConfigurationError(f"{self.scheme_id}: component ranges overlap")
        if np.any(covered == 0):
            missing = np.flatnonzero(covered == 0).tolist()
            raise ConfigurationError(f"{self.scheme_id}: indices {missing} belong to no component")
        for pair in (self.outer_eye_corners, self.inner_eye_corners):
            if pair is not None and any(not 0 <= i < self.n_points for i in pair):
                raise ConfigurationError(f"{self.scheme_id}: eye corner index out of range")

    @property
    def n_points(self) -> int:
        return max(c.stop for c in self.components) + 1

    def component(self, name: str) -> ComponentSpec:
        for comp in self.components:
            if comp.name == name:
                return comp
        raise KeyError(name)

    def component_of(self, index: int) -> int:
        for k, comp in enumerate(self.components):
            if comp.start <= index <= comp.stop:
                return k
        raise IndexError(index)


@dataclass(frozen=True, eq=False)
class Curve:
    """Parametric interpolating curve; immutable after fitting."""

    kind: str
    anchors: np.ndarray
    closed: bool
    degree: int
    _spline: Optional[BSpline] = field(default=None, repr=False)

    @property
    def n_anchors(self) -> int:
        return len(self.anchors)

    @property
    def params(self) -> np.ndarray:
        """Anchor parameters ``u_i``."""
        return np.arange(self.n_anchors, dtype=float)

    @property
    def domain(self) -> Tuple[float, float]:
        n = self.n_anchors
        return (0.0, float(n if self.closed else n - 1))

    @property
    def control_points(self) -> np.ndarray:
        if self._spline is None:
            return self.anchors
        return np.asarray(self._spline.c)

    @property
    def knots(self) -> np.ndarray:
        if self._spline is None:
            return self.params
        return np.asarray(self._spline.t)

    def _wrap(self, u):
        u = np.asarray(u, dtype=float)
        lo, hi = self.domain
        if self.closed:
            return np.mod(u, hi)
        tol = 1e-9 * max(1.0, hi)
        if np.any(u < lo - tol) or np.any(u > hi + tol) or not np.all(np.isfinite(u)):
            raise DomainError(f"parameter outside [{lo}, {hi}] of an open curve")
        return np.clip(u, lo, hi)

    def evaluate(self, u) -> np.ndarray:
        """Point(s) ``C(u)``; shape ``(2,)`` for scalar ``u`` else ``(m, 2)``."""
        w = self._wrap(u)
        if self._spline is not None:
            return np.asarray(self._spline(w))
        return self._polyline_eval(w)

    __call__ = evaluate

    def derivative(self, u) -> np.ndarray:
        """Tangent vector(s) ``C'(u)``."""
        w = self._wrap(u)
        if self._spline is not None:
            d = np.asarray(self._spline(w, nu=1))
        else:
            d = self._polyline_derivative(w)
        norms = np.linalg.norm(np.atleast_2d(d), axis=-1)
        if np.any(norms <= _TANGENT_EPS * (1.0 + self._extent())):
            raise DegenerateGeometryError("zero-length tangent")
        return d

    def unit_normal(self, u, orientation_hint) -> np.ndarray:
        """Tangent rotated 90 degrees, signed to point away from ``orientation_hint``."""
        tangent = self.derivative(u)
        normal = np.stack([-tangent[..., 1], tangent[..., 0]], axis=-1)
        normal = normal / np.linalg.norm(normal, axis=-1, keepdims=True)
        away = self.evaluate(u) - np.asarray(orientation_hint, dtype=float)
        sign = np.where(np.sum(normal * away, axis=-1) < 0, -1.0, 1.0)
        return normal * sign[..., None]

    def _extent(self) -> float:
        return float(np.ptp(self.anchors, axis=0).max())

    def _segments(self):
        pts = self.anchors
        if self.closed:
            return pts, np.roll(pts, -1, axis=0)
        return pts[:-1], pts[1:]

    def _polyline_eval(self, w):
        scalar = w.ndim == 0
        w = np.atleast_1d(w)
        starts, ends = self._segments()
        i = np.minimum(np.floor(w).astype(int), len(starts) - 1)
        s = (w - i)[:, None]
        out = (1.0 - s) * starts[i] + s * ends[i]
        return out[0] if scalar else out

    def _polyline_derivative(self, w):
        scalar = w.ndim == 0
        w = np.atleast_1d(w)
        starts, ends = self._segments()
        seg = ends - starts
        n_seg = len(seg)
        i = np.minimum(np.floor(w).astype(int), n_seg - 1)
        out = seg[i].copy()
        at_vertex = w == np.round(w)
        for k in np.flatnonzero(at_vertex):
            v = int(round(w[k]))
            if self.closed:
                prev_seg, next_seg = seg[(v - 1) % n_seg], seg[v % n_seg]
            elif v == 0 or v == n_seg:
                continue
            else:
                prev_seg, next_seg = seg[v - 1], seg[v]
            lp, ln = np.linalg.norm(prev_seg), np.linalg.norm(next_seg)
            if lp == 0 or ln == 0:
                out[k] = prev_seg + next_seg
                continue
            out[k] = 0.5 * (prev_seg / lp + next_seg / ln) * 0.5 * (lp + ln)
        return out[0] if scalar else out


def fit_curve(anchors, spec: ComponentSpec, fit_kind: Optional[str] = None) -> Curve:
    """Fit an interpolating curve through the ordered anchors of one component."""
    pts = np.array(anchors, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ConfigurationError("anchors must have shape (n, 2)")
    if not np.all(np.isfinite(pts)):
        raise ConfigurationError(f"{spec.name}: non-finite anchor coordinates")
    kind = fit_kind or spec.fit_kind
    if kind not in FIT_KINDS:
        raise ConfigurationError(f"unknown fit kind {kind!r}")
    n = len(pts)
    if n < 2:
        raise ConfigurationError(f"{spec.name}: need at least 2 anchors, got {n}")
    if np.all(pts == pts[0]):
        raise DegenerateGeometryError(f"{spec.name}: all anchors coincide")
    pts.setflags(write=False)

    if kind == "line" or n == 2:
        return Curve("polyline", pts, spec.closed, 1)

    d = spec.degree
    if n < d + 1:
        raise ConfigurationError(f"{spec.name}: degree {d} b-spline needs at least {d + 1} anchors, got {n}")
    if spec.closed:
        u = np.arange(n + 1, dtype=float)
        y = np.vstack([pts, pts[:1]])
        spline = make_interp_spline(u, y, k=d, bc_type="periodic")
    else:
        spline = make_interp_spline(np.arange(n, dtype=float), pts, k=d)
    return Curve("bspline", pts, spec.closed, d, spline)


def consistent_normals(curve: Curve, u, orientation_hint, reference_u: Optional[Sequence[float]] = None):
    """Unit normals at ``u`` sharing one sign for the whole curve.

    The sign is the one pointing away from ``orientation_hint`` in aggregate
    over ``reference_u`` (the anchor parameters by default), so a component
    never mixes sides even when the hint sits near the curve.
    """
    if reference_u is None:
        reference_u = curve.params
    tangent = curve.derivative(u)
    normal = np.stack([-tangent[..., 1], tangent[..., 0]], axis=-1)
    normal = normal / np.linalg.norm(normal, axis=-1, keepdims=True)
    ref_t = np.atleast_2d(curve.derivative(reference_u))
    ref_n = np.stack([-ref_t[:, 1], ref_t[:, 0]], axis=-1)
    ref_n /= np.linalg.norm(ref_n, axis=-1, keepdims=True)
    away = np.atleast_2d(curve.evaluate(reference_u)) - np.asarray(orientation_hint, dtype=float)
    return normal if np.sum(ref_n * away) >= 0 else -normal
