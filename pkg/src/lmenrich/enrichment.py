"""Dense landmark initialization from sparse anchors."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from .exceptions import ConfigurationError
from .geometry import ContourScheme, Curve, consistent_normals, fit_curve

ANCHOR = "anchor"
INTERPOLATED = "interpolated"


@dataclass(frozen=True)
class LandmarkSet:
    scheme_id: str
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ConfigurationError("landmarks must have shape (n, 2)")
        if not np.all(np.isfinite(pts)):
            raise ConfigurationError("landmark coordinates must be finite")
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True, eq=False)
class EnrichedLandmarkSet:
    """Dense landmarks with per-point provenance.

    ``anchor_index`` is the global index ``i`` of the anchor a point follows,
    ``sub_index`` is ``j``; anchors have ``j == 0``. Isolated points carry a NaN
    normal angle. ``confidence`` is NaN until the set has been refined.
    """

    scheme_id: str
    density: int
    points: np.ndarray
    soft_index: np.ndarray
    normal_angle: np.ndarray
    component: np.ndarray
    anchor_index: np.ndarray
    sub_index: np.ndarray
    confidence: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.confidence is None:
            object.__setattr__(self, "confidence", np.full(len(self.points), np.nan))

    def __len__(self):
        return len(self.points)

    @property
    def is_anchor(self) -> np.ndarray:
        return self.sub_index == 0

    @property
    def kind(self) -> np.ndarray:
        return np.where(self.is_anchor, ANCHOR, INTERPOLATED)

    @property
    def isolated(self) -> np.ndarray:
        return np.isnan(self.normal_angle)

    @property
    def normals(self) -> np.ndarray:
        return np.stack([np.cos(self.normal_angle), np.sin(self.normal_angle)], axis=-1)

    def anchors(self) -> np.ndarray:
        """Anchor points ordered by anchor index."""
        mask = self.is_anchor
        order = np.argsort(self.anchor_index[mask], kind="stable")
        return self.points[mask][order]

    def with_points(self, points, confidence=None) -> "EnrichedLandmarkSet":
        return replace(
            self,
            points=np.asarray(points, dtype=float),
            confidence=self.confidence if confidence is None else np.asarray(confidence, dtype=float),
        )


def soft_index(i, j, density):
    """Real-valued position code ``i + j / D``."""
    if density < 1:
        raise ConfigurationError("density must be >= 1")
    if np.any(np.asarray(j) < 0) or np.any(np.asarray(j) >= density):
        raise ValueError(f"sub index must lie in [0, {density})")
    return i + np.asarray(j) / density if np.ndim(j) else i + j / density


def component_count(comp, density: int) -> int:
    if comp.isolated:
        return 1
    if comp.closed:
        return comp.n_anchors * density
    return (comp.n_anchors - 1) * density + 1


def enriched_count(scheme: ContourScheme, density: int) -> int:
    return sum(component_count(c, density) for c in scheme.components)


def enriched_ranges(scheme: ContourScheme, density: int):
    """Inclusive enriched index range per component name."""
    ranges, start = {}, 0
    for comp in scheme.components:
        n = component_count(comp, density)
        ranges[comp.name] = (start, start + n - 1)
        start += n
    return ranges


def _check_density(density):
    if isinstance(density, bool) or int(density) != density or density < 1:
        raise ConfigurationError(f"density must be a positive integer, got {density!r}")
    return int(density)


def _check_anchors(anchors, scheme: ContourScheme) -> np.ndarray:
    if isinstance(anchors, LandmarkSet):
        if anchors.scheme_id != scheme.scheme_id:
            raise ConfigurationError(f"landmarks are {anchors.scheme_id}, scheme is {scheme.scheme_id}")
        anchors = anchors.points
    pts = LandmarkSet(scheme.scheme_id, anchors).points
    if len(pts) != scheme.n_points:
        raise ConfigurationError(f"{scheme.scheme_id} expects {scheme.n_points} landmarks, got {len(pts)}")
    return pts


def fit_component_curves(anchors, scheme: ContourScheme, fit_kind: Optional[str] = None) -> List[Optional[Curve]]:
    pts = _check_anchors(anchors, scheme)
    return [
        None if comp.isolated else fit_curve(pts[comp.start:comp.stop + 1], comp, fit_kind)
        for comp in scheme.components
    ]


def initialize_enriched(anchors, scheme: ContourScheme, density: int,
                        fit_kind: Optional[str] = None) -> EnrichedLandmarkSet:
    """Fit each component and sample ``density`` points per anchor segment.

    Parameters
    ----------
    anchors : array_like of shape (n_points, 2) or LandmarkSet
    scheme : ContourScheme
    density : int
        Subdivisions per anchor-to-anchor segment; 1 returns the anchors.
    fit_kind : {"line", "bspline"}, optional
        Overrides the per-component fit kind.
    """
    density = _check_density(density)
    pts = _check_anchors(anchors, scheme)
    face_centroid = pts.mean(axis=0)
    curves = fit_component_curves(pts, scheme, fit_kind)

    out = {k: [] for k in ("points", "t", "angle", "comp", "i", "j")}
    for c, (comp, curve) in enumerate(zip(scheme.components, curves)):
        if curve is None:
            out["points"].append(pts[comp.start:comp.start + 1])
            out["t"].append([float(comp.start)])
            out["angle"].append([np.nan])
            out["comp"].append([c])
            out["i"].append([comp.start])
            out["j"].append([0])
            continue
        n_c = comp.n_anchors
        n_seg = n_c if comp.closed else n_c - 1
        local_i, sub_j = [], []
        for i in range(n_c):
            local_i.append(i)
            sub_j.append(0)
            if i < n_seg:
                for j in range(1, density):
                    local_i.append(i)
                    sub_j.append(j)
        local_i = np.array(local_i)
        sub_j = np.array(sub_j)
        u = ((density - sub_j) / density) * local_i + (sub_j / density) * (local_i + 1)
        u[sub_j == 0] = local_i[sub_j == 0]

        p = np.atleast_2d(curve.evaluate(u)).copy()
        p[sub_j == 0] = pts[comp.start + local_i[sub_j == 0]]
        hint = pts[comp.start:comp.stop + 1].mean(axis=0) if comp.closed else face_centroid
        normals = consistent_normals(curve, u, hint)

        global_i = comp.start + local_i
        out["points"].append(p)
        out["t"].append(global_i + sub_j / density)
        out["angle"].append(np.arctan2(normals[:, 1], normals[:, 0]))
        out["comp"].append(np.full(len(u), c))
        out["i"].append(global_i)
        out["j"].append(sub_j)

    return EnrichedLandmarkSet(
        scheme_id=scheme.scheme_id,
        density=density,
        points=np.concatenate(out["points"]).astype(float),
        soft_index=np.concatenate(out["t"]).astype(float),
        normal_angle=np.concatenate(out["angle"]).astype(float),
        component=np.concatenate(out["comp"]).astype(int),
        anchor_index=np.concatenate(out["i"]).astype(int),
        sub_index=np.concatenate(out["j"]).astype(int),
    )
