"""Point and edge errors, morphometric measures and MAPE."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .enrichment import EnrichedLandmarkSet
from .exceptions import ConfigurationError, DegenerateAnnotationError
from .geometry import ComponentSpec, ContourScheme, Curve, fit_curve

WHOLE_FACE = "whole_face"


def _pair(P, P_hat):
    P = np.asarray(P, dtype=float).reshape(-1, 2)
    P_hat = np.asarray(P_hat, dtype=float).reshape(-1, 2)
    if P.shape != P_hat.shape:
        raise ValueError(f"point sets differ in length: {len(P)} vs {len(P_hat)}")
    return P, P_hat


def mean_error(P, P_hat) -> float:
    """Average L2 distance between paired points (or offsets)."""
    P, P_hat = _pair(P, P_hat)
    if len(P) == 0:
        raise ValueError("empty point set")
    return float(np.linalg.norm(P - P_hat, axis=1).mean())


def nme_point(P, P_hat, d: float) -> float:
    if not d > 0:
        raise DegenerateAnnotationError(f"normalization distance must be positive, got {d}")
    return mean_error(P, P_hat) / d


def corner_distance(anchors, corners: Optional[Tuple[int, int]]) -> float:
    if corners is None:
        raise ConfigurationError("scheme does not define the eye corners needed for normalization")
    a = np.asarray(anchors, dtype=float)
    d = float(np.linalg.norm(a[corners[0]] - a[corners[1]]))
    if not d > 0:
        raise DegenerateAnnotationError("eye corners coincide")
    return d


def inter_ocular_distance(anchors, scheme: ContourScheme) -> float:
    """Distance between the outer eye corners of a ground-truth annotation."""
    return corner_distance(anchors, scheme.outer_eye_corners)


# -- point to curve -----------------------------------------------------------

def sample_curve(curve: Curve, step: float = 0.25) -> np.ndarray:
    """Polyline through ``curve`` with arc steps of at most ``step`` pixels.

    Anchor parameters are always sampled and replaced by the exact anchors,
    so a point's distance to the polyline never exceeds its distance to any
    anchor.
    """
    lo, hi = curve.domain
    coarse = np.linspace(lo, hi, 64 * curve.n_anchors + 1)
    speed = np.linalg.norm(np.atleast_2d(curve.derivative(coarse)), axis=1).max()
    n = int(np.ceil(1.05 * speed * (hi - lo) / step)) + 1
    u = np.union1d(np.linspace(lo, hi, n), curve.params)
    pts = np.atleast_2d(curve.evaluate(u)).copy()
    at_anchor = np.searchsorted(u, curve.params)
    pts[at_anchor] = curve.anchors
    if curve.closed:
        pts[-1] = curve.anchors[0]
    return pts


def point_to_polyline_distance(points, polyline) -> np.ndarray:
    """Distance from each point to a polyline: nearest vertex, then its two segments."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    v = np.asarray(polyline, dtype=float)
    if len(v) == 1:
        return np.linalg.norm(p - v[0], axis=1)
    out = np.empty(len(p))
    chunk = max(1, 2_000_000 // len(v))
    for s in range(0, len(p), chunk):
        q = p[s:s + chunk]
        d2 = ((q[:, None, :] - v[None, :, :]) ** 2).sum(-1)
        nearest = d2.argmin(axis=1)
        best = np.sqrt(d2[np.arange(len(q)), nearest])
        for shift in (-1, 0):
            i0 = nearest + shift
            ok = (i0 >= 0) & (i0 + 1 < len(v))
            a = v[np.clip(i0, 0, len(v) - 2)]
            b = v[np.clip(i0 + 1, 1, len(v) - 1)]
            ab = b - a
            denom = np.maximum((ab * ab).sum(-1), 1e-300)
            t = np.clip(((q - a) * ab).sum(-1) / denom, 0.0, 1.0)
            d = np.linalg.norm(q - (a + t[:, None] * ab), axis=1)
            best = np.where(ok, np.minimum(best, d), best)
        out[s:s + chunk] = best
    return out


def point_to_curve_distance(points, curve: Union[Curve, np.ndarray], step: float = 0.25) -> np.ndarray:
    polyline = sample_curve(curve, step) if isinstance(curve, Curve) else curve
    return point_to_polyline_distance(points, polyline)


Edge = Tuple[Sequence[int], Union[Curve, np.ndarray]]


def nme_edge(P, P_hat, edges: Sequence[Edge], d: float, isolated=None, step: float = 0.25) -> float:
    """Point-to-edge error normalized by ``d``.

    ``edges`` pairs landmark indices with the ground-truth curve (or dense
    polyline) they belong to. Indices listed in ``isolated`` use the
    point-to-point distance. Every other landmark must belong to an edge.
    """
    P, P_hat = _pair(P, P_hat)
    if not d > 0:
        raise DegenerateAnnotationError(f"normalization distance must be positive, got {d}")
    per_point = np.full(len(P), np.nan)
    if isolated is not None:
        iso = np.asarray(isolated, dtype=int)
        per_point[iso] = np.linalg.norm(P[iso] - P_hat[iso], axis=1)
    for indices, curve in edges:
        idx = np.asarray(indices, dtype=int)
        per_point[idx] = point_to_curve_distance(P[idx], curve, step)
    if np.any(np.isnan(per_point)):
        missing = np.flatnonzero(np.isnan(per_point))[:10].tolist()
        raise ConfigurationError(f"landmarks {missing} have no ground-truth edge and are not isolated")
    return float(per_point.sum() / (len(P) * d))


def edges_from_enriched(gt: EnrichedLandmarkSet, scheme: ContourScheme, fit_kind: Optional[str] = None):
    """Ground-truth edges fitted through the dense points of each component."""
    edges, isolated = [], []
    for c, comp in enumerate(scheme.components):
        idx = np.flatnonzero(gt.component == c)
        if comp.isolated:
            isolated.extend(idx.tolist())
            continue
        spec = ComponentSpec(comp.name, 0, len(idx) - 1, comp.closed, False, comp.fit_kind, comp.degree)
        edges.append((idx, fit_curve(gt.points[idx], spec, fit_kind)))
    return edges, isolated


# -- evaluation report ----------------------------------------------------------

@dataclass
class EvalReport:
    rows: Dict[str, Dict[str, float]]
    d: float
    n_samples: int
    n_points: int
    morphometric_mape: Optional[Dict[str, float]] = None

    def to_dict(self) -> dict:
        out = {"normalization_distance": self.d, "n_samples": self.n_samples, "n_points": self.n_points,
               "rows": self.rows}
        if self.morphometric_mape is not None:
            out["morphometric_mape"] = self.morphometric_mape
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_table(self) -> str:
        lines = [f"{'component':<20} {'ME':>10} {'NME_point':>10} {'NME_edge':>10} {'points':>7}"]
        for name, r in self.rows.items():
            lines.append(f"{name:<20} {r['me']:>10.4f} {r['nme_point']:>10.5f} {r['nme_edge']:>10.5f} "
                         f"{r['n_points']:>7d}")
        lines.append(f"samples: {self.n_samples}  mean inter-ocular distance: {self.d:.3f}")
        if self.morphometric_mape:
            lines.append("morphometric MAPE (%): " + ", ".join(
                f"{k}={v:.3f}" for k, v in self.morphometric_mape.items()))
        return "\n".join(lines) + "\n"


def evaluate(preds: Sequence[EnrichedLandmarkSet], gts: Sequence[EnrichedLandmarkSet], scheme: ContourScheme,
             edges: Optional[Sequence] = None, step: float = 0.25) -> EvalReport:
    """Per-component and whole-face errors averaged over samples.

    ``edges`` optionally supplies, per sample, the ``(edges, isolated)`` pair
    for :func:`nme_edge`; by default curves are fitted through the ground
    truth.
    """
    if len(preds) != len(gts) or not preds:
        raise ValueError("need equal, non-empty lists of predictions and ground truths")
    names = [c.name for c in scheme.components] + [WHOLE_FACE]
    acc = {n: {"me": [], "nme_point": [], "nme_edge": []} for n in names}
    ds = []
    for k, (pred, gt) in enumerate(zip(preds, gts)):
        if len(pred) != len(gt):
            raise ValueError(f"sample {k}: {len(pred)} predicted vs {len(gt)} ground-truth points")
        d = inter_ocular_distance(gt.anchors(), scheme)
        ds.append(d)
        sample_edges, isolated = edges[k] if edges is not None else edges_from_enriched(gt, scheme)
        per_point = np.full(len(gt), np.nan)
        iso = np.asarray(isolated, dtype=int)
        per_point[iso] = np.linalg.norm(pred.points[iso] - gt.points[iso], axis=1)
        for idx, curve in sample_edges:
            per_point[np.asarray(idx)] = point_to_curve_distance(pred.points[np.asarray(idx)], curve, step)
        if np.any(np.isnan(per_point)):
            raise ConfigurationError(f"sample {k}: some landmarks have no ground-truth edge")
        point_err = np.linalg.norm(pred.points - gt.points, axis=1)
        for c, name in enumerate(names):
            sel = gt.component == c if name != WHOLE_FACE else np.ones(len(gt), dtype=bool)
            acc[name]["me"].append(point_err[sel].mean())
            acc[name]["nme_point"].append(point_err[sel].mean() / d)
            acc[name]["nme_edge"].append(per_point[sel].mean() / d)
    rows = {}
    for c, name in enumerate(names):
        n_pts = int((gts[0].component == c).sum()) if name != WHOLE_FACE else len(gts[0])
        rows[name] = {key: float(np.mean(vals)) for key, vals in acc[name].items()}
        rows[name]["n_points"] = n_pts
    return EvalReport(rows, float(np.mean(ds)), len(preds), len(gts[0]))


# -- morphometrics ---------------------------------------------------------------

@dataclass(frozen=True)
class MeasureValue:
    value: float
    flagged: bool = False
    note: str = ""


def load_measure_definitions(source: Union[str, Path, dict] = "300w-68") -> dict:
    """Shipped definitions by scheme id, or an editable JSON file."""
    if isinstance(source, dict):
        return source
    shipped = resources.files("lmenrich") / "data" / f"morphometrics-{source}.json"
    if shipped.is_file():
        return json.loads(shipped.read_text())
    return json.loads(Path(source).read_text())


def _component_order(lm: EnrichedLandmarkSet, c: int):
    idx = np.flatnonzero(lm.component == c)
    order = np.lexsort((lm.sub_index[idx], lm.anchor_index[idx]))
    return idx[order]


def _path_points(lm: EnrichedLandmarkSet, scheme: ContourScheme, path) -> np.ndarray:
    chunks = []
    for item in path:
        if "points" in item:
            chunks.append(lm.anchors()[np.asarray(item["points"], dtype=int)])
            continue
        c = [comp.name for comp in scheme.components].index(item["component"])
        comp = scheme.components[c]
        idx = _component_order(lm, c)
        anchors_at = {int(lm.anchor_index[i]): pos for pos, i in enumerate(idx) if lm.sub_index[i] == 0}
        a, b = anchors_at[item["from"]], anchors_at[item["to"]]
        if a <= b:
            seq = idx[a:b + 1]
        elif comp.closed:
            seq = np.concatenate([idx[a:], idx[:b + 1]])
        else:
            seq = idx[b:a + 1][::-1]
        if item.get("reverse"):
            seq = seq[::-1]
        chunks.append(lm.points[seq])
    return np.concatenate(chunks)


def polygon_area(poly) -> float:
    """Absolute shoelace area."""
    p = np.asarray(poly, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return float(abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))) / 2.0)


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return np.sign((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    return (orient(p1, p2, q1) * orient(p1, p2, q2) < 0) and (orient(q1, q2, p1) * orient(q1, q2, p2) < 0)


def is_self_intersecting(poly) -> bool:
    p = np.asarray(poly, dtype=float)
    n = len(p)
    for i in range(n):
        a1, a2 = p[i], p[(i + 1) % n]
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_cross(a1, a2, p[j], p[(j + 1) % n]):
                return True
    return False


def angle_at(apex, a, b) -> float:
    """Angle in degrees at ``apex`` between rays to ``a`` and ``b``."""
    u = np.asarray(a, dtype=float) - apex
    v = np.asarray(b, dtype=float) - apex
    cos = np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v))
    return float(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))


def _nearest_soft(lm: EnrichedLandmarkSet, t: float) -> np.ndarray:
    return lm.points[int(np.argmin(np.abs(lm.soft_index - t)))]


def morphometrics(lm: EnrichedLandmarkSet, scheme: ContourScheme, definitions="300w-68") -> Dict[str, MeasureValue]:
    """Evaluate measure definitions on a sparse (D=1) or dense landmark set.

    Lengths and areas are divided by the inner-eye-corner distance and its
    square. Self-intersecting polygons are flagged, not rejected.
    """
    defs = load_measure_definitions(definitions)
    unit = corner_distance(lm.anchors(), scheme.inner_eye_corners)
    out = {}
    for m in defs["measures"]:
        kind = m["kind"]
        if kind == "angle":
            apex = _nearest_soft(lm, m["apex"])
            out[m["name"]] = MeasureValue(angle_at(apex, _nearest_soft(lm, m["arms"][0]),
                                                   _nearest_soft(lm, m["arms"][1])))
        elif kind == "area":
            poly = _path_points(lm, scheme, m["path"])
            bad = is_self_intersecting(poly)
            out[m["name"]] = MeasureValue(polygon_area(poly) / unit ** 2, bad, "self-intersecting" if bad else "")
        elif kind == "area_ratio":
            num = _path_points(lm, scheme, m["numerator"])
            den = _path_points(lm, scheme, m["denominator"])
            bad = is_self_intersecting(num) or is_self_intersecting(den)
            den_area = polygon_area(den)
            value = polygon_area(num) / den_area if den_area > 0 else float("nan")
            out[m["name"]] = MeasureValue(value, bad, "self-intersecting" if bad else "")
        elif kind == "length":
            a, b = _nearest_soft(lm, m["points"][0]), _nearest_soft(lm, m["points"][1])
            out[m["name"]] = MeasureValue(float(np.linalg.norm(a - b)) / unit)
        else:
            raise ConfigurationError(f"unknown measure kind {kind!r}")
    return out


def mape(predicted, reference) -> float:
    """Mean absolute percentage error; zero references are skipped with a warning."""
    p = np.asarray(predicted, dtype=float).ravel()
    r = np.asarray(reference, dtype=float).ravel()
    if p.shape != r.shape:
        raise ValueError("predicted and reference measures differ in length")
    zero = r == 0
    if zero.any():
        warnings.warn(f"{int(zero.sum())} zero reference value(s) excluded from MAPE", RuntimeWarning)
    if zero.all():
        return float("nan")
    return float(np.mean(np.abs(p[~zero] - r[~zero]) / np.abs(r[~zero])) * 100.0)


def mape_table(predicted: List[Dict[str, MeasureValue]], reference: List[Dict[str, MeasureValue]]) -> Dict[str, float]:
    names = list(reference[0])
    return {n: mape([p[n].value for p in predicted], [r[n].value for r in reference]) for n in names}
