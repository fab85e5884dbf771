"""JSON files for enriched landmark sets.

One header object with the point list written one point per line, so files
diff cleanly and identical inputs give identical bytes.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from ..enrichment import ANCHOR, INTERPOLATED, EnrichedLandmarkSet, enriched_count
from ..exceptions import ValidationError
from .schemes import load_scheme, shipped_schemes

FORMAT_VERSION = 1

_NUM = {"type": "number"}
_NUM_OR_NULL = {"type": ["number", "null"]}

ENRICHED_SCHEMA = {
    "type": "object",
    "required": ["format_version", "scheme_id", "density", "components", "points"],
    "properties": {
        "format_version": {"const": FORMAT_VERSION},
        "scheme_id": {"type": "string"},
        "density": {"type": "integer", "minimum": 1},
        "label": {"type": ["string", "null"]},
        "components": {"type": "array", "items": {"type": "string"}},
        "points": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["x", "y", "t", "kind", "component", "anchor_index", "sub_index",
                             "normal_angle", "confidence"],
                "properties": {
                    "x": _NUM, "y": _NUM, "t": _NUM,
                    "kind": {"enum": [ANCHOR, INTERPOLATED]},
                    "component": {"type": "string"},
                    "anchor_index": {"type": "integer", "minimum": 0},
                    "sub_index": {"type": "integer", "minimum": 0},
                    "normal_angle": _NUM_OR_NULL,
                    "confidence": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
                },
            },
        },
    },
}


def _num(v):
    v = float(v)
    return None if math.isnan(v) else v


def enriched_to_document(eset: EnrichedLandmarkSet, component_names, label: Optional[str] = None) -> dict:
    points = []
    for k in range(len(eset)):
        points.append({
            "x": float(eset.points[k, 0]),
            "y": float(eset.points[k, 1]),
            "t": float(eset.soft_index[k]),
            "kind": ANCHOR if eset.sub_index[k] == 0 else INTERPOLATED,
            "component": component_names[int(eset.component[k])],
            "anchor_index": int(eset.anchor_index[k]),
            "sub_index": int(eset.sub_index[k]),
            "normal_angle": _num(eset.normal_angle[k]),
            "confidence": _num(eset.confidence[k]),
        })
    return {
        "format_version": FORMAT_VERSION,
        "scheme_id": eset.scheme_id,
        "density": int(eset.density),
        "label": label,
        "components": list(component_names),
        "points": points,
    }


def dumps_enriched(eset: EnrichedLandmarkSet, label: Optional[str] = None, scheme=None) -> str:
    scheme = load_scheme(scheme or eset.scheme_id)
    doc = enriched_to_document(eset, [c.name for c in scheme.components], label)
    points = doc.pop("points")
    head = json.dumps(doc, separators=(", ", ": "))[:-1]
    body = ",\n".join(json.dumps(p, separators=(", ", ": ")) for p in points)
    return f'{head}, "points": [\n{body}\n]}}\n'


def write_enriched(path, eset: EnrichedLandmarkSet, label: Optional[str] = None, scheme=None) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps_enriched(eset, label, scheme))


def document_to_enriched(doc: dict, validate_count: bool = True, scheme=None) -> EnrichedLandmarkSet:
    try:
        jsonschema.validate(doc, ENRICHED_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ValidationError(f"invalid enriched landmark file: {exc.message}") from exc
    names = doc["components"]
    pts = doc["points"]
    try:
        comp = np.array([names.index(p["component"]) for p in pts], dtype=int)
    except ValueError as exc:
        raise ValidationError(f"point refers to an undeclared component: {exc}") from exc
    if validate_count:
        if scheme is None and doc["scheme_id"] in shipped_schemes():
            scheme = doc["scheme_id"]
        if scheme is not None:
            expected = enriched_count(load_scheme(scheme), doc["density"])
            if expected != len(pts):
                raise ValidationError(f"{len(pts)} points but {doc['scheme_id']} at D={doc['density']} "
                                      f"has {expected}")
    nan_or = lambda v: np.nan if v is None else v  # noqa: E731
    return EnrichedLandmarkSet(
        scheme_id=doc["scheme_id"],
        density=doc["density"],
        points=np.array([[p["x"], p["y"]] for p in pts], dtype=float).reshape(-1, 2),
        soft_index=np.array([p["t"] for p in pts], dtype=float),
        normal_angle=np.array([nan_or(p["normal_angle"]) for p in pts], dtype=float),
        component=comp,
        anchor_index=np.array([p["anchor_index"] for p in pts], dtype=int),
        sub_index=np.array([p["sub_index"] for p in pts], dtype=int),
        confidence=np.array([nan_or(p["confidence"]) for p in pts], dtype=float),
    )


def read_enriched(path, validate_count: bool = True, scheme=None) -> EnrichedLandmarkSet:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: bad JSON: {exc}") from exc
    return document_to_enriched(doc, validate_count, scheme)


def read_label(path) -> Optional[str]:
    return json.loads(Path(path).read_text()).get("label")
