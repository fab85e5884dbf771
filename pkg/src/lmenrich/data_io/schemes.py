"""Contour scheme files (JSON, one per scheme)."""
from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import List, Union

import jsonschema

from ..exceptions import ConfigurationError, ValidationError
from ..geometry import ComponentSpec, ContourScheme

SCHEME_SCHEMA = {
    "type": "object",
    "required": ["format_version", "scheme_id", "n_points", "components"],
    "properties": {
        "format_version": {"const": 1},
        "scheme_id": {"type": "string", "minLength": 1},
        "n_points": {"type": "integer", "minimum": 1},
        "outer_eye_corners": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
        "inner_eye_corners": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
        "components": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["name", "range"],
                "properties": {
                    "name": {"type": "string"},
                    "range": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
                    "closed": {"type": "boolean"},
                    "isolated": {"type": "boolean"},
                    "fit_kind": {"enum": ["line", "bspline"]},
                    "degree": {"type": "integer", "minimum": 1},
                },
            },
        },
    },
}


def shipped_schemes() -> List[str]:
    files = resources.files("lmenrich") / "data"
    return sorted(p.name[:-5] for p in files.iterdir()
                  if p.name.endswith(".json") and not p.name.startswith("morphometrics"))


def scheme_from_dict(doc: dict) -> ContourScheme:
    try:
        jsonschema.validate(doc, SCHEME_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ValidationError(f"invalid scheme file: {exc.message}") from exc
    try:
        components = [
            ComponentSpec(
                name=c["name"],
                start=c["range"][0],
                stop=c["range"][1],
                closed=c.get("closed", False),
                isolated=c.get("isolated", False),
                fit_kind=c.get("fit_kind", "bspline"),
                degree=c.get("degree", 3),
            )
            for c in doc["components"]
        ]
        scheme = ContourScheme(
            scheme_id=doc["scheme_id"],
            components=tuple(components),
            outer_eye_corners=tuple(doc["outer_eye_corners"]) if "outer_eye_corners" in doc else None,
            inner_eye_corners=tuple(doc["inner_eye_corners"]) if "inner_eye_corners" in doc else None,
        )
    except ConfigurationError as exc:
        raise ValidationError(str(exc)) from exc
    if scheme.n_points != doc["n_points"]:
        raise ValidationError(f"n_points {doc['n_points']} does not match component ranges ({scheme.n_points})")
    return scheme


def scheme_to_dict(scheme: ContourScheme) -> dict:
    doc = {"format_version": 1, "scheme_id": scheme.scheme_id, "n_points": scheme.n_points}
    if scheme.outer_eye_corners is not None:
        doc["outer_eye_corners"] = list(scheme.outer_eye_corners)
    if scheme.inner_eye_corners is not None:
        doc["inner_eye_corners"] = list(scheme.inner_eye_corners)
    doc["components"] = [
        {"name": c.name, "range": [c.start, c.stop], "closed": c.closed, "isolated": c.isolated,
         "fit_kind": c.fit_kind, "degree": c.degree}
        for c in scheme.components
    ]
    return doc


@lru_cache(maxsize=None)
def _shipped(scheme_id: str) -> ContourScheme:
    path = resources.files("lmenrich") / "data" / f"{scheme_id}.json"
    return scheme_from_dict(json.loads(path.read_text()))


def load_scheme(source: Union[str, Path, ContourScheme]) -> ContourScheme:
    """Load a scheme by shipped id (``"300w-68"``) or from a JSON file path."""
    if isinstance(source, ContourScheme):
        return source
    text = str(source)
    if text in shipped_schemes():
        return _shipped(text)
    path = Path(text)
    if not path.exists():
        raise ConfigurationError(f"unknown scheme {text!r}; shipped: {', '.join(shipped_schemes())}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: bad JSON: {exc}") from exc
    return scheme_from_dict(doc)
