"""The ``.pts`` landmark text format used by 300W-style datasets.

::

    version: 1
    n_points: 68
    {
    446.000 91.000
    ...
    }

Coordinates are kept exactly as written. 300W files count pixels from 1;
pass ``one_based=True`` to shift them to the 0-based pixel-center convention
used everywhere else in the package (and back on writing).
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..exceptions import ParseError

_HEADER = re.compile(r"^([A-Za-z_]+)\s*:\s*(\S+)$")


@dataclass(frozen=True, eq=False)
class PtsAnnotation:
    points: np.ndarray
    version: int = 1

    @property
    def n_points(self) -> int:
        return len(self.points)


def parse_pts(text: str, one_based: bool = False) -> PtsAnnotation:
    header = {}
    points = []
    state = "header"
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if state == "header":
            if line == "{":
                state = "body"
                continue
            m = _HEADER.match(line)
            if not m:
                raise ParseError(f"malformed header line {raw!r}", lineno)
            key, value = m.group(1).lower(), m.group(2)
            try:
                header[key] = int(float(value)) if key in ("version", "n_points") else value
            except ValueError:
                raise ParseError(f"bad value for {key}: {value!r}", lineno) from None
        elif state == "body":
            if line == "}":
                state = "done"
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(f"expected two coordinates, got {raw!r}", lineno)
            try:
                points.append((float(parts[0]), float(parts[1])))
            except ValueError:
                raise ParseError(f"non-numeric coordinate in {raw!r}", lineno) from None
        else:
            raise ParseError("content after closing brace", lineno)
    if "n_points" not in header:
        raise ParseError("missing n_points header")
    if state != "done":
        raise ParseError("missing closing brace" if state == "body" else "missing opening brace")
    if len(points) != header["n_points"]:
        raise ParseError(f"n_points says {header['n_points']} but {len(points)} coordinates were found")
    pts = np.array(points, dtype=float).reshape(-1, 2)
    if one_based:
        pts = pts - 1.0
    return PtsAnnotation(pts, int(header.get("version", 1)))


def format_pts(annotation, one_based: bool = False) -> str:
    if not isinstance(annotation, PtsAnnotation):
        annotation = PtsAnnotation(np.asarray(annotation, dtype=float))
    pts = np.asarray(annotation.points, dtype=float)
    if one_based:
        pts = pts + 1.0
    lines = [f"version: {annotation.version}", f"n_points: {len(pts)}", "{"]
    lines += [f"{float(x)!r} {float(y)!r}" for x, y in pts]
    lines.append("}")
    return "\n".join(lines) + "\n"


def read_pts(path, one_based: bool = False) -> PtsAnnotation:
    return parse_pts(Path(path).read_text(), one_based)


def write_pts(path, points, one_based: bool = False) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(format_pts(points, one_based))
