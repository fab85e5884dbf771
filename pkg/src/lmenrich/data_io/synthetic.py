"""Synthetic faces with analytic contours, used as desk-scale ground truth.

Each 300W-68 component is drawn as the boundary of a filled ellipse (or a
box for the nose bridge) so every anchor and every dense oracle point lies
exactly on a rendered intensity edge. Edges are anti-aliased analytically:
coverage is ``Phi(-d / sigma)`` of the signed distance ``d``, which is what a
Gaussian blur of an ideal straight edge gives.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import ndtr

from ..exceptions import ConfigurationError
from ..patches import FaceImage
from .images import save_image
from .pts import write_pts
from .schemes import load_scheme

SCENE_FORMAT_VERSION = 1
SUPPORTED_SCHEMES = ("300w-68",)


@dataclass(frozen=True)
class SceneConfig:
    canvas: int = 512
    face_scale: Tuple[float, float] = (360.0, 440.0)
    rotation_deg: Tuple[float, float] = (-15.0, 15.0)
    center_jitter: float = 16.0
    blur: Tuple[float, float] = (0.6, 1.4)
    noise: Tuple[float, float] = (0.0, 0.03)
    shape_jitter: float = 0.08
    anchor_jitter: float = 0.15
    scheme_id: str = "300w-68"

    def __post_init__(self):
        if self.scheme_id not in SUPPORTED_SCHEMES:
            raise ConfigurationError(f"synthetic scenes support {SUPPORTED_SCHEMES}, not {self.scheme_id!r}")
        if self.canvas < 64:
            raise ConfigurationError("canvas must be at least 64 pixels")


@dataclass(frozen=True, eq=False)
class AnalyticContour:
    """Ellipse arc/loop or straight segment in image coordinates.

    ``params`` are the anchor parameters: angles for ellipses, fractions in
    [0, 1] along ``p0 -> p1`` for lines.
    """

    component: str
    kind: str
    params: np.ndarray
    closed: bool = False
    center: Tuple[float, float] = (0.0, 0.0)
    axes: Tuple[float, float] = (1.0, 1.0)
    angle: float = 0.0
    p0: Tuple[float, float] = (0.0, 0.0)
    p1: Tuple[float, float] = (0.0, 0.0)

    def point(self, param) -> np.ndarray:
        s = np.asarray(param, dtype=float)
        if self.kind == "line":
            p0, p1 = np.asarray(self.p0), np.asarray(self.p1)
            return p0 + s[..., None] * (p1 - p0)
        a, b = self.axes
        local = np.stack([a * np.cos(s), b * np.sin(s)], axis=-1)
        c, sn = np.cos(self.angle), np.sin(self.angle)
        rot = np.array([[c, -sn], [sn, c]])
        return np.asarray(self.center) + local @ rot.T

    def segment_params(self) -> np.ndarray:
        """Anchor parameters with the closing anchor appended for loops."""
        p = np.asarray(self.params, dtype=float)
        if self.closed:
            return np.append(p, p[0] + 2 * np.pi)
        return p

    def dense_params(self, density: int) -> np.ndarray:
        """Oracle parameters in enrichment order: each anchor, then its D-1 followers."""
        seg = self.segment_params()
        n = len(self.params)
        n_seg = n if self.closed else n - 1
        out = []
        for i in range(n):
            out.append(seg[i])
            if i < n_seg:
                for j in range(1, density):
                    out.append(seg[i] + (j / density) * (seg[i + 1] - seg[i]))
        return np.array(out)

    def polyline(self, step: float = 0.05) -> np.ndarray:
        """Dense samples of the true curve between its first and last anchor."""
        seg = self.segment_params()
        lo, hi = seg[0], seg[-1]
        coarse = self.point(np.linspace(lo, hi, 64))
        length = np.sum(np.linalg.norm(np.diff(coarse, axis=0), axis=1))
        n = max(2, int(np.ceil(length / step)) + 1)
        return self.point(np.linspace(lo, hi, n))

    def to_dict(self) -> dict:
        d = {"component": self.component, "kind": self.kind, "closed": self.closed,
             "params": [float(v) for v in self.params]}
        if self.kind == "line":
            d.update(p0=[float(v) for v in self.p0], p1=[float(v) for v in self.p1])
        else:
            d.update(center=[float(v) for v in self.center], axes=[float(v) for v in self.axes],
                     angle=float(self.angle))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AnalyticContour":
        kw = dict(component=d["component"], kind=d["kind"], closed=d["closed"],
                  params=np.asarray(d["params"], dtype=float))
        if d["kind"] == "line":
            kw.update(p0=tuple(d["p0"]), p1=tuple(d["p1"]))
        else:
            kw.update(center=tuple(d["center"]), axes=tuple(d["axes"]), angle=d["angle"])
        return cls(**kw)


@dataclass(frozen=True, eq=False)
class SyntheticScene:
    seed: int
    scheme_id: str
    image: np.ndarray
    contours: List[AnalyticContour]
    blur: float = 1.0
    noise: float = 0.0
    config: Optional[SceneConfig] = field(default=None, repr=False)

    @property
    def anchors(self) -> np.ndarray:
        return np.concatenate([c.point(c.params) for c in self.contours])

    def face_image(self, reference_size: float = 1024.0) -> FaceImage:
        return FaceImage.from_landmarks(self.image, self.anchors, reference_size)

    def oracle_points(self, density: int) -> np.ndarray:
        return np.concatenate([c.point(c.dense_params(density)) for c in self.contours])

    def oracle_polylines(self, step: float = 0.05) -> List[np.ndarray]:
        return [c.polyline(step) for c in self.contours]

    def metadata(self) -> dict:
        return {"format_version": SCENE_FORMAT_VERSION, "seed": int(self.seed), "scheme_id": self.scheme_id,
                "blur": float(self.blur), "noise": float(self.noise),
                "contours": [c.to_dict() for c in self.contours]}


# Face-frame layout (unit = face scale, y down). Each entry: component,
# shape kind, center, axes (or box half sizes), anchor parameters, closed.
def _deg(a):
    return np.deg2rad(np.asarray(a, dtype=float))


_LAYOUT = [
    ("facial_contour", "ellipse", (0.0, 0.05), (0.42, 0.52), _deg(np.linspace(170, 10, 17)), False),
    ("eyebrow_right", "ellipse", (-0.2, -0.2), (0.12, 0.03), _deg(np.linspace(200, 340, 5)), False),
    ("eyebrow_left", "ellipse", (0.2, -0.2), (0.12, 0.03), _deg(np.linspace(200, 340, 5)), False),
    ("nose_middle_line", "line", (0.0, -0.1), (0.0, 0.08), np.linspace(0.0, 1.0, 4), False),
    ("nose_bottom_line", "ellipse", (0.0, 0.13), (0.09, 0.035), _deg(np.linspace(160, 20, 5)), False),
    ("eye_right", "ellipse", (-0.18, -0.08), (0.075, 0.032), _deg(180 + 60 * np.arange(6)), True),
    ("eye_left", "ellipse", (0.18, -0.08), (0.075, 0.032), _deg(180 + 60 * np.arange(6)), True),
    ("lip_outer", "ellipse", (0.0, 0.3), (0.16, 0.065), _deg(180 + 30 * np.arange(12)), True),
    ("lip_inner", "ellipse", (0.0, 0.3), (0.10, 0.022), _deg(180 + 45 * np.arange(8)), True),
]
_FRAME_CENTER = np.array([0.0, 0.16])  # landmark bounding-box center in the face frame
_NOSE_BOX = ((0.0175, -0.01), (0.0175, 0.11))  # center, half sizes; left edge is the nose line


def _ellipse_sd(x, y, center, axes, angle):
    c, s = np.cos(angle), np.sin(angle)
    dx, dy = x - center[0], y - center[1]
    lx = c * dx + s * dy
    ly = -s * dx + c * dy
    a, b = axes
    r = np.sqrt((lx / a) ** 2 + (ly / b) ** 2)
    grad = np.sqrt((lx / a ** 2) ** 2 + (ly / b ** 2) ** 2)
    safe = np.maximum(grad, 1e-12)
    sd = np.where(r > 1e-9, (r - 1.0) * r / safe, -min(a, b))
    return sd


def _box_sd(x, y, center, half, angle):
    c, s = np.cos(angle), np.sin(angle)
    dx, dy = x - center[0], y - center[1]
    qx = np.abs(c * dx + s * dy) - half[0]
    qy = np.abs(-s * dx + c * dy) - half[1]
    outside = np.hypot(np.maximum(qx, 0), np.maximum(qy, 0))
    return outside + np.minimum(np.maximum(qx, qy), 0)


def _paint(img, sd_fn, bbox, value, sigma):
    h, w = img.shape
    x0, y0, x1, y1 = bbox
    margin = 5 * sigma + 2
    x0, y0 = max(int(np.floor(x0 - margin)), 0), max(int(np.floor(y0 - margin)), 0)
    x1, y1 = min(int(np.ceil(x1 + margin)) + 1, w), min(int(np.ceil(y1 + margin)) + 1, h)
    if x0 >= x1 or y0 >= y1:
        return
    yy, xx = np.mgrid[y0:y1, x0:x1].astype(float)
    cover = ndtr(-sd_fn(xx, yy) / sigma)
    region = img[y0:y1, x0:x1]
    img[y0:y1, x0:x1] = region * (1.0 - cover) + value * cover


def _ellipse_bbox(center, axes, angle):
    a, b = axes
    c, s = np.cos(angle), np.sin(angle)
    ex = np.hypot(a * c, b * s)
    ey = np.hypot(a * s, b * c)
    return (center[0] - ex, center[1] - ey, center[0] + ex, center[1] + ey)


def generate_scene(seed: int, config: SceneConfig = SceneConfig()) -> SyntheticScene:
    """Render one synthetic face; the same seed always gives the same pixels."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5CE4E]))
    scale = rng.uniform(*config.face_scale)
    rot = np.deg2rad(rng.uniform(*config.rotation_deg))
    offset = rng.uniform(-config.center_jitter, config.center_jitter, size=2)
    origin = np.full(2, config.canvas / 2.0) + offset
    cr, sr = np.cos(rot), np.sin(rot)
    rmat = np.array([[cr, -sr], [sr, cr]])

    def to_image(p):
        return origin + scale * (rmat @ (np.asarray(p, dtype=float) - _FRAME_CENTER))

    sigma = rng.uniform(*config.blur)
    noise = rng.uniform(*config.noise)
    jit = config.shape_jitter

    background = rng.uniform(0.05, 0.35)
    skin = rng.uniform(0.55, 0.9)
    values = {
        "facial_contour": skin,
        "eyebrow_right": rng.uniform(0.05, 0.3),
        "eye_right": rng.uniform(0.1, 0.35),
        "nose_shadow": skin - rng.uniform(0.12, 0.25),
        "nose_bottom_line": rng.uniform(0.2, 0.4),
        "lip_outer": rng.uniform(0.3, 0.5),
        "lip_inner": rng.uniform(0.0, 0.2),
    }
    values["eyebrow_left"] = values["eyebrow_right"]
    values["eye_left"] = values["eye_right"]

    contours = []
    shapes = []
    lip_center_jitter = rng.uniform(-0.01, 0.01, size=2)
    for name, kind, center, axes, params, closed in _LAYOUT:
        params = np.array(params, dtype=float)
        n = len(params)
        spacing = np.diff(params).mean() if not closed else 2 * np.pi / n
        params = params + rng.uniform(-config.anchor_jitter, config.anchor_jitter, size=n) * spacing
        if kind == "line":
            top = np.asarray(center) + rng.uniform(-0.01, 0.01, size=2) * np.array([1.0, 1.0])
            bottom = np.array([top[0], axes[1] + rng.uniform(-0.01, 0.01)])
            params = np.sort(np.clip(params, 0.0, 1.0))
            params[0], params[-1] = 0.0, 1.0
            p0, p1 = to_image(top), to_image(bottom)
            contours.append(AnalyticContour(name, "line", params, False, p0=tuple(p0), p1=tuple(p1)))
            box_c = np.array([top[0] + _NOSE_BOX[1][0], _NOSE_BOX[0][1]])
            shapes.append(("box", to_image(box_c), np.array(_NOSE_BOX[1]) * scale, rot, values["nose_shadow"]))
            continue
        c = np.asarray(center, dtype=float) + rng.uniform(-jit, jit, size=2) * 0.15
        if name.startswith("lip"):
            c = np.asarray(center, dtype=float) + lip_center_jitter
        ax = np.asarray(axes, dtype=float) * rng.uniform(1 - jit, 1 + jit, size=2)
        if name == "lip_inner":
            outer_axes = shapes[-1][2] / scale
            ax = np.minimum(ax, outer_axes * np.array([0.75, 0.55]))
        ci = to_image(c)
        axes_img = ax * scale
        contours.append(AnalyticContour(name, "ellipse", params, closed, center=tuple(ci),
                                        axes=tuple(axes_img), angle=float(rot)))
        shapes.append(("ellipse", ci, axes_img, float(rot), values[name]))

    img = np.full((config.canvas, config.canvas), background)
    # Layout order puts the face first, so every other component paints over it.
    for kind, c, ax, ang, val in shapes:
        if kind == "box":
            half = ax
            ext = np.hypot(*half)
            bbox = (c[0] - ext, c[1] - ext, c[0] + ext, c[1] + ext)
            _paint(img, lambda x, y, c=c, half=half, ang=ang: _box_sd(x, y, c, half, ang), bbox, val, sigma)
        else:
            bbox = _ellipse_bbox(c, ax, ang)
            _paint(img, lambda x, y, c=c, ax=ax, ang=ang: _ellipse_sd(x, y, c, ax, ang), bbox, val, sigma)
    if noise > 0:
        img = img + rng.normal(0.0, noise, size=img.shape)
    img = np.clip(img, 0.0, 1.0)

    scheme = load_scheme(config.scheme_id)
    if [c.component for c in contours] != [c.name for c in scheme.components]:
        raise ConfigurationError("synthetic layout does not match the scheme components")
    return SyntheticScene(int(seed), config.scheme_id, img, contours, float(sigma), float(noise), config)


def scene_from_metadata(meta: dict, image: np.ndarray) -> SyntheticScene:
    contours = [AnalyticContour.from_dict(d) for d in meta["contours"]]
    return SyntheticScene(meta["seed"], meta["scheme_id"], image, contours, meta.get("blur", 1.0),
                          meta.get("noise", 0.0))


def write_scene(directory, scene: SyntheticScene, stem: str, image_suffix: str = ".png") -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_image(directory / f"{stem}{image_suffix}", scene.image)
    write_pts(directory / f"{stem}.pts", scene.anchors)
    with open(directory / f"{stem}.scene.json", "w", newline="\n") as fh:
        json.dump(scene.metadata(), fh, indent=1)
        fh.write("\n")
    return directory / f"{stem}{image_suffix}"


def read_scene(path_json, image: Optional[np.ndarray] = None) -> SyntheticScene:
    from .images import IMAGE_SUFFIXES, load_image

    path_json = Path(path_json)
    meta = json.loads(path_json.read_text())
    if image is None:
        stem = path_json.name[: -len(".scene.json")]
        for suffix in IMAGE_SUFFIXES:
            candidate = path_json.with_name(stem + suffix)
            if candidate.exists():
                image = load_image(candidate)
                break
        else:
            raise FileNotFoundError(f"no image next to {path_json}")
    return scene_from_metadata(meta, image)


def generate_scenes(seeds: Sequence[int], config: SceneConfig = SceneConfig()) -> List[SyntheticScene]:
    return [generate_scene(s, config) for s in seeds]


def oracle_enriched(scene: SyntheticScene, density: int):
    """Exact dense ground truth with the provenance layout of an enriched set."""
    from ..enrichment import initialize_enriched

    scheme = load_scheme(scene.scheme_id)
    base = initialize_enriched(scene.anchors, scheme, density)
    return base.with_points(scene.oracle_points(density))


def oracle_edges(scene: SyntheticScene, density: int, step: float = 0.05):
    """``(edges, isolated)`` for metrics, using the analytic curves as polylines."""
    scheme = load_scheme(scene.scheme_id)
    edges, start = [], 0
    from ..enrichment import component_count

    for comp, contour in zip(scheme.components, scene.contours):
        n = component_count(comp, density)
        edges.append((np.arange(start, start + n), contour.polyline(step)))
        start += n
    return edges, []
