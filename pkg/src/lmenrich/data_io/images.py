"""Image ingestion (PNG/PGM and anything Pillow reads) and writing."""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from ..patches import to_grayscale

IMAGE_SUFFIXES = (".png", ".pgm", ".jpg", ".jpeg", ".bmp")
DATA_ROOT_ENV = "LMENRICH_DATA_ROOT"


def resolve_path(path) -> Path:
    """Relative paths that do not exist resolve against ``$LMENRICH_DATA_ROOT``."""
    p = Path(path)
    root = os.environ.get(DATA_ROOT_ENV)
    if not p.is_absolute() and not p.exists() and root:
        return Path(root) / p
    return p


def load_image(path) -> np.ndarray:
    """Grayscale float image in [0, 1]; color converts with fixed luma weights."""
    with Image.open(path) as im:
        if im.mode in ("I;16", "I;16B", "I"):
            arr = np.asarray(im, dtype=float)
            return arr / (65535.0 if arr.max() > 255 else 255.0)
        if im.mode not in ("L", "RGB", "RGBA"):
            im = im.convert("RGB")
        arr = np.asarray(im, dtype=float) / 255.0
    return to_grayscale(arr)


def to_uint8(pixels) -> np.ndarray:
    return np.clip(np.rint(np.asarray(pixels, dtype=float) * 255.0), 0, 255).astype(np.uint8)


def save_image(path, pixels) -> None:
    Image.fromarray(to_uint8(pixels), mode="L").save(path)


def save_overlay(path, pixels, points, anchor_mask=None, radius=1.5) -> None:
    """RGB copy of the image with landmarks drawn; same size as the input."""
    gray = to_uint8(pixels)
    im = Image.fromarray(np.stack([gray] * 3, axis=-1), mode="RGB")
    draw = ImageDraw.Draw(im)
    pts = np.asarray(points, dtype=float)
    if anchor_mask is None:
        anchor_mask = np.zeros(len(pts), dtype=bool)
    for (x, y), is_anchor in zip(pts, anchor_mask):
        color = (255, 64, 64) if is_anchor else (64, 255, 64)
        draw.ellipse([x - radius, y - radius, x + radius, y + radius], fill=color)
    im.save(path)


def list_samples(directory, pattern_suffix=".pts"):
    """``(stem, image_path, annotation_path)`` for every annotated image, sorted by stem."""
    directory = resolve_path(directory)
    out = []
    for ann in sorted(directory.glob(f"*{pattern_suffix}")):
        stem = ann.name[: -len(pattern_suffix)]
        image = next((directory / f"{stem}{s}" for s in IMAGE_SUFFIXES if (directory / f"{stem}{s}").exists()), None)
        out.append((stem, image, ann))
    return out
