"""Offset generation, normal-aligned patch extraction and augmentation.

Patch column ``c`` and row ``r`` map to the image point::

    center + (c - (s-1)/2) * scale * normal + (r - (s-1)/2) * scale * tangent

with ``normal = (cos a, sin a)`` and ``tangent = (-sin a, cos a)``, so the
patch x-axis runs along the landmark normal. ``scale`` is image pixels per
reference-frame pixel, which fuses face alignment into the same resampling.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter

from .exceptions import ConfigurationError

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class PatchSpec:
    size: int = 64
    reference_size: int = 1024

    def __post_init__(self):
        if self.size < 8 or self.size % 2:
            raise ConfigurationError(f"patch size must be even and >= 8, got {self.size}")
        if self.reference_size <= 0:
            raise ConfigurationError("reference face size must be positive")

    @property
    def patch_face_ratio(self) -> float:
        return self.size / self.reference_size

    @property
    def offset_bound(self) -> float:
        return self.size / 8


@dataclass(frozen=True, eq=False)
class FaceImage:
    """Grayscale image in [0, 1] plus the size of the face it holds.

    ``face_size`` is the side of the annotation bounding region in image
    pixels; it maps onto ``reference_size`` pixels of the aligned frame.
    """

    pixels: np.ndarray
    face_size: float = 1024.0
    reference_size: float = 1024.0

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or 0 in px.shape:
            raise ConfigurationError("image must be a non-empty 2-D grayscale array")
        if not np.all(np.isfinite(px)):
            raise ConfigurationError("image intensities must be finite")
        if self.face_size <= 0:
            raise ConfigurationError("face size must be positive")

    @classmethod
    def from_landmarks(cls, pixels, landmarks, reference_size=1024.0):
        pts = np.asarray(landmarks, dtype=float)
        extent = float(np.ptp(pts, axis=0).max())
        return cls(np.asarray(pixels), face_size=max(extent, 1e-6), reference_size=reference_size)

    @property
    def scale(self) -> float:
        return self.face_size / self.reference_size

    @property
    def shape(self):
        return self.pixels.shape


@dataclass(frozen=True, eq=False)
class Patch:
    pixels: np.ndarray
    soft_index: float
    normal_angle: float
    center: Tuple[float, float]
    source: Optional[int] = None


def to_grayscale(rgb) -> np.ndarray:
    arr = np.asarray(rgb, dtype=float)
    if arr.ndim == 2:
        return arr
    return arr[..., :3] @ np.asarray(LUMA_WEIGHTS)


def generate_offset(rng: np.random.Generator, spec: PatchSpec, size=None):
    """Signed offset(s) along the normal, uniform in (-s/8, +s/8)."""
    b = spec.offset_bound
    return rng.uniform(-b, b, size=size)


def sample_bilinear(image, x, y) -> np.ndarray:
    """Bilinear lookup at float pixel coordinates with edge replication."""
    img = np.asarray(image)
    h, w = img.shape
    x = np.clip(x, 0.0, w - 1.0)
    y = np.clip(y, 0.0, h - 1.0)
    x0 = np.floor(x).astype(np.intp)
    y0 = np.floor(y).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bottom = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    return top * (1 - fy) + bottom * fy


def extract_patches(image, centers, angles, spec: PatchSpec, scale: Optional[float] = None) -> np.ndarray:
    """Normalized patches of shape ``(m, s, s)`` for ``m`` centers."""
    if isinstance(image, FaceImage):
        scale = image.scale if scale is None else scale
        pixels = image.pixels
    else:
        pixels = np.asarray(image)
        scale = 1.0 if scale is None else scale
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    s = spec.size
    grid = (np.arange(s) - (s - 1) / 2.0) * scale
    cos, sin = np.cos(angles)[:, None, None], np.sin(angles)[:, None, None]
    along = grid[None, None, :]   # columns follow the normal
    across = grid[None, :, None]  # rows follow the tangent
    x = centers[:, 0, None, None] + along * cos - across * sin
    y = centers[:, 1, None, None] + along * sin + across * cos
    return sample_bilinear(pixels, x, y)


def extract_normalized_patch(image, center, normal_angle, spec: PatchSpec, soft_index=0.0,
                             scale: Optional[float] = None) -> Patch:
    pixels = extract_patches(image, [center], [normal_angle], spec, scale)[0]
    return Patch(pixels, float(soft_index), float(normal_angle), (float(center[0]), float(center[1])))


@dataclass(frozen=True)
class AugmentConfig:
    gray_prob: float = 0.3
    gray_scale: Tuple[float, float] = (0.6, 1.4)
    gray_shift: Tuple[float, float] = (-0.2, 0.2)
    blur_prob: float = 0.3
    blur_sigma: Tuple[float, float] = (0.0, 2.0)
    occlusion_prob: float = 0.2
    occlusion_max_fraction: float = 0.4

    def __post_init__(self):
        for p in (self.gray_prob, self.blur_prob, self.occlusion_prob):
            if not 0.0 <= p <= 1.0:
                raise ConfigurationError(f"augmentation probability {p} outside [0, 1]")
        if not 0.0 < self.occlusion_max_fraction <= 1.0:
            raise ConfigurationError("occlusion fraction must lie in (0, 1]")


NO_AUGMENT = AugmentConfig(gray_prob=0.0, blur_prob=0.0, occlusion_prob=0.0)


def occlude(pixels, rect, fill) -> np.ndarray:
    """Fill ``rect = (x0, y0, width, height)`` with a constant."""
    out = np.array(pixels, dtype=float)
    x0, y0, w, h = rect
    out[y0:y0 + h, x0:x0 + w] = fill
    return out


def augment(pixels, rng: np.random.Generator, config: AugmentConfig = AugmentConfig()) -> np.ndarray:
    """Random gray, blur and occlusion; the result is clamped to [0, 1]."""
    out = np.array(pixels, dtype=float)
    h, w = out.shape
    if config.gray_prob and rng.random() < config.gray_prob:
        out = out * rng.uniform(*config.gray_scale) + rng.uniform(*config.gray_shift)
    if config.blur_prob and rng.random() < config.blur_prob:
        sigma = rng.uniform(*config.blur_sigma)
        if sigma > 0:
            out = gaussian_filter(out, sigma, mode="nearest")
    if config.occlusion_prob and rng.random() < config.occlusion_prob:
        frac = rng.uniform(0.05, config.occlusion_max_fraction)
        aspect = np.exp(rng.uniform(-0.7, 0.7))
        area = frac * h * w
        rw = int(np.clip(round(np.sqrt(area * aspect)), 1, w))
        rh = int(np.clip(round(area / rw), 1, h))
        x0 = int(rng.integers(0, w - rw + 1))
        y0 = int(rng.integers(0, h - rh + 1))
        out = occlude(out, (x0, y0, rw, rh), rng.random())
    return np.clip(out, 0.0, 1.0)


def augment_batch(patches, rng: np.random.Generator, config: AugmentConfig = AugmentConfig()) -> np.ndarray:
    return np.stack([augment(p, rng, config) for p in patches]) if len(patches) else np.asarray(patches)
