"""Trainable offset regressor and landmark refinement."""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict
from typing import Optional, Sequence

import numpy as np
import torch
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..data_io.schemes import load_scheme
from ..enrichment import EnrichedLandmarkSet, initialize_enriched
from ..exceptions import ConfigurationError, TrainingError
from ..patches import AugmentConfig, FaceImage, PatchSpec, augment_batch, extract_patches, generate_offset
from ..quality import QualityModel, patch_raw_score
from .network import OffsetNet, weighted_loss

log = logging.getLogger(__name__)

_DTYPES = {"float32": torch.float32, "float64": torch.float64}


def as_face_image(image, landmarks=None, reference_size=1024.0) -> FaceImage:
    if isinstance(image, FaceImage):
        return image
    if landmarks is None:
        return FaceImage(np.asarray(image, dtype=float), reference_size=reference_size,
                         face_size=reference_size)
    return FaceImage.from_landmarks(np.asarray(image, dtype=float), landmarks, reference_size)


def anchor_items(images: Sequence[FaceImage], landmarks, scheme):
    """Per-anchor training items: image index, center, normal angle, soft index."""
    img_idx, centers, angles, t = [], [], [], []
    for k, pts in enumerate(landmarks):
        e = initialize_enriched(pts, scheme, 1)
        keep = ~e.isolated
        img_idx.append(np.full(keep.sum(), k))
        centers.append(e.points[keep])
        angles.append(e.normal_angle[keep])
        t.append(e.soft_index[keep])
    return (np.concatenate(img_idx), np.concatenate(centers), np.concatenate(angles), np.concatenate(t))


def displaced_patches(images, img_idx, centers, angles, offsets, spec: PatchSpec) -> np.ndarray:
    """Patches centered ``offset`` reference pixels along each landmark normal."""
    out = np.empty((len(img_idx), spec.size, spec.size))
    for k in np.unique(img_idx):
        sel = np.flatnonzero(img_idx == k)
        img = images[k]
        normal = np.stack([np.cos(angles[sel]), np.sin(angles[sel])], axis=-1)
        moved = centers[sel] + (offsets[sel] * img.scale)[:, None] * normal
        out[sel] = extract_patches(img, moved, angles[sel], spec)
    return out


class OffsetRegressor(BaseEstimator):
    """Regress the signed offset from a patch center back to its contour.

    Trained on anchor landmarks that are pushed along their normals by a
    random offset; the target is the negated offset, so adding the prediction
    to a landmark moves it onto the contour. The fitted quality model is
    stored with the network and reused at prediction time.

    Parameters
    ----------
    scheme : str
        Shipped scheme id or path to a scheme file.
    patch_size, reference_size : int
        Patch side and aligned face size, both in reference pixels.
    k : int
        Channel blocks per anchor in the index embedding.
    widths : tuple of int
        Channels of the first two encoder stages.
    lr_milestones : tuple of float
        Fractions of ``epochs`` at which the learning rate is multiplied by
        ``lr_decay``.
    augment : AugmentConfig
    seed : int
    """

    def __init__(self, scheme="300w-68", patch_size=64, reference_size=1024, k=1, widths=(16, 32),
                 hidden=64, temperature=1.0, epochs=20, batch_size=68, learning_rate=1e-3,
                 lr_milestones=(0.5, 0.75, 0.9), lr_decay=0.1, augment=AugmentConfig(),
                 quality_eps=1e-6, dtype="float32", seed=0, verbose=False):
        self.scheme = scheme
        self.patch_size = patch_size
        self.reference_size = reference_size
        self.k = k
        self.widths = widths
        self.hidden = hidden
        self.temperature = temperature
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.lr_milestones = lr_milestones
        self.lr_decay = lr_decay
        self.augment = augment
        self.quality_eps = quality_eps
        self.dtype = dtype
        self.seed = seed
        self.verbose = verbose

    @property
    def patch_spec(self) -> PatchSpec:
        return PatchSpec(self.patch_size, self.reference_size)

    def config_dict(self) -> dict:
        params = self.get_params()
        params["widths"] = list(params["widths"])
        params["lr_milestones"] = list(params["lr_milestones"])
        params["augment"] = asdict(params["augment"])
        params["scheme"] = str(params["scheme"])
        return params

    def config_hash(self) -> str:
        cfg = self.config_dict()
        cfg.pop("verbose", None)
        blob = json.dumps(cfg, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def _validate(self):
        if self.batch_size < 1:
            raise ConfigurationError("batch size must be >= 1")
        if self.learning_rate <= 0 or self.lr_decay <= 0:
            raise ConfigurationError("learning rates must be positive")
        if self.epochs < 1:
            raise ConfigurationError("epochs must be >= 1")
        if self.dtype not in _DTYPES:
            raise ConfigurationError(f"dtype must be one of {sorted(_DTYPES)}")

    def build_network(self, n_anchors: int) -> OffsetNet:
        net = OffsetNet(n_anchors, self.patch_size, self.k, tuple(self.widths), self.hidden, self.temperature)
        return net.to(_DTYPES[self.dtype])

    def _prepare(self, X, y):
        if len(X) == 0 or len(X) != len(y):
            raise ConfigurationError("need a non-empty corpus with one landmark array per image")
        images = [as_face_image(img, pts, self.reference_size) for img, pts in zip(X, y)]
        landmarks = [np.asarray(pts, dtype=float) for pts in y]
        return images, landmarks

    def fit(self, X, y, quality_model: Optional[QualityModel] = None):
        """Train on face images ``X`` with sparse anchor landmarks ``y``."""
        self._validate()
        scheme = load_scheme(self.scheme)
        spec = self.patch_spec
        images, landmarks = self._prepare(X, y)
        img_idx, centers, angles, t = anchor_items(images, landmarks, scheme)
        n_items = len(img_idx)

        seeds = np.random.SeedSequence(self.seed).spawn(self.epochs + 1)
        if quality_model is None:
            rng = np.random.default_rng(seeds[0])
            offsets = generate_offset(rng, spec, n_items)
            patches = augment_batch(displaced_patches(images, img_idx, centers, angles, offsets, spec),
                                    rng, self.augment)
            quality_model = QualityModel(eps=self.quality_eps).fit(patch_raw_score(patches, self.quality_eps))
        self.quality_model_ = quality_model

        torch.manual_seed(self.seed)
        dtype = _DTYPES[self.dtype]
        net = self.build_network(scheme.n_points)
        optimizer = torch.optim.Adam(net.parameters(), lr=self.learning_rate)
        milestones = sorted({max(1, int(round(f * self.epochs))) for f in self.lr_milestones})
        schedule = torch.optim.lr_scheduler.MultiStepLR(optimizer, milestones, gamma=self.lr_decay)

        self.loss_history_ = []
        self.batch_losses_ = []
        last_finite = None
        for epoch in range(self.epochs):
            rng = np.random.default_rng(seeds[epoch + 1])
            order = rng.permutation(n_items)
            net.train()
            total, count = 0.0, 0
            for start in range(0, n_items, self.batch_size):
                idx = order[start:start + self.batch_size]
                offsets = generate_offset(rng, spec, len(idx))
                patches = displaced_patches(images, img_idx[idx], centers[idx], angles[idx], offsets, spec)
                patches = augment_batch(patches, rng, self.augment)
                weights = quality_model.score_patches(patches)
                pred, _ = net(torch.as_tensor(patches, dtype=dtype), torch.as_tensor(t[idx], dtype=dtype))
                loss = weighted_loss(pred, torch.as_tensor(-offsets, dtype=dtype),
                                     torch.as_tensor(weights, dtype=dtype))
                value = float(loss.detach())
                if not np.isfinite(value):
                    raise TrainingError("training loss diverged", {
                        "epoch": epoch, "batch": start // self.batch_size,
                        "lr": optimizer.param_groups[0]["lr"], "last_finite_loss": last_finite})
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                last_finite = value
                self.batch_losses_.append(value)
                total += value * len(idx)
                count += len(idx)
            schedule.step()
            self.loss_history_.append(total / count)
            if self.verbose:
                log.info("epoch %d/%d loss %.5f", epoch + 1, self.epochs, self.loss_history_[-1])
        net.eval()
        self.network_ = net
        self.n_anchors_ = scheme.n_points
        self.scheme_id_ = scheme.scheme_id
        return self

    def _forward(self, patches, t, batch: int = 512):
        check_is_fitted(self, "network_")
        patches = np.asarray(patches, dtype=float)
        if patches.ndim == 2:
            patches = patches[None]
        t = np.array(np.broadcast_to(np.asarray(t, dtype=float), (len(patches),)))
        dtype = next(self.network_.parameters()).dtype
        offsets, maps = [], []
        with torch.no_grad():
            for s in range(0, len(patches), batch):
                o, h = self.network_(torch.as_tensor(patches[s:s + batch], dtype=dtype),
                                     torch.as_tensor(t[s:s + batch], dtype=dtype))
                offsets.append(o.double().numpy())
                maps.append(h.double().numpy())
        if not offsets:
            return np.zeros(0), np.zeros((0, self.patch_size))
        return np.concatenate(offsets), np.concatenate(maps)

    def predict(self, patches, t) -> np.ndarray:
        """Offsets in reference pixels along the patch x-axis."""
        return self._forward(patches, t)[0]

    def predict_heatmap(self, patches, t) -> np.ndarray:
        return self._forward(patches, t)[1]

    def score_quality(self, patches) -> np.ndarray:
        check_is_fitted(self, "quality_model_")
        return self.quality_model_.score_patches(patches)

    def offset_error(self, X, y, seed: int = 0) -> dict:
        """Mean error of regressed vs random offsets on displaced anchor patches."""
        scheme = load_scheme(self.scheme)
        spec = self.patch_spec
        images, landmarks = self._prepare(X, y)
        img_idx, centers, angles, t = anchor_items(images, landmarks, scheme)
        rng = np.random.default_rng(seed)
        offsets = generate_offset(rng, spec, len(img_idx))
        patches = displaced_patches(images, img_idx, centers, angles, offsets, spec)
        pred = self.predict(patches, t)
        return {
            "regressed_me": float(np.mean(np.abs(pred + offsets))),
            "random_me": float(np.mean(np.abs(offsets))),
            "n": int(len(offsets)),
        }


def refine(enriched: EnrichedLandmarkSet, image, model: OffsetRegressor) -> EnrichedLandmarkSet:
    """Move each contour point along its normal by confidence times regressed offset."""
    check_is_fitted(model, "network_")
    if enriched.scheme_id != model.scheme_id_:
        raise ConfigurationError(f"model was trained for {model.scheme_id_}, landmarks are {enriched.scheme_id}")
    if not isinstance(image, FaceImage):
        image = as_face_image(image, enriched.anchors(), model.reference_size)
    spec = model.patch_spec
    active = np.flatnonzero(~enriched.isolated)
    points = enriched.points.copy()
    confidence = np.full(len(points), np.nan)
    if len(active):
        angles = enriched.normal_angle[active]
        patches = extract_patches(image, points[active], angles, spec)
        offsets = model.predict(patches, enriched.soft_index[active])
        sbar = model.score_quality(patches)
        normal = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
        points[active] = points[active] + ((sbar * offsets) * image.scale)[:, None] * normal
        confidence[active] = sbar
    return enriched.with_points(points, confidence)
