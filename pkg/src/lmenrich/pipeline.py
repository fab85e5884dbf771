"""Estimator-style wrapper chaining initialization and refinement."""
from __future__ import annotations

from typing import List, Optional, Sequence

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .data_io.schemes import load_scheme
from .enrichment import EnrichedLandmarkSet, initialize_enriched
from .exceptions import ConfigurationError

PLUG_MODES = ("train", "test", "train+test")


def network_label(baseline: str, density: int, mode: str = "train") -> str:
    """``BaselineNet-FE{D}`` with a ``_stage`` suffix unless the stage is train."""
    if mode not in PLUG_MODES:
        raise ConfigurationError(f"plug mode must be one of {PLUG_MODES}")
    if density < 1:
        raise ConfigurationError("density must be >= 1")
    label = f"{baseline}-FE{density}"
    return label if mode == "train" else f"{label}_{mode}"


class LandmarkEnricher(TransformerMixin, BaseEstimator):
    """Sparse anchors in, dense landmark sets out.

    Without a ``regressor`` only the geometric initialization runs. With a
    fitted :class:`~lmenrich.regressor.OffsetRegressor`, ``transform`` also
    needs the face images and refines every contour point.
    """

    def __init__(self, scheme="300w-68", density=5, fit_kind=None, regressor=None):
        self.scheme = scheme
        self.density = density
        self.fit_kind = fit_kind
        self.regressor = regressor

    def fit(self, X=None, y=None):
        self.scheme_ = load_scheme(self.scheme)
        if self.density < 1:
            raise ConfigurationError("density must be >= 1")
        return self

    def transform(self, X, images: Optional[Sequence] = None) -> List[EnrichedLandmarkSet]:
        check_is_fitted(self, "scheme_")
        out = [initialize_enriched(pts, self.scheme_, self.density, self.fit_kind) for pts in X]
        if self.regressor is None:
            return out
        if images is None or len(images) != len(out):
            raise ConfigurationError("refinement needs one image per landmark set")
        from .regressor import refine

        return [refine(e, img, self.regressor) for e, img in zip(out, images)]

    def fit_transform(self, X, y=None, images=None):
        return self.fit(X, y).transform(X, images)
