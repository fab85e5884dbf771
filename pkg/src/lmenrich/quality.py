"""Patch reliability: directional variance ratio normalized by an empirical CDF."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import ConfigurationError

DEFAULT_EPS = 1e-6


def _spreads(patch, eps):
    p = np.asarray(patch, dtype=float)
    return p.sum(axis=-2).std(axis=-1) + eps, p.sum(axis=-1).std(axis=-1) + eps


def variance_ratio(patch, eps: float = DEFAULT_EPS):
    """Spread of column sums over spread of row sums.

    Works on a single ``(h, w)`` patch or a ``(..., h, w)`` stack. A clear
    boundary running down the patch (across the normal axis) gives ``V >> 1``.
    """
    col, row = _spreads(patch, eps)
    return col / row


def raw_score(v):
    """Map ``V`` in (0, inf) to a signed score, antisymmetric under ``V -> 1/V``."""
    v = np.asarray(v, dtype=float)
    with np.errstate(divide="ignore"):
        s = np.where(v >= 1.0, v - 1.0, 1.0 - 1.0 / v)
    return s if s.ndim else float(s)


def patch_raw_score(patch, eps: float = DEFAULT_EPS):
    """``raw_score(variance_ratio(patch))`` evaluated so that transposing negates it bit-exactly."""
    col, row = _spreads(patch, eps)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(col >= row, (col - row) / row, (col - row) / col)
    return s if s.ndim else float(s)


class QualityModel(TransformerMixin, BaseEstimator):
    """Empirical CDF over raw scores of a training corpus.

    ``transform`` returns the fraction of corpus scores strictly below each
    input score, found by binary search over the sorted corpus.

    Parameters
    ----------
    eps : float
        Floor added to both standard deviations of the variance ratio.
    """

    def __init__(self, eps=DEFAULT_EPS):
        self.eps = eps

    def fit(self, X, y=None):
        scores = np.asarray(X, dtype=float).ravel()
        if scores.size == 0:
            raise ConfigurationError("cannot fit a quality model on an empty corpus")
        if not np.all(np.isfinite(scores)):
            raise ConfigurationError("raw scores must be finite")
        self.scores_ = np.sort(scores, kind="stable")
        self.n_scores_ = scores.size
        return self

    def transform(self, X):
        check_is_fitted(self, "scores_")
        s = np.asarray(X, dtype=float)
        return np.searchsorted(self.scores_, s, side="left") / self.n_scores_

    def score_patches(self, patches):
        """Normalized score for each patch of a ``(m, h, w)`` stack."""
        return self.transform(patch_raw_score(patches, self.eps))


def fit_quality_model(raw_scores, eps: float = DEFAULT_EPS) -> QualityModel:
    return QualityModel(eps=eps).fit(raw_scores)


def normalize_score(model: QualityModel, s):
    out = model.transform(s)
    return out if np.ndim(out) else float(out)
