"""Compact offset-regression network and its differentiable pieces."""
from __future__ import annotations

from typing import Sequence

import torch
from torch import nn

from ..exceptions import ConfigurationError


def index_embed(features: torch.Tensor, t: torch.Tensor, n: int) -> torch.Tensor:
    """Blend feature channels selected by a soft index.

    ``features`` has shape ``(B, m, h, w)`` with ``m = k * n``. For each
    sample the channels ``{floor(t) + q * n}`` (q < k) and their successors
    (modulo ``n`` inside each block) are mixed with weights
    ``1 + floor(t) - t`` and ``t - floor(t)``. Returns ``(B, k, h, w)``.
    """
    b, m = features.shape[:2]
    if m % n:
        raise ConfigurationError(f"channel count {m} is not a multiple of anchor count {n}")
    k = m // n
    t = torch.as_tensor(t, dtype=features.dtype, device=features.device).reshape(b)
    t = torch.remainder(t, n)
    base = torch.floor(t)
    frac = (t - base).reshape(b, 1, 1, 1)
    base = base.long()
    blocks = torch.arange(k, device=features.device) * n
    lower = base[:, None] + blocks[None, :]
    upper = torch.remainder(base + 1, n)[:, None] + blocks[None, :]
    rows = torch.arange(b, device=features.device)[:, None]
    return (1.0 - frac) * features[rows, lower] + frac * features[rows, upper]


def soft_argmax(heatmap: torch.Tensor, temperature: float = 1.0) -> torch.Tensor:
    """Expected position under ``softmax(temperature * h)``, centered at ``(W - 1) / 2``."""
    w = heatmap.shape[-1]
    positions = torch.arange(w, dtype=heatmap.dtype, device=heatmap.device) - (w - 1) / 2.0
    prob = torch.softmax(temperature * heatmap, dim=-1)
    return (prob * positions).sum(dim=-1)


def smooth_l1(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    diff = torch.abs(pred - target)
    return torch.where(diff < 1.0, 0.5 * diff ** 2, diff - 0.5)


def weighted_loss(pred, target, weight) -> torch.Tensor:
    """Quality-weighted SmoothL1 averaged over the batch."""
    pred = torch.as_tensor(pred)
    target = torch.as_tensor(target, dtype=pred.dtype)
    weight = torch.as_tensor(weight, dtype=pred.dtype)
    if not (pred.shape == target.shape == weight.shape):
        raise ValueError("prediction, target and weight batches must have equal shapes")
    return (weight * smooth_l1(pred, target)).sum() / pred.shape[0]


class OffsetNet(nn.Module):
    """Patch encoder -> index embedding -> column-collapse heatmap head.

    Three stride-2 convolutions bring an ``s x s`` patch to ``s/8 x s/8``
    with ``k * n`` channels; the soft index picks ``k`` of them; rows are
    averaged away and a two-layer head emits one logit per patch column.
    """

    def __init__(self, n_anchors: int, patch_size: int = 64, k: int = 1,
                 widths: Sequence[int] = (16, 32), hidden: int = 64, temperature: float = 1.0):
        super().__init__()
        if patch_size % 8:
            raise ConfigurationError("patch size must be a multiple of 8 for the encoder")
        self.n_anchors = int(n_anchors)
        self.k = int(k)
        self.patch_size = int(patch_size)
        self.temperature = float(temperature)
        c1, c2 = widths
        m = self.k * self.n_anchors
        self.encoder = nn.Sequential(
            nn.Conv2d(1, c1, 3, stride=2, padding=1), nn.ReLU(),
            nn.Conv2d(c1, c2, 3, stride=2, padding=1), nn.ReLU(),
            nn.Conv2d(c2, m, 3, stride=2, padding=1), nn.ReLU(),
        )
        cols = patch_size // 8
        self.head = nn.Sequential(
            nn.Linear(self.k * cols, hidden), nn.ReLU(),
            nn.Linear(hidden, patch_size),
        )

    @property
    def channels(self) -> int:
        return self.k * self.n_anchors

    def zero_head(self) -> None:
        last = self.head[-1]
        nn.init.zeros_(last.weight)
        nn.init.zeros_(last.bias)

    def heatmap(self, patches: torch.Tensor, t: torch.Tensor) -> torch.Tensor:
        if patches.dim() != 3 or patches.shape[1:] != (self.patch_size, self.patch_size):
            raise ValueError(f"expected patches of shape (B, {self.patch_size}, {self.patch_size}), "
                             f"got {tuple(patches.shape)}")
        x = patches - patches.mean(dim=(1, 2), keepdim=True)
        x = x / (x.std(dim=(1, 2), keepdim=True) + 0.05)
        feats = self.encoder(x[:, None])
        emb = index_embed(feats, t, self.n_anchors)
        cols = emb.mean(dim=2).flatten(1)
        return self.head(cols)

    def forward(self, patches: torch.Tensor, t: torch.Tensor):
        h = self.heatmap(patches, t)
        return soft_argmax(h, self.temperature), h
