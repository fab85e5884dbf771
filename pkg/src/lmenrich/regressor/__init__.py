"""Offset regression model, training loop, refinement and model files."""
from .artifact import load_model, save_model
from .estimator import OffsetRegressor, refine
from .network import OffsetNet, index_embed, smooth_l1, soft_argmax, weighted_loss

__all__ = ["OffsetNet", "OffsetRegressor", "index_embed", "load_model", "refine", "save_model", "smooth_l1", "soft_argmax", "weighted_loss"]
