"""Dataset ingestion, file formats and synthetic ground truth."""
from .enriched import read_enriched, write_enriched
from .images import list_samples, load_image, save_image, save_overlay
from .pts import PtsAnnotation, format_pts, parse_pts, read_pts, write_pts
from .schemes import load_scheme, shipped_schemes
from .synthetic import SceneConfig, SyntheticScene, generate_scene, read_scene, write_scene

__all__ = [
    "PtsAnnotation", "SceneConfig", "SyntheticScene", "format_pts", "generate_scene", "list_samples",
    "load_image", "load_scheme", "parse_pts", "read_enriched", "read_pts", "read_scene", "save_image",
    "save_overlay", "shipped_schemes", "write_enriched", "write_pts", "write_scene",
]
