"""Sparse-to-dense landmark enrichment with weakly supervised normal-offset refinement."""
__version__ = "0.1.0"
