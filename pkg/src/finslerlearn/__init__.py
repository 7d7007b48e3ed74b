"""Asymmetric manifold learning in canonical Randers spaces.

Finsler variants of t-SNE, UMAP and metric MDS embed possibly asymmetric
dissimilarities into R^m equipped with d(x, y) = ||y - x|| + omega . (y - x).
"""
from .geometry import RandersSpace, randers_distance, randers_distance_grad, validate_space
from .init import Embedding
from .pipeline import METHODS, build_method, omega_sweep

__version__ = "0.1.0"

__all__ = [
    "RandersSpace", "randers_distance", "randers_distance_grad", "validate_space",
    "Embedding", "METHODS", "build_method", "omega_sweep", "__version__",
]
