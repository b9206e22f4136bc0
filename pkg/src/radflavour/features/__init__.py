"""Feature extraction: the fixed 58-feature catalog and its kernels."""

from .catalog import (ALL_FEATURES, FIRST_ORDER, GLCM, GLDM, GLRLM, GLSZM,
                      N_FEATURES, NGTDM)
from .extract import ExtractConfig, FeatureVector, extract, extract_many
from .firstorder import first_order
from .kernels import BACKEND, neighbour_shell, unique_directions
from .texture import (TextureMatrix, gldm_matrix, glcm_matrix, glrlm_matrix,
                      glszm_matrix, levels_grid, ngtdm_vectors,
                      texture_features)

__all__ = [
    "ALL_FEATURES", "FIRST_ORDER", "GLCM", "GLRLM", "GLSZM", "GLDM", "NGTDM",
    "N_FEATURES", "BACKEND", "ExtractConfig", "FeatureVector", "TextureMatrix",
    "extract", "extract_many", "first_order", "neighbour_shell",
    "unique_directions", "levels_grid", "glcm_matrix", "glrlm_matrix",
    "glszm_matrix", "gldm_matrix", "ngtdm_vectors", "texture_features",
]
