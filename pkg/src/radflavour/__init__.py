"""radflavour: radiomics feature flavours and their downstream pipelines.

Computes a fixed feature catalog under many parameter flavours
(discretization, filtering, segmentation perturbation, PET/CT fusion),
assembles cases x features x flavours tensors, and provides the
repeatability (ICC), flavour-selection/fusion ML and neural
flavour-fusion tooling to analyse them.
"""

from .core import (Case, DomainError, FlavourAxis, FlavourKey, Interp,
                   RoiMask, Unit, Volume, resample_translate, roi_values)

__version__ = "0.1.0"

__all__ = [
    "Case", "DomainError", "FlavourAxis", "FlavourKey", "Interp", "RoiMask",
    "Unit", "Volume", "resample_translate", "roi_values", "__version__",
]
