"""Segmentation-perturbation flavours: translation (T), volume
adaptation (V) and contour randomization (C).

T resamples the image and leaves the mask alone; V and C act on the
mask and leave intensities untouched.  Composition order is fixed as
T, then V, then C.  Results falling below ``min_roi_voxels`` raise
:class:`DegenerateRoiError`, which extraction turns into an
all-missing feature vector.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy import ndimage

from .core import (DomainError, FlavourAxis, FlavourKey, Interp, RoiMask,
                   Volume, resample_translate)

MIN_ROI_VOXELS = 8


class DegenerateRoiError(DomainError):
    """Perturbation left too few ROI voxels to compute features on."""


def _disc_structure(planar: bool) -> np.ndarray:
    """Unit-radius disc: 4-neighbour cross in-plane, 6-neighbour ball in 3D."""
    if planar:
        s = np.zeros((3, 3, 1), dtype=bool)
        s[1, :, 0] = True
        s[:, 1, 0] = True
        return s
    return ndimage.generate_binary_structure(3, 1)


def volume_adapt(mask: RoiMask, level: int,
                 min_roi_voxels: int = MIN_ROI_VOXELS) -> RoiMask:
    """|level| successive dilations (level > 0) or erosions (level < 0)."""
    if mask.is_empty:
        raise DomainError("cannot adapt an empty mask")
    level = int(level)
    if level == 0:
        return mask
    structure = _disc_structure(mask.dims[2] == 1)
    data = mask.mask
    for _ in range(abs(level)):
        if level > 0:
            data = ndimage.binary_dilation(data, structure=structure)
        else:
            data = ndimage.binary_erosion(data, structure=structure)
    out = RoiMask(data)
    if out.n_voxels < min_roi_voxels:
        raise DegenerateRoiError(
            "volume adaptation level %d left %d voxels (minimum %d)"
            % (level, out.n_voxels, min_roi_voxels))
    return out


def contour_randomize(mask: RoiMask, sigma_mm: float, amplitude: float,
                      seed: int, spacing=(1.0, 1.0, 1.0),
                      min_roi_voxels: int = MIN_ROI_VOXELS) -> RoiMask:
    """Randomize the contour by noising the signed distance map.

    The mask's signed Euclidean distance map (positive inside) is
    perturbed with a Gaussian-smoothed, unit-variance noise field
    scaled by ``amplitude`` (mm) and re-thresholded at zero.
    Deterministic per seed.
    """
    if mask.is_empty:
        raise DomainError("cannot randomize an empty mask")
    if amplitude <= 0:
        raise DomainError("contour randomization amplitude must be positive")
    inside = ndimage.distance_transform_edt(mask.mask, sampling=spacing)
    outside = ndimage.distance_transform_edt(~mask.mask, sampling=spacing)
    signed = inside - outside
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(mask.dims)
    sig_vox = [sigma_mm / s for s in spacing]
    if mask.dims[2] == 1:
        sig_vox[2] = 0.0
    smooth = ndimage.gaussian_filter(noise, sigma=sig_vox, mode="reflect")
    std = smooth.std()
    if std > 0:
        smooth = smooth / std
    out = RoiMask(signed + amplitude * smooth > 0)
    if out.n_voxels < min_roi_voxels:
        raise DegenerateRoiError(
            "contour randomization (seed %d) left %d voxels (minimum %d)"
            % (seed, out.n_voxels, min_roi_voxels))
    return out


def perturbation_flavour_grid(translations=(), v_levels=(), c_seeds=(),
                              c_sigma_mm: float = 2.0,
                              c_amplitude: float = 1.0) -> list[FlavourKey]:
    """PERTURB flavour keys.

    With only ``v_levels`` this is the V set; with all three groups it
    is the TVC Cartesian product (translations x levels x seeds) in
    deterministic order.  An empty spec yields just VANILLA.
    """
    for k in v_levels:
        if int(k) == 0:
            raise DomainError("volume-adaptation level 0 is the vanilla mask")
    t_opts = [None] if not translations else [tuple(float(s) for s in t)
                                             for t in translations]
    v_opts = [None] if not v_levels else [int(k) for k in v_levels]
    c_opts = [None] if not c_seeds else [int(s) for s in c_seeds]
    keys = []
    for t, v, c in itertools.product(t_opts, v_opts, c_opts):
        params = {}
        if t is not None:
            params["tx"], params["ty"], params["tz"] = t
        if v is not None:
            params["v"] = v
        if c is not None:
            params["c_sigma"] = float(c_sigma_mm)
            params["c_amp"] = float(c_amplitude)
            params["c_seed"] = c
        if not params:
            return [FlavourKey.vanilla()]
        keys.append(FlavourKey.make(FlavourAxis.PERTURB, **params))
    return keys


def apply_perturbation(volume: Volume, mask: RoiMask, key: FlavourKey,
                       min_roi_voxels: int = MIN_ROI_VOXELS,
                       interp: Interp = Interp.TRILINEAR):
    """Apply a PERTURB flavour: T on the image, then V, then C on the mask.

    Returns the perturbed (volume, mask) pair.
    """
    if key.axis is not FlavourAxis.PERTURB:
        raise DomainError(f"not a perturbation flavour: {key}")
    if key.get("tx") is not None:
        shift = (float(key.get("tx")), float(key.get("ty", 0.0)),
                 float(key.get("tz", 0.0)))
        volume = resample_translate(volume, shift, interp)
    if key.get("v") is not None:
        mask = volume_adapt(mask, int(key.get("v")), min_roi_voxels)
    if key.get("c_seed") is not None:
        mask = contour_randomize(mask, float(key.get("c_sigma", 2.0)),
                                 float(key.get("c_amp", 1.0)),
                                 int(key.get("c_seed")),
                                 spacing=volume.spacing,
                                 min_roi_voxels=min_roi_voxels)
    return volume, mask
