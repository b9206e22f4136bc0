"""Synthetic phantom cohorts: textured lesions with known structure.

Lesion texture is a sum of band-limited noise fields at two
controlled spatial scales (coarse and fine), so class differences can
be injected as amplitude shifts at a chosen scale.  That makes the
"signal split across scales/modalities" cohorts constructible by
design: the separations these phantoms exhibit are engineered, not
claims about clinical data.

Every generator is a pure function of (spec, seed); cohorts can be
written to MHD case directories plus a JSON manifest and read back.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter

from .core import Case, DomainError, RoiMask, Unit, Volume
from .io import (FormatError, read_mhd, read_mhd_mask, write_mask_mhd,
                 write_mhd)

STRETCH_MAX = 1.15


@dataclass(frozen=True)
class ClassTexture:
    """Texture recipe for one class: base intensity plus amplitudes
    for the coarse-scale and fine-scale noise bands (sigmas in mm)."""

    base: float = 100.0
    coarse_sigma_mm: float = 4.0
    coarse_amp: float = 10.0
    fine_sigma_mm: float = 1.0
    fine_amp: float = 10.0


@dataclass(frozen=True)
class PhantomSpec:
    n_cases: int = 60
    dims: Tuple[int, int, int] = (24, 24, 18)
    spacing: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    radius_range: Tuple[float, float] = (4.0, 6.0)
    class_a: ClassTexture = field(default_factory=ClassTexture)
    class_b: ClassTexture = field(default_factory=lambda: ClassTexture(
        coarse_amp=16.0))
    noise_sigma: float = 2.0
    cases_per_patient: int = 1
    pet_hotspot_amp: Tuple[float, float] = (3.0, 4.5)
    pet_sigma_mm: float = 4.0
    seed: int = 0

    def __post_init__(self):
        nx, ny, nz = self.dims
        if nz == 1:
            if nx < 32 or ny < 32:
                raise DomainError("planar phantoms need dims >= 32x32")
        elif min(self.dims) < 16:
            raise DomainError("volumetric phantoms need dims >= 16^3")
        if self.n_cases < 2:
            raise DomainError("need at least 2 cases")
        rmin, rmax = self.radius_range
        if not 0 < rmin <= rmax:
            raise DomainError("invalid lesion radius range")
        extents = [d * s for d, s in zip(self.dims, self.spacing)]
        axes = extents[:2] if nz == 1 else extents
        margin = 2.0 * max(self.spacing)
        if any(rmax * STRETCH_MAX + margin > ext / 2 for ext in axes):
            raise DomainError(
                f"infeasible geometry: lesion radius {rmax} does not fit "
                f"dims {self.dims} at spacing {self.spacing}")
        if self.cases_per_patient < 1:
            raise DomainError("cases_per_patient must be >= 1")

    def texture_for(self, label: int) -> ClassTexture:
        return self.class_b if label else self.class_a


def _band_noise(rng, dims, spacing, sigma_mm) -> np.ndarray:
    """Unit-variance noise field band-limited at ``sigma_mm``."""
    white = rng.standard_normal(dims)
    sig = [sigma_mm / s for s in spacing]
    if dims[2] == 1:
        sig[2] = 0.0
    smooth = gaussian_filter(white, sigma=sig, mode="reflect")
    sd = smooth.std()
    return smooth / sd if sd > 0 else smooth


def _lesion_mask(rng, spec: PhantomSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Random ellipsoid; returns (bool mask, centre in mm)."""
    nx, ny, nz = spec.dims
    planar = nz == 1
    r = rng.uniform(*spec.radius_range)
    stretch = rng.uniform(2.0 - STRETCH_MAX, STRETCH_MAX, size=3)
    semi = r * stretch
    centre = np.array([nx, ny, nz], dtype=np.float64) / 2.0
    centre[:2] += rng.uniform(-1.0, 1.0, size=2)
    if not planar:
        centre[2] += rng.uniform(-1.0, 1.0)
    centre_mm = centre * np.asarray(spec.spacing)
    grids = np.meshgrid(*(np.arange(d) * s for d, s in
                          zip(spec.dims, spec.spacing)), indexing="ij")
    q = ((grids[0] - centre_mm[0]) / semi[0]) ** 2 \
        + ((grids[1] - centre_mm[1]) / semi[1]) ** 2
    if not planar:
        q = q + ((grids[2] - centre_mm[2]) / semi[2]) ** 2
    return q <= 1.0, centre_mm


def _textured_image(rng, spec: PhantomSpec, tex: ClassTexture,
                    mask: np.ndarray, noise_rng=None) -> np.ndarray:
    """Lesion follows the class texture recipe; background is flat
    with the same additive noise floor."""
    coarse = _band_noise(rng, spec.dims, spec.spacing, tex.coarse_sigma_mm)
    fine = _band_noise(rng, spec.dims, spec.spacing, tex.fine_sigma_mm)
    lesion = tex.base + tex.coarse_amp * coarse + tex.fine_amp * fine
    image = np.where(mask, lesion, 0.25 * tex.base)
    nrng = rng if noise_rng is None else noise_rng
    if spec.noise_sigma > 0:
        image = image + spec.noise_sigma * nrng.standard_normal(spec.dims)
    return image


def _case_ids(spec: PhantomSpec, i: int) -> Tuple[str, str]:
    return f"case{i:03d}", f"pat{i // spec.cases_per_patient:03d}"


def gen_classification_cohort(spec: PhantomSpec) -> List[Case]:
    """Two balanced classes whose texture differs per the spec's
    class recipes (labels alternate 0, 1, 0, 1, ...)."""
    cases = []
    for i in range(spec.n_cases):
        label = i % 2
        rng = np.random.default_rng([spec.seed, 101, i])
        mask, _ = _lesion_mask(rng, spec)
        image = _textured_image(rng, spec, spec.texture_for(label), mask)
        case_id, patient_id = _case_ids(spec, i)
        cases.append(Case(
            case_id=case_id, patient_id=patient_id,
            volumes={Unit.ARBITRARY: Volume(image, spec.spacing)},
            mask=RoiMask(mask), label=label))
    return cases


def gen_test_retest(spec: PhantomSpec) -> Tuple[List[Case], List[Case]]:
    """Same lesion and texture per case, two independent noise draws."""
    test, retest = [], []
    for i in range(spec.n_cases):
        label = i % 2
        rng = np.random.default_rng([spec.seed, 202, i])
        mask, _ = _lesion_mask(rng, spec)
        tex = spec.texture_for(label)
        coarse = _band_noise(rng, spec.dims, spec.spacing, tex.coarse_sigma_mm)
        fine = _band_noise(rng, spec.dims, spec.spacing, tex.fine_sigma_mm)
        lesion = tex.base + tex.coarse_amp * coarse + tex.fine_amp * fine
        clean = np.where(mask, lesion, 0.25 * tex.base)
        case_id, patient_id = _case_ids(spec, i)
        for session, bucket in enumerate((test, retest)):
            nrng = np.random.default_rng([spec.seed, 203, i, session])
            image = clean + spec.noise_sigma * nrng.standard_normal(spec.dims)
            bucket.append(Case(
                case_id=case_id, patient_id=patient_id,
                volumes={Unit.ARBITRARY: Volume(image, spec.spacing)},
                mask=RoiMask(mask), label=label))
    return test, retest


def gen_pet_ct_pair(spec: PhantomSpec) -> List[Case]:
    """Cases carrying an HU volume and an SUV volume over one mask.

    The class signal is split across modalities: the CT arm differs
    in fine-texture amplitude, the PET arm in hotspot uptake, so
    neither modality alone carries the whole separation.
    """
    cases = []
    for i in range(spec.n_cases):
        label = i % 2
        rng = np.random.default_rng([spec.seed, 303, i])
        mask, centre_mm = _lesion_mask(rng, spec)
        tex = spec.texture_for(label)

        ct_fine = _band_noise(rng, spec.dims, spec.spacing, tex.fine_sigma_mm)
        ct_lesion = tex.base + tex.fine_amp * ct_fine
        ct = np.where(mask, ct_lesion, 0.25 * tex.base)
        ct = ct + spec.noise_sigma * rng.standard_normal(spec.dims)

        grids = np.meshgrid(*(np.arange(d) * s for d, s in
                              zip(spec.dims, spec.spacing)), indexing="ij")
        d2 = sum((g - c) ** 2 for g, c in zip(grids, centre_mm))
        amp = spec.pet_hotspot_amp[label]
        pet = 1.0 + amp * np.exp(-d2 / (2.0 * spec.pet_sigma_mm ** 2))
        pet = pet + 0.4 * _band_noise(rng, spec.dims, spec.spacing,
                                      spec.pet_sigma_mm)
        pet = pet + 0.1 * spec.noise_sigma * rng.standard_normal(spec.dims)

        case_id, patient_id = _case_ids(spec, i)
        cases.append(Case(
            case_id=case_id, patient_id=patient_id,
            volumes={Unit.HU: Volume(ct, spec.spacing, Unit.HU),
                     Unit.SUV: Volume(pet, spec.spacing, Unit.SUV)},
            mask=RoiMask(mask), label=label))
    return cases


def write_cohort(cases: List[Case], out_dir) -> str:
    """Write per-case MHD directories and a manifest; returns the
    manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for case in cases:
        case_dir = os.path.join(out_dir, case.case_id)
        os.makedirs(case_dir, exist_ok=True)
        paths = {}
        for unit, vol in sorted(case.volumes.items(), key=lambda kv: kv[0].value):
            fname = f"{unit.value.lower()}.mhd"
            write_mhd(vol, os.path.join(case_dir, fname))
            paths[unit.value] = os.path.join(case.case_id, fname)
        spacing = next(iter(case.volumes.values())).spacing
        write_mask_mhd(case.mask, os.path.join(case_dir, "mask.mhd"),
                       spacing=spacing)
        paths["mask"] = os.path.join(case.case_id, "mask.mhd")
        entries.append({"case_id": case.case_id,
                        "patient_id": case.patient_id,
                        "label": case.label,
                        "paths": paths})
    manifest = {"format": "cohort-manifest-v1", "cases": entries}
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_path


def read_cohort(manifest_path) -> List[Case]:
    base = os.path.dirname(os.path.abspath(manifest_path))
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    if manifest.get("format") != "cohort-manifest-v1":
        raise FormatError(f"{manifest_path}: unrecognized manifest format")
    cases = []
    for entry in manifest["cases"]:
        paths = entry["paths"]
        volumes = {}
        for key, rel in paths.items():
            if key == "mask":
                continue
            unit = Unit(key)
            volumes[unit] = read_mhd(os.path.join(base, rel), unit=unit)
        mask = read_mhd_mask(os.path.join(base, paths["mask"]))
        cases.append(Case(
            case_id=entry["case_id"], patient_id=entry["patient_id"],
            volumes=volumes, mask=mask, label=entry["label"]))
    return cases
