import numpy as np
import pytest

from radflavour.core import Case, RoiMask, Unit, Volume


def make_volume(rng, dims=(6, 5, 4), spacing=(1.0, 1.0, 1.0),
                unit=Unit.ARBITRARY, lo=0.0, hi=100.0):
    data = rng.uniform(lo, hi, size=dims)
    return Volume(data, spacing=spacing, unit=unit)


def make_case(seed=0, dims=(8, 8, 6), unit=Unit.ARBITRARY, label=None):
    """A small case with an ellipsoid-ish mask covering the middle."""
    rng = np.random.default_rng(seed)
    vol = make_volume(rng, dims=dims, unit=unit)
    x, y, z = np.meshgrid(*(np.arange(d, dtype=float) for d in dims),
                          indexing="ij")
    cx, cy, cz = [(d - 1) / 2.0 for d in dims]
    r = ((x - cx) / (dims[0] * 0.35)) ** 2 + \
        ((y - cy) / (dims[1] * 0.35)) ** 2 + \
        ((z - cz) / (dims[2] * 0.35)) ** 2
    mask = RoiMask(r <= 1.0)
    return Case(case_id=f"case{seed:03d}", patient_id=f"pat{seed:03d}",
                volumes={unit: vol}, mask=mask, label=label)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
