"""First-order (intensity histogram and statistics) features."""

from __future__ import annotations

import numpy as np

from ..core import DomainError
from ..discretize import DiscretizedRoi


def first_order(values: np.ndarray, disc: DiscretizedRoi) -> dict:
    """The 16 first-order features.

    Statistical moments are computed on the raw intensities with
    population (1/N) normalization; entropy and uniformity come from
    the discretized level histogram.  Skewness and excess kurtosis of
    a constant ROI are 0 by convention.
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        raise DomainError("empty ROI")
    n = x.size
    mean = float(x.mean())
    dev = x - mean
    m2 = float((dev ** 2).mean())
    if m2 > 0:
        skewness = float((dev ** 3).mean()) / m2 ** 1.5
        kurtosis = float((dev ** 4).mean()) / m2 ** 2 - 3.0
    else:
        skewness = 0.0
        kurtosis = 0.0
    hist = disc.histogram()
    p = hist / n
    pnz = p[p > 0]
    entropy = float(-(pnz * np.log2(pnz)).sum())
    p10, p25, median, p75, p90 = np.percentile(x, [10, 25, 50, 75, 90])
    return {
        "fo_mean": mean,
        "fo_variance": m2,
        "fo_skewness": skewness,
        "fo_kurtosis": kurtosis,
        "fo_energy": float((x ** 2).sum()),
        "fo_entropy": entropy,
        "fo_min": float(x.min()),
        "fo_max": float(x.max()),
        "fo_range": float(x.max() - x.min()),
        "fo_mad": float(np.abs(dev).mean()),
        "fo_rms": float(np.sqrt((x ** 2).mean())),
        "fo_uniformity": float((p ** 2).sum()),
        "fo_median": float(median),
        "fo_p10": float(p10),
        "fo_p90": float(p90),
        "fo_iqr": float(p75 - p25),
    }
