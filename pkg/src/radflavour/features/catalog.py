"""The fixed 58-feature catalog.

Order matters: feature tables, tensors and tests all use this order.
"""

from __future__ import annotations

FIRST_ORDER = (
    "fo_mean", "fo_variance", "fo_skewness", "fo_kurtosis", "fo_energy",
    "fo_entropy", "fo_min", "fo_max", "fo_range", "fo_mad", "fo_rms",
    "fo_uniformity", "fo_median", "fo_p10", "fo_p90", "fo_iqr",
)

GLCM = (
    "glcm_joint_energy", "glcm_contrast", "glcm_correlation",
    "glcm_joint_entropy", "glcm_idm", "glcm_inverse_difference",
    "glcm_cluster_shade", "glcm_cluster_prominence", "glcm_cluster_tendency",
    "glcm_autocorrelation", "glcm_joint_average", "glcm_difference_entropy",
)

GLRLM = (
    "glrlm_sre", "glrlm_lre", "glrlm_gln", "glrlm_glnn", "glrlm_rln",
    "glrlm_rlnn", "glrlm_rp", "glrlm_lglre", "glrlm_hglre",
    "glrlm_run_entropy",
)

GLSZM = (
    "glszm_sae", "glszm_lae", "glszm_zp", "glszm_gln", "glszm_glnn",
    "glszm_szn", "glszm_sznn", "glszm_zone_entropy",
)

GLDM = (
    "gldm_sde", "gldm_lde", "gldm_dn", "gldm_dnn", "gldm_gln",
    "gldm_dependence_entropy", "gldm_dependence_variance",
)

NGTDM = (
    "ngtdm_coarseness", "ngtdm_contrast", "ngtdm_busyness",
    "ngtdm_complexity", "ngtdm_strength",
)

ALL_FEATURES: tuple[str, ...] = FIRST_ORDER + GLCM + GLRLM + GLSZM + GLDM + NGTDM

N_FEATURES = len(ALL_FEATURES)
