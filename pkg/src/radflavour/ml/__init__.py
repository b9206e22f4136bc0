"""Classical ML toolkit: datasets, stages, models, CV, statistics."""

from .data import Dataset
from .metrics import (MetricsReport, accuracy, average_precision,
                      balanced_accuracy, confusion, f1_score, pr_points,
                      roc_auc, roc_points, trapezoid_auc)
from .models import (ConvergenceError, EnsembleModel, LdaModel,
                     LogregModel, MajorityModel, RandomForestModel,
                     ensemble_vote, sigmoid)
from .preprocess import (PolyStage, PruneStage, SmoteStage, ZScaler,
                         polynomial_expand, smote, zscore_fit_transform)
from .select import (AnovaStage, SfsStage, anova_f, anova_f_select,
                     sfs_forward)
from .stats import (McNemarResult, TTestResult, corrected_resampled_ttest,
                    mcnemar)
from .validate import (CvReport, FoldPlan, LeakageError, Pipeline,
                       cross_validate, nested_cross_validate)

__all__ = [
    "Dataset",
    "MetricsReport", "accuracy", "average_precision", "balanced_accuracy",
    "confusion", "f1_score", "pr_points", "roc_auc", "roc_points",
    "trapezoid_auc",
    "ConvergenceError", "EnsembleModel", "LdaModel", "LogregModel",
    "MajorityModel", "RandomForestModel", "ensemble_vote", "sigmoid",
    "PolyStage", "PruneStage", "SmoteStage", "ZScaler", "polynomial_expand",
    "smote", "zscore_fit_transform",
    "AnovaStage", "SfsStage", "anova_f", "anova_f_select", "sfs_forward",
    "McNemarResult", "TTestResult", "corrected_resampled_ttest", "mcnemar",
    "CvReport", "FoldPlan", "LeakageError", "Pipeline", "cross_validate",
    "nested_cross_validate",
]
