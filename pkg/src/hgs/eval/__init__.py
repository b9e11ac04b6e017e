from .cv import CVEstimate, cv_variance_bias, fold_predictions
from .metrics import MetricReport, aggregate, glycemic_class, mean_se, metrics, test_set_rmse
from .stability import (StabilityReport, eigenvalues, linear_cycle_model, rollout_blow_up_step, stability_analyze,
                        stiffness, symmetric_kappa)

__all__ = ["CVEstimate", "MetricReport", "StabilityReport", "aggregate", "cv_variance_bias", "eigenvalues",
           "fold_predictions", "glycemic_class", "linear_cycle_model", "mean_se", "metrics", "rollout_blow_up_step",
           "stability_analyze", "stiffness", "symmetric_kappa", "test_set_rmse"]
