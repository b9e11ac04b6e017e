"""Variance and squared-bias estimates from models trained on disjoint folds.

Model i is fit on fold i alone. Every case in fold k is then scored by the
K - 1 models that did not see it; their spread is the variance term and the
gap between their mean and the target is the bias term. Errors are averaged
per output entry so the scale matches the test-set RMSE.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

IDENTITY_TOL = 1e-10


@dataclass
class CVEstimate:
    variance: float
    bias_sq: float
    mse: float
    rmse: float


def cv_variance_bias(predictions, targets, folds) -> CVEstimate:
    """``predictions[i, n]`` is model i's forecast for case n; ``folds[n]`` is the fold holding case n.

    Entries where a model would score its own training case are ignored.
    Raises if the sum-of-squares identity mse = variance + bias_sq fails.
    """
    P = np.asarray(predictions, dtype=np.float64)
    Y = np.asarray(targets, dtype=np.float64)
    folds = np.asarray(folds, dtype=np.int64)
    K, N = P.shape[:2]
    if K < 3:
        raise ValueError("need K >= 3 folds: the variance needs two models per held-out case")
    if Y.shape != P.shape[1:]:
        raise ValueError(f"targets {Y.shape} do not match predictions {P.shape[1:]}")
    if folds.shape != (N,) or folds.min() < 0 or folds.max() >= K:
        raise ValueError("fold labels must assign every case to one of the K folds")
    if len(np.unique(folds)) != K:
        raise ValueError("every fold must hold at least one case")
    P = P.reshape(K, N, -1)
    Y = Y.reshape(N, -1)
    width = P.shape[2]
    use = np.arange(K)[:, None] != folds[None, :]  # (K, N)
    mean = np.einsum("kn,knd->nd", use, P) / (K - 1)
    dev = np.where(use[:, :, None], P - mean[None], 0.0)
    variance = float(np.sum(dev ** 2) / ((K - 1) * N * width))
    bias_sq = float(np.sum((mean - Y) ** 2) / (N * width))
    err = np.where(use[:, :, None], P - Y[None], 0.0)
    mse = float(np.sum(err ** 2) / ((K - 1) * N * width))
    if abs(mse - (variance + bias_sq)) > IDENTITY_TOL * max(1.0, mse):
        raise ArithmeticError(f"variance + bias^2 = {variance + bias_sq} differs from mse = {mse}")
    return CVEstimate(variance, bias_sq, mse, float(np.sqrt(mse)))


def fold_predictions(models, dataset) -> np.ndarray:
    """Stack every model's forecasts for all cases: (K, N, q, n_obs)."""
    out = []
    for m in models:
        out.append(m.predict(dataset.aligned(m)))
    return np.stack(out)
