"""Forecast accuracy metrics and repetition averages."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

HYPO, IN_RANGE, HYPER = 0, 1, 2


@dataclass
class MetricReport:
    rmse: float
    mape: float
    peak_rmse: float
    peak_mape: float
    pearson_corr: float
    diag_accuracy: float
    mape_excluded: int = 0  # points with a zero target, left out of MAPE
    enp: float | None = None
    variance: float | None = None
    bias_sq: float | None = None
    se: dict = field(default_factory=dict)  # standard errors of averaged fields
    repetitions: int = 1

    def to_dict(self) -> dict:
        return asdict(self)


def glycemic_class(values, thresholds=(80.0, 180.0)) -> np.ndarray:
    """0 hypo (<= low), 2 hyper (>= high), 1 in range; boundaries go to the extreme classes."""
    lo, hi = thresholds
    v = np.asarray(values)
    return np.where(v <= lo, HYPO, np.where(v >= hi, HYPER, IN_RANGE))


def _per_instance(a: np.ndarray) -> np.ndarray:
    return a.reshape(a.shape[0], -1)


def metrics(predictions, targets, thresholds=(80.0, 180.0)) -> MetricReport:
    """Point metrics over (N, ...) arrays; peak values are the worst instance."""
    pred = np.asarray(predictions, dtype=np.float64)
    true = np.asarray(targets, dtype=np.float64)
    if pred.shape != true.shape:
        raise ValueError(f"shape mismatch: predictions {pred.shape} vs targets {true.shape}")
    if pred.size == 0:
        raise ValueError("no predictions to score")
    if pred.ndim == 1:
        pred, true = pred[None], true[None]
    err = _per_instance(pred - true)
    tt = _per_instance(true)
    rmse = float(np.sqrt(np.mean(err ** 2)))
    peak_rmse = float(np.max(np.sqrt(np.mean(err ** 2, axis=1))))

    ok = tt != 0
    ape = np.zeros_like(err)
    np.divide(np.abs(err), np.abs(tt), out=ape, where=ok)
    mape = float(ape[ok].mean()) if ok.any() else float("nan")
    counts = ok.sum(axis=1)
    inst = np.where(counts > 0, ape.sum(axis=1) / np.maximum(counts, 1), -np.inf)
    peak_mape = float(inst.max()) if np.any(counts > 0) else float("nan")

    p, t = pred.ravel(), true.ravel()
    if p.std() == 0 or t.std() == 0:
        corr = float("nan")
    else:
        corr = float(np.corrcoef(p, t)[0, 1])
    acc = float(np.mean(glycemic_class(p, thresholds) == glycemic_class(t, thresholds)))
    return MetricReport(rmse, mape, peak_rmse, peak_mape, corr, acc, int((~ok).sum()))


def mean_se(values) -> tuple[float, float]:
    """Mean and Monte Carlo standard error sqrt(sum (mean - v)^2 / (K (K - 1)))."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        raise ValueError("need at least two repetitions for a standard error")
    m = float(v.mean())
    return m, float(np.sqrt(np.sum((m - v) ** 2) / (v.size * (v.size - 1))))


def test_set_rmse(models, test_set) -> tuple[float, float, list[float]]:
    """Per-repetition RMSE on a shared test set, with mean and standard error."""
    per = []
    for m in models:
        a = test_set.aligned(m)
        per.append(float(np.sqrt(np.mean((m.predict(a) - a.future_obs) ** 2))))
    mean, se = mean_se(per)
    return mean, se, per


test_set_rmse.__test__ = False  # not a pytest test despite the name

AVERAGED = ("rmse", "mape", "peak_rmse", "peak_mape", "pearson_corr", "diag_accuracy", "enp", "variance", "bias_sq")


def aggregate(reports: list[MetricReport]) -> MetricReport:
    """Average reports over repetitions; standard errors for every field present in all of them."""
    if not reports:
        raise ValueError("no reports to aggregate")
    out = {}
    se = {}
    for name in AVERAGED:
        vals = [getattr(r, name) for r in reports]
        if any(v is None for v in vals):
            out[name] = None
            continue
        if len(vals) >= 2:
            out[name], se[name] = mean_se(vals)
        else:
            out[name] = float(vals[0])
    return MetricReport(**out, mape_excluded=sum(r.mape_excluded for r in reports), se=se,
                        repetitions=len(reports))
