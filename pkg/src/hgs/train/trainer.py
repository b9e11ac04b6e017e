"""Full-batch Adam training with best-validation snapshotting, and K-fold grid search."""
from __future__ import annotations

import itertools
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ..nn import NonFiniteError, ad
from .adam import AdamState, adam_step
from .loss import LossConfig, mse, penalty, sse

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, message: str, epoch: int, loss_trace: list[float]):
        super().__init__(f"{message} at epoch {epoch}; last losses {loss_trace[-5:]}")
        self.epoch = epoch
        self.loss_trace = list(loss_trace)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 600
    learning_rate: float = 1e-3
    seed: int = 2024
    K: int = 4
    permute: bool = False
    permutation_seed: int = 0
    batch: str = "full"
    backend: str | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.K < 2:
            raise ValueError("K must be at least 2")
        if self.batch != "full":
            raise ValueError("only full-batch training is supported")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d or {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown training options {sorted(unknown)}")
        return cls(**d)


@dataclass
class History:
    train_loss: list = field(default_factory=list)  # objective before each step
    val_mse: list = field(default_factory=list)  # after each step
    best_epoch: int = -1  # 1-based: parameters after that many steps
    best_val_mse: float = float("inf")
    stopped_at: int | None = None  # epoch of a non-finite abort in "stop" mode

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    model: object
    history: History


def train(model, train_ds, val_ds, tcfg: TrainConfig, lcfg: LossConfig, on_nonfinite: str = "raise",
          trainable=None) -> TrainResult:
    """Train all parameters (or the boolean mask ``trainable``) and return the best-validation snapshot.

    ``on_nonfinite="stop"`` ends training at the first non-finite loss and keeps
    the best snapshot so far instead of raising ``TrainingError``.
    """
    if on_nonfinite not in ("raise", "stop"):
        raise ValueError("on_nonfinite must be raise or stop")
    if len(train_ds) == 0 or len(val_ds) == 0:
        raise ValueError("train and validation sets must be nonempty")
    tr = train_ds.aligned(model)
    va = val_ds.aligned(model)
    mask = None if trainable is None else np.asarray(trainable, dtype=bool)

    def objective(pv):
        return ad.add(sse(model, tr, pv, tcfg.backend), penalty(model, lcfg, pv))

    theta = model.params.values.copy()
    state = AdamState.zeros(theta.size)
    hist = History()
    best = None
    for epoch in range(1, tcfg.epochs + 1):
        try:
            val, g = ad.value_and_grad(objective, theta)
        except NonFiniteError as exc:
            if on_nonfinite == "raise" or best is None:
                raise TrainingError(str(exc), epoch, hist.train_loss) from exc
            hist.stopped_at = epoch
            log.warning("stopping at epoch %d: %s", epoch, exc)
            break
        hist.train_loss.append(val)
        if mask is not None:
            g = np.where(mask, g, 0.0)
        theta, state = adam_step(theta, g, state, tcfg.learning_rate)
        try:
            v = mse(model, va, theta, tcfg.backend)
        except NonFiniteError:
            v = float("inf")
        hist.val_mse.append(v)
        if best is None or v < hist.best_val_mse:
            hist.best_val_mse = v
            hist.best_epoch = epoch
            best = theta.copy()
    return TrainResult(model.with_params(best), hist)


# --- grid search -------------------------------------------------------------------


@dataclass(frozen=True)
class GridPoint:
    loss: LossConfig
    learning_rate: float

    def to_dict(self) -> dict:
        return {"loss": self.loss.to_dict(), "learning_rate": self.learning_rate}


def expand_grid(base: LossConfig, learning_rates, **axes) -> list[GridPoint]:
    """Cartesian product over loss fields in ``axes`` and the learning rates (lr varies fastest)."""
    names = list(axes)
    out = []
    for combo in itertools.product(*(axes[n] for n in names)):
        cfg = LossConfig.from_dict({**base.to_dict(), **dict(zip(names, combo))})
        for lr in learning_rates:
            out.append(GridPoint(cfg, float(lr)))
    return out


def kfold_indices(n: int, K: int, permutation=None) -> list[tuple[np.ndarray, np.ndarray]]:
    """Index-based folds: fold k validates on the k-th contiguous block of the (permuted) order."""
    if K < 2 or n < K:
        raise ValueError(f"need K >= 2 and at least K instances (K={K}, n={n})")
    order = np.arange(n) if permutation is None else np.asarray(permutation)
    if sorted(order.tolist()) != list(range(n)):
        raise ValueError("permutation must reorder all instances")
    blocks = np.array_split(order, K)
    return [(np.concatenate([b for j, b in enumerate(blocks) if j != k]), blocks[k]) for k in range(K)]


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("HGS_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class CVResult:
    best: GridPoint
    best_index: int
    scores: np.ndarray  # (grid points, folds) validation MSE; inf for diverged runs
    model: object
    history: History
    grid: list

    def to_dict(self) -> dict:
        return {
            "selected": self.best.to_dict(),
            "selected_index": self.best_index,
            "points": [{"point": p.to_dict(), "fold_val_mse": [float(s) for s in row],
                        "mean_val_mse": float(np.mean(row))} for p, row in zip(self.grid, self.scores)],
            "final_history": self.history.to_dict(),
        }


def grid_search_cv(factory, dataset, tcfg: TrainConfig, grid: list[GridPoint], workers: int | None = None,
                   train_fn=None) -> CVResult:
    """Pick the grid point with the lowest mean validation MSE over K folds.

    ``factory(seed)`` builds a fresh model. The final model is the one trained
    with the first fold as validation set; training is deterministic, so that
    run is reused instead of repeated. ``train_fn`` defaults to ``train`` and
    lets reducers plug in a different training routine with the same signature.
    """
    if not grid:
        raise ValueError("empty hyper-parameter grid")
    train_fn = train_fn or train
    perm = None
    if tcfg.permute:
        perm = np.random.default_rng(tcfg.permutation_seed).permutation(len(dataset))
    folds = kfold_indices(len(dataset), tcfg.K, perm)
    jobs = [(i, k) for i in range(len(grid)) for k in range(len(folds))]

    def run(job):
        i, k = job
        pt = grid[i]
        tr, va = folds[k]
        cfg = TrainConfig.from_dict({**tcfg.to_dict(), "learning_rate": pt.learning_rate})
        try:
            res = train_fn(factory(tcfg.seed), dataset.subset(tr), dataset.subset(va), cfg, pt.loss,
                           on_nonfinite="stop")
        except TrainingError as exc:
            log.warning("grid point %d fold %d diverged: %s", i, k, exc)
            return None
        return res

    workers = workers or worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    scores = np.full((len(grid), len(folds)), np.inf)
    first_fold = {}
    for (i, k), res in zip(jobs, results):
        if res is not None:
            scores[i, k] = res.history.best_val_mse
            if k == 0:
                first_fold[i] = res
    means = scores.mean(axis=1)
    if not np.any(np.isfinite(means)):
        raise TrainingError("every grid point diverged", tcfg.epochs, [])
    best = int(np.argmin(means))  # ties: first in grid order
    final = first_fold[best]
    return CVResult(grid[best], best, scores, final.model, final.history, list(grid))
