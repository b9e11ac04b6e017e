from .adam import AdamState, adam_step
from .loss import REGULARIZERS, LossConfig, enp, loss, mse, penalty, sse
from .reparam import (from_reparam, group_lambda, group_lasso_loss, group_penalty, optimal_edge_weight,
                      reparameterize)
from .trainer import (CVResult, GridPoint, History, TrainConfig, TrainingError, TrainResult, expand_grid,
                      grid_search_cv, kfold_indices, train, worker_count)

__all__ = [
    "AdamState", "CVResult", "GridPoint", "History", "LossConfig", "REGULARIZERS", "TrainConfig", "TrainResult",
    "TrainingError", "adam_step", "enp", "expand_grid", "from_reparam", "grid_search_cv", "group_lambda",
    "group_lasso_loss", "group_penalty", "kfold_indices", "loss", "mse", "optimal_edge_weight", "penalty",
    "reparameterize", "sse", "train", "worker_count",
]
