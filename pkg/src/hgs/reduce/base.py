"""Shared pieces of the subgraph search baselines."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..graph import SuperGraph, to_dict
from ..mnode import MnodeConfig, MnodeModel
from ..train import LossConfig, TrainConfig, TrainingError, train, worker_count

log = logging.getLogger(__name__)


class ReductionError(RuntimeError):
    pass


@dataclass
class ReductionResult:
    method: str
    graph: SuperGraph  # chosen subgraph: same nodes as the input, a subset of its edges
    model: object  # the unregularized-edge model trained on ``graph``
    val_loss: float
    val_losses: list = field(default_factory=list)  # every candidate, in evaluation order
    trace: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "graph": to_dict(self.graph),
            "val_loss": self.val_loss,
            "val_losses": [float(v) for v in self.val_losses],
            "trace": self.trace,
        }


def edge_list(graph: SuperGraph) -> list[tuple[str, str]]:
    return sorted(graph.edges)


def fit_subgraph(graph: SuperGraph, edges, train_ds, val_ds, tcfg: TrainConfig, lambda2: float,
                 mcfg: MnodeConfig | None = None):
    """Train a fixed-graph model (no edge weights, L2 on the decoder) and return (result, val loss).

    A diverged run scores inf.
    """
    sub = graph.with_edges(edges)
    cfg = replace(mcfg or MnodeConfig(), edge_weights=False)
    model = MnodeModel.create(sub, cfg, seed=tcfg.seed)
    try:
        res = train(model, train_ds, val_ds, tcfg, LossConfig(lambda2=lambda2, regularizer="none"),
                    on_nonfinite="stop")
    except TrainingError as exc:
        log.warning("candidate with %d edges diverged: %s", len(edges), exc)
        return None, float("inf")
    return res, float(res.history.best_val_mse)


def fit_many(graph, candidates, train_ds, val_ds, tcfg, lambda2, mcfg, workers=None):
    """``fit_subgraph`` over a list of edge sets, in parallel when HGS_THREADS allows."""
    def run(edges):
        return fit_subgraph(graph, edges, train_ds, val_ds, tcfg, lambda2, mcfg)

    workers = workers or worker_count()
    if workers > 1 and len(candidates) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(run, candidates))
    return [run(c) for c in candidates]


def check_graph(graph: SuperGraph) -> list[tuple[str, str]]:
    edges = edge_list(graph)
    if not edges:
        raise ValueError("the graph has no edges to reduce")
    return edges


def argmin_first(values) -> int:
    v = np.asarray(values, dtype=np.float64)
    if not np.any(np.isfinite(v)):
        raise ReductionError("every candidate diverged")
    return int(np.argmin(v))
