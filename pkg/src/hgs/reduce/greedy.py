from __future__ import annotations

from dataclasses import replace

from ..train import TrainConfig
from .base import ReductionResult, check_graph, fit_many

MIN_LOSS_START = 1e7
GREEDY_LAMBDA2 = 1e-6
GREEDY_LR = 1e-3


def reduce_greedy(graph, train_ds, val_ds, tcfg: TrainConfig | None = None, lambda2: float = GREEDY_LAMBDA2,
                  learning_rate: float = GREEDY_LR, mcfg=None, workers=None) -> ReductionResult:
    """Backward stepwise deletion.

    Each round retrains from scratch without each remaining edge and removes
    the edge whose absence gives the lowest validation loss, as long as that
    loss beats the best so far (initially 1e7). Ties go to the first edge in
    sorted order.
    """
    tcfg = replace(tcfg or TrainConfig(), learning_rate=learning_rate)
    edges = check_graph(graph)
    min_loss = MIN_LOSS_START
    best_fit = None
    all_losses, trace = [], []
    rnd = 0
    while edges:
        rnd += 1
        candidates = [[e for e in edges if e != drop] for drop in edges]
        results = fit_many(graph, candidates, train_ds, val_ds, tcfg, lambda2, mcfg, workers)
        losses = [v for _, v in results]
        all_losses += losses
        i = min(range(len(losses)), key=lambda j: (losses[j], j))
        accepted = losses[i] < min_loss
        trace.append({"round": rnd, "candidates": [[list(e), v] for e, v in zip(edges, losses)],
                      "removed": list(edges[i]) if accepted else None, "min_loss": min(min_loss, losses[i])})
        if not accepted:
            break
        min_loss = losses[i]
        best_fit = results[i][0]
        edges = candidates[i]
    if best_fit is None:
        raise RuntimeError("no removal reached a finite validation loss below the starting bound")
    return ReductionResult("GD", graph.with_edges(edges), best_fit.model, min_loss, all_losses, trace)
