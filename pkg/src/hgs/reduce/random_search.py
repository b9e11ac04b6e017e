from __future__ import annotations

import math

import numpy as np

from ..train import TrainConfig
from .base import ReductionResult, argmin_first, check_graph, fit_many

DEFAULT_RATIOS = (0.1, 0.2, 0.4)


def subgraph_size(n_edges: int, p: float) -> int:
    """ceil((1 - p) |E|), robust to the float error in 1 - p."""
    return int(math.ceil(round((1.0 - p) * n_edges, 9)))


def reduce_random(graph, train_ds, val_ds, R: int = 5, P=DEFAULT_RATIOS, tcfg: TrainConfig | None = None,
                  lambda2: float = 1e-6, mcfg=None, seed: int | None = None, workers=None) -> ReductionResult:
    """Train R uniformly drawn edge subsets per drop ratio p and keep the best on validation."""
    tcfg = tcfg or TrainConfig()
    edges = check_graph(graph)
    if R < 1:
        raise ValueError("R must be at least 1")
    if not P or any(not 0 < p < 1 for p in P):
        raise ValueError("every drop ratio must lie in (0, 1)")
    rng = np.random.default_rng(tcfg.seed if seed is None else seed)
    candidates, labels = [], []
    for p in P:
        k = subgraph_size(len(edges), p)
        for r in range(R):
            pick = np.sort(rng.choice(len(edges), size=k, replace=False))
            candidates.append([edges[i] for i in pick])
            labels.append((float(p), r))
    results = fit_many(graph, candidates, train_ds, val_ds, tcfg, lambda2, mcfg, workers)
    losses = [v for _, v in results]
    best = argmin_first(losses)
    trace = [{"p": p, "r": r, "edges": [list(e) for e in c], "val_loss": v}
             for (p, r), c, v in zip(labels, candidates, losses)]
    res = results[best][0]
    return ReductionResult("RD", graph.with_edges(candidates[best]), res.model, losses[best], losses, trace)
