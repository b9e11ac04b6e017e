"""Method dispatch: graph preparation, hyper-parameter grids and model selection per method."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..graph import SuperGraph, augment, condense
from ..mnode import MnodeConfig, MnodeModel
from ..reduce import reduce_greedy, reduce_neuralsparse, reduce_random
from ..train import LossConfig, TrainConfig, expand_grid, grid_search_cv, kfold_indices

METHODS = ("HGS", "NR", "EGL", "EN", "NS", "GD", "RD")

# synthetic-experiment grids; a config's "grid" entry overrides these per key
DEFAULT_GRIDS = {
    "HGS": {"lambda1": [1e-6, 1e-7], "lambda2": [1e-6, 1e-7, 1e-8], "learning_rate": [1e-2, 1e-3]},
    "NR": {"lambda2": [1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8], "learning_rate": [1e-2, 1e-3]},
    "EGL": {"egl_lambda": [1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8], "learning_rate": [1e-2, 1e-3]},
    "EN": {"en_lambda1": [1e-5, 1e-6, 1e-7], "en_lambda2": [1e-6, 1e-7, 1e-8], "learning_rate": [1e-2, 1e-3]},
    "NS": {"lambda2": [1e-3], "learning_rate": [1e-2, 1e-3], "K": [2, 4, 6, 8, 10]},
    "GD": {"lambda2": [1e-6], "learning_rate": [1e-3]},
    "RD": {"lambda2": [1e-6], "learning_rate": [1e-3], "R": 5, "P": [0.1, 0.2, 0.4]},
}


@dataclass
class MethodOutcome:
    method: str
    model: MnodeModel
    graph: SuperGraph  # the graph the final model runs on
    selection: dict  # chosen hyper-parameters
    report: dict = field(default_factory=dict)  # per-candidate scores


def check_method(method: str) -> str:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; valid methods: {', '.join(METHODS)}")
    return method


def prepared_graph(method: str, graph: SuperGraph, keep=(), skip=()) -> SuperGraph:
    """HGS condenses cycles and adds shortcuts; every baseline starts from the original graph."""
    if check_method(method) == "HGS":
        return augment(condense(graph, keep), skip)
    return graph


def merged_grid(method: str, grid: dict | None) -> dict:
    g = dict(DEFAULT_GRIDS[check_method(method)])
    g.update(grid or {})
    return g


def _fold0(dataset, tcfg: TrainConfig):
    perm = None
    if tcfg.permute:
        perm = np.random.default_rng(tcfg.permutation_seed).permutation(len(dataset))
    tr, va = kfold_indices(len(dataset), tcfg.K, perm)[0]
    return dataset.subset(tr), dataset.subset(va)


def run_method(method: str, graph: SuperGraph, dataset, mcfg: MnodeConfig, tcfg: TrainConfig,
               grid: dict | None = None, keep=(), skip=(), exempt=()) -> MethodOutcome:
    """Fit one method on ``dataset`` (the original, uncondensed graph goes in)."""
    g = merged_grid(method, grid)
    work = prepared_graph(method, graph, keep, skip)
    lrs = g["learning_rate"]
    if method in ("HGS", "NR", "EGL", "EN"):
        if method == "HGS":
            base = LossConfig(regularizer="hgs-l1l2", exempt_edges=frozenset(map(tuple, exempt)))
            points = expand_grid(base, lrs, lambda1=g["lambda1"], lambda2=g["lambda2"])
        elif method == "NR":
            points = expand_grid(LossConfig(regularizer="none"), lrs, lambda2=g["lambda2"])
        elif method == "EGL":
            points = expand_grid(LossConfig(regularizer="egl"), lrs, lambda1=g["egl_lambda"])
        else:
            points = expand_grid(LossConfig(regularizer="elastic-net"), lrs, en_lambda1=g["en_lambda1"],
                                 en_lambda2=g["en_lambda2"])
        cfg = replace(mcfg, edge_weights=method != "NR")

        def factory(seed):
            return MnodeModel.create(work, cfg, seed=seed)

        cv = grid_search_cv(factory, dataset, tcfg, points)
        sel = {"learning_rate": cv.best.learning_rate, **_nonzero_loss(cv.best.loss)}
        return MethodOutcome(method, cv.model, work, sel, cv.to_dict())

    train_ds, val_ds = _fold0(dataset, tcfg)
    if method == "GD":
        red = reduce_greedy(work, train_ds, val_ds, tcfg, lambda2=g["lambda2"][0], learning_rate=lrs[0], mcfg=mcfg)
        return MethodOutcome(method, red.model, red.graph, {"lambda2": g["lambda2"][0], "learning_rate": lrs[0]},
                             red.to_dict())
    if method == "RD":
        best = None
        for l2 in g["lambda2"]:
            red = reduce_random(work, train_ds, val_ds, R=g["R"], P=g["P"],
                                tcfg=replace(tcfg, learning_rate=lrs[0]), lambda2=l2, mcfg=mcfg)
            if best is None or red.val_loss < best[0].val_loss:
                best = (red, l2)
        red, l2 = best
        return MethodOutcome(method, red.model, red.graph, {"lambda2": l2, "learning_rate": lrs[0]}, red.to_dict())
    # NS: every (K, lambda2, lr) point samples a subgraph; keep the best validation loss
    n_edges = len(work.edges)
    rows = []
    best = None
    for K in sorted({min(k, n_edges) for k in g["K"]}):
        for l2 in g["lambda2"]:
            for lr in lrs:
                red = reduce_neuralsparse(work, train_ds, val_ds, K, replace(tcfg, learning_rate=lr), lambda2=l2,
                                          mcfg=mcfg)
                rows.append({"K": K, "lambda2": l2, "learning_rate": lr, "val_loss": red.val_loss,
                             "edges": [list(e) for e in sorted(red.graph.edges)]})
                if best is None or red.val_loss < best[0].val_loss:
                    best = (red, {"K": K, "lambda2": l2, "learning_rate": lr})
    red, sel = best
    return MethodOutcome(method, red.model, red.graph, sel, {"points": rows})


def _nonzero_loss(cfg: LossConfig) -> dict:
    d = cfg.to_dict()
    out = {"regularizer": d["regularizer"]}
    for k in ("lambda1", "lambda2", "en_lambda1", "en_lambda2"):
        if d[k]:
            out[k] = d[k]
    return out
