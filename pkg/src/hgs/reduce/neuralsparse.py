"""Learned edge sampler followed by a fixed-graph fit on the sampled subgraph.

Logits over edges define selection probabilities. K rows of sharpened
Gumbel draws each concentrate on about one edge. During training the edge
multiplier is the soft union 1 - prod_k (1 - w_k); it is trained jointly with
the MLPs. Afterwards one frozen draw is rounded to two decimals and every
edge with a nonzero entry in some row is kept.
"""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..mnode import MnodeConfig, MnodeModel
from ..nn import NonFiniteError, ad
from ..train import AdamState, LossConfig, TrainConfig, adam_step, penalty, sse
from .base import ReductionError, ReductionResult, check_graph, fit_subgraph

SHARPNESS = 10.0
MAX_RETRIES = 10
_TINY = 1e-300


def gumbel_noise(rng: np.random.Generator, shape) -> np.ndarray:
    """-log(-log eps) with eps uniform on the open interval (0, 1)."""
    eps = rng.random(shape)
    eps = np.where(eps == 0.0, np.nextafter(0.0, 1.0), eps)
    return -np.log(-np.log(eps))


def relaxed_weights(alpha, noise):
    """Row-normalized exp(10 (log softmax(alpha) + noise)); works on arrays and ``ad.Var``."""
    a = ad.value(alpha)
    shift = a.max()
    log_pi = ad.sub(ad.sub(alpha, shift), ad.log(ad.vsum(ad.exp(ad.sub(alpha, shift)))))
    z = ad.mul(SHARPNESS, ad.add(log_pi, noise))
    zmax = ad.value(z).max(axis=1, keepdims=True)
    e = ad.exp(ad.sub(z, zmax))
    return ad.div(e, ad.reshape(ad.vsum(e, axis=1), (-1, 1)))


def select_edges(alpha, noise) -> np.ndarray:
    """Boolean mask of edges with a nonzero entry in some row after rounding to 2 decimals."""
    w = np.round(np.asarray(relaxed_weights(np.asarray(alpha, dtype=np.float64), noise)), 2)
    return np.any(w > 0, axis=0)


def soft_union(w):
    miss = None
    for k in range(ad.value(w).shape[0]):
        row = ad.sub(1.0, ad.getitem(w, k))
        miss = row if miss is None else ad.mul(miss, row)
    return ad.sub(1.0, miss)


def train_sampler(graph, train_ds, K: int, tcfg: TrainConfig, lambda2: float, mcfg: MnodeConfig,
                  rng: np.random.Generator):
    """Joint Adam fit of the MLPs and the edge logits; fresh noise every epoch."""
    cfg = replace(mcfg, edge_weights=True, weight_sharing=False)
    model = MnodeModel.create(graph, cfg, seed=tcfg.seed)
    tr = train_ds.aligned(model)
    n = len(model.params)
    ws, we = model.canonical_weight_slice()
    E = we - ws
    place = np.zeros((E, n))
    place[np.arange(E), ws + np.arange(E)] = 1.0
    keep = np.ones(n)
    keep[ws:we] = 0.0
    lcfg = LossConfig(lambda2=lambda2, regularizer="none")
    x = np.concatenate([model.params.values * keep, rng.normal(size=E)])
    state = AdamState.zeros(x.size)
    trace = []
    for _ in range(tcfg.epochs):
        noise = gumbel_noise(rng, (K, E))

        def objective(v):
            theta = ad.getitem(v, slice(0, n))
            mult = soft_union(relaxed_weights(ad.getitem(v, slice(n, n + E)), noise))
            pv = ad.add(ad.mul(theta, keep), ad.reshape(ad.matmul(ad.reshape(mult, (1, E)), place), (n,)))
            return ad.add(sse(model, tr, pv, tcfg.backend), penalty(model, lcfg, pv))

        try:
            val, g = ad.value_and_grad(objective, x)
        except NonFiniteError:
            break
        trace.append(val)
        x, state = adam_step(x, g, state, tcfg.learning_rate)
    return model, x[n:], trace


def reduce_neuralsparse(graph, train_ds, val_ds, K: int, tcfg: TrainConfig | None = None, lambda2: float = 1e-3,
                        mcfg=None, seed: int | None = None) -> ReductionResult:
    tcfg = tcfg or TrainConfig()
    mcfg = mcfg or MnodeConfig()
    edges = check_graph(graph)
    if not 1 <= K <= len(edges):
        raise ValueError(f"K must lie in [1, {len(edges)}]")
    rng = np.random.default_rng(tcfg.seed if seed is None else seed)
    model, alpha, sampler_trace = train_sampler(graph, train_ds, K, tcfg, lambda2, mcfg, rng)
    order = [model.canonical_edges[i] for i in range(len(alpha))]
    for attempt in range(1, MAX_RETRIES + 1):
        mask = select_edges(alpha, gumbel_noise(rng, (K, len(alpha))))
        if mask.any():
            break
    else:
        raise ReductionError(f"rounding removed every edge in {MAX_RETRIES} draws")
    chosen = [e for e, m in zip(order, mask) if m]
    res, v = fit_subgraph(graph, chosen, train_ds, val_ds, tcfg, lambda2, mcfg)
    if res is None:
        raise ReductionError("the fit on the sampled subgraph diverged")
    pi = np.exp(alpha - alpha.max())
    pi /= pi.sum()
    trace = [{"K": K, "attempts": attempt, "edges": [list(e) for e in chosen],
              "selection_prob": {f"{u}->{w}": float(p) for (u, w), p in zip(order, pi)},
              "sampler_loss_first_last": [sampler_trace[0], sampler_trace[-1]] if sampler_trace else []}]
    return ReductionResult("NS", graph.with_edges(chosen), res.model, v, [v], trace)
