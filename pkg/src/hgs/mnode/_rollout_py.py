"""Numpy rollout kernel (fallback when the compiled extension is unavailable).

Vectorized over the batch; loops over steps, nodes and layers.
"""
from __future__ import annotations

import numpy as np

from .plan import KIND_INPUT, KIND_STATE, RolloutPlan


def _layers(plan: RolloutPlan, pv: np.ndarray, n: int):
    dims = plan.ldims[plan.ldim_ptr[n]:plan.ldim_ptr[n + 1]]
    pos = int(plan.theta_ptr[n])
    out = []
    for k in range(dims.size - 1):
        a, b = int(dims[k]), int(dims[k + 1])
        W = pv[pos:pos + a * b].reshape(a, b)
        pos += a * b
        out.append((W, pos, b))
        pos += b
    return out


def _gather(plan, pv, n, s, u, t, B):
    cols = []
    for p in range(plan.par_ptr[n], plan.par_ptr[n + 1]):
        kind, off, dim, widx = plan.par_kind[p], plan.par_off[p], plan.par_dim[p], plan.par_widx[p]
        if kind == KIND_STATE:
            block = s[:, off:off + dim]
        elif kind == KIND_INPUT:
            block = u[:, off:off + dim]
        else:
            block = np.full((B, 1), t)
        cols.append(block * pv[widx] if widx >= 0 else block)
    return np.concatenate(cols, axis=1) if cols else np.zeros((B, 0))


def forward(plan: RolloutPlan, pv, s0, inputs, times, dt: float, keep_cache: bool = True):
    """Euler rollout. Returns states (q+1, B, D) and the cache (or None)."""
    pv = np.asarray(pv, dtype=np.float64)
    q, B = inputs.shape[0], s0.shape[0]
    states = np.empty((q + 1, B, plan.state_dim))
    states[0] = s0
    cache = np.empty((q, B, plan.cache_stride)) if keep_cache else None
    nets = [_layers(plan, pv, n) for n in range(plan.n_nodes)]
    for h in range(q):
        s = states[h]
        nxt = s.copy()
        for n in range(plan.n_nodes):
            x = _gather(plan, pv, n, s, inputs[h], times[h], B)
            col = int(plan.c_off[n])
            layers = nets[n]
            for k, (W, bpos, width) in enumerate(layers):
                if cache is not None:
                    cache[h, :, col:col + x.shape[1]] = x
                col += x.shape[1]
                x = x @ W + pv[bpos:bpos + width]
                if k < len(layers) - 1:
                    x = np.maximum(x, 0.0)
            off, dim = plan.node_off[n], plan.node_dim[n]
            nxt[:, off:off + dim] += dt * x
        states[h + 1] = nxt
    return states, cache


def backward(plan: RolloutPlan, pv, states, inputs, times, dt: float, cache, gstates):
    """Vector-Jacobian product of ``forward``.

    ``gstates`` is dL/dstates (q+1, B, D). Returns dL/ds0 (B, D) and dL/dpv.
    """
    pv = np.asarray(pv, dtype=np.float64)
    q, B = inputs.shape[0], states.shape[1]
    dpv = np.zeros_like(pv)
    nets = [_layers(plan, pv, n) for n in range(plan.n_nodes)]
    g = gstates[q].copy()
    for h in range(q - 1, -1, -1):
        gn = g.copy()
        s = states[h]
        for n in range(plan.n_nodes):
            off, dim = plan.node_off[n], plan.node_dim[n]
            layers = nets[n]
            widths = [W.shape[0] for W, _, _ in layers]
            cols = np.cumsum([int(plan.c_off[n])] + widths)
            ga = dt * g[:, off:off + dim]
            for k in range(len(layers) - 1, -1, -1):
                W, bpos, width = layers[k]
                a = cache[h, :, cols[k]:cols[k + 1]]
                wpos = bpos - W.size
                dpv[wpos:bpos] += (a.T @ ga).ravel()
                dpv[bpos:bpos + width] += ga.sum(axis=0)
                ga = ga @ W.T
                if k > 0:
                    ga = ga * (a > 0)
            # ga is now d/dx of the weighted MLP input
            col = 0
            for p in range(plan.par_ptr[n], plan.par_ptr[n + 1]):
                kind, poff, pdim, widx = plan.par_kind[p], plan.par_off[p], plan.par_dim[p], plan.par_widx[p]
                gx = ga[:, col:col + pdim]
                col += pdim
                if kind == KIND_STATE:
                    raw = s[:, poff:poff + pdim]
                elif kind == KIND_INPUT:
                    raw = inputs[h][:, poff:poff + pdim]
                else:
                    continue
                w = 1.0
                if widx >= 0:
                    dpv[widx] += np.sum(gx * raw)
                    w = pv[widx]
                if kind == KIND_STATE:
                    gn[:, poff:poff + pdim] += w * gx
        g = gn + gstates[h]
    return g, dpv
