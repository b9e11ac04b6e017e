"""Closed-form edge weights and the equivalent group penalty on first-layer blocks.

Scaling a parent block by w before the first MLP layer is the same as scaling
that block's first-layer rows by w. Writing G = w * rows, the L1-on-w plus
L2-on-MLP penalty minimized over w > 0 has a closed form, and what remains is
a group penalty with exponent 2/3 on the norms of the G blocks. Edges that
share one weight form one group.
"""
from __future__ import annotations

import numpy as np

from ..mnode.model import node_component
from ..nn import ad
from .loss import sse


def optimal_edge_weight(gamma_norm: float, lambda1: float, lambda2: float) -> float:
    """Minimizer over w > 0 of ``lambda1 * w + lambda2 * gamma_norm**2 / w**2``."""
    if not lambda1 > 0:
        raise ValueError("lambda1 must be positive; the weight penalty is degenerate otherwise")
    if gamma_norm < 0 or lambda2 < 0:
        raise ValueError("gamma_norm and lambda2 must be nonnegative")
    return float((2.0 * lambda2 * gamma_norm ** 2 / lambda1) ** (1.0 / 3.0))


def group_lambda(lambda1: float, lambda2: float) -> float:
    """Coefficient of the 2/3-power group penalty left after eliminating the edge weights."""
    return float(3.0 * 2.0 ** (-2.0 / 3.0) * lambda1 ** (2.0 / 3.0) * lambda2 ** (1.0 / 3.0))


def edge_row_index(model) -> dict[tuple[str, str], np.ndarray]:
    """Flat indices of the first-layer rows reading each edge's parent block."""
    out = {}
    for (u, v) in sorted(model.share_map):
        start, _ = model.params.index_range((node_component(v), "W0"))
        fan_out = model.params[(node_component(v), "W0")].shape[1]
        r0, r1 = model.first_layer_block(v, u)
        out[(u, v)] = start + np.arange(r0 * fan_out, r1 * fan_out)
    return out


def groups(model) -> dict[tuple[str, str], np.ndarray]:
    """Canonical edge -> flat indices of all first-layer rows scaled by that weight."""
    rows = edge_row_index(model)
    out: dict = {c: [] for c in model.canonical_edges}
    for e, c in model.share_map.items():
        out[c].append(rows[e])
    return {c: np.sort(np.concatenate(ix)) for c, ix in out.items()}


def rest_index(model) -> np.ndarray:
    """Decoder parameters outside every edge block (biases, deeper layers, time rows)."""
    m = model.decoder_mask().copy()
    for ix in edge_row_index(model).values():
        m[ix] = False
    return np.flatnonzero(m)


def reparameterize(model):
    """Fold the edge weights into the first-layer rows; all weights become 1."""
    if not model.config.edge_weights:
        raise ValueError("model has no edge weights to fold")
    vals = model.params.values.copy()
    ws, we = model.canonical_weight_slice()
    w = vals[ws:we].copy()
    for c, ix in groups(model).items():
        vals[ix] *= w[model.canon_index[c]]
    vals[ws:we] = 1.0
    return model.with_params(vals)


def from_reparam(model, lambda1: float, lambda2: float):
    """Inverse of ``reparameterize`` with each weight set to its penalty-optimal value."""
    vals = model.params.values.copy()
    ws, we = model.canonical_weight_slice()
    if not np.allclose(vals[ws:we], 1.0, rtol=0, atol=0):
        raise ValueError("model is not in folded form (edge weights must all be 1)")
    for c, ix in groups(model).items():
        w = optimal_edge_weight(float(np.linalg.norm(vals[ix])), lambda1, lambda2)
        vals[ws + model.canon_index[c]] = w
        vals[ix] = vals[ix] / w if w > 0 else 0.0
    return model.with_params(vals)


def group_penalty(model, lambda2: float, lambda3: float, pv=None):
    pv = model.params.values if pv is None else pv
    total = 0.0
    rest = rest_index(model)
    if lambda2 and rest.size:
        total = ad.add(total, ad.mul(lambda2, ad.vsum(ad.square(ad.getitem(pv, rest)))))
    if lambda3:
        for ix in groups(model).values():
            sq = ad.vsum(ad.square(ad.getitem(pv, ix)))
            if float(ad.value(sq)) > 0:
                total = ad.add(total, ad.mul(lambda3, ad.power(sq, 1.0 / 3.0)))
    return total


def group_lasso_loss(model, ds, lambda2: float, lambda3: float, pv=None):
    """Squared error plus ``lambda2 * |rest|^2 + lambda3 * sum |G|^(2/3)`` for a folded model."""
    ws, we = model.canonical_weight_slice()
    vals = model.params.values if pv is None else ad.value(pv)
    if we > ws and not np.all(vals[ws:we] == 1.0):
        raise ValueError("model is not in folded form (edge weights must all be 1)")
    a = ds.aligned(model)
    out = ad.add(sse(model, a, pv), group_penalty(model, lambda2, lambda3, pv))
    return out if ad.is_var(out) else float(np.asarray(out))
