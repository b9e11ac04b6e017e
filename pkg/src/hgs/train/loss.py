"""Training objective: squared forecast error plus a sparsity penalty on edge weights."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..nn import ad

REGULARIZERS = ("hgs-l1l2", "egl", "elastic-net", "none")


@dataclass(frozen=True)
class LossConfig:
    """Penalty selection.

    ``lambda2`` always weighs the squared norm of the decoder MLP parameters
    (and of the encoder when ``l2_encoder``). The edge-weight term depends on
    ``regularizer``:

    - hgs-l1l2: ``lambda1 * sum |w|``
    - egl: ``lambda1 * sum_v (sum_{u -> v} |w_uv|)**2``
    - elastic-net: ``sum en_lambda1 * |w| + en_lambda2 * w**2``
    - none: no edge term
    """

    lambda1: float = 0.0
    lambda2: float = 0.0
    regularizer: str = "hgs-l1l2"
    en_lambda1: float = 0.0
    en_lambda2: float = 0.0
    exempt_edges: frozenset = field(default_factory=frozenset)
    l2_encoder: bool = False

    def __post_init__(self):
        if self.regularizer not in REGULARIZERS:
            raise ValueError(f"unknown regularizer {self.regularizer!r}; expected one of {REGULARIZERS}")
        for k in ("lambda1", "lambda2", "en_lambda1", "en_lambda2"):
            v = getattr(self, k)
            if not (v >= 0 and np.isfinite(v)):
                raise ValueError(f"{k} must be a finite nonnegative number, got {v}")
        object.__setattr__(self, "exempt_edges", frozenset(tuple(e) for e in self.exempt_edges))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["exempt_edges"] = sorted(list(e) for e in self.exempt_edges)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LossConfig":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown loss options {sorted(unknown)}")
        if "exempt_edges" in d:
            d["exempt_edges"] = frozenset(tuple(e) for e in d["exempt_edges"])
        return cls(**d)


def penalized_weight_index(model, cfg: LossConfig) -> np.ndarray:
    """Positions (into the canonical weight vector) of weights that carry the penalty.

    A shared weight is exempt when any edge reading it is exempt.
    """
    exempt = {model.share_map[e] for e in cfg.exempt_edges if e in model.share_map}
    unknown = [e for e in cfg.exempt_edges if e not in model.share_map]
    if unknown:
        raise ValueError(f"exempt edges not in the graph: {sorted(unknown)}")
    return np.array([i for i, c in enumerate(model.canonical_edges) if c not in exempt], dtype=np.int64)


def l2_index(model, cfg: LossConfig) -> np.ndarray:
    m = model.decoder_mask()
    if cfg.l2_encoder:
        m = m | model.encoder_mask()
    return np.flatnonzero(m)


def _egl_matrix(model, cfg: LossConfig, keep: np.ndarray) -> np.ndarray:
    """(destinations, canonical weights) incidence so that ``G @ |w|`` gives per-node sums."""
    keep = set(keep.tolist())
    dests = sorted({v for _, v in model.share_map})
    row = {v: i for i, v in enumerate(dests)}
    G = np.zeros((len(dests), len(model.canonical_edges)))
    for e, c in model.share_map.items():
        if e in cfg.exempt_edges:
            continue
        j = model.canon_index[c]
        if j in keep:
            G[row[e[1]], j] += 1.0
    return G


def penalty(model, cfg: LossConfig, pv=None):
    """Regularization term at flat parameters ``pv`` (array or ``ad.Var``)."""
    pv = model.params.values if pv is None else pv
    total = 0.0
    ws, we = model.canonical_weight_slice()
    if cfg.regularizer != "none" and we > ws:
        keep = penalized_weight_index(model, cfg)
        if keep.size:
            w = ad.getitem(ad.getitem(pv, slice(ws, we)), keep)
            if cfg.regularizer == "hgs-l1l2":
                if cfg.lambda1:
                    total = ad.add(total, ad.mul(cfg.lambda1, ad.vsum(ad.vabs(w))))
            elif cfg.regularizer == "egl":
                if cfg.lambda1:
                    G = _egl_matrix(model, cfg, keep)[:, keep]
                    sums = ad.matmul(G, ad.vabs(w))
                    total = ad.add(total, ad.mul(cfg.lambda1, ad.vsum(ad.square(sums))))
            else:
                if cfg.en_lambda1:
                    total = ad.add(total, ad.mul(cfg.en_lambda1, ad.vsum(ad.vabs(w))))
                if cfg.en_lambda2:
                    total = ad.add(total, ad.mul(cfg.en_lambda2, ad.vsum(ad.square(w))))
    if cfg.lambda2:
        idx = l2_index(model, cfg)
        if idx.size:
            total = ad.add(total, ad.mul(cfg.lambda2, ad.vsum(ad.square(ad.getitem(pv, idx)))))
    return total


def sse(model, ds, pv=None, backend_name=None):
    """Sum of squared forecast errors over instances, steps and observables.

    ``ds`` must already be aligned to the model (see ``Dataset.aligned``).
    """
    pred = model.predict_arrays(ds.past_obs, ds.past_inputs, ds.future_inputs, pv=pv, backend_name=backend_name)
    return ad.vsum(ad.square(ad.sub(pred, ds.future_obs)))


def loss(model, ds, cfg: LossConfig, pv=None, backend_name=None):
    """Squared error plus penalty; a float for arrays, an ``ad.Var`` when ``pv`` is one."""
    a = ds.aligned(model)
    out = ad.add(sse(model, a, pv, backend_name), penalty(model, cfg, pv))
    return out if ad.is_var(out) else float(np.asarray(out))


def mse(model, ds, pv=None, backend_name=None) -> float:
    """Mean squared forecast error (no penalty); the validation criterion."""
    a = ds.aligned(model)
    if len(a) == 0 or a.q == 0:
        raise ValueError("cannot score an empty dataset")
    pv = model.params.values if pv is None else ad.value(pv)
    pred = model.predict_arrays(a.past_obs, a.past_inputs, a.future_inputs, pv=pv, backend_name=backend_name)
    return float(np.mean((np.asarray(pred) - a.future_obs) ** 2))


def enp(params, threshold: float = 1e-3) -> int:
    """Number of parameters with magnitude above ``threshold``."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    values = params.values if hasattr(params, "values") and not isinstance(params, np.ndarray) else params
    return int(np.count_nonzero(np.abs(np.asarray(values, dtype=np.float64)) > threshold))
