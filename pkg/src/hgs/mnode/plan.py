"""Flat integer description of an MNODE rollout, shared by both kernel backends.

Parent blocks of node ``n`` are ``par_ptr[n]:par_ptr[n+1]``. A block reads
``par_dim`` values starting at ``par_off`` from the state vector (kind 0) or
the input vector (kind 1), or the scaled time (kind 2, dim 1). Each block is
multiplied by ``pv[par_widx]`` (or 1 when the index is -1) before entering
the node's MLP.

MLP tensors of node ``n`` sit contiguously in the parameter vector starting
at ``theta_ptr[n]`` as W0, b0, W1, b1, ... with W stored (fan_in, fan_out)
row-major. Layer widths are ``ldims[ldim_ptr[n]:ldim_ptr[n+1]]``.

The rollout cache has shape (q, B, cache_stride). For node ``n`` at step h
it holds the weighted MLP input followed by every hidden activation, starting
at column ``c_off[n]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KIND_STATE = 0
KIND_INPUT = 1
KIND_TIME = 2


@dataclass(frozen=True)
class RolloutPlan:
    node_off: np.ndarray
    node_dim: np.ndarray
    theta_ptr: np.ndarray
    ldim_ptr: np.ndarray
    ldims: np.ndarray
    c_off: np.ndarray
    par_ptr: np.ndarray
    par_kind: np.ndarray
    par_off: np.ndarray
    par_dim: np.ndarray
    par_widx: np.ndarray
    state_dim: int
    input_dim: int
    cache_stride: int
    max_width: int

    @property
    def n_nodes(self) -> int:
        return int(self.node_off.size)


def _i(a) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(a, dtype=np.int64))


def build_plan(nodes, state_dim: int, input_dim: int) -> RolloutPlan:
    """``nodes``: list of dicts with keys off, dim, theta_ptr, layer_dims, parents.

    ``parents`` is a list of (kind, off, dim, widx) tuples in MLP input order.
    """
    node_off, node_dim, theta_ptr, ldim_ptr, ldims, c_off = [], [], [], [0], [], []
    par_ptr, par_kind, par_off, par_dim, par_widx = [0], [], [], [], []
    stride = 0
    width = 1
    for nd in nodes:
        dims = list(nd["layer_dims"])
        in_dim = sum(p[2] for p in nd["parents"])
        if dims[0] != in_dim or dims[-1] != nd["dim"]:
            raise ValueError("MLP widths disagree with the parent blocks or node dim")
        node_off.append(nd["off"])
        node_dim.append(nd["dim"])
        theta_ptr.append(nd["theta_ptr"])
        ldims.extend(dims)
        ldim_ptr.append(len(ldims))
        c_off.append(stride)
        stride += sum(dims[:-1])
        width = max(width, max(dims))
        for kind, off, dim, widx in nd["parents"]:
            par_kind.append(kind)
            par_off.append(off)
            par_dim.append(dim)
            par_widx.append(widx)
        par_ptr.append(len(par_kind))
    return RolloutPlan(
        _i(node_off), _i(node_dim), _i(theta_ptr), _i(ldim_ptr), _i(ldims), _i(c_off),
        _i(par_ptr), _i(par_kind), _i(par_off), _i(par_dim), _i(par_widx),
        int(state_dim), int(input_dim), int(stride), int(width),
    )
