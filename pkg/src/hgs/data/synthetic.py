"""Synthetic forecasting data: one observable driven by one informative input.

``synthetic_cases`` reproduces the reference generator draw for draw
(numpy ``default_rng``): per instance the signal input noise, then the
redundant inputs in index order; after all instances one standard-normal
array of the full stacked shape, whose first channel is appended.
"""
from __future__ import annotations

import numpy as np

from .dataset import Dataset

N_STEPS = 60
DT = 5e-2

REDUNDANT = {"refined": 3, "comprehensive": 6}
# effect sizes of the redundant inputs x2, x3, ... in the quasi-sparse regime
QUASI_COEFS = {
    "refined": (-0.4, 0.04, -0.004),
    "comprehensive": (-4e-1, 4e-2, -4e-3, 4e-4, -4e-5),
}


def synthetic_cases(seed: int, regime: str = "true", graph_kind: str = "refined", size: int = 100,
                    noise_scale: float = 0.5) -> np.ndarray:
    """Raw array (size, 60, 1 + 1 + redundant + 1): columns v, x1..xk, noise."""
    if regime not in ("true", "quasi"):
        raise ValueError(f"unknown regime {regime!r}; expected true or quasi")
    if graph_kind not in REDUNDANT:
        raise ValueError(f"unknown graph kind {graph_kind!r}; expected refined or comprehensive")
    if size < 1:
        raise ValueError("size must be at least 1")
    rng = np.random.default_rng(seed=seed)
    n = N_STEPS
    t = np.linspace(1, n, n).reshape(n, 1)
    coefs = QUASI_COEFS[graph_kind]
    data = []
    for _ in range(size):
        x = [(i + 1) / 100 * np.exp(1 - t / n / 10 / (i + 1)) + rng.normal(0, noise_scale, (n, 1)) for i in range(1)]
        for _ in range(REDUNDANT[graph_kind]):
            x.append(rng.normal(0, noise_scale, (n, 1)))
        x = np.concatenate(x, axis=1)
        v = [0]
        for i in range(n):
            drive = 4 * x[i, 0]
            if regime == "quasi":
                for j, c in enumerate(coefs):
                    drive = drive + c * x[i, j + 1]
            v.append(v[-1] + DT * (drive - 0.5 * (v[-1] - 1)))
        data.append(np.concatenate([np.reshape(v[1:], (n, 1)), x], axis=-1))
    cases = np.array(data)
    noise = rng.standard_normal(size=cases.shape, dtype="float64")
    return np.concatenate([cases, noise[:, :, :1]], axis=-1)


def synthetic_input_names(graph_kind: str) -> list[str]:
    return [f"x{i + 1}" for i in range(1 + REDUNDANT[graph_kind])] + ["noise"]


ALIGNMENTS = ("stamp", "generator")


def cases_to_dataset(cases: np.ndarray, graph_kind: str, meta: dict | None = None,
                     alignment: str = "stamp") -> Dataset:
    """Each instance starts from the known state 0 and forecasts the 60 case rows.

    Row h of a case holds v_{h+1} and the input x_h that produced it. With
    ``alignment="stamp"`` the rows are read as time stamps t_1..t_60 and each
    Euler step from t_h uses the input recorded at t_h, so the step into row h
    sees row h-1's input (zeros before the first row). ``"generator"`` pairs
    each target with the input that produced it, which makes the task exactly
    learnable.
    """
    if alignment not in ALIGNMENTS:
        raise ValueError(f"unknown alignment {alignment!r}; expected one of {ALIGNMENTS}")
    N, n, _ = cases.shape
    names = synthetic_input_names(graph_kind)
    v = cases[:, :, :1]
    x = cases[:, :, 1:]
    if x.shape[2] != len(names):
        raise ValueError("case array does not match the graph kind")
    if alignment == "stamp":
        x = np.concatenate([np.zeros((N, 1, x.shape[2])), x[:, :-1]], axis=1)
    meta = dict(meta or {})
    meta["alignment"] = alignment
    return Dataset(np.zeros((N, 1, 1)), np.zeros((N, 0, len(names))), x, v, ["s1"], names, meta)


def gen_synthetic(seed: int, regime: str = "true", graph_kind: str = "refined", size: int = 100,
                  noise_scale: float = 0.5, alignment: str = "stamp") -> Dataset:
    cases = synthetic_cases(seed, regime, graph_kind, size, noise_scale)
    meta = {"generator": "synthetic", "seed": seed, "regime": regime, "graph": graph_kind,
            "size": size, "noise_scale": noise_scale}
    return cases_to_dataset(cases, graph_kind, meta, alignment)
