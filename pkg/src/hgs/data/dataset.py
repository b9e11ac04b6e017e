"""Forecasting instances on a uniform time grid, with JSON-lines persistence."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

DATASET_FORMAT = "hgs-dataset"
DATASET_VERSION = 1


@dataclass
class Dataset:
    """Stacked instances.

    past_obs (N, p+1, n_obs) ends with the observation at t0; past_inputs
    (N, p, m) cover the p history steps before t0; future_inputs (N, q, m)
    drive steps t0..t_{q-1}; future_obs (N, q, n_obs) are the targets at t1..tq.
    """

    past_obs: np.ndarray
    past_inputs: np.ndarray
    future_inputs: np.ndarray
    future_obs: np.ndarray
    obs_names: list[str]
    input_names: list[str]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.past_obs = np.asarray(self.past_obs, dtype=np.float64)
        self.future_obs = np.asarray(self.future_obs, dtype=np.float64)
        self.future_inputs = np.asarray(self.future_inputs, dtype=np.float64)
        N = self.past_obs.shape[0]
        m = len(self.input_names)
        self.past_inputs = np.asarray(self.past_inputs, dtype=np.float64).reshape(N, self.past_obs.shape[1] - 1, m)
        n_obs = len(self.obs_names)
        if self.past_obs.ndim != 3 or self.past_obs.shape[2] != n_obs:
            raise ValueError("past_obs must be (N, p+1, n_obs)")
        if self.future_obs.shape[0] != N or self.future_obs.shape[2] != n_obs:
            raise ValueError("future_obs must be (N, q, n_obs)")
        if self.future_inputs.shape != (N, self.future_obs.shape[1], m):
            raise ValueError("future_inputs must be (N, q, m)")
        self.obs_names = list(self.obs_names)
        self.input_names = list(self.input_names)

    def __len__(self):
        return self.past_obs.shape[0]

    @property
    def p(self) -> int:
        return self.past_obs.shape[1] - 1

    @property
    def q(self) -> int:
        return self.future_obs.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.past_obs[idx], self.past_inputs[idx], self.future_inputs[idx], self.future_obs[idx],
                       self.obs_names, self.input_names, dict(self.meta))

    def aligned(self, model) -> "Dataset":
        """Reorder channels to the model's observable and input order."""
        oc = model.obs_columns(self.obs_names)
        ic = model.input_columns(self.input_names)
        return Dataset(self.past_obs[:, :, oc], self.past_inputs[:, :, ic], self.future_inputs[:, :, ic],
                       self.future_obs[:, :, oc], list(model.obs_features), list(model.input_features),
                       dict(self.meta))

    @staticmethod
    def concat(parts: list["Dataset"]) -> "Dataset":
        first = parts[0]
        for d in parts[1:]:
            if d.obs_names != first.obs_names or d.input_names != first.input_names:
                raise ValueError("cannot concatenate datasets with different channels")
        return Dataset(np.concatenate([d.past_obs for d in parts]), np.concatenate([d.past_inputs for d in parts]),
                       np.concatenate([d.future_inputs for d in parts]), np.concatenate([d.future_obs for d in parts]),
                       first.obs_names, first.input_names, dict(first.meta))

    # --- JSON lines ------------------------------------------------------------

    def header(self) -> dict:
        return {"format": DATASET_FORMAT, "version": DATASET_VERSION, "obs_names": self.obs_names,
                "input_names": self.input_names, "p": self.p, "q": self.q, "size": len(self), "meta": self.meta}

    def dumps(self) -> str:
        lines = [json.dumps(self.header(), sort_keys=True)]
        for i in range(len(self)):
            lines.append(json.dumps({
                "past_obs": self.past_obs[i].tolist(),
                "past_inputs": self.past_inputs[i].tolist(),
                "future_inputs": self.future_inputs[i].tolist(),
                "future_obs": self.future_obs[i].tolist(),
            }, sort_keys=True))
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "Dataset":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty dataset file")
        head = json.loads(lines[0])
        if head.get("format") != DATASET_FORMAT:
            raise ValueError("not a dataset file (missing header line)")
        if head.get("version") != DATASET_VERSION:
            raise ValueError(f"unsupported dataset version {head.get('version')}")
        rows = [json.loads(ln) for ln in lines[1:]]
        p, q = head["p"], head["q"]
        m, n_obs = len(head["input_names"]), len(head["obs_names"])
        N = len(rows)

        def stack(key, shape):
            if not rows:
                return np.zeros((0,) + shape)
            return np.array([r[key] for r in rows], dtype=np.float64).reshape((N,) + shape)

        return cls(stack("past_obs", (p + 1, n_obs)), stack("past_inputs", (p, m)),
                   stack("future_inputs", (q, m)), stack("future_obs", (q, n_obs)),
                   head["obs_names"], head["input_names"], head.get("meta") or {})

    @classmethod
    def load(cls, path) -> "Dataset":
        with open(path) as f:
            return cls.loads(f.read())


@dataclass
class Standardizer:
    """Per-channel affine scaling fitted on training data."""

    obs_mean: np.ndarray
    obs_std: np.ndarray
    in_mean: np.ndarray
    in_std: np.ndarray

    @classmethod
    def fit(cls, ds: Dataset) -> "Standardizer":
        obs = np.concatenate([ds.past_obs.reshape(-1, ds.past_obs.shape[2]),
                              ds.future_obs.reshape(-1, ds.future_obs.shape[2])])
        ins = np.concatenate([ds.past_inputs.reshape(-1, ds.past_inputs.shape[2]),
                              ds.future_inputs.reshape(-1, ds.future_inputs.shape[2])])

        def safe_std(a):
            s = a.std(axis=0) if a.size else np.ones(a.shape[1])
            return np.where(s > 0, s, 1.0)

        om = obs.mean(axis=0) if obs.size else np.zeros(obs.shape[1])
        im = ins.mean(axis=0) if ins.size else np.zeros(ins.shape[1])
        return cls(om, safe_std(obs), im, safe_std(ins))

    def transform(self, ds: Dataset) -> Dataset:
        return Dataset((ds.past_obs - self.obs_mean) / self.obs_std, (ds.past_inputs - self.in_mean) / self.in_std,
                       (ds.future_inputs - self.in_mean) / self.in_std, (ds.future_obs - self.obs_mean) / self.obs_std,
                       ds.obs_names, ds.input_names, dict(ds.meta))

    def inverse_obs(self, y: np.ndarray) -> np.ndarray:
        return y * self.obs_std + self.obs_mean

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("obs_mean", "obs_std", "in_mean", "in_std")}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(*(np.array(d[k], dtype=np.float64) for k in ("obs_mean", "obs_std", "in_mean", "in_std")))
