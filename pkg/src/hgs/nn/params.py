"""Flat parameter vector with a named layout, plus a versioned JSON checkpoint."""
from __future__ import annotations

import json
from typing import Iterable, Iterator

import numpy as np

from . import ad

CHECKPOINT_FORMAT = "hgs-params"
CHECKPOINT_VERSION = 1

Key = tuple[str, str]


class ParamVector:
    """All trainable parameters in one float64 array.

    ``layout`` maps (component, tensor name) to (start, stop, shape). Entries
    are contiguous and in insertion order, so the layout covers the vector
    exactly once.
    """

    def __init__(self, values: np.ndarray, layout: dict[Key, tuple[int, int, tuple[int, ...]]]):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError("parameter values must be a flat vector")
        pos = 0
        for key, (start, stop, shape) in layout.items():
            if start != pos or stop - start != int(np.prod(shape, dtype=np.int64)):
                raise ValueError(f"layout entry {key} is not contiguous with its shape")
            pos = stop
        if pos != values.size:
            raise ValueError(f"layout covers {pos} entries, vector has {values.size}")
        self.values = values
        self.layout = dict(layout)

    @classmethod
    def from_arrays(cls, arrays: Iterable[tuple[Key, np.ndarray]]) -> "ParamVector":
        layout = {}
        chunks = []
        pos = 0
        for key, arr in arrays:
            arr = np.asarray(arr, dtype=np.float64)
            if key in layout:
                raise ValueError(f"duplicate parameter {key}")
            layout[key] = (pos, pos + arr.size, tuple(arr.shape))
            chunks.append(arr.ravel())
            pos += arr.size
        values = np.concatenate(chunks) if chunks else np.zeros(0)
        return cls(values, layout)

    def __len__(self):
        return self.values.size

    def keys(self) -> list[Key]:
        return list(self.layout)

    def components(self) -> list[str]:
        out = []
        for comp, _ in self.layout:
            if comp not in out:
                out.append(comp)
        return out

    def __getitem__(self, key: Key) -> np.ndarray:
        start, stop, shape = self.layout[key]
        return self.values[start:stop].reshape(shape)

    def view(self, flat, key: Key):
        """Slice ``key`` out of ``flat`` (array or Var) with this layout."""
        start, stop, shape = self.layout[key]
        return ad.reshape(ad.getitem(flat, slice(start, stop)), shape)

    def component_slices(self, flat, component: str) -> dict[str, object]:
        return {name: self.view(flat, (c, name)) for c, name in self.layout if c == component}

    def index_range(self, key: Key) -> tuple[int, int]:
        start, stop, _ = self.layout[key]
        return start, stop

    def mask(self, predicate) -> np.ndarray:
        """Boolean mask over the flat vector selecting entries whose key passes ``predicate``."""
        m = np.zeros(self.values.size, dtype=bool)
        for key, (start, stop, _) in self.layout.items():
            if predicate(key):
                m[start:stop] = True
        return m

    def unflatten(self) -> dict[Key, np.ndarray]:
        return {k: self[k].copy() for k in self.layout}

    def copy(self) -> "ParamVector":
        return ParamVector(self.values.copy(), self.layout)

    def with_values(self, values: np.ndarray) -> "ParamVector":
        return ParamVector(np.array(values, dtype=np.float64), self.layout)

    def items(self) -> Iterator[tuple[Key, np.ndarray]]:
        for k in self.layout:
            yield k, self[k]

    def to_dict(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "layout": [[c, n, s, e, list(shape)] for (c, n), (s, e, shape) in self.layout.items()],
            # repr round-trips float64 exactly
            "values": [float(v) for v in self.values],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ParamVector":
        if d.get("format") != CHECKPOINT_FORMAT:
            raise ValueError("not a parameter checkpoint")
        if d.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {d.get('version')}")
        layout = {(c, n): (s, e, tuple(shape)) for c, n, s, e, shape in d["layout"]}
        return cls(np.array(d["values"], dtype=np.float64), layout)

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "ParamVector":
        return cls.from_dict(json.loads(text))


def grad(loss_fn, params: ParamVector) -> tuple[float, ParamVector]:
    """Loss value and exact gradient of ``loss_fn(flat_var)`` in the layout of ``params``.

    Raises ``NonFiniteError`` if the loss or any gradient entry is not finite.
    """
    val, g = ad.value_and_grad(loss_fn, params.values)
    return val, ParamVector(g, params.layout)
