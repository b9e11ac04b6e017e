"""Graph-structured neural ODE forecaster.

Each state supernode owns an MLP that reads its parents' current values,
each parent block scaled by that edge's weight, and advances by forward
Euler. The state vector lists observable supernodes first (sorted by id),
then latent ones, so the first ``n_obs`` entries are the observed features.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..graph import SuperGraph, from_dict, to_dict
from ..nn import EncoderSpec, MlpSpec, NonFiniteError, ParamVector, ad, encode, init_lstm, init_mlp
from . import backend
from .plan import KIND_INPUT, KIND_STATE, KIND_TIME, build_plan

MODEL_FORMAT = "hgs-model"
MODEL_VERSION = 1

EDGE_COMPONENT = ("edges", "w")
ENCODER_COMPONENT = "encoder"


def node_component(node_id: str) -> str:
    return f"node:{node_id}"


@dataclass(frozen=True)
class MnodeConfig:
    hidden_layers: int = 2
    hidden_units: int = 16
    delta_t: float = 1.0
    time_input: bool = False
    encoder: bool = True
    encoder_layers: int = 2
    weight_sharing: bool = True
    edge_weights: bool = True  # False: every parent block enters with a fixed weight of 1

    @classmethod
    def from_dict(cls, d: dict | None) -> "MnodeConfig":
        d = dict(d or {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown model options {sorted(unknown)}")
        return cls(**d)


def apply_weight_sharing(graph: SuperGraph) -> dict[tuple[str, str], tuple[str, str]]:
    """Map each edge to the edge whose weight it reads.

    A latent node with exactly one incoming edge (u1, v) and one outgoing edge
    (v, u2) makes (v, u2) read the weight of (u1, v). Self-loops count as both
    incoming and outgoing. Chains of such nodes resolve to the first edge.
    """
    inc: dict[str, list] = {n.id: [] for n in graph.supernodes}
    out: dict[str, list] = {n.id: [] for n in graph.supernodes}
    for u, v in graph.edges:
        out[u].append((u, v))
        inc[v].append((u, v))
    direct = {}
    for n in graph.of_kind("latent"):
        if len(inc[n.id]) == 1 and len(out[n.id]) == 1:
            (e_in,), (e_out,) = inc[n.id], out[n.id]
            if e_in != e_out:
                direct[e_out] = e_in
    share = {}
    for e in sorted(graph.edges):
        root = e
        seen = {e}
        while root in direct:
            root = direct[root]
            if root in seen:  # a closed ring of pass-through latents
                break
            seen.add(root)
        share[e] = root
    return share


class MnodeModel:
    def __init__(self, graph: SuperGraph, params: ParamVector, config: MnodeConfig,
                 share_map: dict | None = None, obs_features=None, input_features=None):
        self.graph = graph
        self.config = config
        self.params = params
        if share_map is None:
            share_map = apply_weight_sharing(graph) if config.weight_sharing else {e: e for e in graph.edges}
        if set(share_map) != set(graph.edges):
            raise ValueError("share map must cover exactly the graph's edges")
        self.share_map = dict(share_map)
        self._layout_graph()
        if obs_features is not None and list(obs_features) != self.obs_features:
            raise ValueError("observable features disagree with the graph")
        if input_features is not None and list(input_features) != self.input_features:
            raise ValueError("input features disagree with the graph")
        self._check_params()
        self.plan = self._build_plan()

    # --- construction ----------------------------------------------------------

    def _layout_graph(self):
        g = self.graph
        obs = g.of_kind("observable")
        lat = g.of_kind("latent")
        if not obs:
            raise ValueError("the graph has no observable node")
        self.state_nodes = obs + lat
        self.state_off = {}
        pos = 0
        for n in self.state_nodes:
            self.state_off[n.id] = pos
            pos += n.dim
        self.state_dim = pos
        self.n_obs = sum(n.dim for n in obs)
        self.obs_features = [f for n in obs for f in n.features]
        self.input_nodes = g.of_kind("input")
        self.input_off = {}
        pos = 0
        for n in self.input_nodes:
            self.input_off[n.id] = pos
            pos += n.dim
        self.input_dim = pos
        self.input_features = [f for n in self.input_nodes for f in n.features]
        self.canonical_edges = sorted({c for c in self.share_map.values()})
        self.canon_index = {e: i for i, e in enumerate(self.canonical_edges)}
        self.mlp_specs = {}
        for n in self.state_nodes:
            in_dim = sum(g.node(u).dim for u in g.parents(n.id)) + (1 if self.config.time_input else 0)
            self.mlp_specs[n.id] = MlpSpec(in_dim, n.dim, self.config.hidden_layers, self.config.hidden_units)
        self.encoder_spec = None
        if self.config.encoder:
            self.encoder_spec = EncoderSpec(self.n_obs + self.input_dim, self.state_dim, self.config.encoder_layers)

    @classmethod
    def create(cls, graph: SuperGraph, config: MnodeConfig | None = None, seed: int = 2024,
               share_map: dict | None = None) -> "MnodeModel":
        """Fresh model: MLPs and encoder initialized from ``seed``, edge weights 1."""
        config = config or MnodeConfig()
        shell = cls.__new__(cls)
        shell.graph, shell.config = graph, config
        if share_map is None:
            share_map = apply_weight_sharing(graph) if config.weight_sharing else {e: e for e in graph.edges}
        shell.share_map = dict(share_map)
        shell._layout_graph()
        rng = np.random.default_rng(seed)
        arrays = []
        for n in shell.state_nodes:
            arrays += [((node_component(n.id), k), v) for k, v in init_mlp(shell.mlp_specs[n.id], rng)]
        if config.edge_weights:
            arrays.append((EDGE_COMPONENT, np.ones(len(shell.canonical_edges))))
        if shell.encoder_spec is not None:
            arrays += [((ENCODER_COMPONENT, k), v) for k, v in init_lstm(shell.encoder_spec, rng)]
        return cls(graph, ParamVector.from_arrays(arrays), config, share_map)

    def _check_params(self):
        for n in self.state_nodes:
            spec = self.mlp_specs[n.id]
            d = spec.layer_dims
            for k in range(len(d) - 1):
                if self.params[(node_component(n.id), f"W{k}")].shape != (d[k], d[k + 1]):
                    raise ValueError(f"parameter shape mismatch for node {n.id!r}")
        if not self.config.edge_weights:
            if EDGE_COMPONENT in self.params.layout:
                raise ValueError("model without edge weights carries an edge weight vector")
        elif self.params[EDGE_COMPONENT].shape != (len(self.canonical_edges),):
            raise ValueError("edge weight vector does not match the canonical edges")

    def _build_plan(self):
        g = self.graph
        w_start = self.params.index_range(EDGE_COMPONENT)[0] if self.config.edge_weights else None
        nodes = []
        for n in self.state_nodes:
            parents = []
            for u in g.parents(n.id):
                un = g.node(u)
                widx = -1 if w_start is None else w_start + self.canon_index[self.share_map[(u, n.id)]]
                if un.kind == "input":
                    parents.append((KIND_INPUT, self.input_off[u], un.dim, widx))
                else:
                    parents.append((KIND_STATE, self.state_off[u], un.dim, widx))
            if self.config.time_input:
                parents.append((KIND_TIME, 0, 1, -1))
            start, _ = self.params.index_range((node_component(n.id), "W0"))
            nodes.append({
                "off": self.state_off[n.id], "dim": n.dim, "theta_ptr": start,
                "layer_dims": self.mlp_specs[n.id].layer_dims, "parents": parents,
            })
        return build_plan(nodes, self.state_dim, self.input_dim)

    def with_params(self, values) -> "MnodeModel":
        """Copy of the model with a new flat parameter vector (same layout)."""
        return MnodeModel(self.graph, self.params.with_values(values), self.config, self.share_map)

    # --- accessors -------------------------------------------------------------

    def edge_weights(self) -> dict[tuple[str, str], float]:
        if not self.config.edge_weights:
            return {e: 1.0 for e in sorted(self.share_map)}
        w = self.params[EDGE_COMPONENT]
        return {e: float(w[self.canon_index[c]]) for e, c in sorted(self.share_map.items())}

    def canonical_weight_slice(self) -> tuple[int, int]:
        """Flat index range of the canonical edge weights (empty without edge weights)."""
        if not self.config.edge_weights:
            n = len(self.params.values)
            return n, n
        return self.params.index_range(EDGE_COMPONENT)

    def decoder_mask(self) -> np.ndarray:
        return self.params.mask(lambda k: k[0].startswith("node:"))

    def encoder_mask(self) -> np.ndarray:
        return self.params.mask(lambda k: k[0] == ENCODER_COMPONENT)

    def first_layer_block(self, node_id: str, parent: str) -> tuple[int, int]:
        """Rows of W0 of ``node_id`` that read the parent block ``parent`` (as a row range)."""
        g = self.graph
        row = 0
        for u in g.parents(node_id):
            if u == parent:
                return row, row + g.node(u).dim
            row += g.node(u).dim
        raise KeyError(f"{parent!r} is not a parent of {node_id!r}")

    def input_columns(self, names) -> np.ndarray:
        """Column indices into a dataset's input channels, in model input order."""
        names = list(names)
        missing = [f for f in self.input_features if f not in names]
        if missing:
            raise ValueError(f"dataset lacks input channels {missing}")
        return np.array([names.index(f) for f in self.input_features], dtype=np.int64)

    def obs_columns(self, names) -> np.ndarray:
        names = list(names)
        missing = [f for f in self.obs_features if f not in names]
        if missing:
            raise ValueError(f"dataset lacks observable channels {missing}")
        return np.array([names.index(f) for f in self.obs_features], dtype=np.int64)

    # --- forward ---------------------------------------------------------------

    def times(self, q: int) -> np.ndarray:
        if not self.config.time_input:
            return np.zeros(q)
        return np.arange(q) / (q - 1) if q > 1 else np.zeros(q)

    def initial_condition(self, past_obs, past_inputs, pv=None):
        """Decoded initial state (B, D) from (B, p+1, n_obs) and (B, p, m) history.

        The encoder runs over the p history rows; observable entries are then
        overwritten with the observed values at t0. With p = 0 the encoder is
        bypassed and latent entries start at 0. ``pv`` may be an ``ad.Var``.
        """
        past_obs = np.asarray(past_obs, dtype=np.float64)
        past_inputs = np.asarray(past_inputs, dtype=np.float64)
        if past_obs.ndim == 2:
            past_obs = past_obs[None]
            past_inputs = past_inputs.reshape((1,) + past_inputs.shape)
        B, p1, n_obs = past_obs.shape
        if n_obs != self.n_obs:
            raise ValueError(f"expected {self.n_obs} observable features, got {n_obs}")
        p = p1 - 1
        if past_inputs.shape[:2] != (B, p) or (p > 0 and past_inputs.shape[2] != self.input_dim):
            raise ValueError(f"past inputs must have shape ({B}, {p}, {self.input_dim}), got {past_inputs.shape}")
        obs0 = past_obs[:, -1, :]
        n_lat = self.state_dim - self.n_obs
        if p == 0 or self.encoder_spec is None or n_lat == 0:
            return np.concatenate([obs0, np.zeros((B, n_lat))], axis=1)
        pv = self.params.values if pv is None else pv
        seq = np.concatenate([past_obs[:, :p, :], past_inputs], axis=2)
        enc = encode(self.encoder_spec, self.params.component_slices(pv, ENCODER_COMPONENT), seq)
        return ad.concat([obs0, ad.getitem(enc, (slice(None), slice(self.n_obs, None)))], axis=1)

    def states(self, pv, s0, future_inputs, backend_name: str | None = None):
        """Euler rollout from ``s0`` (B, D) under (B, q, m) inputs: states (q+1, B, D).

        Differentiable in ``pv`` and ``s0`` when either is an ``ad.Var``.
        """
        kern = backend.get(backend_name)
        U = np.ascontiguousarray(np.transpose(np.asarray(future_inputs, dtype=np.float64), (1, 0, 2)))
        q, B = U.shape[0], U.shape[1]
        if U.shape[2] != self.input_dim:
            raise ValueError(f"expected {self.input_dim} input features, got {U.shape[2]}")
        s0v = ad.value(s0)
        if s0v.shape != (B, self.state_dim):
            raise ValueError(f"initial state must have shape ({B}, {self.state_dim}), got {s0v.shape}")
        pvv = ad.value(pv)
        times = self.times(q)
        dt = float(self.config.delta_t)
        need_grad = ad.is_var(pv) or ad.is_var(s0)
        with np.errstate(over="ignore", invalid="ignore"):
            states, cache = kern.forward(self.plan, pvv, s0v, U, times, dt, need_grad)
        if not np.all(np.isfinite(states)):
            step = int(np.argmax(~np.all(np.isfinite(states.reshape(q + 1, -1)), axis=1)))
            raise NonFiniteError(f"rollout state became non-finite at step {step}")
        if not need_grad:
            return states

        def vjp(g):
            ds0, dpv = kern.backward(self.plan, pvv, states, U, times, dt, cache, np.ascontiguousarray(g))
            return dpv, ds0

        return ad.custom(states, (pv, s0), vjp)

    def rollout(self, init, future_inputs, backend_name: str | None = None) -> np.ndarray:
        """Observable trajectory (B, q, n_obs) at t1..tq from initial state(s)."""
        init = np.asarray(init, dtype=np.float64)
        single = init.ndim == 1
        fi = np.asarray(future_inputs, dtype=np.float64)
        if single:
            init, fi = init[None], fi[None]
        st = self.states(self.params.values, init, fi, backend_name)
        out = np.transpose(st[1:, :, :self.n_obs], (1, 0, 2))
        return out[0] if single else out

    def predict_arrays(self, past_obs, past_inputs, future_inputs, pv=None, backend_name=None):
        """Predicted observables (B, q, n_obs); an ``ad.Var`` result when ``pv`` is one."""
        pv = self.params.values if pv is None else pv
        s0 = self.initial_condition(past_obs, past_inputs, pv)
        st = self.states(pv, s0, future_inputs, backend_name)
        return ad.transpose_axes(ad.getitem(st, (slice(1, None), slice(None), slice(0, self.n_obs))), (1, 0, 2))

    def predict(self, dataset, backend_name=None) -> np.ndarray:
        """Forecast every instance of an aligned dataset: (N, q, n_obs)."""
        a = dataset.aligned(self)
        return self.predict_arrays(a.past_obs, a.past_inputs, a.future_inputs, backend_name=backend_name)

    # --- persistence -----------------------------------------------------------

    def to_dict(self, extra: dict | None = None) -> dict:
        d = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "graph": to_dict(self.graph),
            "config": asdict(self.config),
            "share_map": [[u, v, cu, cv] for (u, v), (cu, cv) in sorted(self.share_map.items())],
            "params": self.params.to_dict(),
        }
        if extra:
            d["extra"] = extra
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MnodeModel":
        if d.get("format") != MODEL_FORMAT:
            raise ValueError("not a model checkpoint")
        if d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model checkpoint version {d.get('version')}")
        share = {(u, v): (cu, cv) for u, v, cu, cv in d["share_map"]}
        return cls(from_dict(d["graph"]), ParamVector.from_dict(d["params"]),
                   MnodeConfig.from_dict(d["config"]), share)
