"""Canonical JSON (de)serialization of graphs.

Nodes are sorted by id and edges lexicographically so the output is
byte-stable. Besides ``id``, ``kind`` and ``dim`` every node records its
``members`` and ``features`` so a condensed graph can be reloaded losslessly.
"""
from __future__ import annotations

import json

from .core import GraphError, MechGraph, SuperGraph, SuperNode


def to_dict(g: MechGraph | SuperGraph) -> dict:
    if isinstance(g, MechGraph):
        g = SuperGraph.from_mech(g)
    nodes = []
    for n in g.supernodes:
        nodes.append({
            "id": n.id,
            "kind": n.kind,
            "dim": n.dim,
            "members": sorted(n.members),
            "features": list(n.features),
        })
    edges = sorted(g.edges)
    prov = {f"{u}->{v}": g.provenance[(u, v)] for u, v in edges}
    return {"nodes": nodes, "edges": [list(e) for e in edges], "provenance": prov}


def dumps(g: MechGraph | SuperGraph) -> str:
    return json.dumps(to_dict(g), indent=1, sort_keys=True) + "\n"


def from_dict(d: dict) -> SuperGraph:
    try:
        raw_nodes = d["nodes"]
        raw_edges = d["edges"]
    except (KeyError, TypeError) as exc:
        raise GraphError("graph JSON needs 'nodes' and 'edges'") from exc
    nodes = []
    for rn in raw_nodes:
        kind = rn["kind"]
        members = frozenset(rn.get("members") or [rn["id"]])
        if "features" in rn:
            feats = tuple(rn["features"])
        elif kind == "latent":
            feats = ()
        else:
            feats = tuple(sorted(members))
        node = SuperNode(rn["id"], kind, members, feats)
        if "dim" in rn and rn["dim"] != node.dim:
            raise GraphError(f"node {node.id!r}: dim {rn['dim']} disagrees with its features")
        nodes.append(node)
    edges = []
    for e in raw_edges:
        if len(e) != 2:
            raise GraphError(f"malformed edge {e!r}")
        edges.append((e[0], e[1]))
    if len(set(edges)) != len(edges):
        raise GraphError("duplicate edges")
    prov = {}
    for key, p in (d.get("provenance") or {}).items():
        u, sep, v = key.partition("->")
        if not sep:
            raise GraphError(f"malformed provenance key {key!r}")
        prov[(u, v)] = p
    return SuperGraph(nodes, edges, prov)


def loads(text: str) -> SuperGraph:
    return from_dict(json.loads(text))


def save(g: MechGraph | SuperGraph, path) -> None:
    with open(path, "w") as f:
        f.write(dumps(g))


def load(path) -> SuperGraph:
    with open(path) as f:
        return loads(f.read())
