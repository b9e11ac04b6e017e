"""Mechanistic dependency graphs, condensation to RDAGs and shortcut augmentation."""
from __future__ import annotations

import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

Edge = tuple[str, str]

NODE_KINDS = ("observable", "latent", "input")
PROVENANCE = ("original", "collapsed-cycle", "shortcut")


class GraphError(ValueError):
    pass


class RDAGWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Node:
    id: str
    kind: str

    def __post_init__(self):
        if self.kind not in NODE_KINDS:
            raise GraphError(f"node {self.id!r}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class MechGraph:
    """Dependency graph of a mechanistic ODE system.

    An edge ``(u, v)`` means the derivative of ``v`` reads the value of ``u``.
    Inputs are exogenous and never have incoming edges.
    """

    nodes: tuple[Node, ...]
    edges: frozenset[Edge]

    def __init__(self, nodes: Iterable[Node], edges: Iterable[Edge]):
        nodes = tuple(nodes)
        edge_list = [tuple(e) for e in edges]
        edge_set = frozenset(edge_list)
        if len(edge_set) != len(edge_list):
            raise GraphError("duplicate edges")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edge_set)
        _validate(self.kind_map(), edge_set, len(nodes))

    def kind_map(self) -> dict[str, str]:
        return {n.id: n.kind for n in self.nodes}

    @property
    def ids(self) -> list[str]:
        return sorted(n.id for n in self.nodes)


@dataclass(frozen=True)
class SuperNode:
    """Node of a (possibly condensed) graph.

    ``features`` names the data channels carried by the node: the observable
    members of an observable node, the input members of an input node, and
    nothing for a latent node (a single unnamed scalar).
    """

    id: str
    kind: str
    members: frozenset[str]
    features: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in NODE_KINDS:
            raise GraphError(f"node {self.id!r}: unknown kind {self.kind!r}")
        if self.kind != "latent" and not self.features:
            raise GraphError(f"{self.kind} node {self.id!r} carries no features")
        if self.kind == "latent" and self.features:
            raise GraphError(f"latent node {self.id!r} cannot carry named features")

    @property
    def dim(self) -> int:
        return len(self.features) if self.features else 1


@dataclass(frozen=True)
class SuperGraph:
    supernodes: tuple[SuperNode, ...]
    edges: frozenset[Edge]
    provenance: Mapping[Edge, str] = field(default_factory=dict)

    def __init__(self, supernodes, edges, provenance=None):
        supernodes = tuple(sorted(supernodes, key=lambda n: n.id))
        edges = frozenset(tuple(e) for e in edges)
        prov = {e: "original" for e in edges}
        if provenance:
            for e, p in provenance.items():
                if e in prov:
                    prov[e] = p
        for p in prov.values():
            if p not in PROVENANCE:
                raise GraphError(f"unknown provenance {p!r}")
        object.__setattr__(self, "supernodes", supernodes)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "provenance", prov)
        _validate(self.kind_map(), edges, len(supernodes))
        seen: set[str] = set()
        for n in supernodes:
            if seen & n.members:
                raise GraphError("member sets overlap")
            seen |= n.members

    @classmethod
    def from_mech(cls, g: MechGraph) -> "SuperGraph":
        """Lift a mechanistic graph unchanged (one singleton supernode per node)."""
        nodes = []
        for n in g.nodes:
            feats = () if n.kind == "latent" else (n.id,)
            nodes.append(SuperNode(n.id, n.kind, frozenset([n.id]), feats))
        return cls(nodes, g.edges)

    def kind_map(self) -> dict[str, str]:
        return {n.id: n.kind for n in self.supernodes}

    def node(self, node_id: str) -> SuperNode:
        for n in self.supernodes:
            if n.id == node_id:
                return n
        raise GraphError(f"unknown node {node_id!r}")

    @property
    def ids(self) -> list[str]:
        return [n.id for n in self.supernodes]

    def of_kind(self, *kinds: str) -> list[SuperNode]:
        return [n for n in self.supernodes if n.kind in kinds]

    def parents(self, node_id: str) -> list[str]:
        return sorted(u for u, v in self.edges if v == node_id)

    def with_edges(self, edges: Iterable[Edge]) -> "SuperGraph":
        """Same nodes, different edge set (provenance kept where the edge survives)."""
        edges = frozenset(edges)
        return SuperGraph(self.supernodes, edges, {e: p for e, p in self.provenance.items() if e in edges})


def _validate(kinds: Mapping[str, str], edges: frozenset[Edge], n_nodes: int) -> None:
    if len(kinds) != n_nodes:
        raise GraphError("node ids are not unique")
    for u, v in edges:
        if u not in kinds or v not in kinds:
            raise GraphError(f"edge {u}->{v} references an undeclared node")
        if kinds[v] == "input":
            raise GraphError(f"edge {u}->{v} targets an input node")


def _successors(ids: Iterable[str], edges: Iterable[Edge]) -> dict[str, list[str]]:
    succ: dict[str, list[str]] = {i: [] for i in ids}
    for u, v in sorted(edges):
        succ[u].append(v)
    return succ


def _reach_from(succ: Mapping[str, list[str]], start: str, removed: str | None = None) -> set[str]:
    # paths of length >= 1: start itself is only reached through a cycle
    seen: set[str] = set()
    stack = [w for w in succ[start] if w != removed]
    while stack:
        v = stack.pop()
        if v in seen:
            continue
        seen.add(v)
        stack.extend(w for w in succ[v] if w not in seen and w != removed)
    return seen


def _graph_parts(g) -> tuple[list[str], frozenset[Edge]]:
    if isinstance(g, MechGraph):
        return g.ids, g.edges
    return g.ids, g.edges


def reachable(g: MechGraph | SuperGraph, u: str, v: str) -> bool:
    """True iff a directed path of length >= 1 leads from ``u`` to ``v``."""
    ids, edges = _graph_parts(g)
    for x in (u, v):
        if x not in ids:
            raise GraphError(f"unknown node {x!r}")
    return v in _reach_from(_successors(ids, edges), u)


def is_rdag(g: MechGraph | SuperGraph) -> bool:
    """No directed cycles apart from self-loops."""
    ids, edges = _graph_parts(g)
    succ = _successors(ids, [(u, v) for u, v in edges if u != v])
    state: dict[str, int] = {}
    for root in ids:
        if root in state:
            continue
        stack = [(root, iter(succ[root]))]
        state[root] = 1
        while stack:
            v, it = stack[-1]
            for w in it:
                if state.get(w) == 1:
                    return False
                if w not in state:
                    state[w] = 1
                    stack.append((w, iter(succ[w])))
                    break
            else:
                state[v] = 2
                stack.pop()
    return True


def mscc_partition(g: MechGraph | SuperGraph) -> list[frozenset[str]]:
    """Maximal strongly connected components (iterative Tarjan).

    Components are returned sorted by their smallest member so the output is
    independent of node order.
    """
    ids, edges = _graph_parts(g)
    succ = _successors(ids, edges)
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    comps: list[frozenset[str]] = []
    counter = 0
    for root in ids:
        if root in index:
            continue
        work = [(root, 0)]
        while work:
            v, i = work.pop()
            if i == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack.add(v)
            recurse = False
            nbrs = succ[v]
            while i < len(nbrs):
                w = nbrs[i]
                i += 1
                if w not in index:
                    work.append((v, i))
                    work.append((w, 0))
                    recurse = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if recurse:
                continue
            if low[v] == index[v]:
                comp = set()
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.add(w)
                    if w == v:
                        break
                comps.append(frozenset(comp))
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
    return sorted(comps, key=min)


def _component_node(members: list[SuperNode]) -> SuperNode:
    if len(members) == 1:
        return members[0]
    kinds = {m.kind for m in members}
    if "input" in kinds:
        # inputs have no incoming edges, so they never share a cycle
        raise GraphError("input node inside a strongly connected component")
    all_members = frozenset().union(*(m.members for m in members))
    cid = "sc_" + min(all_members)
    if "observable" in kinds:
        feats = tuple(sorted(f for m in members if m.kind == "observable" for f in m.features))
        return SuperNode(cid, "observable", all_members, feats)
    return SuperNode(cid, "latent", all_members, ())


def condense(g: MechGraph | SuperGraph, keep: Iterable[str] = (), force: bool = False) -> SuperGraph:
    """Collapse every MSCC into a supernode, yielding an RDAG.

    ``keep`` names components (by any member id, original or supernode) that
    stay uncollapsed. Keeping a nontrivial component leaves a cycle, which is
    an error unless ``force`` is set, in which case a warning is issued.
    """
    sg = SuperGraph.from_mech(g) if isinstance(g, MechGraph) else g
    by_id = {n.id: n for n in sg.supernodes}
    keep = set(keep)
    comps = mscc_partition(sg)
    known = set(by_id) | {m for n in sg.supernodes for m in n.members}
    unknown = keep - known - {"sc_" + min(frozenset().union(*(by_id[i].members for i in c))) for c in comps}
    if unknown:
        raise GraphError(f"unknown component(s) to keep: {sorted(unknown)}")

    owner: dict[str, str] = {}
    new_nodes: list[SuperNode] = []
    kept_cycle = False
    for comp in comps:
        members = [by_id[i] for i in sorted(comp)]
        node = _component_node(members)
        labels = set(comp) | set(node.members) | {node.id}
        if len(comp) > 1 and labels & keep:
            kept_cycle = True
            for m in members:
                owner[m.id] = m.id
                new_nodes.append(m)
            continue
        for m in members:
            owner[m.id] = node.id
        new_nodes.append(node)

    edges: set[Edge] = set()
    prov: dict[Edge, str] = {}
    for u, v in sorted(sg.edges):
        e = (owner[u], owner[v])
        edges.add(e)
        collapsed = e[0] == e[1] and (u != v or owner[u] != u)
        p = "collapsed-cycle" if collapsed else sg.provenance.get((u, v), "original")
        if prov.get(e) != "collapsed-cycle":
            prov[e] = p
    out = SuperGraph(new_nodes, edges, prov)
    if kept_cycle:
        msg = "uncollapsed components leave directed cycles; the result is not an RDAG"
        if not force:
            raise GraphError(msg + " (pass force=True to accept)")
        warnings.warn(msg, RDAGWarning, stacklevel=2)
    return out


def _check_pair(sg: SuperGraph, x: str, s: str) -> None:
    kinds = sg.kind_map()
    for node in (x, s):
        if node not in kinds:
            raise GraphError(f"unknown node {node!r}")
    if kinds[x] != "input":
        raise GraphError(f"{x!r} is not an input node")
    if kinds[s] != "observable":
        raise GraphError(f"{s!r} is not an observable node")


def disconnecting_set(sg: SuperGraph, x: str, s: str) -> set[str]:
    """Nodes other than x and s whose removal makes s unreachable from x."""
    _check_pair(sg, x, s)
    succ = _successors(sg.ids, sg.edges)
    reach = _reach_from(succ, x)
    if s not in reach:
        return set()
    # only nodes on some x->s path can disconnect it
    return {v for v in reach if v not in (x, s) and s not in _reach_from(succ, x, removed=v)}


def pathway_closure_edges(sg: SuperGraph, x: str, s: str) -> set[Edge]:
    """Partial transitive closure of the pathway subgraph between x and s.

    Closure uses reachability in the full graph; (x, x) is always dropped and
    the direct (x, s) edge is dropped unless the graph already has it.
    """
    d = disconnecting_set(sg, x, s)
    vs = {x, s} | d
    succ = _successors(sg.ids, sg.edges)
    closure = {(u, v) for u in vs for v in _reach_from(succ, u) if v in vs}
    closure.discard((x, x))
    if (x, s) not in sg.edges:
        closure.discard((x, s))
    return closure


def augment(sg: SuperGraph, skip: Iterable[tuple[str, str]] = (), allow_cycles: bool = False) -> SuperGraph:
    """Add partial-closure shortcuts for every (input, observable) pair.

    ``skip`` lists (input, observable) pairs whose shortcuts are omitted.
    """
    if not allow_cycles and not is_rdag(sg):
        raise GraphError("augment expects an RDAG; condense the graph first")
    skip = {tuple(p) for p in skip}
    ids = set(sg.ids)
    for x, s in skip:
        if x not in ids or s not in ids:
            raise GraphError(f"unknown node in skipped pair {x}:{s}")
    new: set[Edge] = set()
    for x in sg.of_kind("input"):
        for s in sg.of_kind("observable"):
            if (x.id, s.id) in skip:
                continue
            new |= pathway_closure_edges(sg, x.id, s.id)
    new -= sg.edges
    prov = dict(sg.provenance)
    prov.update({e: "shortcut" for e in new})
    out = SuperGraph(sg.supernodes, sg.edges | new, prov)
    if not allow_cycles:
        assert is_rdag(out), "shortcut augmentation introduced a cycle"
    return out


def topological_order(sg: SuperGraph) -> list[str]:
    """Deterministic topological order of an RDAG (self-loops ignored)."""
    indeg = defaultdict(int)
    succ = _successors(sg.ids, [(u, v) for u, v in sg.edges if u != v])
    for u in succ:
        for v in succ[u]:
            indeg[v] += 1
    ready = sorted(i for i in sg.ids if indeg[i] == 0)
    out = []
    while ready:
        v = ready.pop(0)
        out.append(v)
        for w in succ[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                ready.append(w)
        ready.sort()
    if len(out) != len(sg.ids):
        raise GraphError("graph has cycles")
    return out
