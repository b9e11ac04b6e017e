from .builders import UVA_INPUTS, UVA_PARENTS, UVA_STATES, UVA_VITALS, build_synthetic_graph, build_uva_graph, synthetic_inputs
from .core import (
    GraphError,
    MechGraph,
    Node,
    RDAGWarning,
    SuperGraph,
    SuperNode,
    augment,
    condense,
    disconnecting_set,
    is_rdag,
    mscc_partition,
    pathway_closure_edges,
    reachable,
    topological_order,
)
from .io import dumps, from_dict, load, loads, save, to_dict

__all__ = [
    "GraphError", "MechGraph", "Node", "RDAGWarning", "SuperGraph", "SuperNode",
    "augment", "build_synthetic_graph", "build_uva_graph", "condense", "disconnecting_set",
    "dumps", "from_dict", "is_rdag", "load", "loads", "mscc_partition",
    "pathway_closure_edges", "reachable", "save", "synthetic_inputs", "to_dict",
    "topological_order", "UVA_INPUTS", "UVA_PARENTS", "UVA_STATES", "UVA_VITALS",
]
