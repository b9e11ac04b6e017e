from .base import ReductionError, ReductionResult, fit_subgraph
from .greedy import MIN_LOSS_START, reduce_greedy
from .neuralsparse import relaxed_weights, reduce_neuralsparse, select_edges
from .random_search import DEFAULT_RATIOS, reduce_random, subgraph_size

__all__ = ["DEFAULT_RATIOS", "MIN_LOSS_START", "ReductionError", "ReductionResult", "fit_subgraph", "reduce_greedy",
           "reduce_neuralsparse", "reduce_random", "relaxed_weights", "select_edges", "subgraph_size"]
