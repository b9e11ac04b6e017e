"""Linear two-state analysis of how a feedback cycle destabilizes Euler rollouts.

The Jacobian is J = [[a, b], [c, d]]; b and c are the two directions of the
cycle, so c = 0 is the acyclic case.
"""
from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from ..graph import MechGraph, Node, SuperGraph
from ..nn import NonFiniteError


@dataclass
class StabilityReport:
    eigenvalues: tuple[complex, complex]
    spectral_radius: float  # of I + h J, the one-step Euler map
    blow_up: bool
    kappa: float  # fastest over slowest decay rate; inf if any mode fails to decay
    h: float

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [[z.real, z.imag] for z in self.eigenvalues],
            "spectral_radius": self.spectral_radius,
            "blow_up": self.blow_up,
            "kappa": self.kappa,
            "h": self.h,
        }


def eigenvalues(a: float, b: float, c: float, d: float) -> tuple[complex, complex]:
    """((a + d) +- sqrt((a - d)^2 + 4 b c)) / 2, larger real part first."""
    if b * c == 0:  # triangular: the diagonal, without rounding through the square root
        hi, lo = complex(a), complex(d)
        return (hi, lo) if a >= d else (lo, hi)
    root = cmath.sqrt((a - d) ** 2 + 4 * b * c)
    hi, lo = ((a + d) + root) / 2, ((a + d) - root) / 2
    return (hi, lo) if hi.real >= lo.real else (lo, hi)


def stiffness(lams) -> float:
    rates = [-z.real for z in lams]
    if min(rates) <= 0:
        return float("inf")
    return max(rates) / min(rates)


def symmetric_kappa(bc: float) -> float:
    """Closed form for a = d = -1: (1 + sqrt(bc)) / (1 - sqrt(bc)) on 0 <= bc < 1."""
    if bc < 0:
        raise ValueError("closed form needs bc >= 0")
    if bc >= 1:
        return float("inf")
    r = np.sqrt(bc)
    return float((1 + r) / (1 - r))


def stability_analyze(a: float, b: float, c: float, d: float, h: float = 1.0) -> StabilityReport:
    lams = eigenvalues(a, b, c, d)
    J = np.array([[a, b], [c, d]], dtype=np.float64)
    rho = float(np.max(np.abs(np.linalg.eigvals(np.eye(2) + h * J))))
    return StabilityReport(lams, rho, rho > 1.0, stiffness(lams), h)


def linear_cycle_model(a: float, b: float, c: float, d: float, h: float = 1.0):
    """Hand-wired linear MNODE whose Euler step is s <- s + h J s.

    Edges carrying a zero coefficient are left out, so c = 0 and b = 0 give
    the acyclic graph.
    """
    from ..mnode import MnodeConfig, MnodeModel, node_component

    edges = {("s1", "s1"), ("s2", "s2")}
    if b != 0:
        edges.add(("s2", "s1"))
    if c != 0:
        edges.add(("s1", "s2"))
    g = SuperGraph.from_mech(MechGraph([Node("s1", "observable"), Node("s2", "observable")], edges))
    m = MnodeModel.create(g, MnodeConfig(hidden_layers=0, delta_t=h, encoder=False, edge_weights=False))
    coef = {("s1", "s1"): a, ("s2", "s1"): b, ("s1", "s2"): c, ("s2", "s2"): d}
    vals = np.zeros(len(m.params))
    for node in ("s1", "s2"):
        start, _ = m.params.index_range((node_component(node), "W0"))
        rows = [coef[(u, node)] for u in g.parents(node)]
        vals[start:start + len(rows)] = rows
    return m.with_params(vals)


def rollout_blow_up_step(a: float, b: float, c: float, d: float, h: float = 1.0, steps: int = 60,
                         s0=(1.0, 1.0)) -> int | None:
    """Step at which the hand-wired rollout goes non-finite, or None if it stays finite."""
    m = linear_cycle_model(a, b, c, d, h)
    try:
        m.states(m.params.values, np.asarray([s0], dtype=np.float64), np.zeros((1, steps, 0)))
    except NonFiniteError as exc:
        return int(str(exc).rsplit(" ", 1)[-1])
    return None
