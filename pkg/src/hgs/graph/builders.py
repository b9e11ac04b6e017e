"""Built-in mechanistic graphs: UVA-Padova glucose model and the synthetic experiment graphs."""
from __future__ import annotations

from .core import MechGraph, Node

UVA_STATES = (
    "Gp", "Gt", "Ip", "Il", "Qsto1", "Qsto2", "Qgut", "XL", "Ir", "XH",
    "X", "E", "Isc1", "Isc2", "Gs", "H", "SRsH", "SRdH", "Hsc1", "Hsc2",
)
UVA_INPUTS = ("carbs", "insulin", "glucagon")
UVA_VITALS = ("heart_rate", "steps")

# Right-hand-side dependencies of each state derivative, after inlining the
# algebraic intermediates (EGP, Ra, Rai, Uid, Uii, RaH, kempt, risk, SRH, G, I).
_GP_RHS = ("Gp", "Gt", "XL", "XH", "Qgut", "E")
UVA_PARENTS: dict[str, tuple[str, ...]] = {
    "Gp": _GP_RHS,                         # EGP + Ra - Uii - E - k1 Gp + k2 Gt
    "Gt": ("Gt", "Gp", "X"),               # -Uid(X, Gt) + k1 Gp - k2 Gt
    "Ip": ("Ip", "Il", "Isc1", "Isc2"),    # Rai inlined
    "Il": ("Il", "Ip"),
    "Qsto1": ("Qsto1", "carbs"),
    "Qsto2": ("Qsto1", "Qsto2"),           # kempt(Qsto1 + Qsto2)
    "Qgut": ("Qgut", "Qsto1", "Qsto2"),
    "XL": ("XL", "Ir"),
    "Ir": ("Ir", "Ip"),                    # I = Ip / VI
    "XH": ("XH", "H"),
    "X": ("X", "Ip"),
    "E": ("Gp",),                          # renal excretion, algebraic in Gp
    "Isc1": ("Isc1", "insulin"),
    "Isc2": ("Isc1", "Isc2"),
    "Gs": ("Gs", "Gp"),                    # G = Gp / VG
    "H": ("H", "SRsH", "SRdH", "Hsc2"),    # RaH = ka,H Hsc2
    "SRsH": ("SRsH", "Gp", "Ip"),
    "SRdH": _GP_RHS,                       # driven by -dG/dt
    "Hsc1": ("Hsc1", "glucagon"),
    "Hsc2": ("Hsc1", "Hsc2"),
}


def build_uva_graph(vitals: bool = False) -> MechGraph:
    """Dependency graph of the UVA-Padova equations, Gs the only observable state.

    With ``vitals`` the heart-rate and step-count inputs are wired to every state.
    """
    nodes = [Node(s, "observable" if s == "Gs" else "latent") for s in UVA_STATES]
    inputs = UVA_INPUTS + (UVA_VITALS if vitals else ())
    nodes += [Node(x, "input") for x in inputs]
    edges = {(u, v) for v, pa in UVA_PARENTS.items() for u in pa}
    if vitals:
        edges |= {(x, s) for x in UVA_VITALS for s in UVA_STATES}
    return MechGraph(nodes, edges)


def synthetic_inputs(kind: str) -> list[str]:
    if kind == "refined":
        return [f"x{i}" for i in range(1, 5)]
    if kind == "comprehensive":
        return [f"x{i}" for i in range(1, 8)]
    raise ValueError(f"unknown synthetic graph kind {kind!r}; expected refined or comprehensive")


def build_synthetic_graph(kind: str = "refined", regime: str = "true") -> MechGraph:
    """Starting graph for the synthetic experiments.

    The true system is s1 with a self-loop driven by x1. The refined graph adds
    three redundant inputs and one latent node cycling with s1; the
    comprehensive graph adds six inputs and three latents in three cycles.
    The wiring does not depend on the regime, only the generating data does.
    """
    if regime not in ("true", "quasi"):
        raise ValueError(f"unknown regime {regime!r}; expected true or quasi")
    xs = synthetic_inputs(kind)
    nodes = [Node("s1", "observable"), Node("l1", "latent")]
    edges = {("x1", "s1"), ("s1", "s1"), ("x2", "s1"), ("x3", "l1"), ("x4", "l1"),
             ("l1", "s1"), ("s1", "l1")}
    if kind == "comprehensive":
        nodes += [Node("l2", "latent"), Node("l3", "latent")]
        edges |= {("l1", "l2"), ("l2", "l1"), ("l2", "l3"), ("l3", "l2"),
                  ("x5", "l2"), ("x6", "l3"), ("x7", "l3")}
    nodes += [Node(x, "input") for x in xs]
    return MechGraph(nodes, edges)
