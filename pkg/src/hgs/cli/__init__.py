"""Command-line front end: ``hgs gen-data | graph | train | evaluate | reproduce | stability``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys

import jsonschema

from ..data import Dataset, gen_synthetic, uva_cohort
from ..eval import metrics, rollout_blow_up_step, stability_analyze
from ..graph import (GraphError, MechGraph, SuperGraph, augment, build_synthetic_graph, build_uva_graph, condense,
                     dumps, is_rdag, loads)
from ..mnode import MnodeConfig, MnodeModel
from ..train import TrainConfig, enp
from .manifest import canonical_json, write_json
from .methods import METHODS, run_method
from .reproduce import PRESETS, load_preset, preset_from_manifest, run_preset, schema

__all__ = ["main", "build_parser"]

log = logging.getLogger("hgs")


class CliError(Exception):
    """A user-facing failure; reported on stderr with exit code 1."""


# --- helpers -------------------------------------------------------------------


def _read_text(path: str | None) -> str:
    if path in (None, "-"):
        return sys.stdin.read()
    with open(path) as f:
        return f.read()


def _write_text(path: str | None, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(text)


def _shortcut_pair(text: str) -> tuple[str, str]:
    x, sep, s = text.partition(":")
    if not sep or not x or not s:
        raise argparse.ArgumentTypeError(f"expected INPUT:STATE, got {text!r}")
    return x, s


def _uva_graph(vitals: bool = False, glucagon: bool = True) -> MechGraph:
    g = build_uva_graph(vitals)
    if glucagon:
        return g
    nodes = [n for n in g.nodes if n.id != "glucagon"]
    return MechGraph(nodes, {e for e in g.edges if "glucagon" not in e})


def _complex_pair(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def _json_float(v):
    # JSON has no inf/nan; keep them readable as strings
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


# --- commands ------------------------------------------------------------------


def cmd_gen_data(args) -> int:
    if args.source == "uva":
        ds = uva_cohort(seed=args.seed, size=args.size)
    else:
        ds = gen_synthetic(args.seed, args.regime, args.graph, args.size, alignment=args.alignment)
    _write_text(args.out, ds.dumps())
    return 0


def cmd_graph(args) -> int:
    if args.graph_cmd == "synthetic":
        g = SuperGraph.from_mech(build_synthetic_graph(args.kind, args.regime))
    elif args.graph_cmd == "uva":
        g = SuperGraph.from_mech(_uva_graph(args.vitals, not args.no_glucagon))
    else:
        g = loads(_read_text(args.inp))
        if args.graph_cmd == "condense":
            g = condense(g, args.keep_mscc or ())
        else:
            g = augment(g, args.skip_shortcut or ())
    _write_text(args.out, dumps(g) + "\n")
    return 0


def _resolve(path: str, base: str) -> str:
    return path if os.path.isabs(path) else os.path.join(base, path)


def load_experiment(path: str) -> dict:
    try:
        cfg = json.loads(_read_text(path))
    except json.JSONDecodeError as e:
        raise CliError(f"{path}: invalid JSON ({e})") from None
    try:
        jsonschema.validate(cfg, schema("experiment.schema.json"))
    except jsonschema.ValidationError as e:
        where = "/".join(map(str, e.absolute_path)) or "<root>"
        if where == "method":
            raise CliError(f"unknown method {cfg.get('method')!r}; valid methods: {', '.join(METHODS)}") from None
        raise CliError(f"{path}: config invalid at {where}: {e.message}") from None
    return cfg


def experiment_inputs(cfg: dict, base: str = "."):
    """(graph, dataset) described by a validated experiment config."""
    gs = cfg["graph"]
    if "path" in gs:
        with open(_resolve(gs["path"], base)) as f:
            graph = loads(f.read())
    elif gs["source"] == "synthetic":
        graph = SuperGraph.from_mech(build_synthetic_graph(gs.get("kind", "refined")))
    else:
        graph = SuperGraph.from_mech(_uva_graph(gs.get("vitals", False), gs.get("glucagon", True)))
    ds_cfg = cfg["data"]
    if "path" in ds_cfg:
        data = Dataset.load(_resolve(ds_cfg["path"], base))
    elif ds_cfg["source"] == "synthetic":
        data = gen_synthetic(ds_cfg.get("seed", 0), ds_cfg.get("regime", "true"), ds_cfg.get("graph", "refined"),
                             ds_cfg.get("size", 100), alignment=ds_cfg.get("alignment", "stamp"))
    else:
        data = uva_cohort(seed=ds_cfg.get("seed", 0), size=ds_cfg.get("size", 50))
    return graph, data


def cmd_train(args) -> int:
    cfg = load_experiment(args.config)
    base = os.path.dirname(os.path.abspath(args.config)) if args.config != "-" else "."
    graph, data = experiment_inputs(cfg, base)
    mcfg = MnodeConfig.from_dict(cfg.get("model"))
    tcfg = TrainConfig.from_dict(cfg.get("train"))
    out = run_method(cfg["method"], graph, data, mcfg, tcfg, cfg.get("grid"), cfg.get("keep_mscc", ()),
                     [tuple(p) for p in cfg.get("skip_shortcut", ())], cfg.get("exempt_edges", ()))
    os.makedirs(args.out, exist_ok=True)
    model_path = os.path.join(args.out, "model.json")
    with open(model_path, "w") as f:
        f.write(canonical_json(out.model.to_dict({"method": out.method, "selection": out.selection})) + "\n")
    with open(os.path.join(args.out, "graph.json"), "w") as f:
        f.write(dumps(out.graph) + "\n")
    results = {
        "method": out.method,
        "selection": out.selection,
        "n_edges": len(out.graph.edges),
        "is_rdag": is_rdag(out.graph),
        "enp": enp(out.model.params),
        "candidates": out.report,
    }
    write_json(os.path.join(args.out, "results.json"), results)
    log.info("wrote %s", model_path)
    return 0


def cmd_evaluate(args) -> int:
    if not os.path.exists(args.model):
        raise CliError(f"model file not found: {args.model}")
    with open(args.model) as f:
        model = MnodeModel.from_dict(json.load(f))
    data = Dataset.load(args.data)
    a = data.aligned(model)
    rep = metrics(model.predict(a), a.future_obs, tuple(args.thresholds))
    rep.enp = float(enp(model.params, args.enp_threshold))
    d = {k: _json_float(v) for k, v in rep.to_dict().items()}
    _write_text(args.out, canonical_json(d) + "\n")
    if args.csv:
        keys = [k for k in d if k not in ("se",)]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(keys)
        w.writerow(["" if d[k] is None else repr(d[k]) if isinstance(d[k], float) else d[k] for k in keys])
        _write_text(args.csv, buf.getvalue())
    return 0


def cmd_reproduce(args) -> int:
    if args.manifest:
        cfg = preset_from_manifest(args.manifest)
    else:
        cfg = load_preset(args.preset)
    summary = run_preset(cfg, args.out, args.methods, args.reps)
    sys.stdout.write(canonical_json(summary) + "\n")
    return 0


def cmd_stability(args) -> int:
    rep = stability_analyze(args.a, args.b, args.c, args.d, args.h)
    step = rollout_blow_up_step(args.a, args.b, args.c, args.d, args.h, steps=args.steps)
    out = {
        "eigenvalues": [_complex_pair(z) for z in rep.eigenvalues],
        "spectral_radius": _json_float(float(rep.spectral_radius)),
        "blow_up": bool(rep.blow_up),
        "kappa": _json_float(float(rep.kappa)),
        "h": rep.h,
        "rollout_steps": args.steps,
        "rollout_nonfinite_step": step,
    }
    _write_text(args.out, canonical_json(out) + "\n")
    return 0


# --- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hgs", description="Hybrid graph sparsification for mechanistic neural ODEs.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a dataset file (JSON lines)")
    g.add_argument("--source", choices=("synthetic", "uva"), default="synthetic")
    g.add_argument("--regime", choices=("true", "quasi"), default="true")
    g.add_argument("--graph", choices=("refined", "comprehensive"), default="refined")
    g.add_argument("--size", type=int, default=100)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--alignment", choices=("stamp", "generator"), default="stamp")
    g.add_argument("--out", required=True, help="output path, '-' for stdout")
    g.set_defaults(func=cmd_gen_data)

    gr = sub.add_parser("graph", help="build or transform graph JSON")
    gsub = gr.add_subparsers(dest="graph_cmd", required=True)
    s = gsub.add_parser("synthetic", help="synthetic experiment graph")
    s.add_argument("--kind", choices=("refined", "comprehensive"), default="refined")
    s.add_argument("--regime", choices=("true", "quasi"), default="true")
    s.add_argument("--out", default="-")
    u = gsub.add_parser("uva", help="UVA-Padova dependency graph")
    u.add_argument("--vitals", action="store_true", help="wire heart rate and steps to every state")
    u.add_argument("--no-glucagon", action="store_true", help="drop the glucagon input")
    u.add_argument("--out", default="-")
    c = gsub.add_parser("condense", help="collapse cycles into super-nodes")
    c.add_argument("--in", dest="inp", default="-")
    c.add_argument("--out", default="-")
    c.add_argument("--keep-mscc", nargs="*", metavar="ID", help="state ids whose cycle is left intact")
    a = gsub.add_parser("augment", help="add shortcut edges from inputs")
    a.add_argument("--in", dest="inp", default="-")
    a.add_argument("--out", default="-")
    a.add_argument("--skip-shortcut", nargs="*", type=_shortcut_pair, metavar="X:S")
    gr.set_defaults(func=cmd_graph)

    t = sub.add_parser("train", help="fit one method from an experiment config")
    t.add_argument("--config", required=True)
    t.add_argument("--out", required=True, help="output directory")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="score a saved model on a dataset")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out", default="-", help="JSON report path, '-' for stdout")
    e.add_argument("--csv", help="also write a one-row CSV report")
    e.add_argument("--thresholds", type=float, nargs=2, default=(80.0, 180.0), metavar=("LOW", "HIGH"))
    e.add_argument("--enp-threshold", type=float, default=1e-3)
    e.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("reproduce", help="run a repeated-experiment preset")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=PRESETS)
    src.add_argument("--manifest", help="rerun the preset recorded in a manifest.json")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--methods", nargs="+", metavar="METHOD")
    r.add_argument("--reps", type=int, help="override the repetition count")
    r.set_defaults(func=cmd_reproduce)

    st = sub.add_parser("stability", help="linear two-state cycle analysis")
    for name, default in (("a", -0.5), ("b", 0.0), ("c", 0.0), ("d", -0.5)):
        st.add_argument(f"--{name}", type=float, default=default)
    st.add_argument("--h", type=float, default=1.0)
    st.add_argument("--steps", type=int, default=60)
    st.add_argument("--out", default="-")
    st.set_defaults(func=cmd_stability)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s",
                        stream=sys.stderr)
    try:
        return args.func(args)
    except (CliError, GraphError, ValueError, KeyError, OSError, ArithmeticError, RuntimeError,
            jsonschema.ValidationError) as e:
        msg = e.message if isinstance(e, jsonschema.ValidationError) else str(e)
        sys.stderr.write(f"hgs {args.command}: error: {type(e).__name__}: {msg}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
