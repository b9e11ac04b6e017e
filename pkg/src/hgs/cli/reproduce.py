"""Repeated synthetic experiments: train every method per repetition, score on a shared test set."""
from __future__ import annotations

import csv
import io
import json
import logging
import os
import time
from dataclasses import replace
from importlib import resources

import jsonschema
import numpy as np

from ..data import gen_synthetic
from ..eval import aggregate, metrics
from ..graph import SuperGraph, build_synthetic_graph
from ..mnode import MnodeConfig
from ..train import TrainConfig, enp
from .manifest import canonical_json, content_hash, environment, file_hash, write_json
from .methods import check_method, run_method

log = logging.getLogger(__name__)

PRESETS = ("synthetic-small", "synthetic-paper", "tiny")
CSV_FIELDS = ("regime", "graph", "size", "method", "rep", "data_seed", "model_seed", "rmse", "peak_rmse", "mape",
              "peak_mape", "pearson_corr", "diag_accuracy", "mape_excluded", "enp", "n_edges", "selection")


def schema(name: str) -> dict:
    return json.loads(resources.files("hgs.configs").joinpath(name).read_text())


def load_preset(name: str) -> dict:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    cfg = json.loads(resources.files("hgs.configs").joinpath(f"preset-{name}.json").read_text())
    validate_preset(cfg)
    return cfg


def validate_preset(cfg: dict) -> None:
    jsonschema.validate(cfg, schema("preset.schema.json"))
    for m in cfg["methods"]:
        check_method(m)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def run_preset(cfg: dict, out_dir: str, methods=None, repetitions: int | None = None) -> dict:
    """Run a validated preset, writing metrics.csv, summary.json, models/ and manifest.json to ``out_dir``."""
    cfg = json.loads(json.dumps(cfg))
    if methods:
        cfg["methods"] = [check_method(m) for m in methods]
    if repetitions:
        cfg["repetitions"] = int(repetitions)
    validate_preset(cfg)
    os.makedirs(os.path.join(out_dir, "models"), exist_ok=True)
    mcfg = MnodeConfig.from_dict(cfg.get("model"))
    base_t = TrainConfig.from_dict(cfg.get("train"))
    reps = cfg["repetitions"]
    dseed0, mseed0 = cfg.get("data_seed_offset", 0), cfg.get("model_seed_offset", 2024)
    align = cfg.get("alignment", "stamp")
    rows, artifacts, timings = [], [], []
    summary = {}
    for st in cfg["settings"]:
        graph = SuperGraph.from_mech(build_synthetic_graph(st["graph"], st["regime"]))
        test = gen_synthetic(cfg.get("test_seed", 100000), st["regime"], st["graph"], cfg["test_size"],
                             alignment=align)
        tag = f"{st['regime']}-{st['graph']}-{st['size']}"
        per_method = {m: [] for m in cfg["methods"]}
        for r in range(reps):
            train = gen_synthetic(dseed0 + r, st["regime"], st["graph"], st["size"], alignment=align)
            tcfg = replace(base_t, seed=mseed0 + r)
            for m in cfg["methods"]:
                t0 = time.perf_counter()
                out = run_method(m, graph, train, mcfg, tcfg, (cfg.get("grids") or {}).get(m))
                a = test.aligned(out.model)
                rep = metrics(out.model.predict(a), a.future_obs)
                rep.enp = float(enp(out.model.params))
                per_method[m].append(rep)
                path = os.path.join("models", f"{tag}-{m}-rep{r}.json")
                with open(os.path.join(out_dir, path), "w") as f:
                    f.write(canonical_json(out.model.to_dict({"method": m, "selection": out.selection})) + "\n")
                artifacts.append(path)
                dt = time.perf_counter() - t0
                timings.append({"setting": tag, "method": m, "rep": r, "seconds": round(dt, 3)})
                log.info("%s %s rep %d: rmse %.4f enp %d (%.0f s)", tag, m, r, rep.rmse, rep.enp, dt)
                rows.append({**st, "method": m, "rep": r, "data_seed": dseed0 + r, "model_seed": mseed0 + r,
                             **{k: getattr(rep, k) for k in CSV_FIELDS if hasattr(rep, k)},
                             "n_edges": len(out.graph.edges), "selection": canonical_json(out.selection)})
        summary[tag] = {m: aggregate(v).to_dict() for m, v in per_method.items()}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for row in rows:
        w.writerow([_fmt(row[k]) for k in CSV_FIELDS])
    with open(os.path.join(out_dir, "metrics.csv"), "w", newline="") as f:
        f.write(buf.getvalue())
    write_json(os.path.join(out_dir, "summary.json"), summary)
    artifacts = ["metrics.csv", "summary.json"] + artifacts
    manifest = {
        "preset": cfg,
        "input_hash": content_hash(cfg),
        "seeds": {"data": [dseed0 + r for r in range(reps)], "model": [mseed0 + r for r in range(reps)],
                  "test": cfg.get("test_seed", 100000)},
        "artifacts": {p: file_hash(os.path.join(out_dir, p)) for p in artifacts},
        "timings": timings,
        "environment": environment(),
    }
    write_json(os.path.join(out_dir, "manifest.json"), manifest)
    return summary


def preset_from_manifest(path: str) -> dict:
    with open(path) as f:
        man = json.load(f)
    cfg = man.get("preset")
    if cfg is None:
        raise ValueError(f"{path} is not a run manifest")
    if man.get("input_hash") and content_hash(cfg) != man["input_hash"]:
        raise ValueError("manifest preset does not match its recorded input hash")
    validate_preset(cfg)
    return cfg
