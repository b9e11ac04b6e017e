import csv
import json

import pytest

from hgs.cli import main
from hgs.cli.manifest import content_hash, file_hash
from hgs.data import Dataset
from hgs.graph import dumps, is_rdag, load, loads, build_synthetic_graph


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def tiny_config(tmp_path, method, **extra):
    cfg = {
        "method": method,
        "data": {"source": "synthetic", "size": 6, "seed": 1},
        "graph": {"source": "synthetic", "kind": "refined"},
        "model": {"hidden_layers": 1, "hidden_units": 4, "delta_t": 0.05, "encoder": False},
        "train": {"epochs": 5, "K": 3},
        "grid": {"lambda1": [1e-6], "lambda2": [1e-6], "learning_rate": [1e-2]},
    }
    cfg.update(extra)
    path = tmp_path / f"{method}.json"
    path.write_text(json.dumps(cfg))
    return path


# --- gen-data ------------------------------------------------------------------


def test_gen_data_is_idempotent(tmp_path, capsys):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert run(["gen-data", "--size", "10", "--seed", "7", "--out", str(a)], capsys)[0] == 0
    assert run(["gen-data", "--size", "10", "--seed", "7", "--out", str(b)], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    ds = Dataset.load(a)
    assert len(ds) == 10 and ds.meta["seed"] == 7


def test_gen_data_comprehensive_quasi_channels(capsys):
    code, out, _ = run(["gen-data", "--regime", "quasi", "--graph", "comprehensive", "--size", "2", "--out", "-"],
                       capsys)
    assert code == 0
    ds = Dataset.loads(out)
    assert len(ds.input_names) == 8 and "noise" in ds.input_names


def test_gen_data_requires_out(capsys):
    with pytest.raises(SystemExit) as e:
        main(["gen-data", "--size", "3"])
    assert e.value.code == 2
    assert "--out" in capsys.readouterr().err


def test_gen_data_rejects_bad_flag_value(capsys):
    with pytest.raises(SystemExit) as e:
        main(["gen-data", "--regime", "sparse", "--out", "-"])
    assert e.value.code != 0


# --- graph ---------------------------------------------------------------------


def test_graph_synthetic_matches_golden(golden_dir, capsys):
    code, out, _ = run(["graph", "synthetic", "--kind", "refined"], capsys)
    assert code == 0
    assert loads(out) == loads((golden_dir / "synthetic_refined.json").read_text())


def test_graph_uva_condense_augment_pipeline(tmp_path, capsys):
    g0, g1, g2 = (tmp_path / f"g{i}.json" for i in range(3))
    assert run(["graph", "uva", "--out", str(g0)], capsys)[0] == 0
    assert run(["graph", "condense", "--in", str(g0), "--out", str(g1)], capsys)[0] == 0
    assert run(["graph", "augment", "--in", str(g1), "--out", str(g2)], capsys)[0] == 0
    g = load(g2)
    assert is_rdag(g)
    holder = [n for n in g.supernodes if "Gp" in n.members]
    assert len(holder) == 1 and "Gt" in holder[0].members
    assert not is_rdag(load(g0))


def test_graph_condense_on_rdag_is_identity(tmp_path, capsys):
    src = tmp_path / "g.json"
    src.write_text(dumps(build_synthetic_graph("refined")))
    once = run(["graph", "condense", "--in", str(src)], capsys)[1]
    assert is_rdag(loads(once)) and not is_rdag(loads(src.read_text()))
    src.write_text(once)
    code, out, _ = run(["graph", "condense", "--in", str(src)], capsys)
    assert code == 0 and loads(out) == loads(once)


def test_graph_augment_skip_shortcut_parses_pairs(tmp_path, capsys):
    g0, g1 = tmp_path / "g0.json", tmp_path / "g1.json"
    run(["graph", "uva", "--out", str(g0)], capsys)
    run(["graph", "condense", "--in", str(g0), "--out", str(g1)], capsys)
    full = loads(run(["graph", "augment", "--in", str(g1)], capsys)[1])
    fewer = loads(run(["graph", "augment", "--in", str(g1), "--skip-shortcut", "glucagon:Gs"], capsys)[1])
    assert fewer.edges < full.edges
    assert ("Hsc1", "Gs") in full.edges and ("Hsc1", "Gs") not in fewer.edges
    with pytest.raises(SystemExit):
        main(["graph", "augment", "--in", str(g1), "--skip-shortcut", "nocolon"])


def test_graph_bad_input_reports_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nodes": [{"id": "s", "kind": "observable", "dim": 3}], "edges": []}))
    code, out, err = run(["graph", "condense", "--in", str(bad)], capsys)
    assert code == 1 and out == ""
    assert err.startswith("hgs graph: error:")


# --- train / evaluate ----------------------------------------------------------


def test_train_hgs_then_evaluate(tmp_path, capsys):
    cfg = tiny_config(tmp_path, "HGS")
    out_dir = tmp_path / "hgs"
    assert run(["train", "--config", str(cfg), "--out", str(out_dir)], capsys)[0] == 0
    results = json.loads((out_dir / "results.json").read_text())
    assert results["method"] == "HGS" and results["is_rdag"]
    g = load(out_dir / "graph.json")
    # condensation ran: the s1/l1 cycle became one node
    assert [sorted(n.members) for n in g.supernodes if len(n.members) > 1] == [["l1", "s1"]]

    data = tmp_path / "test.jsonl"
    run(["gen-data", "--size", "4", "--seed", "99", "--out", str(data)], capsys)
    rep_path, csv_path = tmp_path / "rep.json", tmp_path / "rep.csv"
    args = ["evaluate", "--model", str(out_dir / "model.json"), "--data", str(data)]
    assert run(args + ["--out", str(rep_path), "--csv", str(csv_path)], capsys)[0] == 0
    rep = json.loads(rep_path.read_text())
    assert rep["enp"] == results["enp"] and rep["rmse"] > 0
    rows = list(csv.DictReader(csv_path.open()))
    assert float(rows[0]["rmse"]) == rep["rmse"]
    # same model twice, same report
    code, out, _ = run(args, capsys)
    assert code == 0 and out == rep_path.read_text()


def test_train_nr_keeps_original_graph(tmp_path, capsys):
    cfg = tiny_config(tmp_path, "NR", grid={"lambda2": [1e-6], "learning_rate": [1e-2]})
    out_dir = tmp_path / "nr"
    assert run(["train", "--config", str(cfg), "--out", str(out_dir)], capsys)[0] == 0
    g = load(out_dir / "graph.json")
    assert set(g.provenance.values()) == {"original"}
    assert g == loads(dumps(build_synthetic_graph("refined")))


def test_train_invalid_method_lists_methods(tmp_path, capsys):
    cfg = tiny_config(tmp_path, "LASSO")
    code, _, err = run(["train", "--config", str(cfg), "--out", str(tmp_path / "x")], capsys)
    assert code == 1
    for m in ("HGS", "NR", "EGL", "EN", "NS", "GD", "RD"):
        assert m in err


def test_train_rejects_unknown_config_key(tmp_path, capsys):
    cfg = tiny_config(tmp_path, "NR", colour="blue")
    code, _, err = run(["train", "--config", str(cfg), "--out", str(tmp_path / "x")], capsys)
    assert code == 1 and "config invalid" in err


def test_evaluate_missing_model(tmp_path, capsys):
    code, out, err = run(["evaluate", "--model", str(tmp_path / "none.json"), "--data", "x"], capsys)
    assert code == 1 and out == "" and "not found" in err


# --- reproduce -----------------------------------------------------------------


def test_reproduce_tiny_is_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["reproduce", "--preset", "tiny", "--out", str(a)], capsys)[0] == 0
    assert run(["reproduce", "--manifest", str(a / "manifest.json"), "--out", str(b)], capsys)[0] == 0
    assert (a / "metrics.csv").read_bytes() == (b / "metrics.csv").read_bytes()
    man = json.loads((a / "manifest.json").read_text())
    assert man["input_hash"] == content_hash(man["preset"])
    for path, digest in man["artifacts"].items():
        assert file_hash(a / path) == digest
    # every model file is referenced in the manifest
    on_disk = {f"models/{p.name}" for p in (a / "models").iterdir()}
    assert on_disk <= set(man["artifacts"])
    assert man["seeds"]["model"] == [2024, 2025]


def test_reproduce_manifest_tamper_detected(tmp_path, capsys):
    a = tmp_path / "a"
    run(["reproduce", "--preset", "tiny", "--out", str(a), "--methods", "NR", "--reps", "1"], capsys)
    man = json.loads((a / "manifest.json").read_text())
    man["preset"]["test_size"] += 1
    (a / "manifest.json").write_text(json.dumps(man))
    code, _, err = run(["reproduce", "--manifest", str(a / "manifest.json"), "--out", str(tmp_path / "b")], capsys)
    assert code == 1 and "hash" in err


def test_reproduce_unknown_preset(capsys):
    with pytest.raises(SystemExit) as e:
        main(["reproduce", "--preset", "huge", "--out", "x"])
    assert e.value.code == 2


def test_reproduce_unknown_method(tmp_path, capsys):
    code, _, err = run(["reproduce", "--preset", "tiny", "--out", str(tmp_path), "--methods", "XX"], capsys)
    assert code == 1 and "valid methods" in err


def test_paper_preset_repetitions():
    from hgs.cli.reproduce import load_preset
    assert load_preset("synthetic-paper")["repetitions"] == 40
    small = load_preset("synthetic-small")
    assert small["repetitions"] == 5 and small["test_size"] == 10000


# --- stability -----------------------------------------------------------------


def test_stability_report(capsys):
    code, out, _ = run(["stability", "--a", "-0.5", "--b", "2e5", "--c", "2e5", "--d", "-0.5"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["blow_up"] and rep["rollout_nonfinite_step"] is not None and rep["rollout_nonfinite_step"] <= 60
    code, out, _ = run(["stability"], capsys)
    rep = json.loads(out)
    assert rep["eigenvalues"] == [[-0.5, 0.0], [-0.5, 0.0]]
    assert not rep["blow_up"] and rep["rollout_nonfinite_step"] is None
