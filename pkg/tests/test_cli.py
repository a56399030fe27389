import json
from pathlib import Path

from floodprone import __version__
from floodprone.cli import read_meta, run


def pipeline(d: Path, threads: int, n_zones=200):
    steps = [
        ["synth", "--out-dir", d, "--n-zones", n_zones, "--seed", 3],
        ["ingest", "--claims", d / "claims.csv", "--inflation", d / "inflation.csv", "--out", d / "summaries.csv"],
        ["label", "--summaries", d / "summaries.csv", "--zones", d / "features.csv", "--seed", 3,
         "--out", d / "labels.csv", "--report", d / "label_report.json"],
        ["train", "--features", d / "features.csv", "--labels", d / "labels.csv", "--seed", 3,
         "--n-trees", 15, "--out", d / "model.json"],
        ["evaluate", "--model", d / "model.json", "--features", d / "features.csv",
         "--labels", d / "labels.csv", "--out", d / "auc.json"],
        ["explain", "--model", d / "model.json", "--features", d / "features.csv",
         "--labels", d / "labels.csv", "--out", d / "shap.csv", "--summary", d / "shap_summary.json"],
        ["scenario", "--model", d / "model.json", "--features", d / "features.csv",
         "--perturb", "impervious=0.2", "--out", d / "scenario.csv", "--summary", d / "scenario.json"],
    ]
    for step in steps:
        argv = [str(a) for a in step] + ["--threads", str(threads)]
        assert run(argv) == 0, step[0]
    return sorted(p.name for p in d.iterdir())


def test_pipeline_artifacts_and_meta(tmp_path):
    names = pipeline(tmp_path, 1)
    assert "model.json" in names and "shap_summary.json" in names
    meta = read_meta(tmp_path / "labels.csv")
    assert meta["version"] == __version__ and meta["seed"] == 3 and "summaries" in meta["inputs"]
    assert read_meta(tmp_path / "auc.json")["command"] == "evaluate"
    assert read_meta(tmp_path / "model.json")["split_seed"] == 3
    auc = json.loads((tmp_path / "auc.json").read_text())
    assert auc["macro_auc"] > 0.5


def test_threads_do_not_change_bytes(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir(), b.mkdir()
    names = pipeline(a, 1, n_zones=120)
    assert pipeline(b, 8, n_zones=120) == names
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes(), n


def test_zero_perturbation(tmp_path):
    pipeline(tmp_path, 1, n_zones=100)
    assert run(["scenario", "--model", str(tmp_path / "model.json"), "--features",
                str(tmp_path / "features.csv"), "--perturb", "hand=0", "--out",
                str(tmp_path / "zero.csv")]) == 0
    rows = (tmp_path / "zero.csv").read_text().splitlines()[2:]
    assert rows and all(r.endswith(",0") for r in rows)


def test_header_mismatch_exits_1(tmp_path, capsys):
    f = tmp_path / "features.csv"
    f.write_text("zone_id,mean_damage_ratio\nZ1,0.1\n")
    (tmp_path / "labels.csv").write_text("zone_id,risk_level\nZ1,0\n")
    code = run(["train", "--features", str(f), "--labels", str(tmp_path / "labels.csv"),
                "--out", str(tmp_path / "m.json")])
    assert code == 1
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "data" and "vapor_pressure" in err["message"]


def test_missing_file_exits_1(tmp_path, capsys):
    assert run(["ingest", "--claims", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "o.csv")]) == 1
    assert json.loads(capsys.readouterr().err)["location"].endswith("nope.csv")


def test_usage_errors_exit_2(capsys):
    assert run(["train", "--bogus"]) == 2
    assert run([]) == 2


def test_version(capsys):
    assert run(["--version"]) == 0
    assert __version__ in capsys.readouterr().out


def test_config_file_defaults(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_zones": 45, "seed": 2}))
    assert run(["synth", "--config", str(cfg), "--out-dir", str(tmp_path / "s")]) == 0
    assert read_meta(tmp_path / "s" / "features.csv")["config"]["n_zones"] == 45
    assert run(["synth", "--config", str(cfg), "--n-zones", "50", "--out-dir", str(tmp_path / "t")]) == 0
    assert read_meta(tmp_path / "t" / "features.csv")["config"]["n_zones"] == 50
    cfg.write_text(json.dumps({"colour": 1}))
    assert run(["synth", "--config", str(cfg), "--out-dir", str(tmp_path / "u")]) == 1


def test_grid_geojson(tmp_path):
    pipeline(tmp_path, 1, n_zones=100)
    feats = (tmp_path / "features.csv").read_text().splitlines()[2:5]
    lines = ["cell_id,lat,lon,cell_size_m," + (tmp_path / "features.csv").read_text().splitlines()[1].split(",", 1)[1]]
    lines += [f"C{i},29.7,{-95.3 + 0.01 * i},100,{row.split(',', 1)[1]}" for i, row in enumerate(feats)]
    (tmp_path / "grid.csv").write_text("\n".join(lines) + "\n")
    assert run(["grid", "--model", str(tmp_path / "model.json"), "--grid", str(tmp_path / "grid.csv"),
                "--out", str(tmp_path / "grid.geojson")]) == 0
    doc = json.loads((tmp_path / "grid.geojson").read_text())
    assert len(doc["features"]) == 3 and doc["meta"]["command"] == "grid"


def test_bad_dataset_spec_exits_1(tmp_path, capsys):
    assert run(["transfer", "--dataset", "broken", "--out", str(tmp_path / "o.csv")]) == 1
    assert "NAME=FEATURES.csv:LABELS.csv" in capsys.readouterr().err
