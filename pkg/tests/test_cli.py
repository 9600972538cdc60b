import csv
import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from tetrecon.cli import main
from tetrecon.io import load_model, read_mesh, read_scan_bundle, write_mesh
from tetrecon.net import OccupancyModel
from tetrecon.trimesh import TriMesh


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, (json.loads(out) if code == 0 and out.strip() else out)


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Sphere LR scan, a two-scene dataset, and a briefly trained model."""
    d = tmp_path_factory.mktemp("cli")
    (d / "small.json").write_text(json.dumps({"train": {"batch_size": 8}}))
    assert main(["scan", "--shape", "sphere", "--preset", "LR", "--seed", "0",
                 "--out", str(d / "sphere.ply"), "--mesh-out", str(d / "sphere.gt.ply")]) == 0
    assert main(["make-dataset", "--shapes", "sphere,box", "--presets", "LR",
                 "--out", str(d / "ds")]) == 0
    assert main(["train", "--config", str(d / "small.json"), "--dataset", str(d / "ds"),
                 "--epochs", "30", "--steps-per-epoch", "2", "--seed", "0",
                 "--out-model", str(d / "m.json")]) == 0
    return d


def test_help_exits_zero():
    with pytest.raises(SystemExit) as e:
        main(["--help"])
    assert e.value.code == 0
    with pytest.raises(SystemExit) as e:
        main(["reconstruct", "--help"])
    assert e.value.code == 0


def test_usage_errors_exit_two():
    with pytest.raises(SystemExit) as e:
        main(["scan", "--shape", "sphere", "--out", "x.ply", "--frobnicate"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["scan", "--out", "x.ply"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["pipeline", "--presets", "XR", "--out-dir", "x"])
    assert e.value.code == 2


def test_entry_point_exit_codes(tmp_path):
    exe = shutil.which("tetrecon")
    cmd = [exe] if exe else [sys.executable, "-m", "tetrecon.cli"]
    assert subprocess.run(cmd + ["--help"], capture_output=True).returncode == 0
    assert subprocess.run(cmd + ["evaluate", "--bogus"], capture_output=True).returncode == 2
    r = subprocess.run(cmd + ["evaluate", "--gt-mesh", str(tmp_path / "none.ply"),
                              "--pred-mesh", str(tmp_path / "none.ply")], capture_output=True)
    assert r.returncode == 1
    assert b"error" in r.stderr


def test_domain_errors_exit_one(tmp_path, capsys):
    assert _run(capsys, "scan", "--shape", "dodecahedron", "--out", tmp_path / "x.ply")[0] == 1
    (tmp_path / "bad.json").write_text('{"energy": {"lambda": -1}}')
    code = main(["scan", "--shape", "sphere", "--config", str(tmp_path / "bad.json"),
                 "--out", str(tmp_path / "x.ply")])
    assert code == 1
    assert "/energy/lambda" in capsys.readouterr().err


def test_scan_cameras(workdir, tmp_path, capsys):
    b = read_scan_bundle(workdir / "sphere.ply")
    assert len(b.cameras) == 5
    assert b.provenance["shape"] == "sphere"
    code, out = _run(capsys, "scan", "--shape", "sphere", "--preset", "HR",
                     "--out", tmp_path / "hr.ply")
    assert code == 0 and out["cameras"] == 10
    assert len(read_scan_bundle(tmp_path / "hr.ply").cameras) == 10


def test_scan_byte_identical(tmp_path, capsys):
    for k in "ab":
        assert _run(capsys, "scan", "--shape", "box", "--preset", "LR", "--seed", "5",
                    "--out", tmp_path / f"{k}.ply")[0] == 0
    assert (tmp_path / "a.ply").read_bytes() == (tmp_path / "b.ply").read_bytes()
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert _run(capsys, "scan", "--shape", "box", "--preset", "LR", "--seed", "6",
                "--out", tmp_path / "c.ply")[0] == 0
    assert (tmp_path / "a.ply").read_bytes() != (tmp_path / "c.ply").read_bytes()


def test_train_zero_epochs(workdir, tmp_path, capsys):
    code, out = _run(capsys, "train", "--dataset", workdir / "ds", "--epochs", "0",
                     "--out-model", tmp_path / "m0.json")
    assert code == 0 and out["epochs"] == 0
    m = load_model(tmp_path / "m0.json")
    init = OccupancyModel(seed=0)
    for k in init.params:
        assert np.array_equal(m.params[k], init.params[k])
    lines = (tmp_path / "m0.loss.csv").read_text().splitlines()
    assert lines == ["epoch,lr,loss"]


def test_train_depth_from_config(workdir, tmp_path, capsys):
    (tmp_path / "d2.json").write_text(json.dumps({"train": {"depth": 2, "batch_size": 4}}))
    assert _run(capsys, "train", "--config", tmp_path / "d2.json", "--dataset", workdir / "ds",
                "--epochs", "1", "--steps-per-epoch", "1", "--out-model", tmp_path / "m.json")[0] == 0
    m = load_model(tmp_path / "m.json")
    assert m.widths == (64, 128) and m.n_layers == 2


def _loss_log(path):
    with open(path) as f:
        return list(csv.DictReader(f))


def test_lr_schedule_in_log(workdir):
    rows = _loss_log(workdir / "m.loss.csv")
    assert len(rows) == 30
    lrs = [float(r["lr"]) for r in rows]
    assert all(b <= a for a, b in zip(lrs, lrs[1:]))
    drops = [int(rows[i]["epoch"]) for i in range(1, 30) if lrs[i] < lrs[i - 1]]
    assert drops == [10, 20]
    assert lrs[0] == 1e-4 and lrs[10] == pytest.approx(1e-5) and lrs[20] == pytest.approx(1e-6)


def test_train_log_deterministic(workdir, tmp_path, capsys):
    for k in "ab":
        assert _run(capsys, "train", "--config", workdir / "small.json", "--dataset",
                    workdir / "ds", "--epochs", "3", "--steps-per-epoch", "2",
                    "--out-model", tmp_path / f"{k}.json")[0] == 0
    assert (tmp_path / "a.loss.csv").read_bytes() == (tmp_path / "b.loss.csv").read_bytes()
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def _face_set(mesh):
    return {tuple(sorted(map(tuple, mesh.vertices[f]))) for f in mesh.faces}


def test_reconstruct_lambda_zero_is_direct(workdir, tmp_path, capsys):
    base = ["--scan", workdir / "sphere.ply", "--model", workdir / "m.json"]
    code, s0 = _run(capsys, "reconstruct", *base, "--lambda", "0",
                    "--out-mesh", tmp_path / "g.ply")
    assert code == 0
    code, sd = _run(capsys, "reconstruct", *base, "--method", "direct",
                    "--out-mesh", tmp_path / "d.ply")
    assert code == 0
    assert s0["inside_cells"] == sd["inside_cells"]
    assert _face_set(read_mesh(tmp_path / "g.ply")) == _face_set(read_mesh(tmp_path / "d.ply"))


def test_reconstruct_stats(workdir, tmp_path, capsys):
    code, st = _run(capsys, "reconstruct", "--scan", workdir / "sphere.ply", "--model",
                    workdir / "m.json", "--clean", "--max-cells-in-flight", "500",
                    "--out-mesh", tmp_path / "r.ply", "--stats", tmp_path / "r.json")
    assert code == 0
    st = json.loads((tmp_path / "r.json").read_text())
    for stage in ("3dt", "features", "inference", "graphcut", "extract"):
        assert st["timings"][stage] >= 0
    for key in ("cells", "energy", "components", "watertight", "faces"):
        assert key in st
    assert st["cleaned"] is True
    assert read_mesh(tmp_path / "r.ply").n_faces == st["faces"]
    code, _ = _run(capsys, "reconstruct", "--scan", workdir / "sphere.ply", "--model",
                   workdir / "m.json", "--lambda", "-1", "--out-mesh", tmp_path / "x.ply")
    assert code == 1


def test_baseline(workdir, tmp_path, capsys):
    code, st = _run(capsys, "baseline", "--scan", workdir / "sphere.ply",
                    "--out-mesh", tmp_path / "b.ply")
    assert code == 0
    assert st["method"] == "baseline"
    assert (st["lambda"], st["alpha_vis"], st["sigma"]) == (5.0, 32.0, 0.0)
    assert st["watertight"] and st["components"] == 1
    code, st2 = _run(capsys, "baseline", "--scan", workdir / "sphere.ply", "--lambda", "2",
                     "--sigma", "0.5", "--out-mesh", tmp_path / "b2.ply")
    assert (st2["lambda"], st2["sigma"]) == (2.0, 0.5)
    _run(capsys, "baseline", "--scan", workdir / "sphere.ply", "--out-mesh", tmp_path / "b3.ply")
    assert (tmp_path / "b.ply").read_bytes() == (tmp_path / "b3.ply").read_bytes()


def test_evaluate(workdir, tmp_path, capsys):
    gt = workdir / "sphere.gt.ply"
    code, rep = _run(capsys, "evaluate", "--gt-mesh", gt, "--pred-mesh", gt,
                     "--samples", "5000")
    assert code == 0
    assert rep["iou"] == 1.0 and rep["chamfer"] == 0.0
    m = read_mesh(gt)
    far = TriMesh(m.vertices + 1000.0, m.faces)
    write_mesh(tmp_path / "far.ply", far)
    code, rep2 = _run(capsys, "evaluate", "--gt-mesh", gt, "--pred-mesh", tmp_path / "far.ply",
                      "--samples", "5000", "--tau", "1,2")
    assert code == 0 and rep2["iou"] == 0.0
    assert sorted(rep2) == sorted(rep)
    code, rep3 = _run(capsys, "evaluate", "--gt-mesh", gt, "--pred-mesh", gt,
                      "--samples", "5000")
    assert rep3 == rep


def test_pipeline_smoke(tmp_path, capsys):
    args = ["pipeline", "--shapes", "sphere,box", "--presets", "LR,HRN", "--holdout", "box",
            "--epochs", "1", "--steps-per-epoch", "2", "--samples", "2000"]
    code, out = _run(capsys, *args, "--out-dir", tmp_path / "a")
    assert code == 0
    with open(tmp_path / "a" / "results.csv") as f:
        rows = list(csv.DictReader(f))
    keys = [(r["shape"], r["preset"], r["method"]) for r in rows]
    assert len(keys) == len(set(keys)) == out["rows"]
    assert {(s, p) for s, p, _ in keys} == {("box", "LR"), ("box", "HRN")}
    for s, p in {("box", "LR"), ("box", "HRN")}:
        assert sorted(m for s2, p2, m in keys if (s2, p2) == (s, p)) == \
            ["baseline", "direct", "graphcut"]
    for name in ("metrics.json", "timings.json", "loss.csv", "model.json", "loss.png",
                 "metrics.png", "box.gt.ply"):
        assert (tmp_path / "a" / name).exists()
    assert _run(capsys, *args, "--out-dir", tmp_path / "b")[0] == 0
    assert (tmp_path / "a" / "metrics.json").read_bytes() == \
        (tmp_path / "b" / "metrics.json").read_bytes()
