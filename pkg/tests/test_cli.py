import csv
import json

import numpy as np
import pytest

from egoscene import io
from egoscene.camera import save_calibration
from egoscene.cli import main
from egoscene.pose import JOINT_NAMES
from egoscene.simulator import floor_float_fixture


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli") / "new" / "ds"
    assert main(["generate", "--out", str(root), "--frames", "5", "--seed", "7"]) == 0
    return root


@pytest.fixture(scope="module")
def runs(dataset, tmp_path_factory):
    base = tmp_path_factory.mktemp("runs")
    assert main(["run", "--dataset", str(dataset), "--out", str(base / "a"), "--pgm"]) == 0
    assert main(["run", "--dataset", str(dataset), "--out", str(base / "b"), "--no-inpaint"]) == 0
    return base


def test_generate_creates_dirs_and_manifest(dataset, tmp_path, capsys):
    manifest = json.loads((dataset / "manifest.json").read_text())
    assert len(manifest["frames"]) == 5
    assert main(["generate", "--out", str(tmp_path / "x"), "--frames", "5", "--seed", "7"]) == 0
    assert (tmp_path / "x" / "manifest.json").read_bytes() == (dataset / "manifest.json").read_bytes()


def test_run_report(runs):
    report = json.loads((runs / "a" / "report.json").read_text())
    assert len(report["frames"]) == 5
    assert all(r["error"] is None and r["mpjpe_mm"] <= 2.4 / 64 * 1000 for r in report["frames"])
    assert report["summary"]["contact_pct"] == 100.0
    with open(runs / "a" / "frames.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 5
    assert len(list((runs / "a" / "viz").glob("*.pgm"))) == 10


def test_no_inpaint_increases_abs_rel(runs):
    a = json.loads((runs / "a" / "report.json").read_text())["summary"]["abs_rel"]
    b = json.loads((runs / "b" / "report.json").read_text())["summary"]["abs_rel"]
    assert b > a


def test_run_records_frame_errors(dataset, tmp_path):
    broken = tmp_path / "broken"
    broken.mkdir()
    manifest = json.loads((dataset / "manifest.json").read_text())
    manifest["frames"] = manifest["frames"][:1] + [dict(manifest["frames"][0], id="frame_9999",
                                                        depth_body="missing.egvx")]
    (broken / "manifest.json").write_text(json.dumps(manifest))
    for entry in manifest["frames"][:1]:
        for key, rel in entry.items():
            if key not in ("id", "kind"):
                (broken / rel).parent.mkdir(parents=True, exist_ok=True)
                (broken / rel).write_bytes((dataset / rel).read_bytes())
    assert main(["run", "--dataset", str(broken), "--out", str(tmp_path / "r")]) == 1
    rows = json.loads((tmp_path / "r" / "report.json").read_text())["frames"]
    assert rows[0]["error"] is None and rows[1]["error"].startswith("FileNotFoundError")


@pytest.fixture(scope="module")
def opt_inputs(tmp_path_factory):
    d = tmp_path_factory.mktemp("opt")
    f = floor_float_fixture(0.04)
    io.write_pose(d / "init.json", f.init)
    io.write_detections(d / "det.json", f.detections, np.ones(15), JOINT_NAMES)
    io.write_ply(d / "cloud.ply", f.cloud)
    save_calibration(f.model, d / "cal.json")
    return d


def _opt_args(d, *extra):
    return ["optimize", "--init", str(d / "init.json"), "--detections", str(d / "det.json"),
            "--cloud", str(d / "cloud.ply"), "--calibration", str(d / "cal.json"),
            "--out", str(d / "out"), *extra]


def test_optimize(opt_inputs):
    assert main(_opt_args(opt_inputs, "--max-iters", "300")) == 0
    summary = json.loads((opt_inputs / "out" / "summary.json").read_text())
    assert summary["final_contact_energy"] < summary["initial_contact_energy"]
    with open(opt_inputs / "out" / "trace.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == summary["iterations"] + 1
    assert len(io.read_pose(opt_inputs / "out" / "pose.json")) == 15


def test_optimize_rejects_zero_iters(opt_inputs, capsys):
    assert main(_opt_args(opt_inputs, "--max-iters", "0")) == 2
    assert "max-iters" in capsys.readouterr().err


def test_config_file_and_flag_override(opt_inputs, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"max_iters": 0}))
    assert main(_opt_args(opt_inputs, "--config", str(cfg))) == 2
    assert main(_opt_args(opt_inputs, "--config", str(cfg), "--max-iters", "3")) == 0
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(_opt_args(opt_inputs, "--config", str(cfg))) == 2


def test_inpaint_and_eval(dataset, tmp_path, capsys):
    frame = dataset / "frame_0000"
    out = tmp_path / "filled.pgm"
    assert main(["inpaint", "--depth", str(frame / "depth_body.pgm"), "--mask", str(frame / "mask.pgm"),
                 "--calibration", str(frame / "calibration.json"), "--out", str(out)]) == 0
    assert out.exists()
    capsys.readouterr()
    assert main(["eval", "--pred", str(frame / "pose.json"), "--gt", str(frame / "pose.json"),
                 "--scene-depth", str(frame / "depth_scene.egvx"),
                 "--calibration", str(frame / "calibration.json")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["mpjpe_mm"] == 0 and report["penetration_free"] == 1


def test_missing_input_is_an_error(tmp_path):
    assert main(["run", "--dataset", str(tmp_path / "nope"), "--out", str(tmp_path / "o")]) == 2


def test_parallel_run_matches_serial(dataset, runs, tmp_path):
    assert main(["run", "--dataset", str(dataset), "--out", str(tmp_path / "p"), "--workers", "2", "--pgm"]) == 0
    assert (tmp_path / "p" / "report.json").read_bytes() == (runs / "a" / "report.json").read_bytes()
