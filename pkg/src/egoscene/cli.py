"""Command-line entry point: ``egoscene {generate,run,inpaint,optimize,eval}``.

Every flag can also come from a JSON file passed with ``--config``; flags
given on the command line win. The only environment variable consulted is
``EGOSCENE_LOG_LEVEL``. Reports contain no timestamps or absolute paths so
repeated runs with the same seed produce byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .camera import load_calibration
from .depth import (
    DepthMap,
    depth_metrics,
    depth_to_pointcloud,
    inpaint_depth,
    mask_depth,
    read_depth_pgm,
    read_mask_pgm,
    write_depth_pgm,
)
from .errors import EgoSceneError, InvalidParams
from .metrics import ba_mpjpe, contact_rate, mpjpe, pa_mpjpe, penetration_free_rate
from .optimizer import EnergyWeights, contact_energy, optimize_pose
from .pose import run_pipeline
from .simulator import DatasetSpec, generate_dataset, load_frame
from .voxel import VoxelGridParams

log = logging.getLogger("egoscene")

REPORT_SCHEMA = 1

DEFAULTS = {
    "out": None,
    "frames": 5,
    "seed": 0,
    "jitter_deg": 8.0,
    "no_walls": False,
    "dataset": None,
    "no_inpaint": False,
    "pgm": False,
    "workers": 1,
    "L": 2.4,
    "N": 64,
    "epsilon": 0.04,
    "sigma": 0.05,
    "beta": 100.0,
    "depth": None,
    "mask": None,
    "calibration": None,
    "dilation": 2,
    "method": "direct",
    "init": None,
    "detections": None,
    "cloud": None,
    "max_iters": 500,
    "lambda_R": 1e-3,
    "lambda_J": 1.0,
    "lambda_C": 10.0,
    "contact_epsilon": 0.05,
    "prior": "relative",
    "pred": None,
    "gt": None,
    "scene_depth": None,
    "threshold": 0.05,
}


def _config(args) -> argparse.Namespace:
    """Merge defaults < config file < explicit flags."""
    merged = dict(DEFAULTS)
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidParams(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(doc) - set(DEFAULTS)
        if unknown:
            raise InvalidParams(f"unknown config keys: {sorted(unknown)}")
        merged.update(doc)
    for key, value in vars(args).items():
        if value is not None and key in DEFAULTS:
            merged[key] = value
    merged["command"] = args.command
    return argparse.Namespace(**merged)


def _require(cfg, *names):
    missing = [n for n in names if getattr(cfg, n) in (None, "")]
    if missing:
        raise InvalidParams(f"missing required option(s): {', '.join('--' + m.replace('_', '-') for m in missing)}")
    for n in names:
        if n in ("dataset", "depth", "mask", "calibration", "init", "detections", "cloud",
                 "pred", "gt", "scene_depth") and not Path(getattr(cfg, n)).exists():
            raise InvalidParams(f"--{n.replace('_', '-')}: {getattr(cfg, n)} does not exist")


def _write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _write_csv(path, rows, columns):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({c: ("" if row.get(c) is None else row.get(c)) for c in columns})


def _read_depth(path) -> DepthMap:
    path = Path(path)
    if path.suffix == ".pgm":
        return read_depth_pgm(path)
    return DepthMap(io.read_volume(path))


def _write_depth(path, depth: DepthMap):
    path = Path(path)
    if path.suffix == ".pgm":
        write_depth_pgm(path, depth)
    else:
        io.write_volume(path, np.where(depth.valid, depth.values, 0.0))


# -- generate ------------------------------------------------------------

def cmd_generate(cfg) -> int:
    _require(cfg, "out")
    if int(cfg.frames) < 1:
        raise InvalidParams("--frames must be at least 1")
    spec = DatasetSpec(seed=int(cfg.seed), jitter_deg=float(cfg.jitter_deg), walls=not cfg.no_walls)
    path = generate_dataset(spec, int(cfg.frames), cfg.out)
    print(path)
    return 0


# -- run -----------------------------------------------------------------

FRAME_COLUMNS = ["frame", "kind", "mpjpe_mm", "pa_mpjpe_mm", "ba_mpjpe_mm", "contact",
                 "penetration_free", "abs_rel", "rmse", "error"]
SUMMARY_COLUMNS = ["frames", "failed", "mpjpe_mm", "pa_mpjpe_mm", "ba_mpjpe_mm", "contact_pct",
                   "non_penetration_pct", "abs_rel", "rmse"]


def _run_frame(job):
    root, entry, opts = job
    row = {"frame": entry["id"], "kind": entry.get("kind")}
    try:
        model, d_body, d_scene, seg, gt_pose, _ = load_frame(root, entry)
        params = VoxelGridParams(opts["L"], opts["N"], opts["epsilon"])
        if opts["no_inpaint"]:
            scene_pred = d_body
        else:
            scene_pred = inpaint_depth(mask_depth(d_body, seg), seg, model=model)
        result = run_pipeline(model, scene_pred, params, gt_pose=gt_pose,
                              sigma=opts["sigma"], beta=opts["beta"])
        pred = result.pose
        gt_cloud = depth_to_pointcloud(model, d_scene)
        region = seg.astype(bool) & scene_pred.valid & d_scene.valid
        abs_rel, rmse = depth_metrics(scene_pred, d_scene, region.astype(np.uint8))
        row.update({
            "mpjpe_mm": mpjpe(pred, gt_pose),
            "pa_mpjpe_mm": pa_mpjpe(pred, gt_pose),
            "ba_mpjpe_mm": ba_mpjpe(pred, gt_pose),
            "contact": int(contact_rate([pred], gt_cloud) == 1.0),
            "penetration_free": int(penetration_free_rate([pred], d_scene, model) == 1.0),
            "abs_rel": abs_rel,
            "rmse": rmse,
            "error": None,
        })
        if opts["pgm"]:
            viz = Path(opts["out"]) / "viz"
            viz.mkdir(parents=True, exist_ok=True)
            write_depth_pgm(viz / f"{entry['id']}_before.pgm", mask_depth(d_body, seg))
            write_depth_pgm(viz / f"{entry['id']}_after.pgm", scene_pred)
    except (EgoSceneError, OSError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _summary(rows):
    ok = [r for r in rows if r.get("error") is None]
    out = {"frames": len(rows), "failed": len(rows) - len(ok)}
    for key in ("mpjpe_mm", "pa_mpjpe_mm", "ba_mpjpe_mm", "abs_rel", "rmse"):
        out[key] = float(np.mean([r[key] for r in ok])) if ok else None
    out["contact_pct"] = 100.0 * float(np.mean([r["contact"] for r in ok])) if ok else None
    out["non_penetration_pct"] = (100.0 * float(np.mean([r["penetration_free"] for r in ok]))
                                  if ok else None)
    return out


def cmd_run(cfg) -> int:
    _require(cfg, "dataset", "out")
    root = Path(cfg.dataset)
    manifest = json.loads((root / "manifest.json").read_text())
    VoxelGridParams(float(cfg.L), int(cfg.N), float(cfg.epsilon))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    opts = {"L": float(cfg.L), "N": int(cfg.N), "epsilon": float(cfg.epsilon),
            "sigma": float(cfg.sigma), "beta": float(cfg.beta), "no_inpaint": bool(cfg.no_inpaint),
            "pgm": bool(cfg.pgm), "out": str(out)}
    jobs = [(str(root), entry, opts) for entry in manifest["frames"]]
    if int(cfg.workers) > 1:
        with ProcessPoolExecutor(int(cfg.workers)) as pool:
            rows = list(pool.map(_run_frame, jobs))
    else:
        rows = [_run_frame(j) for j in jobs]
    rows.sort(key=lambda r: r["frame"])
    for r in rows:
        if r.get("error"):
            log.error("frame %s failed: %s", r["frame"], r["error"])
    summary = _summary(rows)
    config = {k: opts[k] for k in ("L", "N", "epsilon", "sigma", "beta", "no_inpaint")}
    config["seed"] = manifest.get("seed")
    report = {"schema": REPORT_SCHEMA, "config": config, "frames": rows, "summary": summary}
    _write_json(out / "report.json", report)
    _write_csv(out / "frames.csv", rows, FRAME_COLUMNS)
    _write_csv(out / "summary.csv", [summary], SUMMARY_COLUMNS)
    print(out / "report.json")
    return 1 if summary["failed"] else 0


# -- inpaint -------------------------------------------------------------

def cmd_inpaint(cfg) -> int:
    _require(cfg, "depth", "mask", "out")
    depth = _read_depth(cfg.depth)
    seg = read_mask_pgm(cfg.mask).astype(np.uint8)
    model = load_calibration(cfg.calibration) if cfg.calibration else None
    filled = inpaint_depth(mask_depth(depth, seg), seg, dilation=int(cfg.dilation),
                           method=cfg.method, model=model)
    _write_depth(cfg.out, filled)
    print(cfg.out)
    return 0


# -- optimize ------------------------------------------------------------

TRACE_COLUMNS = ["iteration", "energy", "E_R", "E_J", "E_C_capped", "grad_norm"]


def cmd_optimize(cfg) -> int:
    _require(cfg, "init", "detections", "cloud", "calibration", "out")
    if int(cfg.max_iters) < 1:
        raise InvalidParams("--max-iters must be at least 1")
    model = load_calibration(cfg.calibration)
    init = io.read_pose(cfg.init)
    uv, conf = io.read_detections(cfg.detections)
    cloud = io.read_ply(cfg.cloud)
    weights = EnergyWeights(float(cfg.lambda_R), float(cfg.lambda_J), float(cfg.lambda_C),
                            float(cfg.contact_epsilon))
    trace = optimize_pose(init, uv, cloud, model, weights, int(cfg.max_iters), confidence=conf,
                          prior=cfg.prior)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "trace.csv", list(trace.rows()), TRACE_COLUMNS)
    io.write_pose(out / "pose.json", trace.pose)
    summary = {
        "iterations": trace.iterations,
        "converged": trace.converged,
        "stop_reason": trace.stop_reason,
        "initial_energy": trace.energies[0],
        "final_energy": trace.energies[-1],
        "initial_contact_energy": contact_energy(init, cloud, weights.epsilon),
        "final_contact_energy": contact_energy(trace.pose, cloud, weights.epsilon),
    }
    _write_json(out / "summary.json", summary)
    print(out / "trace.csv")
    return 0


# -- eval ----------------------------------------------------------------

def cmd_eval(cfg) -> int:
    _require(cfg, "pred", "gt")
    pred, gt = io.read_pose(cfg.pred), io.read_pose(cfg.gt)
    report = {"mpjpe_mm": mpjpe(pred, gt), "pa_mpjpe_mm": pa_mpjpe(pred, gt),
              "ba_mpjpe_mm": ba_mpjpe(pred, gt)}
    if cfg.cloud:
        report["contact"] = int(contact_rate([pred], io.read_ply(cfg.cloud), float(cfg.threshold)) == 1.0)
    if cfg.scene_depth:
        _require(cfg, "calibration")
        model = load_calibration(cfg.calibration)
        report["penetration_free"] = int(
            penetration_free_rate([pred], _read_depth(cfg.scene_depth), model) == 1.0)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if cfg.out:
        Path(cfg.out).write_text(text)
    sys.stdout.write(text)
    return 0


COMMANDS = {"generate": cmd_generate, "run": cmd_run, "inpaint": cmd_inpaint,
            "optimize": cmd_optimize, "eval": cmd_eval}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="egoscene", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, argument_default=None)
        p.add_argument("--config", help="JSON file with option defaults")
        return p

    def grid(p):
        p.add_argument("--L", type=float, help="voxel box side in meters")
        p.add_argument("--N", type=int, help="voxels per side")
        p.add_argument("--epsilon", type=float, help="occupancy distance threshold (m)")

    p = add("generate", "render a synthetic dataset")
    p.add_argument("--out", help="output directory (created if missing)")
    p.add_argument("--frames", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--jitter-deg", dest="jitter_deg", type=float)
    p.add_argument("--no-walls", dest="no_walls", action="store_const", const=True)

    p = add("run", "inpaint + oracle pipeline + metrics over a dataset")
    p.add_argument("--dataset")
    p.add_argument("--out")
    p.add_argument("--no-inpaint", dest="no_inpaint", action="store_const", const=True,
                   help="use the with-body depth as the scene depth")
    p.add_argument("--pgm", action="store_const", const=True,
                   help="write before/after inpainting depth PGMs")
    p.add_argument("--workers", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--beta", type=float)
    grid(p)

    p = add("inpaint", "fill body pixels of one depth map")
    p.add_argument("--depth", help=".egvx or .pgm depth with the body")
    p.add_argument("--mask", help="binary body mask PGM")
    p.add_argument("--calibration", help="diffuse 3D points with this camera instead of depth")
    p.add_argument("--out", help=".egvx or .pgm output")
    p.add_argument("--dilation", type=int)
    p.add_argument("--method", choices=["direct", "sor"])

    p = add("optimize", "scene-contact refinement of one pose")
    p.add_argument("--init")
    p.add_argument("--detections")
    p.add_argument("--cloud", help="scene point cloud PLY (camera frame)")
    p.add_argument("--calibration")
    p.add_argument("--out", help="output directory")
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--lambda-R", dest="lambda_R", type=float)
    p.add_argument("--lambda-J", dest="lambda_J", type=float)
    p.add_argument("--lambda-C", dest="lambda_C", type=float)
    p.add_argument("--contact-epsilon", dest="contact_epsilon", type=float)
    p.add_argument("--prior", choices=["relative", "absolute"])

    p = add("eval", "compare a predicted pose with ground truth")
    p.add_argument("--pred")
    p.add_argument("--gt")
    p.add_argument("--cloud", help="scene cloud PLY for the contact check")
    p.add_argument("--scene-depth", dest="scene_depth", help="scene depth for the penetration check")
    p.add_argument("--calibration")
    p.add_argument("--threshold", type=float)
    p.add_argument("--out")
    return parser


def main(argv=None) -> int:
    level = os.environ.get("EGOSCENE_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        return COMMANDS[args.command](cfg)
    except (EgoSceneError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
