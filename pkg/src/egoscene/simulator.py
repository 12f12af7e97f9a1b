"""Synthetic egocentric scenes: rooms, capsule bodies, fisheye ray casting.

World frame: z up, floor at z = 0, the body faces +y. All rendered outputs
(depth, masks, poses) are in the camera frame of the head-mounted camera.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .camera import FisheyeModel, equidistant, save_calibration
from .depth import DepthMap, write_depth_pgm, write_mask_pgm
from .errors import InvalidSpec
from .pose import BONE_LENGTHS, FOOT_JOINTS, JOINT_NAMES, PARENTS, Pose

SCENE, BODY = "scene", "body"


@dataclass(frozen=True)
class Plane:
    """Half-space boundary ``normal . x = offset``; normal points to free space."""

    normal: tuple
    offset: float
    material: str = SCENE


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple
    material: str = SCENE
    name: str = ""


@dataclass(frozen=True)
class Capsule:
    a: tuple
    b: tuple
    radius: float
    material: str = BODY


@dataclass(frozen=True)
class SceneModel:
    primitives: tuple
    camera_rotation: np.ndarray = field(default_factory=lambda: np.diag([1.0, -1.0, -1.0]))
    camera_position: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        prims = tuple(self.primitives)
        if not any(p.material == SCENE for p in prims):
            raise InvalidSpec("scene needs at least one scene primitive")
        for p in prims:
            if isinstance(p, Plane) and abs(np.linalg.norm(p.normal) - 1) > 1e-9:
                raise InvalidSpec("plane normals must be unit length")
            if isinstance(p, Capsule) and not p.radius > 0:
                raise InvalidSpec("capsule radius must be positive")
            if isinstance(p, Box) and not np.all(np.asarray(p.hi) > np.asarray(p.lo)):
                raise InvalidSpec("box hi must exceed lo on every axis")
        rot = np.asarray(self.camera_rotation, dtype=np.float64)
        if rot.shape != (3, 3) or not np.allclose(rot.T @ rot, np.eye(3), atol=1e-9):
            raise InvalidSpec("camera_rotation must be orthonormal")
        object.__setattr__(self, "primitives", prims)
        object.__setattr__(self, "camera_rotation", rot)
        object.__setattr__(self, "camera_position", np.asarray(self.camera_position, float))

    def __eq__(self, other):
        return (
            isinstance(other, SceneModel)
            and self.primitives == other.primitives
            and np.array_equal(self.camera_rotation, other.camera_rotation)
            and np.array_equal(self.camera_position, other.camera_position)
        )

    def count(self, kind) -> int:
        return sum(isinstance(p, kind) for p in self.primitives)

    def world_to_camera(self, points):
        p = np.asarray(points, dtype=np.float64)
        return (p - self.camera_position) @ self.camera_rotation

    def camera_to_world(self, points):
        p = np.asarray(points, dtype=np.float64)
        return p @ self.camera_rotation.T + self.camera_position

    def with_primitives(self, extra) -> "SceneModel":
        return SceneModel(self.primitives + tuple(extra), self.camera_rotation, self.camera_position)

    def with_camera(self, rotation, position) -> "SceneModel":
        return SceneModel(self.primitives, rotation, position)

    def without_body(self) -> "SceneModel":
        return SceneModel(
            tuple(p for p in self.primitives if p.material == SCENE),
            self.camera_rotation,
            self.camera_position,
        )

    def to_dict(self) -> dict:
        prims = []
        for p in self.primitives:
            if isinstance(p, Plane):
                prims.append({"type": "plane", "normal": list(p.normal), "offset": p.offset,
                              "material": p.material})
            elif isinstance(p, Box):
                prims.append({"type": "box", "lo": list(p.lo), "hi": list(p.hi),
                              "material": p.material, "name": p.name})
            else:
                prims.append({"type": "capsule", "a": list(p.a), "b": list(p.b),
                              "radius": p.radius, "material": p.material})
        return {
            "primitives": prims,
            "camera_rotation": self.camera_rotation.tolist(),
            "camera_position": self.camera_position.tolist(),
        }

    @classmethod
    def from_dict(cls, doc) -> "SceneModel":
        prims = []
        try:
            for d in doc["primitives"]:
                kind = d["type"]
                if kind == "plane":
                    prims.append(Plane(tuple(d["normal"]), float(d["offset"]), d.get("material", SCENE)))
                elif kind == "box":
                    prims.append(Box(tuple(d["lo"]), tuple(d["hi"]), d.get("material", SCENE),
                                     d.get("name", "")))
                elif kind == "capsule":
                    prims.append(Capsule(tuple(d["a"]), tuple(d["b"]), float(d["radius"]),
                                         d.get("material", BODY)))
                else:
                    raise InvalidSpec(f"unknown primitive type {kind!r}")
            rot = doc.get("camera_rotation", np.diag([1.0, -1.0, -1.0]))
            pos = doc.get("camera_position", [0.0, 0.0, 0.0])
        except (KeyError, TypeError) as exc:
            raise InvalidSpec(f"malformed scene document: {exc}") from exc
        return cls(tuple(prims), rot, pos)


# -- rooms ---------------------------------------------------------------

@dataclass(frozen=True)
class RoomSpec:
    """Floor, optional four walls (``width`` x ``depth`` centered at the origin),
    and furniture boxes given as ``{"name", "center": [x, y], "size": [sx, sy], "height"}``."""

    width: float | None = None
    depth: float | None = None
    furniture: tuple = ()


def build_room(spec: RoomSpec | dict) -> SceneModel:
    if isinstance(spec, dict):
        spec = RoomSpec(spec.get("width"), spec.get("depth"), tuple(spec.get("furniture", ())))
    prims = [Plane((0.0, 0.0, 1.0), 0.0)]
    if (spec.width is None) != (spec.depth is None):
        raise InvalidSpec("walls need both width and depth")
    if spec.width is not None:
        if not (spec.width > 0 and spec.depth > 0):
            raise InvalidSpec("room dimensions must be positive")
        hw, hd = spec.width / 2, spec.depth / 2
        prims += [
            Plane((-1.0, 0.0, 0.0), -hw),
            Plane((1.0, 0.0, 0.0), -hw),
            Plane((0.0, -1.0, 0.0), -hd),
            Plane((0.0, 1.0, 0.0), -hd),
        ]
    for item in spec.furniture:
        try:
            cx, cy = item["center"]
            sx, sy = item["size"]
            height = float(item["height"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidSpec(f"malformed furniture entry {item!r}") from exc
        if not (sx > 0 and sy > 0 and height > 0):
            raise InvalidSpec("furniture dimensions must be positive")
        prims.append(Box((cx - sx / 2, cy - sy / 2, 0.0), (cx + sx / 2, cy + sy / 2, height),
                         SCENE, item.get("name", "")))
    return SceneModel(tuple(prims))


# -- bodies --------------------------------------------------------------

POSE_KINDS = ("standing", "sitting", "squatting")

# capsule radius of the bone ending at each joint
_BONE_RADII = (0.0, 0.06, 0.05, 0.04, 0.06, 0.05, 0.04, 0.11, 0.07, 0.05, 0.04, 0.11, 0.07, 0.05, 0.04)


@dataclass(frozen=True)
class PoseSpec:
    kind: str = "standing"
    scale: float = 1.0
    position: tuple = (0.0, 0.0)
    yaw: float = 0.0
    seed: int = 0
    jitter_deg: float = 0.0
    seat_height: float = 0.45
    camera_tilt_deg: float = 10.0


@dataclass(frozen=True)
class Body:
    world_joints: np.ndarray
    camera_rotation: np.ndarray
    camera_position: np.ndarray
    capsules: tuple
    kind: str

    def camera_pose(self) -> Pose:
        return Pose((self.world_joints - self.camera_position) @ self.camera_rotation, JOINT_NAMES)


def _unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


def _jitter(rng, direction, sigma_deg):
    """Rotate ``direction`` about a random axis by a Gaussian angle."""
    if sigma_deg <= 0:
        return direction
    axis = _unit(rng.normal(size=3))
    ang = math.radians(sigma_deg) * rng.normal()
    d = direction
    return (d * math.cos(ang) + np.cross(axis, d) * math.sin(ang)
            + axis * np.dot(axis, d) * (1 - math.cos(ang)))


def _leg_directions(kind, rng, spec, side):
    """Unit directions hip->knee, knee->ankle, ankle->foot in the body frame."""
    if kind == "standing":
        knee = _jitter(rng, _unit((0.0, 0.02, -1.0)), spec.jitter_deg)
        ankle = _jitter(rng, _unit((0.0, -0.02, -1.0)), spec.jitter_deg)
    elif kind == "sitting":
        shin = math.radians(5.0) + math.radians(spec.jitter_deg) * rng.normal() * 0.5
        ankle = np.array([0.0, math.sin(shin), -math.cos(shin)])
        thigh_len, shin_len = BONE_LENGTHS[8] * spec.scale, BONE_LENGTHS[9] * spec.scale
        rise = (shin_len * math.cos(shin) - spec.seat_height) / thigh_len
        if abs(rise) >= 1:
            raise InvalidSpec(f"seat height {spec.seat_height} unreachable for this body")
        b = math.asin(rise)
        knee = np.array([0.0, math.cos(b), math.sin(b)])
        # hip -> knee then knee -> ankle brings the ankle to z = 0 from z = seat height
    else:
        shin = math.radians(45.0) + math.radians(spec.jitter_deg) * rng.normal() * 0.5
        thigh = math.radians(15.0)
        ankle = np.array([0.0, -math.sin(shin), -math.cos(shin)])
        knee = np.array([0.0, math.cos(thigh), -math.sin(thigh)])
    yaw = math.radians(spec.jitter_deg) * rng.normal() * 0.5
    foot = np.array([math.sin(yaw) * side, math.cos(yaw), 0.0])
    return knee, ankle, foot


def sample_pose(spec: PoseSpec) -> Body:
    """Parametric 15-joint body with exact canonical bone lengths."""
    if spec.kind not in POSE_KINDS:
        raise InvalidSpec(f"unknown pose kind {spec.kind!r}")
    if not spec.scale > 0 or spec.jitter_deg < 0:
        raise InvalidSpec("scale must be positive and jitter non-negative")
    rng = np.random.default_rng(spec.seed)
    kind = spec.kind
    lean = {"standing": 0.0, "sitting": 0.08, "squatting": 0.45}[kind]
    dirs = [None] * len(JOINT_NAMES)
    for side, (sh, el, wr, hip, kn, an, ft) in ((1, (1, 2, 3, 7, 8, 9, 10)),
                                                (-1, (4, 5, 6, 11, 12, 13, 14))):
        dirs[sh] = _jitter(rng, _unit((side, 0.0, -0.15)), spec.jitter_deg * 0.3)
        if kind == "standing":
            dirs[el] = _jitter(rng, _unit((0.1 * side, 0.05, -1.0)), spec.jitter_deg)
            dirs[wr] = _jitter(rng, _unit((0.05 * side, 0.25, -1.0)), spec.jitter_deg)
        else:
            dirs[el] = _jitter(rng, _unit((0.05 * side, 0.35, -1.0)), spec.jitter_deg)
            dirs[wr] = _jitter(rng, _unit((0.0, 1.0, -0.3)), spec.jitter_deg)
        # torso sides; hips stay symmetric so both sit at the same height
        dirs[hip] = _unit((0.1 * side, -lean, -0.5))
        dirs[kn], dirs[an], dirs[ft] = _leg_directions(kind, rng, spec, side)

    rel = np.zeros((len(JOINT_NAMES), 3))
    for j in range(1, len(JOINT_NAMES)):
        rel[j] = rel[PARENTS[j]] + BONE_LENGTHS[j] * spec.scale * dirs[j]

    if kind == "sitting":
        rel[:, 2] += spec.seat_height - rel[7, 2]
    else:
        rel[:, 2] -= rel[list(FOOT_JOINTS), 2].min()

    cy, sy = math.cos(spec.yaw), math.sin(spec.yaw)
    yaw_rot = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    world = rel @ yaw_rot.T + np.array([spec.position[0], spec.position[1], 0.0])

    hip_mid = 0.5 * (rel[7] + rel[11])
    up = _unit(rel[0] - hip_mid)
    fwd = _unit(np.array([0.0, 1.0, 0.0]) - up * up[1])
    head = rel[0] + 0.2 * spec.scale * up + 0.1 * spec.scale * fwd
    tau = math.radians(spec.camera_tilt_deg)
    z_c = np.array([0.0, math.sin(tau), -math.cos(tau)])
    y_c = np.array([0.0, -math.cos(tau), -math.sin(tau)])
    x_c = np.cross(y_c, z_c)
    cam_rot = yaw_rot @ np.stack([x_c, y_c, z_c], axis=1)
    cam_pos = yaw_rot @ head + np.array([spec.position[0], spec.position[1], 0.0])

    capsules = tuple(
        Capsule(tuple(world[PARENTS[j]]), tuple(world[j]), _BONE_RADII[j] * spec.scale, BODY)
        for j in range(1, len(JOINT_NAMES))
    )
    return Body(world, cam_rot, cam_pos, capsules, kind)


def place_body(room: SceneModel, body: Body) -> SceneModel:
    """Room plus body capsules, viewed from the body's head camera."""
    return SceneModel(room.without_body().primitives + body.capsules,
                      body.camera_rotation, body.camera_position)


# -- ray casting ---------------------------------------------------------

def _hit_plane(o, d, p: Plane):
    n = np.asarray(p.normal, dtype=np.float64)
    nd = d @ n
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (p.offset - o @ n) / nd
    return np.where((nd < 0) & (t > 0), t, np.inf)


def _hit_box(o, d, b: Box):
    lo, hi = np.asarray(b.lo, float), np.asarray(b.hi, float)
    safe = np.where(np.abs(d) < 1e-300, 1e-300, d)
    t1 = (lo - o) / safe
    t2 = (hi - o) / safe
    tnear = np.minimum(t1, t2).max(axis=1)
    tfar = np.maximum(t1, t2).min(axis=1)
    t = np.where(tnear > 0, tnear, tfar)
    return np.where((tnear <= tfar) & (tfar > 0), t, np.inf)


def _hit_sphere(o, d, c, r):
    oc = o - c
    b = d @ oc
    cc = oc @ oc - r * r
    h = b * b - cc
    sq = np.sqrt(np.maximum(h, 0))
    t0, t1 = -b - sq, -b + sq
    t = np.where(t0 > 0, t0, np.where(t1 > 0, t1, np.inf))
    return np.where(h >= 0, t, np.inf)


def _hit_capsule(o, d, c: Capsule):
    a, b = np.asarray(c.a, float), np.asarray(c.b, float)
    r = c.radius
    ba = b - a
    oa = o - a
    baba = ba @ ba
    bard = d @ ba
    baoa = ba @ oa
    rdoa = d @ oa
    oaoa = oa @ oa
    qa = baba - bard * bard
    qb = baba * rdoa - baoa * bard
    qc = baba * oaoa - baoa * baoa - r * r * baba
    h = qb * qb - qa * qc
    best = np.minimum(_hit_sphere(o, d, a, r), _hit_sphere(o, d, b, r))
    ok = (h >= 0) & (qa > 1e-15)
    sq = np.sqrt(np.maximum(h, 0))
    safe_qa = np.where(ok, qa, 1.0)
    for sign in (-1.0, 1.0):
        t = (-qb + sign * sq) / safe_qa
        y = baoa + t * bard
        hit = ok & (t > 0) & (y > 0) & (y < baba)
        best = np.minimum(best, np.where(hit, t, np.inf))
    return best


def _hit(o, d, prim):
    if isinstance(prim, Plane):
        return _hit_plane(o, d, prim)
    if isinstance(prim, Box):
        return _hit_box(o, d, prim)
    return _hit_capsule(o, d, prim)


def cast_rays(model: FisheyeModel, scene: SceneModel):
    """Nearest scene and body hit distance per pixel, each ``(H, W)`` with inf for misses."""
    w, h = model.image_size
    dirs_cam, inside = model.pixel_rays(model.pixel_grid().reshape(-1, 2))
    d = dirs_cam[inside] @ scene.camera_rotation.T
    o = scene.camera_position
    t_scene = np.full(len(d), np.inf)
    t_body = np.full(len(d), np.inf)
    for prim in scene.primitives:
        t = _hit(o, d, prim)
        if prim.material == SCENE:
            np.minimum(t_scene, t, out=t_scene)
        else:
            np.minimum(t_body, t, out=t_body)
    full_s = np.full(w * h, np.inf)
    full_b = np.full(w * h, np.inf)
    full_s[inside] = t_scene
    full_b[inside] = t_body
    return full_s.reshape(h, w), full_b.reshape(h, w)


def raycast_depth(model: FisheyeModel, scene: SceneModel, include_body: bool = True) -> DepthMap:
    t_scene, t_body = cast_rays(model, scene)
    t = np.minimum(t_scene, t_body) if include_body else t_scene
    return DepthMap(np.where(np.isfinite(t), t, 0.0), np.isfinite(t))


def render_body_mask(model: FisheyeModel, scene: SceneModel) -> np.ndarray:
    t_scene, t_body = cast_rays(model, scene)
    return (t_body < t_scene).astype(np.uint8)


def render_frame(model: FisheyeModel, scene: SceneModel):
    """``(D^B, D^S, S)`` from a single ray cast."""
    t_scene, t_body = cast_rays(model, scene)
    t_all = np.minimum(t_scene, t_body)
    with_body = DepthMap(np.where(np.isfinite(t_all), t_all, 0.0), np.isfinite(t_all))
    scene_only = DepthMap(np.where(np.isfinite(t_scene), t_scene, 0.0), np.isfinite(t_scene))
    return with_body, scene_only, (t_body < t_scene).astype(np.uint8)


def scene_distance(points, scene: SceneModel, material=SCENE) -> np.ndarray:
    """Unsigned distance from world points to the nearest primitive surface."""
    p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    best = np.full(len(p), np.inf)
    for prim in scene.primitives:
        if prim.material != material:
            continue
        if isinstance(prim, Plane):
            dist = np.abs(p @ np.asarray(prim.normal) - prim.offset)
        elif isinstance(prim, Box):
            lo, hi = np.asarray(prim.lo), np.asarray(prim.hi)
            q = np.maximum(lo - p, p - hi)
            outside = np.linalg.norm(np.maximum(q, 0), axis=1)
            inside = np.minimum(q.max(axis=1), 0)
            dist = np.abs(outside + inside)
        else:
            a, b = np.asarray(prim.a), np.asarray(prim.b)
            ba = b - a
            t = np.clip((p - a) @ ba / (ba @ ba), 0, 1)
            dist = np.abs(np.linalg.norm(p - a - t[:, None] * ba, axis=1) - prim.radius)
        best = np.minimum(best, dist)
    return best


# -- datasets ------------------------------------------------------------

def default_camera() -> FisheyeModel:
    """320 x 320 equidistant fisheye with a 100 degree half-FOV."""
    return equidistant(focal=88.0, center=(159.5, 159.5), image_size=(320, 320))


@dataclass(frozen=True)
class DatasetSpec:
    seed: int = 0
    jitter_deg: float = 8.0
    camera: FisheyeModel = field(default_factory=default_camera)
    walls: bool = True


def make_frame(spec: DatasetSpec, index: int):
    """Deterministic (room-with-body scene, body) for frame ``index``."""
    rng = np.random.default_rng([spec.seed, index])
    kind = POSE_KINDS[int(rng.integers(len(POSE_KINDS)))]
    yaw = float(rng.uniform(-math.pi, math.pi))
    pos = (float(rng.uniform(-0.5, 0.5)), float(rng.uniform(-0.5, 0.5)))
    seat = float(rng.uniform(0.42, 0.50))
    body = sample_pose(PoseSpec(kind=kind, position=pos, yaw=yaw, seed=int(rng.integers(2**31)),
                                jitter_deg=spec.jitter_deg, seat_height=seat))
    furniture = []
    if kind == "sitting":
        hips = 0.5 * (body.world_joints[7] + body.world_joints[11])
        back = np.array([-math.sin(yaw), math.cos(yaw)]) * -0.12
        furniture.append({"name": "chair", "center": [float(hips[0] + back[0]), float(hips[1] + back[1])],
                          "size": [0.45, 0.45], "height": seat})
    # a table off to the side keeps the background non-planar
    ang = float(rng.uniform(-math.pi, math.pi))
    furniture.append({"name": "table", "center": [pos[0] + 1.3 * math.cos(ang), pos[1] + 1.3 * math.sin(ang)],
                      "size": [0.8, 0.6], "height": 0.75})
    room = build_room(RoomSpec(
        float(rng.uniform(4.0, 6.0)) if spec.walls else None,
        float(rng.uniform(4.0, 6.0)) if spec.walls else None,
        tuple(furniture),
    ))
    return place_body(room, body), body


def generate_dataset(spec: DatasetSpec, count: int, out_dir) -> Path:
    """Render ``count`` frames into ``out_dir`` and write ``manifest.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model = spec.camera
    save_calibration(model, out / "calibration.json")
    frames = []
    for i in range(count):
        fid = f"frame_{i:04d}"
        fdir = out / fid
        fdir.mkdir(exist_ok=True)
        scene, body = make_frame(spec, i)
        d_body, d_scene, seg = render_frame(model, scene)
        io.write_volume(fdir / "depth_body.egvx", np.where(d_body.valid, d_body.values, 0.0))
        io.write_volume(fdir / "depth_scene.egvx", np.where(d_scene.valid, d_scene.values, 0.0))
        write_depth_pgm(fdir / "depth_body.pgm", d_body)
        write_depth_pgm(fdir / "depth_scene.pgm", d_scene)
        write_mask_pgm(fdir / "mask.pgm", seg)
        io.write_pose(fdir / "pose.json", body.camera_pose())
        save_calibration(model, fdir / "calibration.json")
        (fdir / "scene.json").write_text(json.dumps(scene.to_dict(), indent=2) + "\n")
        frames.append({
            "id": fid,
            "kind": body.kind,
            "depth_body": f"{fid}/depth_body.egvx",
            "depth_scene": f"{fid}/depth_scene.egvx",
            "depth_body_pgm": f"{fid}/depth_body.pgm",
            "depth_scene_pgm": f"{fid}/depth_scene.pgm",
            "mask": f"{fid}/mask.pgm",
            "pose": f"{fid}/pose.json",
            "calibration": f"{fid}/calibration.json",
            "scene": f"{fid}/scene.json",
        })
    manifest = {"seed": spec.seed, "count": count, "jitter_deg": spec.jitter_deg,
                "calibration": "calibration.json", "frames": frames}
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def load_frame(root, entry):
    """Read one manifest frame: ``(model, D^B, D^S, S, gt_pose, scene)``."""
    from .camera import load_calibration
    from .depth import read_mask_pgm

    root = Path(root)
    model = load_calibration(root / entry["calibration"])
    d_body = io.read_volume(root / entry["depth_body"])
    d_scene = io.read_volume(root / entry["depth_scene"])
    seg = read_mask_pgm(root / entry["mask"]).astype(np.uint8)
    pose = io.read_pose(root / entry["pose"])
    scene = SceneModel.from_dict(json.loads((root / entry["scene"]).read_text()))
    return model, DepthMap(d_body), DepthMap(d_scene), seg, pose, scene


@dataclass(frozen=True)
class FloatFixture:
    model: FisheyeModel
    gt: Pose
    init: Pose
    detections: np.ndarray
    cloud: np.ndarray


def floor_float_fixture(height: float = 0.10, spacing: float = 0.01, extent: float = 1.5,
                        kind: str = "standing") -> FloatFixture:
    """Standing body on a bare floor, initialized ``height`` meters too high.

    The cloud is a regular floor grid (camera frame) and the detections are
    the exact projections of the grounded pose, so the only thing wrong with
    the initialization is the vertical float.
    """
    model = default_camera()
    body = sample_pose(PoseSpec(kind=kind))
    gt = body.camera_pose()
    g = np.arange(-extent, extent + spacing / 2, spacing)
    gx, gy = np.meshgrid(g, g, indexing="ij")
    floor = np.stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)], axis=1)
    cloud = (floor - body.camera_position) @ body.camera_rotation
    up = np.array([0.0, 0.0, 1.0]) @ body.camera_rotation
    init = gt.with_joints(gt.joints + height * up)
    return FloatFixture(model, gt, init, model.project(gt.joints), cloud)
