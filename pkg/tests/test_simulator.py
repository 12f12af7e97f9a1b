import math

import numpy as np
import pytest

from egoscene.camera import equidistant
from egoscene.depth import depth_to_pointcloud, mask_depth
from egoscene.errors import InvalidSpec
from egoscene.pose import BONE_LENGTHS, PARENTS
from egoscene.simulator import (
    Box,
    Capsule,
    DatasetSpec,
    Plane,
    PoseSpec,
    RoomSpec,
    SceneModel,
    build_room,
    generate_dataset,
    load_frame,
    make_frame,
    raycast_depth,
    render_body_mask,
    render_frame,
    sample_pose,
    scene_distance,
)

# r = f * theta with f = 80 / pi puts the 45 degree ray exactly 20 px from center
CAM45 = equidistant(focal=80 / math.pi, center=(32.0, 32.0), image_size=(65, 65), max_theta_deg=100)


def test_rooms():
    floor = build_room(RoomSpec())
    assert floor.count(Plane) == 1 and floor.primitives[0] == Plane((0.0, 0.0, 1.0), 0.0)
    spec = RoomSpec(furniture=({"name": "chair", "center": [0, 0], "size": [0.4, 0.4], "height": 0.45},))
    room = build_room(spec)
    assert room.count(Plane) == 1 and room.count(Box) == 1
    assert build_room(spec) == room
    assert build_room(RoomSpec(4, 5)).count(Plane) == 5
    with pytest.raises(InvalidSpec):
        build_room(RoomSpec(4, None))


def test_scene_roundtrip_dict():
    scene, _ = make_frame(DatasetSpec(seed=2), 1)
    assert SceneModel.from_dict(scene.to_dict()) == scene


def test_standing_pose_construction():
    body = sample_pose(PoseSpec())
    w = body.world_joints
    assert np.allclose(w[[9, 13], 2], 0.0, atol=1e-9)
    assert np.all(w[:, 2] < body.camera_position[2])
    for j, p in enumerate(PARENTS):
        if p >= 0:
            assert np.linalg.norm(w[j] - w[p]) == pytest.approx(BONE_LENGTHS[j], abs=1e-9)


@pytest.mark.parametrize("kind", ["standing", "sitting", "squatting"])
def test_bone_lengths_with_jitter(kind):
    w = sample_pose(PoseSpec(kind=kind, seed=5, jitter_deg=10)).world_joints
    for j, p in enumerate(PARENTS):
        if p >= 0:
            assert np.linalg.norm(w[j] - w[p]) == pytest.approx(BONE_LENGTHS[j], abs=1e-9)


def test_sitting_hip_height():
    w = sample_pose(PoseSpec(kind="sitting", seat_height=0.45)).world_joints
    assert abs(w[7, 2] - 0.45) <= 0.02 and abs(w[11, 2] - 0.45) <= 0.02


def test_plane_hits():
    scene = SceneModel((Plane((0.0, 0.0, 1.0), -2.0),))  # camera frame z = 2
    d = raycast_depth(CAM45, scene)
    assert d.values[32, 32] == pytest.approx(2.0, abs=1e-12)
    assert d.values[32, 52] == pytest.approx(2 * math.sqrt(2), abs=1e-9)


def test_open_room_ray_misses():
    cam = equidistant(focal=20.0, center=(32.0, 32.0), image_size=(65, 65), max_theta_deg=100)
    scene = SceneModel((Plane((0.0, 0.0, 1.0), 0.0),), np.diag([1.0, -1.0, -1.0]), [0, 0, 1.5])
    d = raycast_depth(cam, scene)
    assert d.valid[32, 32] and not d.valid[32, 64]


def test_body_mask():
    scene = SceneModel((Plane((0.0, 0.0, 1.0), -2.0),))
    assert not render_body_mask(CAM45, scene).any()
    body = scene.with_primitives([Capsule((-0.2, 0.0, -1.0), (0.2, 0.0, -1.0), 0.1)])
    d_body, d_scene, seg = render_frame(CAM45, body)
    nearest_body = d_body.valid & (~d_scene.valid | (d_body.values < d_scene.values))
    assert seg.any() and np.array_equal(seg.astype(bool), nearest_body)
    m = mask_depth(d_body, seg)
    assert np.array_equal(m.values[m.valid], d_scene.values[m.valid])


@pytest.mark.parametrize("index", [0, 1, 2, 3])
def test_depth_pair_and_scene_points(index):
    spec = DatasetSpec(seed=11)
    scene, body = make_frame(spec, index)
    d_body, d_scene, seg = render_frame(spec.camera, scene)
    both = d_body.valid & d_scene.valid
    assert np.all(d_body.values[both] <= d_scene.values[both])
    pts = scene.camera_to_world(depth_to_pointcloud(spec.camera, d_scene))
    assert scene_distance(pts, scene).max() < 1e-5


def test_generate_and_load(tmp_path):
    a = generate_dataset(DatasetSpec(seed=4), 3, tmp_path / "a")
    b = generate_dataset(DatasetSpec(seed=4), 3, tmp_path / "b")
    import json
    manifest = json.loads(a.read_text())
    assert len(manifest["frames"]) == 3
    for entry in manifest["frames"]:
        for key, rel in entry.items():
            if key not in ("id", "kind"):
                assert (tmp_path / "a" / rel).exists()
                assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()
    model, d_body, d_scene, seg, pose, scene = load_frame(tmp_path / "a", manifest["frames"][0])
    assert d_body.shape == seg.shape == (320, 320) and len(pose) == 15
