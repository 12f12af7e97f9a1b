"""Skeleton, 3D heatmaps, soft-argmax readout, and the volumetric pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .depth import DepthMap, depth_to_pointcloud
from .errors import DegenerateHeatmap, InvalidParams, ShapeMismatch
from .voxel import (
    VoxelGridParams,
    aggregate_volumes,
    lift_features,
    project_voxels,
    voxel_centers,
    voxelize_points,
)

JOINT_NAMES = (
    "neck",
    "right_shoulder",
    "right_elbow",
    "right_wrist",
    "left_shoulder",
    "left_elbow",
    "left_wrist",
    "right_hip",
    "right_knee",
    "right_ankle",
    "right_foot",
    "left_hip",
    "left_knee",
    "left_ankle",
    "left_foot",
)

# parent of each joint, -1 for the root (neck)
PARENTS = (-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 0, 11, 12, 13)

# canonical bone length (meters) of the bone ending at each joint
BONE_LENGTHS = (0.0, 0.18, 0.28, 0.25, 0.18, 0.28, 0.25, 0.52, 0.44, 0.42, 0.15, 0.52, 0.44, 0.42, 0.15)

FOOT_JOINTS = (9, 10, 13, 14)


@dataclass(frozen=True, eq=False)
class Pose:
    """``(J, 3)`` camera-frame joint positions in meters."""

    joints: np.ndarray
    names: tuple = field(default=JOINT_NAMES)

    def __post_init__(self):
        j = np.array(self.joints, dtype=np.float64)
        if j.ndim != 2 or j.shape[1] != 3:
            raise ShapeMismatch(f"pose must be (J, 3), got {j.shape}")
        if not np.all(np.isfinite(j)):
            raise ValueError("pose contains non-finite coordinates")
        names = tuple(self.names)
        if len(names) != len(j):
            raise ShapeMismatch(f"{len(names)} joint names for {len(j)} joints")
        j.setflags(write=False)
        object.__setattr__(self, "joints", j)
        object.__setattr__(self, "names", names)

    def __len__(self):
        return len(self.joints)

    def __eq__(self, other):
        return (
            isinstance(other, Pose)
            and self.names == other.names
            and np.array_equal(self.joints, other.joints)
        )

    def with_joints(self, joints) -> "Pose":
        return Pose(joints, self.names)


def _joints(pose) -> np.ndarray:
    return pose.joints if isinstance(pose, Pose) else np.asarray(pose, dtype=np.float64)


def render_gaussian_heatmaps(pose, params: VoxelGridParams, sigma: float) -> np.ndarray:
    """Unnormalized isotropic Gaussians ``exp(-|c - p|^2 / 2 sigma^2)``, shape (J, N, N, N)."""
    if not sigma > 0:
        raise InvalidParams("sigma must be positive")
    joints = _joints(pose)
    n, length = params.N, params.L
    idx = np.arange(n, dtype=np.float64)
    axes = (idx * length / n - length / 2, idx * length / n - length / 2, idx * length / n)
    out = np.empty((len(joints), n, n, n))
    for j, p in enumerate(joints):
        # separable: exp of a sum is the outer product of per-axis factors
        gx, gy, gz = (np.exp(-((a - c) ** 2) / (2 * sigma**2)) for a, c in zip(axes, p))
        out[j] = gx[:, None, None] * gy[None, :, None] * gz[None, None, :]
    return out


def _validate_heatmaps(heatmaps, params):
    h = np.asarray(heatmaps, dtype=np.float64)
    n = params.N
    if h.ndim != 4 or h.shape[1:] != (n, n, n):
        raise ShapeMismatch(f"heatmaps must be (J, {n}, {n}, {n}), got {h.shape}")
    if not np.all(np.isfinite(h)):
        raise DegenerateHeatmap("heatmaps contain non-finite values")
    return h


def softmax_weights(heatmaps, beta: float) -> np.ndarray:
    """Per-joint softmax of ``beta * values`` over all voxels, shape (J, N**3)."""
    if not beta > 0:
        raise InvalidParams("beta must be positive")
    flat = np.asarray(heatmaps, dtype=np.float64).reshape(len(heatmaps), -1)
    z = beta * flat
    z -= z.max(axis=1, keepdims=True)
    w = np.exp(z)
    total = w.sum(axis=1, keepdims=True)
    if np.any(~np.isfinite(total)) or np.any(total <= 0):
        raise DegenerateHeatmap("softmax normalizer is not positive and finite")
    return w / total


def soft_argmax(heatmaps, params: VoxelGridParams, beta: float = 100.0, names=None) -> Pose:
    """Expected voxel coordinate under ``softmax(beta * heatmap)`` for every joint."""
    h = _validate_heatmaps(heatmaps, params)
    return _pose_from_weights(softmax_weights(h, beta), params, names)


def _pose_from_weights(w, params, names=None) -> Pose:
    joints = w @ voxel_centers(params).reshape(-1, 3)
    if names is None:
        names = JOINT_NAMES if len(joints) == len(JOINT_NAMES) else tuple(
            f"joint_{i}" for i in range(len(joints))
        )
    return Pose(joints, names)


def soft_argmax_jacobian(heatmaps, params: VoxelGridParams, beta: float, joint: int) -> np.ndarray:
    """d(position of ``joint``)/d(heatmap value), shape (N, N, N, 3).

    For weights ``w = softmax(beta h)`` and output ``p = sum w c`` the
    derivative is ``beta * w_i * (c_i - p)``.
    """
    h = _validate_heatmaps(heatmaps, params)
    w = softmax_weights(h[joint:joint + 1], beta)[0]
    centers = voxel_centers(params).reshape(-1, 3)
    p = w @ centers
    n = params.N
    return (beta * w[:, None] * (centers - p)).reshape(n, n, n, 3)


def joint_feature_map(model, pose, sigma_px: float = 4.0) -> np.ndarray:
    """Per-joint 2D Gaussian heatmaps at the projected joints, shape (H, W, J).

    Stand-in for an image backbone's 2D pose features; out-of-FOV joints
    yield an all-zero channel.
    """
    joints = _joints(pose)
    w, h = model.image_size
    pix, valid = model.project_with_validity(joints)
    u = np.arange(w, dtype=np.float64)
    v = np.arange(h, dtype=np.float64)
    out = np.zeros((h, w, len(joints)))
    for j in range(len(joints)):
        if valid[j]:
            gu = np.exp(-((u - pix[j, 0]) ** 2) / (2 * sigma_px**2))
            gv = np.exp(-((v - pix[j, 1]) ** 2) / (2 * sigma_px**2))
            out[:, :, j] = gv[:, None] * gu[None, :]
    return out


def in_volume(points, params: VoxelGridParams) -> np.ndarray:
    p = np.asarray(points, dtype=np.float64)
    half = params.L / 2
    return np.all(np.abs(p[..., :2]) <= half, axis=-1) & (p[..., 2] >= 0) & (p[..., 2] <= params.L)


def gaussian_oracle(gt_pose, params: VoxelGridParams, sigma: float = 0.05):
    """Volume-to-heatmaps stage that ignores its inputs and renders ``gt_pose``."""

    def stage(body_volume, scene_volume):
        return render_gaussian_heatmaps(gt_pose, params, sigma)

    return stage


@dataclass
class PipelineResult:
    pose: Pose
    diagnostics: dict


def run_pipeline(model, scene_depth: DepthMap | None, params: VoxelGridParams,
                 feature_map=None, gt_pose=None, volume_to_heatmaps=None,
                 sigma: float = 0.05, beta: float = 100.0, merge=None) -> PipelineResult:
    """Features + scene depth -> volumes -> heatmaps -> soft-argmax pose.

    Exactly one of ``feature_map`` or ``gt_pose`` drives the body branch.
    With ``gt_pose`` the body features are 2D joint Gaussians at the
    projected ground truth and, unless ``volume_to_heatmaps`` is given, the
    heatmap stage is the Gaussian oracle. ``volume_to_heatmaps`` receives
    ``(body_volume, scene_volume)`` and returns (J, N, N, N) heatmaps.
    """
    if (feature_map is None) == (gt_pose is None):
        raise ValueError("pass exactly one of feature_map or gt_pose")
    if gt_pose is not None:
        feature_map = joint_feature_map(model, gt_pose)
        if volume_to_heatmaps is None:
            volume_to_heatmaps = gaussian_oracle(gt_pose, params, sigma)
    elif volume_to_heatmaps is None:
        raise ValueError("feature-map mode needs a volume_to_heatmaps stage")

    centers = voxel_centers(params)
    projected = project_voxels(model, centers)
    body = lift_features(feature_map, projected)

    if scene_depth is None:
        cloud = np.zeros((0, 3))
    else:
        cloud = depth_to_pointcloud(model, scene_depth)
    scene = voxelize_points(cloud, params)

    if merge is None:
        heatmaps = volume_to_heatmaps(body, scene)
    else:
        heatmaps = volume_to_heatmaps(aggregate_volumes(body, scene, merge), scene)
    heatmaps = _validate_heatmaps(heatmaps, params)
    names = gt_pose.names if isinstance(gt_pose, Pose) else None
    w = softmax_weights(heatmaps, beta)
    pose = _pose_from_weights(w, params, names)
    diagnostics = {
        "scene_points": int(len(cloud)),
        "occupied_voxels": int(scene.sum()),
        "valid_projected_voxels": int(projected[1].sum()),
        "peak_sharpness": [float(x) for x in w.max(axis=1)],
    }
    if gt_pose is not None:
        inside = in_volume(_joints(gt_pose), params)
        diagnostics["out_of_volume_joints"] = [int(i) for i in np.flatnonzero(~inside)]
    else:
        diagnostics["out_of_volume_joints"] = []
    return PipelineResult(pose, diagnostics)
