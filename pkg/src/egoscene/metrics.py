"""Pose accuracy (MPJPE family) and physical plausibility metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConfiguration, EmptyScene, InvalidTemplate, ShapeMismatch
from .pose import BONE_LENGTHS, PARENTS, Pose
from .voxel import SpatialHash


def _arr(pose):
    return pose.joints if isinstance(pose, Pose) else np.asarray(pose, dtype=np.float64)


def _pair(pred, gt):
    a, b = _arr(pred), _arr(gt)
    if a.shape != b.shape or a.ndim != 2 or a.shape[1] != 3:
        raise ShapeMismatch(f"pose shapes differ: {a.shape} vs {b.shape}")
    return a, b


@dataclass(frozen=True)
class SimilarityTransform:
    scale: float
    rotation: np.ndarray
    translation: np.ndarray

    def apply(self, points):
        p = _arr(points)
        out = self.scale * p @ self.rotation.T + self.translation
        return points.with_joints(out) if isinstance(points, Pose) else out


@dataclass(frozen=True)
class BoneTemplate:
    parents: tuple
    lengths: tuple

    def __post_init__(self):
        parents, lengths = tuple(self.parents), tuple(float(x) for x in self.lengths)
        if len(parents) != len(lengths):
            raise InvalidTemplate("parents and lengths differ in size")
        roots = [i for i, p in enumerate(parents) if p < 0]
        if len(roots) != 1:
            raise InvalidTemplate("template needs exactly one root")
        for i, p in enumerate(parents):
            if p >= len(parents):
                raise InvalidTemplate(f"joint {i} has out-of-range parent {p}")
            if p >= 0 and not lengths[i] > 0:
                raise InvalidTemplate(f"bone to joint {i} needs positive length")
        # every joint must reach the root without revisiting a joint
        for i in range(len(parents)):
            seen, j = set(), i
            while parents[j] >= 0:
                if j in seen:
                    raise InvalidTemplate("parent table contains a cycle")
                seen.add(j)
                j = parents[j]
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "lengths", lengths)

    @property
    def root(self) -> int:
        return self.parents.index(min(self.parents))

    def order(self):
        """Joints sorted so every parent precedes its children."""
        depth = []
        for i in range(len(self.parents)):
            d, j = 0, i
            while self.parents[j] >= 0:
                j = self.parents[j]
                d += 1
            depth.append(d)
        return sorted(range(len(self.parents)), key=lambda i: (depth[i], i))


DEFAULT_TEMPLATE = BoneTemplate(PARENTS, BONE_LENGTHS)


def mpjpe(pred, gt) -> float:
    """Mean per-joint position error in millimeters."""
    a, b = _pair(pred, gt)
    return float(np.mean(np.linalg.norm(a - b, axis=1)) * 1000.0)


def procrustes_align(pred, gt) -> SimilarityTransform:
    """Least-squares similarity mapping ``pred`` onto ``gt`` (no reflections)."""
    x, y = _pair(pred, gt)
    if len(x) < 3:
        raise DegenerateConfiguration("need at least 3 joints")
    mx, my = x.mean(axis=0), y.mean(axis=0)
    xc, yc = x - mx, y - my
    sv = np.linalg.svd(xc, compute_uv=False)
    if sv[0] <= 1e-12 or sv[1] <= 1e-9 * sv[0]:
        raise DegenerateConfiguration("joints are coincident or collinear")
    var_x = np.sum(xc * xc) / len(x)
    cov = yc.T @ xc / len(x)
    u, s, vt = np.linalg.svd(cov)
    d = np.ones(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        d[2] = -1.0
    rot = (u * d) @ vt
    scale = float(np.sum(s * d) / var_x)
    trans = my - scale * rot @ mx
    return SimilarityTransform(scale, rot, trans)


def pa_mpjpe(pred, gt) -> float:
    a, b = _pair(pred, gt)
    return mpjpe(procrustes_align(a, b).apply(a), b)


def repose_to_template(pose, template: BoneTemplate = DEFAULT_TEMPLATE) -> np.ndarray:
    """Rescale every bone to its template length, walking out from the root."""
    p = _arr(pose)
    if len(p) != len(template.parents):
        raise InvalidTemplate(f"template has {len(template.parents)} joints, pose has {len(p)}")
    out = np.empty_like(p)
    for j in template.order():
        parent = template.parents[j]
        if parent < 0:
            out[j] = p[j]
            continue
        bone = p[j] - p[parent]
        norm = np.linalg.norm(bone)
        if norm == 0:
            raise DegenerateConfiguration(f"zero-length bone at joint {j}")
        out[j] = out[parent] + bone * (template.lengths[j] / norm)
    return out


def ba_mpjpe(pred, gt, template: BoneTemplate = DEFAULT_TEMPLATE) -> float:
    """PA-MPJPE after normalizing both poses to the template bone lengths."""
    a, b = _pair(pred, gt)
    return pa_mpjpe(repose_to_template(a, template), repose_to_template(b, template))


def _cloud(scene):
    pts = np.asarray(scene, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        raise EmptyScene("scene point cloud is empty")
    return pts


def in_contact(poses, scene, threshold: float = 0.05) -> np.ndarray:
    """Per pose: does any joint lie strictly closer than ``threshold`` to the cloud."""
    grid = scene if isinstance(scene, SpatialHash) else SpatialHash(_cloud(scene), threshold)
    if len(grid) == 0:
        raise EmptyScene("scene point cloud is empty")
    if grid.cell_size < threshold:
        grid = SpatialHash(grid.points, threshold)
    poses = list(poses)
    if not poses:
        return np.zeros(0, dtype=bool)
    stacked = np.stack([_arr(p) for p in poses])
    hit = grid.any_within(stacked.reshape(-1, 3), threshold)
    return hit.reshape(len(poses), -1).any(axis=1)


def contact_rate(poses, scene, threshold: float = 0.05) -> float:
    """Fraction of poses in contact with the scene (the rest are floating)."""
    flags = in_contact(poses, scene, threshold)
    return float(flags.mean()) if len(flags) else 0.0


def penetrating_joints(pose, scene_depth, model, margin: float = 0.05):
    """Per joint: +1 penetrating, 0 clear, -1 skipped (out of FOV or no surface).

    A joint penetrates when its ray distance exceeds the scene depth at its
    projected (nearest) pixel by more than ``margin``.
    """
    p = _arr(pose)
    pix, valid = model.project_with_validity(p)
    status = np.full(len(p), -1, dtype=np.int64)
    w, h = model.image_size
    for j in np.flatnonzero(valid):
        u, v = int(np.rint(pix[j, 0])), int(np.rint(pix[j, 1]))
        if not (0 <= u < w and 0 <= v < h) or not scene_depth.valid[v, u]:
            continue
        status[j] = int(np.linalg.norm(p[j]) > scene_depth.values[v, u] + margin)
    return status


def penetration_free_rate(poses, scene_depth, model, margin: float = 0.05,
                          return_diagnostics: bool = False):
    poses = list(poses)
    free, skipped = 0, 0
    for pose in poses:
        status = penetrating_joints(pose, scene_depth, model, margin)
        skipped += int(np.sum(status < 0))
        free += int(not np.any(status > 0))
    rate = free / len(poses) if poses else 0.0
    if return_diagnostics:
        return rate, {"skipped_joints": skipped, "poses": len(poses)}
    return rate
