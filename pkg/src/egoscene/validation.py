"""Input checks shared by the estimator wrappers."""

import numpy as np

from .depth import DepthMap
from .errors import ShapeMismatch


def check_depth_mask_stack(X):
    """Accept ``(2, H, W)`` or ``(n, 2, H, W)``: channel 0 depth (NaN/0 invalid), channel 1 mask."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 3:
        arr = arr[None]
    if arr.ndim != 4 or arr.shape[1] != 2:
        raise ShapeMismatch(f"expected (n, 2, H, W) depth/mask stack, got {arr.shape}")
    masks = arr[:, 1]
    if not np.all((masks == 0) | (masks == 1)):
        raise ValueError("mask channel must be binary")
    return arr


def depth_from_array(values) -> DepthMap:
    v = np.asarray(values, dtype=np.float64)
    return DepthMap(np.nan_to_num(v, nan=0.0), np.isfinite(v) & (v > 0))


def check_pose_array(X, n_joints=None):
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ShapeMismatch(f"expected (n, J, 3) poses, got {arr.shape}")
    if n_joints is not None and arr.shape[1] != n_joints:
        raise ShapeMismatch(f"expected {n_joints} joints, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("poses contain non-finite values")
    return arr


def check_cloud(cloud):
    pts = np.asarray(cloud, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ShapeMismatch(f"expected (M, 3) point cloud, got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("point cloud contains non-finite values")
    return pts
