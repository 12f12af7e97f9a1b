"""scikit-learn style wrappers around the functional API.

None of these models learn anything; ``fit`` validates hyperparameters and
records input dimensions so the objects drop into ``Pipeline`` and
``clone`` like any other estimator.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .depth import inpaint_depth
from .optimizer import EnergyWeights, optimize_pose
from .pose import run_pipeline, soft_argmax
from .validation import check_cloud, check_depth_mask_stack, check_pose_array, depth_from_array
from .voxel import VoxelGridParams, voxelize_points


class HarmonicDepthInpainter(TransformerMixin, BaseEstimator):
    """Fill body pixels of depth maps by harmonic diffusion.

    ``X`` is a ``(n, 2, H, W)`` stack: channel 0 the masked depth (NaN or 0
    for invalid), channel 1 the body mask. ``transform`` returns ``(n, H, W)``
    depth with NaN where nothing could be filled.
    """

    def __init__(self, dilation=2, method="direct", tol=1e-6, max_sweeps=10_000, camera=None):
        self.dilation = dilation
        self.method = method
        self.tol = tol
        self.max_sweeps = max_sweeps
        self.camera = camera

    def fit(self, X, y=None):
        arr = check_depth_mask_stack(X)
        if self.method not in ("direct", "sor"):
            raise ValueError(f"unknown method {self.method!r}")
        self.image_shape_ = arr.shape[2:]
        return self

    def transform(self, X):
        check_is_fitted(self, "image_shape_")
        arr = check_depth_mask_stack(X)
        out = np.empty(arr.shape[:1] + arr.shape[2:])
        for i, (depth, seg) in enumerate(arr):
            filled = inpaint_depth(depth_from_array(depth), seg.astype(np.uint8),
                                   dilation=self.dilation, method=self.method, tol=self.tol,
                                   max_sweeps=self.max_sweeps, model=self.camera)
            out[i] = filled.as_nan()
        return out


class SceneOccupancyEncoder(TransformerMixin, BaseEstimator):
    """Point clouds -> binary ``(n, N, N, N)`` occupancy volumes."""

    def __init__(self, L=2.4, N=64, epsilon=0.04):
        self.L = L
        self.N = N
        self.epsilon = epsilon

    def fit(self, X=None, y=None):
        self.params_ = VoxelGridParams(self.L, self.N, self.epsilon)
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        return np.stack([voxelize_points(check_cloud(c), self.params_) for c in X])


class SoftArgmaxReadout(TransformerMixin, BaseEstimator):
    """Heatmaps ``(n, J, N, N, N)`` -> joint positions ``(n, J, 3)``."""

    def __init__(self, L=2.4, N=64, beta=100.0):
        self.L = L
        self.N = N
        self.beta = beta

    def fit(self, X=None, y=None):
        self.params_ = VoxelGridParams(self.L, self.N, min(0.04, self.L / 2))
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        heat = np.asarray(X, dtype=np.float64)
        if heat.ndim == 4:
            heat = heat[None]
        return np.stack([soft_argmax(h, self.params_, self.beta).joints for h in heat])


class VolumetricPoseEstimator(BaseEstimator):
    """Feature map + scene depth -> 3D pose through the voxel pipeline.

    ``X`` is a sequence of ``(feature_map, scene_depth)`` pairs, where
    ``scene_depth`` is an ``(H, W)`` array with NaN for invalid pixels or
    None. ``volume_to_heatmaps`` maps ``(body_volume, scene_volume)`` to
    ``(J, N, N, N)`` heatmaps and plays the role of the trained network.
    """

    def __init__(self, camera=None, volume_to_heatmaps=None, L=2.4, N=64, epsilon=0.04,
                 beta=100.0):
        self.camera = camera
        self.volume_to_heatmaps = volume_to_heatmaps
        self.L = L
        self.N = N
        self.epsilon = epsilon
        self.beta = beta

    def fit(self, X=None, y=None):
        if self.camera is None or self.volume_to_heatmaps is None:
            raise ValueError("camera and volume_to_heatmaps are required")
        self.params_ = VoxelGridParams(self.L, self.N, self.epsilon)
        if y is not None:
            self.n_joints_ = check_pose_array(y).shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        poses, self.diagnostics_ = [], []
        for features, depth in X:
            scene = None if depth is None else depth_from_array(depth)
            result = run_pipeline(self.camera, scene, self.params_, feature_map=features,
                                  volume_to_heatmaps=self.volume_to_heatmaps, beta=self.beta)
            poses.append(result.pose.joints)
            self.diagnostics_.append(result.diagnostics)
        return np.stack(poses)


class ContactPoseRefiner(BaseEstimator):
    """Refine initial poses against 2D detections and a scene cloud.

    ``transform`` takes a sequence of ``(init_pose, detections, cloud)``
    triples and returns refined ``(n, J, 3)`` poses; traces land in
    ``traces_``.
    """

    def __init__(self, camera=None, lambda_R=1e-3, lambda_J=1.0, lambda_C=10.0, epsilon=0.05,
                 max_iters=500, prior="relative"):
        self.camera = camera
        self.lambda_R = lambda_R
        self.lambda_J = lambda_J
        self.lambda_C = lambda_C
        self.epsilon = epsilon
        self.max_iters = max_iters
        self.prior = prior

    def fit(self, X=None, y=None):
        if self.camera is None:
            raise ValueError("camera is required")
        self.weights_ = EnergyWeights(self.lambda_R, self.lambda_J, self.lambda_C, self.epsilon)
        return self

    def transform(self, X):
        check_is_fitted(self, "weights_")
        out, self.traces_ = [], []
        for init, detections, cloud in X:
            init = check_pose_array(init)[0]
            trace = optimize_pose(init, detections, check_cloud(cloud), self.camera,
                                  self.weights_, self.max_iters, prior=self.prior)
            out.append(trace.pose.joints)
            self.traces_.append(trace)
        return np.stack(out)

    def fit_transform(self, X, y=None):
        return self.fit(X, y).transform(X)
