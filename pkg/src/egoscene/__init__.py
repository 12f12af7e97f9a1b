"""Egocentric body pose with scene geometry: fisheye camera, voxel volumes,
depth inpainting, soft-argmax pose readout, evaluation metrics, contact
refinement and a synthetic scene generator."""

from .camera import FisheyeModel, equidistant, load_calibration, save_calibration
from .depth import DepthMap, depth_metrics, depth_to_pointcloud, inpaint_depth, mask_depth
from .errors import EgoSceneError
from .estimators import (
    ContactPoseRefiner,
    HarmonicDepthInpainter,
    SceneOccupancyEncoder,
    SoftArgmaxReadout,
    VolumetricPoseEstimator,
)
from .metrics import ba_mpjpe, contact_rate, mpjpe, pa_mpjpe, penetration_free_rate, procrustes_align
from .optimizer import EnergyWeights, optimize_pose
from .pose import JOINT_NAMES, Pose, run_pipeline, soft_argmax
from .voxel import VoxelGridParams, voxel_centers, voxelize_points

__version__ = "0.1.0"
