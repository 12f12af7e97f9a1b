"""Scene-contact pose refinement by gradient descent on joint positions.

Total energy::

    E(P) = lambda_R * E_R + lambda_J * E_J + lambda_C * E_C

E_R is confidence-weighted pixel reprojection error against 2D detections,
E_J keeps the pose close to its initialization, and E_C pulls every joint
that is already within ``epsilon`` of the scene cloud onto it (sum of
squared nearest distances; joints further away contribute nothing).

As written, E_C jumps from epsilon**2 down to 0 when a joint leaves the
margin, which would act as a wall keeping outside joints from ever
entering it. The optimizer therefore minimizes the capped form
``sum(min(d_n, epsilon)**2)``: it differs from E_C by a constant epsilon**2
per joint outside the margin, has the same gradient everywhere off the
shell d_n = epsilon, and is continuous there.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyScene, InvalidParams, NonFiniteEnergy, ShapeMismatch
from .pose import Pose
from .voxel import SpatialHash

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnergyWeights:
    lambda_R: float = 1e-3
    lambda_J: float = 1.0
    lambda_C: float = 10.0
    epsilon: float = 0.05

    def __post_init__(self):
        if min(self.lambda_R, self.lambda_J, self.lambda_C) < 0:
            raise InvalidParams("energy weights must be non-negative")
        if not self.epsilon > 0:
            raise InvalidParams("contact epsilon must be positive")

    def scaled(self, factor: float) -> "EnergyWeights":
        return EnergyWeights(self.lambda_R * factor, self.lambda_J * factor,
                             self.lambda_C * factor, self.epsilon)


@dataclass
class OptimizationTrace:
    energies: list = field(default_factory=list)
    terms: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)
    pose: Pose | None = None
    converged: bool = False
    stop_reason: str = ""

    @property
    def iterations(self) -> int:
        """Number of accepted steps."""
        return max(len(self.energies) - 1, 0)

    def rows(self):
        for i, (e, t, g) in enumerate(zip(self.energies, self.terms, self.grad_norms)):
            yield {"iteration": i, "energy": e, "E_R": t[0], "E_J": t[1], "E_C_capped": t[2],
                   "grad_norm": g}


def _joints(pose):
    return pose.joints if isinstance(pose, Pose) else np.asarray(pose, dtype=np.float64)


def _grid(cloud, epsilon):
    if isinstance(cloud, SpatialHash):
        grid = cloud
        if grid.cell_size < epsilon:
            grid = SpatialHash(grid.points, epsilon)
    else:
        pts = np.asarray(cloud, dtype=np.float64).reshape(-1, 3)
        grid = SpatialHash(pts, epsilon)
    if len(grid) == 0:
        raise EmptyScene("scene point cloud is empty")
    return grid


def contact_energy(pose, cloud, epsilon: float, return_grad: bool = False):
    """Sum of squared nearest-point distances over joints within ``epsilon``."""
    p = _joints(pose)
    grid = _grid(cloud, epsilon)
    dist, idx = grid.nearest_within(p, epsilon)
    active = idx >= 0
    energy = float(np.sum(dist[active] ** 2))
    if not return_grad:
        return energy
    grad = np.zeros_like(p)
    grad[active] = 2.0 * (p[active] - grid.points[idx[active]])
    return energy, grad


def capped_contact_energy(pose, cloud, epsilon: float, return_grad: bool = False):
    """``sum(min(d_n, epsilon)**2)``: continuous variant minimized by the optimizer."""
    p = _joints(pose)
    grid = _grid(cloud, epsilon)
    dist, idx = grid.nearest_within(p, epsilon)
    active = idx >= 0
    energy = float(np.sum(dist[active] ** 2) + epsilon**2 * np.sum(~active))
    if not return_grad:
        return energy
    grad = np.zeros_like(p)
    grad[active] = 2.0 * (p[active] - grid.points[idx[active]])
    return energy, grad


def _fov_pixels(model, p):
    """Projection with the incidence angle clamped to the FOV edge."""
    x, y, z = p[:, 0], p[:, 1], p[:, 2]
    rho = np.hypot(x, y)
    theta = np.minimum(np.arctan2(rho, z), model.max_theta)
    r = model.radius(theta)
    with np.errstate(invalid="ignore", divide="ignore"):
        ux = np.where(rho > 0, x / np.where(rho > 0, rho, 1.0), 0.0)
        uy = np.where(rho > 0, y / np.where(rho > 0, rho, 1.0), 0.0)
    return np.stack([model.center[0] + r * ux, model.center[1] + r * uy], axis=-1)


def reprojection_energy(pose, detections, model, confidence=None, return_grad: bool = False):
    """Confidence-weighted squared pixel error of the projected joints.

    Joints beyond the FOV project onto the FOV boundary circle, so the
    penalty stays continuous across the FOV edge. A joint at the camera
    center is skipped.
    """
    p = _joints(pose)
    det = np.asarray(detections, dtype=np.float64).reshape(-1, 2)
    if len(det) != len(p):
        raise ShapeMismatch(f"{len(det)} detections for {len(p)} joints")
    conf = np.ones(len(p)) if confidence is None else np.asarray(confidence, dtype=np.float64)
    usable = np.any(p != 0, axis=1)
    pix = _fov_pixels(model, p)
    res = np.where(usable[:, None], pix - det, 0.0)
    energy = float(np.sum(conf * np.sum(res * res, axis=1)))
    if not return_grad:
        return energy
    jac = model.projection_jacobian(p)
    grad = 2.0 * conf[:, None] * np.einsum("ni,nij->nj", res, jac)
    return energy, grad


def pose_prior_energy(pose, init, return_grad: bool = False):
    """Squared deviation of every joint from its initial position."""
    p, q = _joints(pose), _joints(init)
    if p.shape != q.shape:
        raise ShapeMismatch(f"pose shapes differ: {p.shape} vs {q.shape}")
    diff = p - q
    energy = float(np.sum(diff * diff))
    if not return_grad:
        return energy
    return energy, 2.0 * diff


class PoseEnergy:
    """Total energy and gradient for a fixed problem instance.

    ``prior="relative"`` applies the pose prior to root-relative joint
    positions, leaving the global offset to the reprojection and contact
    terms; ``prior="absolute"`` anchors every joint in place.
    """

    def __init__(self, init, detections, cloud, model, weights: EnergyWeights,
                 confidence=None, prior: str = "relative", root: int = 0):
        if prior not in ("relative", "absolute"):
            raise InvalidParams(f"unknown prior mode {prior!r}")
        self.init = _joints(init).copy()
        self.detections = np.asarray(detections, dtype=np.float64).reshape(-1, 2)
        self.confidence = None if confidence is None else np.asarray(confidence, dtype=np.float64)
        self.model = model
        self.weights = weights
        self.prior = prior
        self.root = root
        self.grid = _grid(cloud, weights.epsilon)

    def _prior(self, p):
        if self.prior == "absolute":
            return pose_prior_energy(p, self.init, return_grad=True)
        rel_p = p - p[self.root]
        rel_i = self.init - self.init[self.root]
        energy, g = pose_prior_energy(rel_p, rel_i, return_grad=True)
        grad = g.copy()
        grad[self.root] -= g.sum(axis=0)
        return energy, grad

    def terms(self, p):
        e_r, g_r = reprojection_energy(p, self.detections, self.model, self.confidence, True)
        e_j, g_j = self._prior(p)
        e_c, g_c = capped_contact_energy(p, self.grid, self.weights.epsilon, True)
        return (e_r, e_j, e_c), (g_r, g_j, g_c)

    def __call__(self, p):
        w = self.weights
        (e_r, e_j, e_c), (g_r, g_j, g_c) = self.terms(np.asarray(p, dtype=np.float64))
        energy = w.lambda_R * e_r + w.lambda_J * e_j + w.lambda_C * e_c
        grad = w.lambda_R * g_r + w.lambda_J * g_j + w.lambda_C * g_c
        return energy, grad, (e_r, e_j, e_c)


def optimize_pose(init, detections, cloud, model, weights: EnergyWeights = EnergyWeights(),
                  max_iters: int = 500, confidence=None, prior: str = "relative",
                  grad_tol: float = 1e-8, initial_step: float = 0.01) -> OptimizationTrace:
    """Monotone gradient descent with Barzilai-Borwein trial steps.

    Each trial step is shrunk by backtracking until the Armijo condition
    holds, so every accepted step strictly lowers the energy. The first
    trial moves ``initial_step`` meters along the negative gradient.
    """
    if max_iters < 1:
        raise InvalidParams("max_iters must be at least 1")
    names = init.names if isinstance(init, Pose) else None
    energy_fn = PoseEnergy(init, detections, cloud, model, weights, confidence, prior)
    x = energy_fn.init.copy()
    e, g, t = energy_fn(x)
    trace = OptimizationTrace()

    def record(e, t, g):
        trace.energies.append(float(e))
        trace.terms.append(tuple(float(v) for v in t))
        trace.grad_norms.append(float(np.linalg.norm(g)))

    def finish(reason, converged):
        trace.pose = Pose(x, names) if names is not None else Pose(x)
        trace.converged = bool(converged)
        trace.stop_reason = reason
        return trace

    if not np.isfinite(e):
        record(e, t, g)
        raise NonFiniteEnergy("initial energy is not finite", finish("non-finite", False))
    record(e, t, g)

    prev_x = prev_g = None
    for _ in range(max_iters):
        gnorm = np.linalg.norm(g)
        if gnorm < grad_tol:
            return finish("gradient", True)
        alpha = initial_step / gnorm
        if prev_x is not None:
            s = (x - prev_x).ravel()
            y = (g - prev_g).ravel()
            sy = s @ y
            if sy > 0:
                alpha = (s @ s) / sy
        accepted = False
        for _ in range(60):
            x_new = x - alpha * g
            e_new, g_new, t_new = energy_fn(x_new)
            if not np.isfinite(e_new):
                record(e_new, t_new, g_new)
                raise NonFiniteEnergy("energy became non-finite", finish("non-finite", False))
            if e_new < e and e_new <= e - 1e-4 * alpha * gnorm * gnorm:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            log.debug("line search failed at energy %.6g", e)
            return finish("line-search", gnorm < grad_tol)
        prev_x, prev_g = x, g
        x, e, g, t = x_new, e_new, g_new, t_new
        record(e, t, g)
    return finish("max-iters", np.linalg.norm(g) < grad_tol)
