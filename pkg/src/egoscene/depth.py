"""Depth maps, body masking, harmonic inpainting, and depth losses/metrics.

Depth values are ray distances in meters (see :mod:`egoscene.camera`).
Invalid pixels carry ``valid=False``; their stored value is 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse.linalg import splu

from . import io
from .errors import EmptyBoundary, NonPositiveGT, NoOverlap, ShapeMismatch


@dataclass(frozen=True, eq=False)
class DepthMap:
    values: np.ndarray
    valid: np.ndarray

    def __init__(self, values, valid=None):
        vals = np.array(values, dtype=np.float64)
        if vals.ndim != 2:
            raise ShapeMismatch(f"depth map must be 2-D, got shape {vals.shape}")
        ok = np.isfinite(vals) & (vals > 0)
        if valid is not None:
            valid = np.asarray(valid, dtype=bool)
            if valid.shape != vals.shape:
                raise ShapeMismatch("validity mask shape differs from depth shape")
            ok &= valid
        vals[~ok] = 0.0
        vals.setflags(write=False)
        ok.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "valid", ok)

    @property
    def shape(self):
        return self.values.shape

    def __eq__(self, other):
        return (
            isinstance(other, DepthMap)
            and self.shape == other.shape
            and np.array_equal(self.valid, other.valid)
            and np.array_equal(self.values, other.values)
        )

    def as_nan(self) -> np.ndarray:
        out = self.values.copy()
        out[~self.valid] = np.nan
        return out

    @classmethod
    def invalid(cls, shape):
        return cls(np.zeros(shape))


def as_segmask(seg, shape=None) -> np.ndarray:
    """Validate a body mask and return it as a boolean array."""
    s = np.asarray(seg)
    if s.ndim != 2:
        raise ShapeMismatch("segmentation mask must be 2-D")
    if shape is not None and s.shape != tuple(shape):
        raise ShapeMismatch(f"mask shape {s.shape} differs from depth shape {tuple(shape)}")
    if not np.all((s == 0) | (s == 1)):
        raise ValueError("segmentation mask must be binary")
    return s.astype(bool)


def depth_to_pointcloud(model, depth: DepthMap) -> np.ndarray:
    """One camera-frame point per valid pixel, in row-major pixel order."""
    if depth.shape != (model.image_size[1], model.image_size[0]):
        raise ShapeMismatch("depth map size differs from the camera image size")
    grid = model.pixel_grid()
    px = grid[depth.valid]
    if len(px) == 0:
        return np.zeros((0, 3))
    dirs, inside = model.pixel_rays(px)
    return dirs[inside] * depth.values[depth.valid][inside][:, None]


def mask_depth(depth_with_body: DepthMap, seg) -> DepthMap:
    """Invalidate body pixels; the background is left untouched."""
    s = as_segmask(seg, depth_with_body.shape)
    return DepthMap(depth_with_body.values, depth_with_body.valid & ~s)


def dilate_mask(seg, pixels: int) -> np.ndarray:
    s = np.asarray(seg, dtype=bool)
    if pixels <= 0:
        return s.copy()
    return ndimage.binary_dilation(s, structure=ndimage.generate_binary_structure(2, 1),
                                   iterations=pixels)


_NEIGHBORS = ((-1, 0), (1, 0), (0, -1), (0, 1))


def _shift(a, dy, dx, fill):
    out = np.full_like(a, fill)
    h, w = a.shape
    ys = slice(max(dy, 0), h + min(dy, 0))
    yd = slice(max(-dy, 0), h + min(-dy, 0))
    xs = slice(max(dx, 0), w + min(dx, 0))
    xd = slice(max(-dx, 0), w + min(-dx, 0))
    out[yd, xd] = a[ys, xs]
    return out


def inpaint_depth(masked: DepthMap, seg, dilation: int = 2, method: str = "direct",
                  tol: float = 1e-6, max_sweeps: int = 10_000, omega: float = 1.9,
                  model=None) -> DepthMap:
    """Fill body pixels by discrete harmonic extension of the valid depth.

    The region to fill is the body mask dilated by ``dilation`` pixels
    (restricted to pixels that are either in the mask or valid, so pixels
    that never had a value, such as ones outside the lens circle, stay
    invalid). Valid pixels outside the region are Dirichlet data; invalid
    ones act as a reflecting boundary. Regions not connected to any data
    stay invalid.

    ``method="direct"`` solves the 5-point Laplace system with a sparse LU
    factorization; ``method="sor"`` runs red-black over-relaxed sweeps until
    the max residual drops below ``tol``. Both converge to the same field.

    With a camera ``model`` the three coordinates of the back-projected
    points are diffused instead of the depth, and depth is read back by
    intersecting each pixel's ray with the local tangent plane of the
    filled points. A planar background is then recovered exactly, which
    plain depth diffusion does not do under fisheye distortion.
    """
    if model is not None:
        return _inpaint_points(masked, seg, model, dilation=dilation, method=method, tol=tol,
                               max_sweeps=max_sweeps, omega=omega)
    known, unknown = _fill_sets(masked, seg, dilation)
    (values,) = _harmonic([masked.values], known, unknown, method, tol, max_sweeps, omega)
    return DepthMap(values, known | unknown)


def _fill_sets(masked, seg, dilation):
    """``(known, unknown)`` pixel sets for the Laplace problem."""
    s = as_segmask(seg, masked.shape)
    if not masked.valid.any():
        raise EmptyBoundary("depth map has no valid pixel to diffuse from")
    region = dilate_mask(s, dilation) & (s | masked.valid)
    known = masked.valid & ~region
    if not known.any():
        raise EmptyBoundary("mask leaves no valid boundary pixel")

    # drop connected pieces of the region that touch no data
    labels, count = ndimage.label(region)
    touching = np.zeros(count + 1, dtype=bool)
    for dy, dx in _NEIGHBORS:
        nb_known = _shift(known, dy, dx, False)
        touching[np.unique(labels[region & nb_known])] = True
    touching[0] = False
    return known, region & touching[labels]


def _harmonic(channels, known, unknown, method, tol, max_sweeps, omega):
    """Harmonic fill of every channel over the same pixel sets."""
    out = [np.where(known, c, 0.0) for c in channels]
    if not unknown.any():
        return out
    if method == "direct":
        filled = _solve_direct(out, known, unknown)
        for c, f in zip(out, filled.T):
            c[unknown] = f
        return out
    if method == "sor":
        return [_solve_sor(c, known, unknown, tol, max_sweeps, omega) for c in out]
    raise ValueError(f"unknown inpainting method {method!r}")


def _inpaint_points(masked, seg, model, dilation, method, tol, max_sweeps, omega):
    if masked.shape != (model.image_size[1], model.image_size[0]):
        raise ShapeMismatch("depth map size differs from the camera image size")
    dirs, _ = model.pixel_rays(model.pixel_grid())
    known, unknown = _fill_sets(masked, seg, dilation)
    coords = [masked.values * dirs[..., k] for k in range(3)]
    points = np.stack(_harmonic(coords, known, unknown, method, tol, max_sweeps, omega), axis=-1)
    valid = known | unknown
    depth = _ray_readback(points, dirs, valid)
    valid = valid & np.isfinite(depth) & (depth > 0)
    depth = np.where(known, masked.values, depth)
    return DepthMap(np.where(valid, depth, 0.0), valid)


def _ray_readback(points, dirs, valid):
    """Depth along each pixel ray from a filled point field.

    The filled points are affine combinations of boundary points but do not
    sit on their own pixel's ray. Intersecting the ray with the local
    tangent plane of the point field (normal from finite differences) makes
    the readback exact wherever the field is planar; where the tangent
    plane is degenerate or grazing, the projection onto the ray is used.
    """
    pts = np.where(valid[..., None], points, np.nan)
    du = np.gradient(pts, axis=1)
    dv = np.gradient(pts, axis=0)
    # one-sided differences where a centered one touches an invalid pixel
    for axis, d in ((1, du), (0, dv)):
        fwd = np.diff(pts, axis=axis, append=np.nan)
        bwd = np.diff(pts, axis=axis, prepend=np.nan)
        d[:] = np.where(np.isfinite(d), d, np.where(np.isfinite(fwd), fwd, bwd))
    normal = np.cross(du, dv)
    nn = np.linalg.norm(normal, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        normal = normal / nn[..., None]
        denom = np.sum(normal * dirs, axis=-1)
        t_plane = np.sum(normal * points, axis=-1) / denom
    t_proj = np.sum(points * dirs, axis=-1)
    good = np.isfinite(t_plane) & (np.abs(denom) > 0.2) & (t_plane > 0)
    return np.where(good, t_plane, t_proj)


def _solve_direct(channels, known, unknown):
    """Solve the Laplace system once per channel with a shared factorization."""
    h, w = channels[0].shape
    idx = -np.ones((h, w), dtype=np.int64)
    n = int(unknown.sum())
    idx[unknown] = np.arange(n)
    rows, cols, data = [], [], []
    diag = np.zeros(n)
    rhs = np.zeros((n, len(channels)))
    ys, xs = np.nonzero(unknown)
    me = idx[ys, xs]
    for dy, dx in _NEIGHBORS:
        ny, nx = ys + dy, xs + dx
        ok = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
        ny, nx, m = ny[ok], nx[ok], me[ok]
        kn = known[ny, nx]
        un = unknown[ny, nx]
        np.add.at(diag, m[kn | un], 1.0)
        for c, values in enumerate(channels):
            np.add.at(rhs[:, c], m[kn], values[ny[kn], nx[kn]])
        rows.append(m[un])
        cols.append(idx[ny[un], nx[un]])
        data.append(-np.ones(int(un.sum())))
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    data.append(diag)
    a = sparse.csc_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return splu(a).solve(rhs)


def _solve_sor(values, known, unknown, tol, max_sweeps, omega):
    h, w = values.shape
    active = known | unknown
    deg = np.zeros((h, w))
    for dy, dx in _NEIGHBORS:
        deg += _shift(active, dy, dx, False)
    x = values.copy()
    x[unknown] = values[known].mean()
    x[~active] = 0.0
    yy, xx = np.mgrid[0:h, 0:w]
    colors = [unknown & ((yy + xx) % 2 == c) for c in (0, 1)]
    for _ in range(max_sweeps):
        for color in colors:
            nb = sum(_shift(x, dy, dx, 0.0) for dy, dx in _NEIGHBORS)
            target = nb[color] / deg[color]
            x[color] += omega * (target - x[color])
        nb = sum(_shift(x, dy, dx, 0.0) for dy, dx in _NEIGHBORS)
        resid = np.abs(nb[unknown] / deg[unknown] - x[unknown]).max()
        if resid < tol:
            break
    return x


# -- losses and metrics --------------------------------------------------

def _joint(pred: DepthMap, gt: DepthMap, region=None):
    if pred.shape != gt.shape:
        raise ShapeMismatch(f"depth shapes differ: {pred.shape} vs {gt.shape}")
    sel = pred.valid & gt.valid
    if region is not None:
        sel &= as_segmask(region, pred.shape)
    if not sel.any():
        raise NoOverlap("no jointly valid pixels")
    return sel


def scene_loss(pred: DepthMap, gt: DepthMap) -> float:
    """Mean squared depth difference over jointly valid pixels."""
    sel = _joint(pred, gt)
    diff = pred.values[sel] - gt.values[sel]
    return float(np.mean(diff * diff))


def consistency_loss(pred_scene: DepthMap, pred_body: DepthMap, seg) -> float:
    """Mean squared difference between scene and with-body depth off the body."""
    s = as_segmask(seg, pred_scene.shape)
    sel = _joint(pred_scene, pred_body, ~s)
    diff = pred_scene.values[sel] - pred_body.values[sel]
    return float(np.mean(diff * diff))


def combined_loss(pred_scene, gt_scene, pred_body, seg, lambda_s=1.0, lambda_c=1.0) -> float:
    return lambda_s * scene_loss(pred_scene, gt_scene) + lambda_c * consistency_loss(
        pred_scene, pred_body, seg
    )


def depth_metrics(pred: DepthMap, gt: DepthMap, region=None):
    """``(abs_rel, rmse)`` over jointly valid pixels, optionally within ``region``."""
    sel = _joint(pred, gt, region)
    d = gt.values[sel]
    if np.any(d <= 0):
        raise NonPositiveGT("ground-truth depth must be positive")
    diff = pred.values[sel] - d
    return float(np.mean(np.abs(diff) / d)), float(np.sqrt(np.mean(diff * diff)))


# -- PGM interchange -----------------------------------------------------

def write_depth_pgm(path, depth: DepthMap) -> None:
    """16-bit PGM in millimeters; 0 marks invalid pixels."""
    mm = np.rint(depth.values * 1000.0)
    mm = np.clip(mm, 1, 65535)
    mm[~depth.valid] = 0
    io.write_pgm(path, mm.astype(np.uint16), 65535)


def read_depth_pgm(path) -> DepthMap:
    mm = io.read_pgm(path)
    return DepthMap(mm / 1000.0, mm > 0)


def write_mask_pgm(path, seg) -> None:
    io.write_pgm(path, np.asarray(seg, dtype=np.uint8), 1)


def read_mask_pgm(path) -> np.ndarray:
    return as_segmask(io.read_pgm(path))
