"""Voxel space under the head-mounted camera.

The L x L x L box hangs below the camera: the camera sits at the center of
the box's top face, so the box spans x, y in [-L/2, L/2] and z in [0, L].
Voxel (x, y, z) is represented by the point ``(x*L/N - L/2, y*L/N - L/2,
z*L/N)``. Note this puts index 0 on the box face instead of half a cell
inside it; the asymmetry is kept on purpose so voxel coordinates match the
reference formula exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams, ShapeMismatch

_MAX_PAIRS = 4_000_000


@dataclass(frozen=True)
class VoxelGridParams:
    L: float = 2.4
    N: int = 64
    epsilon: float = 0.04

    def __post_init__(self):
        if not self.L > 0:
            raise InvalidParams(f"L must be positive, got {self.L}")
        if int(self.N) != self.N or self.N < 2:
            raise InvalidParams(f"N must be an integer >= 2, got {self.N}")
        if not 0 < self.epsilon < self.L:
            raise InvalidParams(f"epsilon must lie in (0, L), got {self.epsilon}")
        object.__setattr__(self, "N", int(self.N))

    @property
    def cell(self) -> float:
        return self.L / self.N


def voxel_centers(params: VoxelGridParams) -> np.ndarray:
    """``(N, N, N, 3)`` voxel coordinates in the camera frame."""
    n, length = params.N, params.L
    idx = np.arange(n, dtype=np.float64)
    xy = idx * length / n - length / 2
    z = idx * length / n
    gx, gy, gz = np.meshgrid(xy, xy, z, indexing="ij")
    return np.stack([gx, gy, gz], axis=-1)


def index_to_center(index, params: VoxelGridParams) -> np.ndarray:
    x, y, z = (float(i) for i in index)
    length, n = params.L, params.N
    return np.array([x * length / n - length / 2, y * length / n - length / 2, z * length / n])


def project_voxels(model, centers):
    """Project voxel coordinates; returns ``(pixels[N,N,N,2], valid[N,N,N])``."""
    return model.project_with_validity(centers)


def lift_features(features, projected) -> np.ndarray:
    """Fill a feature volume by bilinear sampling of ``features`` (H, W, K).

    ``projected`` is the ``(pixels, valid)`` pair from :func:`project_voxels`.
    Pixels within half a pixel outside the image clamp to the edge; anything
    further out, and invalid voxels, get zeros.
    """
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim == 2:
        feats = feats[..., None]
    if feats.ndim != 3:
        raise ShapeMismatch(f"feature map must be (H, W, K), got {feats.shape}")
    if not np.all(np.isfinite(feats)):
        raise ValueError("feature map contains non-finite values")
    pixels, valid = projected
    pixels = np.asarray(pixels, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool)
    if pixels.shape[:-1] != valid.shape or pixels.shape[-1] != 2:
        raise ShapeMismatch("projected pixels and validity flags disagree in shape")
    h, w, k = feats.shape

    out = np.zeros(valid.shape + (k,))
    u = pixels[..., 0]
    v = pixels[..., 1]
    with np.errstate(invalid="ignore"):
        inside = valid & (u >= -0.5) & (u <= w - 0.5) & (v >= -0.5) & (v <= h - 0.5)
    uu = np.clip(u[inside], 0, w - 1)
    vv = np.clip(v[inside], 0, h - 1)
    u0 = np.minimum(np.floor(uu).astype(np.intp), max(w - 2, 0))
    v0 = np.minimum(np.floor(vv).astype(np.intp), max(h - 2, 0))
    u1 = np.minimum(u0 + 1, w - 1)
    v1 = np.minimum(v0 + 1, h - 1)
    fu = (uu - u0)[:, None]
    fv = (vv - v0)[:, None]
    top = feats[v0, u0] * (1 - fu) + feats[v0, u1] * fu
    bottom = feats[v1, u0] * (1 - fu) + feats[v1, u1] * fu
    out[inside] = top * (1 - fv) + bottom * fv
    return out


class SpatialHash:
    """Uniform grid bucketing of a point cloud for fixed-radius queries.

    Points are sorted by cell key; a cell's points are a contiguous slice.
    Queries scan the 27 cells around the query cell, which is exact for
    radii up to ``cell_size``.
    """

    def __init__(self, points, cell_size: float):
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if not cell_size > 0:
            raise InvalidParams("cell_size must be positive")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite values")
        self.points = pts
        self.cell_size = float(cell_size)
        if len(pts):
            cells = np.floor(pts / self.cell_size).astype(np.int64)
            self._lo = cells.min(axis=0) - 1
            self._dims = cells.max(axis=0) - self._lo + 2
            keys = self._encode(cells)
        else:
            self._lo = np.zeros(3, dtype=np.int64)
            self._dims = np.ones(3, dtype=np.int64)
            keys = np.zeros(0, dtype=np.int64)
        order = np.argsort(keys, kind="stable")
        self._order = order
        self._sorted = pts[order]
        self._keys, self._starts, self._counts = np.unique(
            keys[order], return_index=True, return_counts=True
        )

    def __len__(self):
        return len(self.points)

    def _encode(self, cells):
        c = cells - self._lo
        inside = np.all((c >= 0) & (c < self._dims), axis=-1)
        key = (c[..., 0] * self._dims[1] + c[..., 1]) * self._dims[2] + c[..., 2]
        return np.where(inside, key, -1)

    def _lookup(self, keys):
        pos = np.searchsorted(self._keys, keys)
        pos = np.minimum(pos, max(len(self._keys) - 1, 0))
        if len(self._keys) == 0:
            zeros = np.zeros_like(keys)
            return zeros, zeros
        hit = (self._keys[pos] == keys) & (keys >= 0)
        return np.where(hit, self._starts[pos], 0), np.where(hit, self._counts[pos], 0)

    def _pairs(self, qcells, offset):
        """(query index, sorted point index) for one neighbor offset."""
        start, count = self._lookup(self._encode(qcells + offset))
        total = int(count.sum())
        if total == 0:
            empty = np.zeros(0, dtype=np.intp)
            return empty, empty
        qi = np.repeat(np.arange(len(qcells)), count)
        first = np.repeat(np.cumsum(count) - count, count)
        pi = np.repeat(start, count) + (np.arange(total) - first)
        return qi, pi

    _OFFSETS = np.array(
        [(i, j, k) for i in (-1, 0, 1) for j in (-1, 0, 1) for k in (-1, 0, 1)], dtype=np.int64
    )

    def _chunks(self, queries):
        # bound memory of the pair expansion
        avg = max(1.0, len(self.points) / max(len(self._keys), 1))
        step = max(1, int(_MAX_PAIRS / (27 * avg)))
        for s in range(0, len(queries), step):
            yield s, queries[s:s + step]

    def any_within(self, queries, radius: float) -> np.ndarray:
        """True where some point lies at distance strictly below ``radius``."""
        if radius > self.cell_size:
            raise InvalidParams("radius exceeds hash cell size")
        q = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
        hit = np.zeros(len(q), dtype=bool)
        if len(self.points) == 0:
            return hit
        r2 = radius * radius
        for s, chunk in self._chunks(q):
            qcells = np.floor(chunk / self.cell_size).astype(np.int64)
            sub = hit[s:s + len(chunk)]
            for off in self._OFFSETS:
                todo = np.flatnonzero(~sub)
                if len(todo) == 0:
                    break
                qi, pi = self._pairs(qcells[todo], off)
                if len(qi) == 0:
                    continue
                d2 = _sqdist(chunk[todo[qi]], self._sorted[pi])
                sub[todo[qi[d2 < r2]]] = True
        return hit

    def nearest_within(self, queries, radius: float):
        """Nearest point per query if closer than or equal to ``radius``.

        Returns ``(distance, index)``; ``inf`` and ``-1`` where nothing is in
        range. Ties resolve to the lowest original point index.
        """
        if radius > self.cell_size:
            raise InvalidParams("radius exceeds hash cell size")
        q = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
        best_d2 = np.full(len(q), np.inf)
        best_i = np.full(len(q), -1, dtype=np.int64)
        if len(self.points) == 0:
            return best_d2, best_i
        for s, chunk in self._chunks(q):
            qcells = np.floor(chunk / self.cell_size).astype(np.int64)
            qs, ps, ds = [], [], []
            for off in self._OFFSETS:
                qi, pi = self._pairs(qcells, off)
                if len(qi):
                    qs.append(qi)
                    ps.append(self._order[pi])
                    ds.append(_sqdist(chunk[qi], self._sorted[pi]))
            if not qs:
                continue
            qi = np.concatenate(qs)
            pi = np.concatenate(ps)
            d2 = np.concatenate(ds)
            order = np.lexsort((pi, d2, qi))
            qi, pi, d2 = qi[order], pi[order], d2[order]
            first = np.ones(len(qi), dtype=bool)
            first[1:] = qi[1:] != qi[:-1]
            sel = first & (d2 <= radius * radius)
            best_d2[s + qi[sel]] = d2[sel]
            best_i[s + qi[sel]] = pi[sel]
        return np.sqrt(best_d2), best_i


def _sqdist(a, b):
    dx = a[..., 0] - b[..., 0]
    dy = a[..., 1] - b[..., 1]
    dz = a[..., 2] - b[..., 2]
    return dx * dx + dy * dy + dz * dz


def _as_cloud(cloud):
    pts = np.asarray(cloud, dtype=np.float64).reshape(-1, 3)
    if not np.all(np.isfinite(pts)):
        raise ValueError("point cloud contains non-finite values")
    return pts


def voxelize_points(cloud, params: VoxelGridParams) -> np.ndarray:
    """Binary occupancy: voxel set iff some point is strictly within epsilon."""
    pts = _as_cloud(cloud)
    n, eps = params.N, params.epsilon
    occ = np.zeros((n, n, n), dtype=np.uint8)
    if len(pts) == 0:
        return occ
    half = params.L / 2
    keep = np.all(
        (pts[:, :2] > -half - eps) & (pts[:, :2] < half + eps), axis=1
    ) & (pts[:, 2] > -eps) & (pts[:, 2] < params.L + eps)
    pts = pts[keep]
    if len(pts) == 0:
        return occ
    # each point can only reach voxels in a small index window around it;
    # the window is padded by one index so rounding never drops a candidate.
    # Squared distances are summed per axis by broadcasting in the same order
    # as _sqdist, so the result matches the brute-force reference bitwise.
    grid = voxel_centers(params)
    axes = (grid[:, 0, 0, 0], grid[0, :, 0, 1], grid[0, 0, :, 2])
    origin = np.array([-half, -half, 0.0])
    span = int(np.floor(2 * eps / params.cell)) + 3
    steps = np.arange(span)
    flat = occ.reshape(-1)
    r2 = eps * eps
    chunk = max(1, _MAX_PAIRS // span**3)
    for s in range(0, len(pts), chunk):
        p = pts[s:s + chunk]
        idx = (np.floor((p - eps - origin) / params.cell).astype(np.int64) - 1)[:, :, None] + steps
        sq = []
        for a in range(3):
            ia = np.clip(idx[:, a], 0, n - 1)
            d = axes[a][ia] - p[:, a, None]
            sq.append(np.where((idx[:, a] >= 0) & (idx[:, a] < n), d * d, np.inf))
        d2 = (sq[0][:, :, None, None] + sq[1][:, None, :, None]) + sq[2][:, None, None, :]
        q, i, j, k = np.nonzero(d2 < r2)
        flat[(idx[q, 0, i] * n + idx[q, 1, j]) * n + idx[q, 2, k]] = 1
    return occ


def voxelize_points_bruteforce(cloud, params: VoxelGridParams) -> np.ndarray:
    """Reference occupancy by checking every voxel against every point."""
    pts = _as_cloud(cloud)
    n, eps = params.N, params.epsilon
    centers = voxel_centers(params).reshape(-1, 3)
    flat = np.zeros(n**3, dtype=np.uint8)
    r2 = eps * eps
    for p in pts:
        flat[_sqdist(centers, p) < r2] = 1
    return flat.reshape(n, n, n)


def aggregate_volumes(body_volume, scene_volume, merge=None) -> np.ndarray:
    """Combine the body feature volume and scene occupancy for the heatmap stage.

    Default is channel concatenation (scene occupancy appended last);
    ``merge`` may be any callable ``(body, scene) -> volume``.
    """
    body = np.asarray(body_volume, dtype=np.float64)
    scene = np.asarray(scene_volume, dtype=np.float64)
    if body.shape[:3] != scene.shape[:3]:
        raise ShapeMismatch("body and scene volumes differ in spatial size")
    if merge is not None:
        return merge(body, scene)
    if scene.ndim == 3:
        scene = scene[..., None]
    return np.concatenate([body, scene], axis=-1)
