import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from egoscene.camera import equidistant
from egoscene.errors import InvalidParams
from egoscene.voxel import (
    SpatialHash,
    VoxelGridParams,
    aggregate_volumes,
    index_to_center,
    lift_features,
    project_voxels,
    voxel_centers,
    voxelize_points,
    voxelize_points_bruteforce,
)

DEFAULT_GRID = VoxelGridParams(2.4, 64, 0.04)


def test_default_grid_centers():
    assert np.array_equal(index_to_center((0, 0, 0), DEFAULT_GRID), [-1.2, -1.2, 0.0])
    assert np.array_equal(index_to_center((32, 32, 32), DEFAULT_GRID), [0.0, 0.0, 1.2])


def test_small_grid_center():
    assert np.allclose(index_to_center((1, 1, 1), VoxelGridParams(2.0, 2, 0.1)), [0, 0, 1])


def test_centers_array_matches_formula():
    p = VoxelGridParams(1.0, 4, 0.1)
    c = voxel_centers(p)
    assert c.shape == (4, 4, 4, 3)
    assert np.allclose(c[1, 2, 3], [1 / 4 - 0.5, 2 / 4 - 0.5, 3 / 4])


@pytest.mark.parametrize("kw", [dict(L=0), dict(N=0), dict(epsilon=-1)])
def test_invalid_params(kw):
    with pytest.raises(InvalidParams):
        VoxelGridParams(**{**dict(L=2.4, N=64, epsilon=0.04), **kw})


def test_project_voxels_validity():
    cam = equidistant()
    pix, valid = project_voxels(cam, np.array([[0, 0, 1.2], [0, 0, 0]]))
    assert valid[0] and np.allclose(pix[0], [320, 320])
    assert not valid[1]


def test_projected_voxels_inside_fov_circle():
    cam = equidistant()
    centers = voxel_centers(VoxelGridParams(2.4, 16, 0.04))
    pix, valid = project_voxels(cam, centers)
    # oracle: angle to the optical axis computed directly from the centers
    c = centers.reshape(-1, 3)
    theta = np.arctan2(np.hypot(c[:, 0], c[:, 1]), c[:, 2])
    expect_valid = (np.linalg.norm(c, axis=1) > 0) & (theta <= cam.max_theta)
    assert np.array_equal(valid.ravel(), expect_valid)
    r = np.linalg.norm(pix[valid] - cam.center, axis=-1)
    assert r.max() <= 160 * cam.max_theta + 1e-9


def test_lift_constant():
    cam = equidistant(focal=40, center=(31.5, 31.5), image_size=(64, 64))
    params = VoxelGridParams(2.4, 8, 0.04)
    proj = project_voxels(cam, voxel_centers(params))
    vol = lift_features(np.full((64, 64, 2), 7.0), proj)
    inside = proj[1] & (np.abs(proj[0] - 31.5) <= 32).all(axis=-1)
    assert np.all(vol[inside] == 7.0)
    assert np.all(vol[~proj[1]] == 0.0)


def test_lift_lattice_and_bilinear():
    f = np.zeros((8, 16, 1))
    f[4, 10, 0], f[4, 11, 0], f[5, 10, 0], f[5, 11, 0] = 1, 2, 3, 4
    pix = np.array([[10.0, 5.0], [10.25, 4.5]])
    vol = lift_features(f, (pix, np.array([True, True])))
    assert vol[0, 0] == 3.0
    # hand bilinear: rows at v=4.5 average 1.25 and 3.25 -> 2.25
    assert vol[1, 0] == pytest.approx(2.25)


def test_lift_border_clamp_and_outside():
    f = np.arange(12, dtype=float).reshape(3, 4, 1)
    pix = np.array([[-0.4, 0.0], [3.4, 2.0], [-0.6, 0.0]])
    vol = lift_features(f, (pix, np.ones(3, bool)))
    assert vol[:, 0].tolist() == [0.0, 11.0, 0.0]


def test_point_at_center_sets_axis_neighbors_only():
    c = index_to_center((10, 20, 30), DEFAULT_GRID)
    vol = voxelize_points(c[None], DEFAULT_GRID)
    set_idx = {tuple(i) for i in np.argwhere(vol)}
    expect = {(10, 20, 30)} | {(10 + d[0], 20 + d[1], 30 + d[2])
                               for d in [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]}
    assert set_idx == expect


def test_empty_cloud():
    assert not voxelize_points(np.zeros((0, 3)), VoxelGridParams(1, 8, 0.1)).any()


def test_matches_bruteforce_uniform(rng):
    p = VoxelGridParams(2.4, 16, 0.04)
    pts = rng.uniform([-1.3, -1.3, -0.1], [1.3, 1.3, 2.5], (200, 3))
    assert np.array_equal(voxelize_points(pts, p), voxelize_points_bruteforce(pts, p))


@given(arrays(np.float64, st.tuples(st.integers(0, 40), st.just(3)),
              elements=st.floats(-1.5, 2.5, allow_nan=False)),
       st.sampled_from([8, 16]), st.sampled_from([0.02, 0.04, 0.08, 0.3]))
def test_matches_bruteforce_property(pts, n, eps):
    p = VoxelGridParams(2.4, n, eps)
    assert np.array_equal(voxelize_points(pts, p), voxelize_points_bruteforce(pts, p))


def test_spatial_hash_nearest(rng):
    pts = rng.uniform(-1, 1, (500, 3))
    q = rng.uniform(-1, 1, (100, 3))
    grid = SpatialHash(pts, 0.1)
    dist, idx = grid.nearest_within(q, 0.1)
    d_all = np.linalg.norm(q[:, None] - pts[None], axis=-1)
    best = d_all.min(axis=1)
    hit = best < 0.1
    assert np.array_equal(idx >= 0, hit)
    assert np.allclose(dist[hit], best[hit])
    assert np.array_equal(grid.any_within(q, 0.1), hit)


def test_aggregate_concatenates():
    body = np.ones((4, 4, 4, 3))
    scene = np.zeros((4, 4, 4), dtype=np.uint8)
    assert aggregate_volumes(body, scene).shape == (4, 4, 4, 4)


@given(st.lists(st.tuples(st.integers(0, 15), st.integers(0, 15), st.integers(0, 15),
                          st.integers(0, 2), st.sampled_from([-1.0, 1.0])), min_size=1, max_size=20),
       st.sampled_from([0.02, 0.04, 0.15, 0.16]))
def test_boundary_points_match_bruteforce(specs, eps):
    # points exactly epsilon (or one cell) away from a voxel center along an axis
    p = VoxelGridParams(2.4, 16, eps)
    pts = []
    for i, j, k, axis, sign in specs:
        c = index_to_center((i, j, k), p)
        for dist in (eps, p.cell):
            q = c.copy()
            q[axis] += sign * dist
            pts.append(q)
    pts = np.array(pts)
    assert np.array_equal(voxelize_points(pts, p), voxelize_points_bruteforce(pts, p))
