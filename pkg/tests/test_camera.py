import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from egoscene.camera import (
    FisheyeModel,
    equidistant,
    load_calibration,
    model_from_dict,
    project,
    save_calibration,
    unproject,
)
from egoscene.errors import DegenerateRay, InvalidCalibration, NonPositiveDepth, OutOfFov


def test_on_axis_maps_to_center(cam):
    assert np.allclose(project(cam, [0, 0, 1]), [320, 320])


def test_45_degree_point():
    # oracle: 320 + 160 * pi / 4, evaluated independently
    cam = equidistant(focal=160.0, center=(320.0, 320.0))
    assert np.allclose(project(cam, [1, 0, 1]), [445.6637061435917, 320.0], atol=1e-9)


def test_plus_y_is_down(cam):
    u, v = project(cam, [0, 0.5, 1])
    assert u == pytest.approx(320) and v > 320


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.1, 3), st.floats(0.1, 10))
def test_projection_scale_invariant(x, y, z, s):
    cam = equidistant()
    p = np.array([x, y, z])
    assert np.allclose(cam.project(p), cam.project(s * p), atol=1e-8)


def test_unproject_on_axis(cam):
    assert np.allclose(unproject(cam, [320, 320], 2.0), [0, 0, 2])


def test_round_trip_point(cam):
    p = np.array([0.3, -0.5, 0.8])
    assert np.allclose(unproject(cam, project(cam, p), np.linalg.norm(p)), p, atol=1e-9)


@given(st.floats(0.0, 1.7), st.floats(-math.pi, math.pi), st.floats(0.05, 20))
def test_round_trip_property(theta, phi, d):
    cam = equidistant()
    p = d * np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])
    back = cam.unproject(cam.project(p), d)
    assert np.allclose(back, p, atol=1e-8 * max(d, 1))


def test_beyond_180_degrees_still_projects():
    cam = equidistant(max_theta_deg=110)
    p = np.array([1.0, 0.0, -0.2])
    assert cam.project(p)[0] > 320


def test_errors(cam):
    with pytest.raises(DegenerateRay):
        cam.project([0, 0, 0])
    with pytest.raises(OutOfFov):
        cam.project([0, 0, -1])
    with pytest.raises(NonPositiveDepth):
        cam.unproject([320, 320], 0.0)
    with pytest.raises(OutOfFov):
        cam.unproject([0, 0], 1.0)  # corner, beyond r(max_theta)


def test_polynomial_equal_to_linear_matches_equidistant():
    eq = equidistant()
    poly = FisheyeModel("polynomial", (320.0, 320.0), (640, 640), eq.max_theta, poly_coeffs=(0.0, 160.0))
    rng = np.random.default_rng(0)
    theta = rng.uniform(0, 0.5, 200)
    phi = rng.uniform(-np.pi, np.pi, 200)
    p = np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=1)
    assert np.abs(poly.project(p) - eq.project(p)).max() < 1e-4
    assert np.allclose(poly.unproject(eq.project(p), 1.0), p, atol=1e-8)


def test_polynomial_taylor_of_equisolid():
    # r = 2 f sin(theta / 2) ~ f (theta - theta^3 / 24 + theta^5 / 1920)
    f = 150.0
    coeffs = (0.0, f, 0.0, -f / 24, 0.0, f / 1920)
    poly = FisheyeModel("polynomial", (300.0, 300.0), (600, 600), 1.0, poly_coeffs=coeffs)
    theta = np.linspace(0, 0.5, 50)
    assert np.abs(poly.radius(theta) - 2 * f * np.sin(theta / 2)).max() < 1e-4
    r = poly.radius(theta)
    assert np.allclose(poly.theta_from_radius(r), theta, atol=1e-9)


def test_projection_jacobian_matches_finite_differences(cam, rng):
    p = rng.uniform([-0.5, -0.5, 0.3], [0.5, 0.5, 1.5], (20, 3))
    jac = cam.projection_jacobian(p)
    h = 1e-6
    for k in range(3):
        dp = np.zeros(3)
        dp[k] = h
        fd = (cam.project(p + dp) - cam.project(p - dp)) / (2 * h)
        assert np.allclose(jac[..., k], fd, atol=1e-4)


def test_calibration_documents(tmp_path):
    model = model_from_dict({"kind": "equidistant", "focal": 100, "center": [64, 48],
                             "image_size": [128, 96], "max_theta_deg": 90})
    assert model.kind == "equidistant"
    with pytest.raises(InvalidCalibration):
        model_from_dict({"kind": "polynomial", "poly_coeffs": [0, 100, -80], "center": [64, 48],
                         "image_size": [128, 96], "max_theta_deg": 90})
    path = tmp_path / "cal.json"
    poly = FisheyeModel("polynomial", (63.5, 47.5), (128, 96), 1.2, poly_coeffs=(0, 90.0, 0, -3.0))
    for m in (model, poly):
        save_calibration(m, path)
        assert load_calibration(path) == m
    assert load_calibration(json.dumps(model.to_dict())) == model


def test_invalid_center_rejected():
    with pytest.raises(InvalidCalibration):
        equidistant(center=(700, 320))
