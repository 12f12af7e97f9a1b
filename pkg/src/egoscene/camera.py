"""Omnidirectional fisheye camera with radial mapping r(theta).

Camera frame: +z is the optical axis (pointing from the head-mounted camera
down toward the body), +x to the image right, +y down the image. Pixel
coordinates are ``(u, v)`` = (column, row) with integer values at pixel
centers.

Depth convention: everything in this package that is called "depth" is the
Euclidean *ray distance* from the camera center, not z-depth. A fisheye lens
with a half-FOV above 90 degrees sees points with z <= 0, for which z-depth
is meaningless.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateRay,
    InvalidCalibration,
    NonPositiveDepth,
    OutOfFov,
    ParseError,
)

_MONOTONE_SAMPLES = 4096
_BISECT_TOL = 1e-10


@dataclass(frozen=True)
class FisheyeModel:
    """Fisheye intrinsics.

    ``kind="equidistant"`` uses ``r = focal * theta``. ``kind="polynomial"``
    uses ``r = sum(poly_coeffs[i] * theta**i)`` (coefficient 0 first).
    """

    kind: str
    center: tuple[float, float]
    image_size: tuple[int, int]
    max_theta: float
    focal: float | None = None
    poly_coeffs: tuple[float, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "image_size", tuple(int(s) for s in self.image_size))
        object.__setattr__(self, "poly_coeffs", tuple(float(c) for c in self.poly_coeffs))
        object.__setattr__(self, "max_theta", float(self.max_theta))

        if self.kind == "equidistant":
            if self.focal is None or not self.focal > 0:
                raise InvalidCalibration("equidistant model needs focal > 0")
            object.__setattr__(self, "focal", float(self.focal))
        elif self.kind == "polynomial":
            if len(self.poly_coeffs) < 2:
                raise InvalidCalibration("polynomial model needs at least 2 coefficients")
        else:
            raise InvalidCalibration(f"unknown camera kind {self.kind!r}")

        if not 0 < self.max_theta <= math.pi:
            raise InvalidCalibration(f"max_theta must lie in (0, pi], got {self.max_theta}")
        w, h = self.image_size
        if w <= 0 or h <= 0:
            raise InvalidCalibration("image_size must be positive")
        cx, cy = self.center
        if not (0 <= cx <= w - 1 and 0 <= cy <= h - 1):
            raise InvalidCalibration(f"center {self.center} outside image {self.image_size}")

        theta = np.linspace(0.0, self.max_theta, _MONOTONE_SAMPLES)
        r = self.radius(theta)
        if not np.all(np.isfinite(r)) or not np.all(np.diff(r) > 0):
            raise InvalidCalibration("radius function is not strictly increasing on [0, max_theta]")
        if r[0] < 0:
            raise InvalidCalibration("radius at theta=0 must be non-negative")

    # -- radial mapping -------------------------------------------------
    def radius(self, theta):
        """Image radius in pixels for incidence angle(s) ``theta``."""
        theta = np.asarray(theta, dtype=np.float64)
        if self.kind == "equidistant":
            return self.focal * theta
        return np.polynomial.polynomial.polyval(theta, self.poly_coeffs)

    def radius_derivative(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        if self.kind == "equidistant":
            return np.full_like(theta, self.focal)
        d = np.polynomial.polynomial.polyder(self.poly_coeffs)
        return np.polynomial.polynomial.polyval(theta, d)

    @property
    def max_radius(self) -> float:
        return float(self.radius(self.max_theta))

    def theta_from_radius(self, r):
        """Invert ``r(theta)``; bisection for polynomial models."""
        r = np.asarray(r, dtype=np.float64)
        if self.kind == "equidistant":
            return r / self.focal
        lo = np.zeros_like(r)
        hi = np.full_like(r, self.max_theta)
        # bisection halves the bracket; 64 halvings of pi are far below tolerance
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            below = self.radius(mid) < r
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.all(hi - lo < _BISECT_TOL):
                break
        return 0.5 * (lo + hi)

    # -- projection -----------------------------------------------------
    def project(self, points):
        """Project 3D camera-frame point(s) to pixels, raising on failure."""
        pixels, valid = self.project_with_validity(points)
        if not np.all(valid):
            pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
            if np.any(np.all(pts == 0, axis=-1)):
                raise DegenerateRay("cannot project the camera center")
            raise OutOfFov("point lies outside the field of view")
        return pixels

    def project_with_validity(self, points):
        """Vectorized projection. Returns ``(pixels[..., 2], valid[...])``.

        Invalid entries (origin or beyond ``max_theta``) get NaN pixels.
        """
        p = np.asarray(points, dtype=np.float64)
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        rho = np.hypot(x, y)
        theta = np.arctan2(rho, z)
        nonzero = (rho > 0) | (z != 0)
        valid = nonzero & (theta <= self.max_theta)
        r = self.radius(theta)
        with np.errstate(invalid="ignore", divide="ignore"):
            ux = np.where(rho > 0, x / rho, 0.0)
            uy = np.where(rho > 0, y / rho, 0.0)
        pix = np.stack([self.center[0] + r * ux, self.center[1] + r * uy], axis=-1)
        pix = np.where(valid[..., None], pix, np.nan)
        return pix, valid

    def unproject(self, pixels, ray_distance):
        """Point at Euclidean distance ``ray_distance`` along each pixel's ray."""
        px = np.asarray(pixels, dtype=np.float64)
        d = np.asarray(ray_distance, dtype=np.float64)
        if np.any(~(d > 0)):
            raise NonPositiveDepth("ray distance must be positive")
        dirs, valid = self.pixel_rays(px)
        if not np.all(valid):
            raise OutOfFov("pixel radius exceeds r(max_theta)")
        return dirs * d[..., None]

    def pixel_rays(self, pixels):
        """Unit ray directions for pixel(s) plus an in-FOV flag."""
        px = np.asarray(pixels, dtype=np.float64)
        du = px[..., 0] - self.center[0]
        dv = px[..., 1] - self.center[1]
        r = np.hypot(du, dv)
        # tiny slack so pixels produced by project() at exactly max_theta round-trip
        valid = r <= self.max_radius * (1 + 1e-12)
        theta = self.theta_from_radius(np.minimum(r, self.max_radius))
        with np.errstate(invalid="ignore", divide="ignore"):
            cu = np.where(r > 0, du / r, 0.0)
            cv = np.where(r > 0, dv / r, 0.0)
        s = np.sin(theta)
        dirs = np.stack([s * cu, s * cv, np.cos(theta)], axis=-1)
        return dirs, valid

    def pixel_grid(self):
        """``(H, W, 2)`` array of integer pixel centers as (u, v)."""
        w, h = self.image_size
        v, u = np.mgrid[0:h, 0:w]
        return np.stack([u, v], axis=-1).astype(np.float64)

    def projection_jacobian(self, points):
        """d(pixel)/d(point), shape ``(..., 2, 3)``.

        Beyond ``max_theta`` the radius is clamped, so its theta-derivative
        is zero there. Returns zeros for the camera center.
        """
        p = np.asarray(points, dtype=np.float64)
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        rho2 = x * x + y * y
        rho = np.sqrt(rho2)
        n2 = rho2 + z * z
        theta = np.arctan2(rho, z)
        inside = theta <= self.max_theta
        th_c = np.minimum(theta, self.max_theta)
        r = self.radius(th_c)
        dr = np.where(inside, self.radius_derivative(th_c), 0.0)

        jac = np.zeros(p.shape[:-1] + (2, 3))
        safe = rho > 1e-12 * np.maximum(np.sqrt(n2), 1e-300)
        with np.errstate(invalid="ignore", divide="ignore"):
            inv_rho = np.where(safe, 1.0 / rho, 0.0)
            ux, uy = x * inv_rho, y * inv_rho
            # dtheta/dp
            k = np.where(safe, z / (n2 * np.where(safe, rho, 1.0)), 0.0)
            dth = np.stack([x * k, y * k, np.where(safe, -rho / n2, 0.0)], axis=-1)
            rr3 = np.where(safe, r * inv_rho**3, 0.0)
        jac[..., 0, :] = (dr * ux)[..., None] * dth
        jac[..., 1, :] = (dr * uy)[..., None] * dth
        jac[..., 0, 0] += rr3 * y * y
        jac[..., 0, 1] += -rr3 * x * y
        jac[..., 1, 0] += -rr3 * x * y
        jac[..., 1, 1] += rr3 * x * x

        # on-axis limit: u = cx + r'(0) x / z
        axis = ~safe & (z > 0)
        if np.any(axis):
            g = self.radius_derivative(0.0) / np.where(axis, z, 1.0)
            jac[..., 0, 0] = np.where(axis, g, jac[..., 0, 0])
            jac[..., 1, 1] = np.where(axis, g, jac[..., 1, 1])
        return jac

    # -- serialization --------------------------------------------------
    def to_dict(self) -> dict:
        doc = {
            "kind": self.kind,
            "center": list(self.center),
            "image_size": list(self.image_size),
            "max_theta_deg": math.degrees(self.max_theta),
            "max_theta": self.max_theta,
        }
        if self.kind == "equidistant":
            doc["focal"] = self.focal
        else:
            doc["poly_coeffs"] = list(self.poly_coeffs)
        return doc


def project(model: FisheyeModel, point):
    return model.project(point)


def unproject(model: FisheyeModel, pixel, ray_distance):
    return model.unproject(pixel, ray_distance)


def equidistant(focal=160.0, center=(320.0, 320.0), image_size=(640, 640), max_theta_deg=100.0):
    """The default ideal fisheye used by tests and the simulator."""
    return FisheyeModel(
        kind="equidistant",
        focal=focal,
        center=center,
        image_size=image_size,
        max_theta=math.radians(max_theta_deg),
    )


def model_from_dict(doc: dict) -> FisheyeModel:
    try:
        kind = doc["kind"]
        if "max_theta" in doc:
            max_theta = float(doc["max_theta"])
        else:
            max_theta = math.radians(float(doc["max_theta_deg"]))
        kwargs = dict(
            kind=kind,
            center=tuple(doc["center"]),
            image_size=tuple(doc["image_size"]),
            max_theta=max_theta,
        )
        if kind == "equidistant":
            kwargs["focal"] = float(doc["focal"])
        elif kind == "polynomial":
            kwargs["poly_coeffs"] = tuple(doc["poly_coeffs"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"incomplete calibration document: {exc}") from exc
    if len(kwargs["center"]) != 2 or len(kwargs["image_size"]) != 2:
        raise ParseError("center and image_size must have two entries")
    return FisheyeModel(**kwargs)


def load_calibration(path_or_text) -> FisheyeModel:
    """Load a JSON calibration from a path or from a JSON string."""
    text = path_or_text
    if isinstance(path_or_text, Path) or (
        isinstance(path_or_text, str) and not path_or_text.lstrip().startswith("{")
    ):
        text = Path(path_or_text).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"calibration is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("calibration must be a JSON object")
    return model_from_dict(doc)


def save_calibration(model: FisheyeModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2, sort_keys=True) + "\n")
