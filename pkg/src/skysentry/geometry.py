"""Camera models, pinhole projection, stereo ranging, and the size/distance calibration curve.

World frame is right-handed with z up; distances are slant range from the
camera unless noted. Image frame has u right, v down, origin at the top-left
pixel corner. All types are immutable and all operations are pure.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BehindCamera, DegenerateDisparity, OutOfDomain, SingularFit


@dataclass(frozen=True)
class Vec3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise ValueError("Vec3 components must be finite")

    def __add__(self, o: "Vec3") -> "Vec3":
        return Vec3(self.x + o.x, self.y + o.y, self.z + o.z)

    def __sub__(self, o: "Vec3") -> "Vec3":
        return Vec3(self.x - o.x, self.y - o.y, self.z - o.z)

    def scaled(self, s: float) -> "Vec3":
        return Vec3(self.x * s, self.y * s, self.z * s)

    def dot(self, o: "Vec3") -> float:
        return self.x * o.x + self.y * o.y + self.z * o.z

    def norm(self) -> float:
        return math.sqrt(self.dot(self))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)


@dataclass(frozen=True)
class BBox:
    """Axis-aligned pixel box, (x, y) top-left, w/h > 0."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"BBox sides must be positive, got w={self.w}, h={self.h}")

    @property
    def diag(self) -> float:
        return math.hypot(self.w, self.h)

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera. yaw rotates about world z (0 looks along +x), pitch is
    elevation above the horizon; roll is not modeled."""

    position: Vec3
    yaw: float
    pitch: float
    focal_px: float
    principal_point: tuple[float, float]
    sensor: tuple[int, int]  # (width, height) px

    def __post_init__(self):
        if self.focal_px <= 0:
            raise ValueError("focal_px must be > 0")
        w, h = self.sensor
        if w <= 0 or h <= 0:
            raise ValueError("sensor dimensions must be > 0")
        px, py = self.principal_point
        if not (0 <= px <= w and 0 <= py <= h):
            raise ValueError("principal point must lie inside the sensor")

    def axes(self) -> tuple[Vec3, Vec3, Vec3]:
        """(forward, right, down) unit vectors of the camera frame."""
        cy, sy = math.cos(self.yaw), math.sin(self.yaw)
        cp, sp = math.cos(self.pitch), math.sin(self.pitch)
        fwd = Vec3(cp * cy, cp * sy, sp)
        right = Vec3(sy, -cy, 0.0)
        down = Vec3(sp * cy, sp * sy, -cp)
        return fwd, right, down

    def half_fov(self) -> float:
        """Horizontal half field of view, radians."""
        return math.atan(self.sensor[0] / (2.0 * self.focal_px))

    def scaled(self, s: float) -> "CameraModel":
        """Same camera at a different raster resolution (focal and sensor scale together)."""
        px, py = self.principal_point
        w, h = self.sensor
        return CameraModel(
            position=self.position,
            yaw=self.yaw,
            pitch=self.pitch,
            focal_px=self.focal_px * s,
            principal_point=(px * s, py * s),
            sensor=(max(1, int(round(w * s))), max(1, int(round(h * s)))),
        )


@dataclass(frozen=True)
class StereoRig:
    left: CameraModel
    right: CameraModel
    baseline_m: float

    def __post_init__(self):
        if self.baseline_m <= 0:
            raise ValueError("baseline_m must be > 0")
        if self.left.focal_px != self.right.focal_px:
            raise ValueError("stereo cameras must share focal_px")

    @property
    def focal_px(self) -> float:
        return self.left.focal_px


def project(camera: CameraModel, point: Vec3) -> tuple[float, float, float]:
    """Project a world point to sensor coordinates.

    Returns (u, v, depth) with depth measured along the optical axis.
    Raises BehindCamera when depth <= 0.
    """
    fwd, right, down = camera.axes()
    d = point - camera.position
    depth = d.dot(fwd)
    if depth <= 0:
        raise BehindCamera(f"point depth {depth:.3f} m is not in front of the camera")
    u = camera.principal_point[0] + camera.focal_px * d.dot(right) / depth
    v = camera.principal_point[1] + camera.focal_px * d.dot(down) / depth
    return u, v, depth


def triangulate(rig: StereoRig, disparity_px: float) -> float:
    """Distance from disparity: Z = f * B / disparity."""
    if disparity_px <= 0:
        raise DegenerateDisparity(f"disparity {disparity_px} px <= 0")
    return rig.focal_px * rig.baseline_m / disparity_px


def stereo_sigma(rig: StereoRig, distance_m: float, sigma_disparity_px: float) -> float:
    """First-order range uncertainty: sigma_Z = Z^2 * sigma_d / (f * B).

    Grows quadratically with range, which is what makes far measurements
    ill-conditioned.
    """
    if distance_m <= 0:
        raise ValueError("distance_m must be > 0")
    if sigma_disparity_px < 0:
        raise ValueError("sigma_disparity_px must be >= 0")
    return distance_m * distance_m * sigma_disparity_px / (rig.focal_px * rig.baseline_m)


@dataclass(frozen=True)
class CalibCurve:
    """Apparent-size model diag(x) = a / (x + b) + c, strictly decreasing in x."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError("CalibCurve.a must be > 0")

    @property
    def min_distance(self) -> float:
        return max(0.0, -self.b)

    def scaled(self, s: float) -> "CalibCurve":
        """Curve at a different raster resolution (pixel outputs scale by s)."""
        return CalibCurve(self.a * s, self.b, self.c * s)


# Synthetic per-camera-class defaults (not measured values): chosen so a
# reference-size object covers ~100 px at 300 m on a tele camera and a few
# pixels toward 800 m on a wide static camera.
DEFAULT_STATIC_CURVE = CalibCurve(a=2400.0, b=0.0, c=0.0)
DEFAULT_TELE_CURVE = CalibCurve(a=30000.0, b=0.0, c=0.0)


def apparent_diag(curve: CalibCurve, distance_m: float) -> float:
    """Predicted apparent size (px) at a given distance (m)."""
    if distance_m <= curve.min_distance:
        raise OutOfDomain(
            f"distance {distance_m} m outside curve domain (> {curve.min_distance} m)"
        )
    return curve.a / (distance_m + curve.b) + curve.c


def invert_diag(curve: CalibCurve, diag_px: float) -> float:
    """Distance (m) from apparent size (px); exact inverse of apparent_diag."""
    if diag_px <= curve.c:
        raise OutOfDomain(f"size {diag_px} px at or below asymptotic floor c={curve.c}")
    return curve.a / (diag_px - curve.c) - curve.b


def fit_calib(samples: list[tuple[float, float]], max_iter: int = 200) -> CalibCurve:
    """Least-squares fit of (a, b, c) to (distance_m, diag_px) samples.

    Damped Gauss-Newton (Levenberg) on the residuals a/(x+b)+c - y.
    Converged when the relative residual change drops below 1e-10, or after
    max_iter iterations. Raises SingularFit when the problem is
    underdetermined (fewer than 4 distinct distances) or the normal
    equations lose rank.
    """
    x = np.asarray([s[0] for s in samples], dtype=np.float64)
    y = np.asarray([s[1] for s in samples], dtype=np.float64)
    if len(np.unique(x)) < 4:
        raise SingularFit(f"need >= 4 samples at distinct distances, got {len(np.unique(x))}")

    # Scale-aware start keeps the pole x = -b away from the data.
    a = float(np.median(y) * np.median(x))
    b = 0.0
    c = float(np.min(y) / 2.0)

    def residual(a_, b_, c_):
        return a_ / (x + b_) + c_ - y

    r = residual(a, b, c)
    cost = float(r @ r)
    lam = 1e-3
    for _ in range(max_iter):
        denom = x + b
        jac = np.column_stack([1.0 / denom, -a / denom**2, np.ones_like(x)])
        jtj = jac.T @ jac
        jtr = jac.T @ r
        accepted = False
        for _ in range(50):
            damped = jtj + lam * np.diag(np.diag(jtj))
            try:
                step = np.linalg.solve(damped, -jtr)
            except np.linalg.LinAlgError:
                raise SingularFit("normal equations are rank-deficient") from None
            if not np.all(np.isfinite(step)):
                raise SingularFit("normal equations are rank-deficient")
            a_n, b_n, c_n = a + step[0], b + step[1], c + step[2]
            if a_n <= 0 or np.min(x + b_n) <= 0:
                lam *= 10.0  # step crossed the pole; retreat
                continue
            r_n = residual(a_n, b_n, c_n)
            cost_n = float(r_n @ r_n)
            if cost_n <= cost:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            break
        rel_change = abs(cost - cost_n) / max(cost, 1e-300)
        a, b, c, r, cost = a_n, b_n, c_n, r_n, cost_n
        lam = max(lam / 3.0, 1e-12)
        if rel_change < 1e-10:
            break
    return CalibCurve(a=float(a), b=float(b), c=float(c))


def read_calib_samples(path: str | Path) -> list[tuple[float, float]]:
    """Read (distance_m, diag_px) samples from a CSV with that header."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != [
            "distance_m",
            "diag_px",
        ]:
            raise ValueError(f"{path}: expected header 'distance_m,diag_px'")
        return [(float(row["distance_m"]), float(row["diag_px"])) for row in reader]


def write_calib_samples(path: str | Path, samples: list[tuple[float, float]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["distance_m", "diag_px"])
        writer.writerows(samples)


def curve_to_json(curve: CalibCurve) -> str:
    return json.dumps({"a": curve.a, "b": curve.b, "c": curve.c})


def curve_from_json(text: str) -> CalibCurve:
    obj = json.loads(text)
    return CalibCurve(a=float(obj["a"]), b=float(obj["b"]), c=float(obj["c"]))
