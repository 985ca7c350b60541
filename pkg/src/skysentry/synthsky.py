"""Deterministic sky scenario simulator.

Renders per-camera luminance frames with distance-scaled target blobs,
oscillating clutter, and pixel noise, and produces the matching ground-truth
boxes. Everything is a pure function of (scenario, camera, time): identical
inputs give byte-identical frames, so streams can be rendered in parallel or
replayed bit-exactly.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, OutOfRange, UnknownCamera
from .fuse import CLASS_NAMES
from .geometry import (
    BBox,
    CalibCurve,
    CameraModel,
    DEFAULT_STATIC_CURVE,
    DEFAULT_TELE_CURVE,
    StereoRig,
    Vec3,
    apparent_diag,
    project,
)
from .rng import stream

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))

CLUTTER_KINDS = ("treetop_band", "rotor_disc")


@dataclass(frozen=True)
class TargetTruth:
    """One moving object: species, physical extent, and timed waypoints.

    The target exists only within its waypoint time span; size_m scales the
    calibration-curve apparent size relative to a 1 m reference object.
    """

    id: str
    species: str
    size_m: float
    waypoints: tuple[tuple[float, Vec3], ...]

    def __post_init__(self):
        if self.species not in CLASS_NAMES:
            raise ValueError(f"species must be one of {CLASS_NAMES}")
        if self.size_m <= 0:
            raise ValueError("size_m must be > 0")
        if len(self.waypoints) < 2:
            raise ValueError("need at least 2 waypoints")
        times = [t for t, _ in self.waypoints]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("waypoint times must be strictly increasing")

    @property
    def span(self) -> tuple[float, float]:
        return self.waypoints[0][0], self.waypoints[-1][0]

    def state_at(self, t_s: float) -> tuple[Vec3, Vec3] | None:
        """(position, velocity) at t_s, or None outside the waypoint span."""
        t0, t1 = self.span
        if not (t0 <= t_s <= t1):
            return None
        for (ta, pa), (tb, pb) in zip(self.waypoints, self.waypoints[1:]):
            if t_s <= tb:
                seg = tb - ta
                alpha = (t_s - ta) / seg
                vel = (pb - pa).scaled(1.0 / seg)
                pos = pa + (pb - pa).scaled(alpha)
                return pos, vel
        return self.waypoints[-1][1], Vec3(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class ClutterSpec:
    """Persistently moving region in one camera's sensor (treetops, rotors)."""

    camera_id: str
    region: BBox
    kind: str
    amplitude_px: float
    period_s: float

    def __post_init__(self):
        if self.kind not in CLUTTER_KINDS:
            raise ValueError(f"kind must be one of {CLUTTER_KINDS}")
        if self.amplitude_px < 0:
            raise ValueError("amplitude_px must be >= 0")
        if self.period_s <= 0:
            raise ValueError("period_s must be > 0")


@dataclass(frozen=True)
class SceneCamera:
    """A scenario camera: id, pinhole model, class tag, and its size/distance curve."""

    id: str
    model: CameraModel
    kind: str  # "static" | "tele"
    curve: CalibCurve

    def scaled(self, s: float) -> "SceneCamera":
        return replace(self, model=self.model.scaled(s), curve=self.curve.scaled(s))


@dataclass(frozen=True)
class RigSpec:
    """Steerable stereo pair: a shared base pose plus a lateral baseline.

    Pan/tilt here are the home attitude; the live attitude is whatever the
    pan-tilt mechanism currently commands.
    """

    id: str
    position: Vec3
    home_pan: float
    home_tilt: float
    focal_px: float
    principal_point: tuple[float, float]
    sensor: tuple[int, int]
    baseline_m: float
    curve: CalibCurve

    def __post_init__(self):
        if self.baseline_m <= 0:
            raise ValueError("baseline_m must be > 0")

    def rig_at(self, pan: float, tilt: float) -> StereoRig:
        """Oriented stereo pair with parallel optical axes at (pan, tilt)."""
        reference = CameraModel(
            position=self.position,
            yaw=pan,
            pitch=tilt,
            focal_px=self.focal_px,
            principal_point=self.principal_point,
            sensor=self.sensor,
        )
        _, right, _ = reference.axes()
        half = right.scaled(self.baseline_m / 2.0)
        left = replace(reference, position=self.position - half)
        right_cam = replace(reference, position=self.position + half)
        return StereoRig(left=left, right=right_cam, baseline_m=self.baseline_m)

    def half_fov(self) -> float:
        return math.atan(self.sensor[0] / (2.0 * self.focal_px))

    def scaled(self, s: float) -> "RigSpec":
        px, py = self.principal_point
        w, h = self.sensor
        return replace(
            self,
            focal_px=self.focal_px * s,
            principal_point=(px * s, py * s),
            sensor=(max(1, int(round(w * s))), max(1, int(round(h * s)))),
            curve=self.curve.scaled(s),
        )


@dataclass(frozen=True)
class Scenario:
    duration_s: float
    frame_rate_hz: float
    cameras: tuple[SceneCamera, ...]
    rigs: tuple[RigSpec, ...]
    targets: tuple[TargetTruth, ...]
    clutter: tuple[ClutterSpec, ...]
    pixel_noise_sigma: float
    seed: int
    sky_top: float = 205.0
    sky_bottom: float = 150.0
    blob_contrast: float = 60.0

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError("duration_s must be > 0")
        if self.frame_rate_hz <= 0:
            raise ValueError("frame_rate_hz must be > 0")
        ids = [c.id for c in self.cameras] + [r.id for r in self.rigs] + [t.id for t in self.targets]
        if len(set(ids)) != len(ids):
            raise ValueError("camera, rig, and target ids must be unique")

    def camera(self, camera_id: str) -> SceneCamera:
        for cam in self.cameras:
            if cam.id == camera_id:
                return cam
        raise UnknownCamera(f"camera {camera_id!r} not in scenario")

    @property
    def n_frames(self) -> int:
        return int(round(self.duration_s * self.frame_rate_hz))

    def frame_time(self, index: int) -> float:
        return index / self.frame_rate_hz

    def frame_index(self, t_s: float) -> int:
        return int(round(t_s * self.frame_rate_hz))

    def scaled(self, s: float) -> "Scenario":
        """Scenario rendered at s times the authored resolution."""
        if s == 1.0:
            return self
        return replace(
            self,
            cameras=tuple(c.scaled(s) for c in self.cameras),
            rigs=tuple(r.scaled(s) for r in self.rigs),
            clutter=tuple(
                replace(
                    cl,
                    region=BBox(cl.region.x * s, cl.region.y * s, cl.region.w * s, cl.region.h * s),
                    amplitude_px=cl.amplitude_px * s,
                )
                for cl in self.clutter
            ),
        )


@dataclass(frozen=True)
class ImageFrame:
    """Single-camera 8-bit luminance raster at one timestamp."""

    camera_id: str
    t_s: float
    pixels: np.ndarray  # (height, width) uint8

    def __post_init__(self):
        if self.pixels.dtype != np.uint8 or self.pixels.ndim != 2:
            raise ValueError("pixels must be a 2-D uint8 array")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class GroundTruthBox:
    target_id: str
    species: str
    bbox: BBox
    distance_m: float


def sample_state(scenario: Scenario, t_s: float) -> list[tuple[str, Vec3, Vec3]]:
    """Piecewise-linear target states at t_s: (id, position, velocity)."""
    if not (0.0 <= t_s <= scenario.duration_s):
        raise OutOfRange(f"t={t_s} outside scenario duration [0, {scenario.duration_s}]")
    out = []
    for target in scenario.targets:
        state = target.state_at(t_s)
        if state is not None:
            out.append((target.id, state[0], state[1]))
    return out


def blob_diameter(camera: SceneCamera, target: TargetTruth, distance_m: float) -> float:
    """Rendered blob full width (px): curve size scaled by target extent, >= 1 px."""
    return max(1.0, apparent_diag(camera.curve, distance_m) * target.size_m)


def _sky_background(scenario: Scenario, width: int, height: int) -> np.ndarray:
    rows = np.linspace(scenario.sky_top, scenario.sky_bottom, height, dtype=np.float32)
    return np.broadcast_to(rows[:, None], (height, width)).copy()


def _clutter_texture(scenario: Scenario, index: int, h: int, w: int) -> np.ndarray:
    u = stream(scenario.seed, "clutter", index).uniforms(h * w, dtype=np.float32)
    return (70.0 + 110.0 * u).reshape(h, w)


def _draw_clutter(canvas: np.ndarray, scenario: Scenario, camera_id: str, t_s: float) -> None:
    for idx, spec in enumerate(scenario.clutter):
        if spec.camera_id != camera_id:
            continue
        h, w = canvas.shape
        x0 = max(0, int(spec.region.x))
        y0 = max(0, int(spec.region.y))
        x1 = min(w, int(spec.region.x + spec.region.w))
        y1 = min(h, int(spec.region.y + spec.region.h))
        if x1 <= x0 or y1 <= y0:
            continue
        tex = _clutter_texture(scenario, idx, y1 - y0, x1 - x0)
        shift = int(round(spec.amplitude_px * math.sin(2.0 * math.pi * t_s / spec.period_s)))
        axis = 1 if spec.kind == "treetop_band" else 0
        layer = np.roll(tex, shift, axis=axis)
        np.minimum(canvas[y0:y1, x0:x1], layer, out=canvas[y0:y1, x0:x1])


def _draw_blob(canvas: np.ndarray, bg: np.ndarray, u: float, v: float, diameter: float, contrast: float) -> None:
    sigma = diameter / FWHM_PER_SIGMA
    radius = max(2, int(math.ceil(3.0 * sigma)))
    h, w = canvas.shape
    x0 = max(0, int(math.floor(u - radius)))
    x1 = min(w, int(math.ceil(u + radius)) + 1)
    y0 = max(0, int(math.floor(v - radius)))
    y1 = min(h, int(math.ceil(v + radius)) + 1)
    if x1 <= x0 or y1 <= y0:
        return
    xs = np.arange(x0, x1, dtype=np.float32) - np.float32(u)
    ys = np.arange(y0, y1, dtype=np.float32) - np.float32(v)
    r2 = ys[:, None] ** 2 + xs[None, :] ** 2
    profile = np.float32(contrast) * np.exp(r2 / np.float32(-2.0 * sigma * sigma))
    np.minimum(canvas[y0:y1, x0:x1], bg[y0:y1, x0:x1] - profile, out=canvas[y0:y1, x0:x1])


def render_frame(scenario: Scenario, camera_id: str, t_s: float) -> ImageFrame:
    """Render one camera frame at t_s.

    Deterministic in (scenario.seed, camera_id, frame index): sky gradient,
    clutter and target layers composited by min (targets are darker than
    sky), then additive Gaussian pixel noise clamped to [0, 255].
    """
    cam = scenario.camera(camera_id)
    width, height = cam.model.sensor
    canvas = _sky_background(scenario, width, height)
    bg = canvas.copy()

    _draw_clutter(canvas, scenario, camera_id, t_s)

    for target_id, pos, _vel in sample_state(scenario, t_s):
        target = next(t for t in scenario.targets if t.id == target_id)
        try:
            u, v, _depth = project(cam.model, pos)
        except Exception:
            continue
        if not (0 <= u < width and 0 <= v < height):
            continue
        distance = (pos - cam.model.position).norm()
        diameter = blob_diameter(cam, target, distance)
        _draw_blob(canvas, bg, u, v, diameter, scenario.blob_contrast)

    if scenario.pixel_noise_sigma > 0:
        k = scenario.frame_index(t_s)
        noise = stream(scenario.seed, "noise", camera_id, k).normals(
            width * height, dtype=np.float32
        )
        noise *= np.float32(scenario.pixel_noise_sigma)
        canvas += noise.reshape(height, width)

    # round half up via +0.5 and truncation; one pass cheaper than rint
    canvas += np.float32(0.5)
    np.clip(canvas, 0.0, 255.0, out=canvas)
    pixels = canvas.astype(np.uint8)
    return ImageFrame(camera_id=camera_id, t_s=t_s, pixels=pixels)


def ground_truth_boxes(scenario: Scenario, camera_id: str, t_s: float) -> list[GroundTruthBox]:
    """Boxes for every target whose center projects inside the sensor.

    Box side equals the rendered blob diameter; distance is Euclidean range
    from the camera.
    """
    cam = scenario.camera(camera_id)
    width, height = cam.model.sensor
    out = []
    for target_id, pos, _vel in sample_state(scenario, t_s):
        target = next(t for t in scenario.targets if t.id == target_id)
        try:
            u, v, _depth = project(cam.model, pos)
        except Exception:
            continue
        if not (0 <= u < width and 0 <= v < height):
            continue
        distance = (pos - cam.model.position).norm()
        side = blob_diameter(cam, target, distance)
        bbox = BBox(u - side / 2.0, v - side / 2.0, side, side)
        out.append(GroundTruthBox(target_id, target.species, bbox, distance))
    return out


# ---------------------------------------------------------------------------
# Scenario JSON
# ---------------------------------------------------------------------------


def _vec3(values, where: str) -> Vec3:
    if not (isinstance(values, (list, tuple)) and len(values) == 3):
        raise ConfigError(f"{where}: expected [x, y, z]")
    return Vec3(float(values[0]), float(values[1]), float(values[2]))


def _curve(obj, kind: str, where: str) -> CalibCurve:
    if obj is None:
        return DEFAULT_TELE_CURVE if kind == "tele" else DEFAULT_STATIC_CURVE
    try:
        return CalibCurve(a=float(obj["a"]), b=float(obj.get("b", 0.0)), c=float(obj.get("c", 0.0)))
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"{where}: bad calibration curve: {e}") from None


def scenario_from_dict(obj: dict, where: str = "scenario") -> Scenario:
    try:
        cameras = []
        for i, c in enumerate(obj.get("cameras", [])):
            kind = c.get("kind", "static")
            if kind not in ("static", "tele"):
                raise ConfigError(f"{where}.cameras[{i}].kind: expected 'static' or 'tele'")
            model = CameraModel(
                position=_vec3(c["position"], f"{where}.cameras[{i}].position"),
                yaw=float(c.get("yaw", 0.0)),
                pitch=float(c.get("pitch", 0.0)),
                focal_px=float(c["focal_px"]),
                principal_point=(float(c["principal_point"][0]), float(c["principal_point"][1])),
                sensor=(int(c["sensor"][0]), int(c["sensor"][1])),
            )
            cameras.append(
                SceneCamera(
                    id=str(c["id"]),
                    model=model,
                    kind=kind,
                    curve=_curve(c.get("calib"), kind, f"{where}.cameras[{i}]"),
                )
            )
        rigs = []
        for i, r in enumerate(obj.get("rigs", [])):
            rigs.append(
                RigSpec(
                    id=str(r["id"]),
                    position=_vec3(r["position"], f"{where}.rigs[{i}].position"),
                    home_pan=float(r.get("home_pan", 0.0)),
                    home_tilt=float(r.get("home_tilt", 0.0)),
                    focal_px=float(r["focal_px"]),
                    principal_point=(float(r["principal_point"][0]), float(r["principal_point"][1])),
                    sensor=(int(r["sensor"][0]), int(r["sensor"][1])),
                    baseline_m=float(r["baseline_m"]),
                    curve=_curve(r.get("calib"), "tele", f"{where}.rigs[{i}]"),
                )
            )
        targets = []
        for i, t in enumerate(obj.get("targets", [])):
            waypoints = tuple(
                (float(w[0]), _vec3(w[1], f"{where}.targets[{i}].waypoints[{j}]"))
                for j, w in enumerate(t["waypoints"])
            )
            targets.append(
                TargetTruth(
                    id=str(t["id"]),
                    species=str(t["species"]),
                    size_m=float(t.get("size_m", 1.0)),
                    waypoints=waypoints,
                )
            )
        clutter = []
        for i, cl in enumerate(obj.get("clutter", [])):
            region = cl["region"]
            clutter.append(
                ClutterSpec(
                    camera_id=str(cl["camera"]),
                    region=BBox(float(region[0]), float(region[1]), float(region[2]), float(region[3])),
                    kind=str(cl.get("kind", "treetop_band")),
                    amplitude_px=float(cl.get("amplitude_px", 4.0)),
                    period_s=float(cl.get("period_s", 2.0)),
                )
            )
        return Scenario(
            duration_s=float(obj["duration_s"]),
            frame_rate_hz=float(obj.get("frame_rate_hz", 4.0)),
            cameras=tuple(cameras),
            rigs=tuple(rigs),
            targets=tuple(targets),
            clutter=tuple(clutter),
            pixel_noise_sigma=float(obj.get("pixel_noise_sigma", 2.0)),
            seed=int(obj.get("seed", 0)),
            sky_top=float(obj.get("sky_top", 205.0)),
            sky_bottom=float(obj.get("sky_bottom", 150.0)),
            blob_contrast=float(obj.get("blob_contrast", 60.0)),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from None


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"{path}: {e}") from None
    return scenario_from_dict(obj, where=str(path))


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "duration_s": s.duration_s,
        "frame_rate_hz": s.frame_rate_hz,
        "pixel_noise_sigma": s.pixel_noise_sigma,
        "seed": s.seed,
        "sky_top": s.sky_top,
        "sky_bottom": s.sky_bottom,
        "blob_contrast": s.blob_contrast,
        "cameras": [
            {
                "id": c.id,
                "kind": c.kind,
                "position": [c.model.position.x, c.model.position.y, c.model.position.z],
                "yaw": c.model.yaw,
                "pitch": c.model.pitch,
                "focal_px": c.model.focal_px,
                "principal_point": list(c.model.principal_point),
                "sensor": list(c.model.sensor),
                "calib": {"a": c.curve.a, "b": c.curve.b, "c": c.curve.c},
            }
            for c in s.cameras
        ],
        "rigs": [
            {
                "id": r.id,
                "position": [r.position.x, r.position.y, r.position.z],
                "home_pan": r.home_pan,
                "home_tilt": r.home_tilt,
                "focal_px": r.focal_px,
                "principal_point": list(r.principal_point),
                "sensor": list(r.sensor),
                "baseline_m": r.baseline_m,
                "calib": {"a": r.curve.a, "b": r.curve.b, "c": r.curve.c},
            }
            for r in s.rigs
        ],
        "targets": [
            {
                "id": t.id,
                "species": t.species,
                "size_m": t.size_m,
                "waypoints": [[wt, [p.x, p.y, p.z]] for wt, p in t.waypoints],
            }
            for t in s.targets
        ],
        "clutter": [
            {
                "camera": cl.camera_id,
                "kind": cl.kind,
                "region": [cl.region.x, cl.region.y, cl.region.w, cl.region.h],
                "amplitude_px": cl.amplitude_px,
                "period_s": cl.period_s,
            }
            for cl in s.clutter
        ],
    }


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scenario), indent=2) + "\n")


# ---------------------------------------------------------------------------
# Frame and ground-truth files
# ---------------------------------------------------------------------------


def frame_filename(camera_id: str, index: int) -> str:
    return f"cam{camera_id}_f{index}.pgm"


def write_pgm(path: str | Path, pixels: np.ndarray) -> None:
    """Binary PGM (P5, maxval 255)."""
    h, w = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if not m:
        raise ValueError(f"{path}: not a binary PGM")
    w, h, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise ValueError(f"{path}: expected maxval 255, got {maxval}")
    raster = np.frombuffer(data[m.end():], dtype=np.uint8, count=w * h)
    return raster.reshape(h, w).copy()


def dump_ground_truth(scenario: Scenario, path: str | Path) -> None:
    """Ground-truth boxes for every (camera, frame) as JSON Lines."""
    with open(path, "w") as fh:
        for k in range(scenario.n_frames):
            t = scenario.frame_time(k)
            for cam in scenario.cameras:
                for box in ground_truth_boxes(scenario, cam.id, t):
                    record = {
                        "frame": k,
                        "t": t,
                        "camera": cam.id,
                        "target": box.target_id,
                        "species": box.species,
                        "bbox": [box.bbox.x, box.bbox.y, box.bbox.w, box.bbox.h],
                        "distance_m": box.distance_m,
                    }
                    fh.write(json.dumps(record, separators=(",", ":")) + "\n")
