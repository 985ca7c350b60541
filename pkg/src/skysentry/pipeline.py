"""End-to-end orchestration at the simulated frame clock.

Each tick: render or replay frames, update the clutter mask, detect, track,
fuse classifications, then let the manager aim the stereo head and decide.
Everything downstream of the scenario seed is deterministic, including
across worker counts; wall-clock time never leaks into the event stream.
"""

from __future__ import annotations

import itertools
import json
import math
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import motion
from .detect import (
    DETECTOR_NAMES,
    MissModel,
    ReferenceConfig,
    ReferenceDetector,
    clusters_to_detections,
    oracle_detect,
)
from .errors import BehindCamera, ConfigError, DegenerateDisparity, OutOfDomain
from .fuse import (
    ConfusionModel,
    KITE,
    class_index,
    default_confusion_model,
    load_confusion_model,
    synthetic_classify,
)
from .geometry import Vec3, invert_diag
from .manager import (
    DangerZone,
    PtuState,
    ShutdownManager,
    ShutdownPolicy,
    TrackSnapshot,
    aim_angles,
    ptu_step,
    select_priority,
    stereo_measure,
)
from .metrics import MATCH_IOU, MetricsDetail, RunMetrics, compute_metrics, greedy_match
from .rng import stream
from .synthsky import (
    ImageFrame,
    Scenario,
    frame_filename,
    ground_truth_boxes,
    load_scenario,
    read_pgm,
    render_frame,
    sample_state,
)
from .tiling import DEFAULT_NMS_IOU, DEFAULT_OVERLAP, DEFAULT_TILE, plan_tiles, run_tiled
from .track import CONFIRMED, Tracker, TrackerParams

from . import data as _data


@dataclass(frozen=True)
class ManagerConfig:
    zone: DangerZone
    tau_stop: float = 0.9
    t_resume_s: float = 30.0
    sigma_disparity_px: float = 0.5
    max_slew_rad_s: float = 1.5
    fallback_sigma_frac: float = 0.25  # range uncertainty of the size-based fallback


@dataclass(frozen=True)
class FusionConfig:
    model: ConfusionModel = field(default_factory=default_confusion_model)
    beta: float = 1.0
    hard: bool = False


@dataclass(frozen=True)
class TilingConfig:
    tile: int = DEFAULT_TILE
    overlap_ratio: float = DEFAULT_OVERLAP
    nms_iou: float = DEFAULT_NMS_IOU


@dataclass
class PipelineConfig:
    scenario: Scenario
    detector: str = "oracle"
    seed: int | None = None
    resolution_scale: float = 1.0
    workers: int = 1
    render: bool | None = None  # None: frames only when the detector needs them
    figures: bool = True
    output_dir: Path = Path("out")
    turbine_webhook: Path | None = None
    match_iou: float = MATCH_IOU
    motion_cfg: motion.MotionConfig = field(default_factory=motion.MotionConfig)
    tiling_cfg: TilingConfig = field(default_factory=TilingConfig)
    reference_cfg: ReferenceConfig = field(default_factory=ReferenceConfig)
    miss_model: MissModel = field(default_factory=MissModel)
    tracker_params: TrackerParams = field(default_factory=TrackerParams)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    manager_cfg: ManagerConfig | None = None

    def __post_init__(self):
        if self.detector not in DETECTOR_NAMES:
            raise ConfigError(f"detector must be one of {DETECTOR_NAMES}, got {self.detector!r}")
        if self.resolution_scale <= 0:
            raise ConfigError("resolution_scale must be > 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def wants_frames(self) -> bool:
        if self.render is not None:
            return self.render
        return self.detector != "oracle"


def _resolve_scenario(value: str, base: Path) -> tuple[Scenario, Path]:
    if value.startswith("builtin:"):
        path = _data.builtin_scenario(value.split(":", 1)[1])
    else:
        path = (base / value).resolve() if not Path(value).is_absolute() else Path(value)
    if not path.exists():
        raise ConfigError(f"scenario file not found: {path}")
    return load_scenario(path), path


def config_from_dict(obj: dict, base: Path, where: str) -> PipelineConfig:
    try:
        scenario, _ = _resolve_scenario(str(obj["scenario"]), base)
    except KeyError:
        raise ConfigError(f"{where}: missing required field 'scenario'") from None

    def sub(name: str) -> dict:
        value = obj.get(name, {})
        if not isinstance(value, dict):
            raise ConfigError(f"{where}.{name}: expected an object")
        return value

    try:
        mo = sub("motion")
        motion_cfg = motion.MotionConfig(
            threshold=int(mo.get("threshold", 12)),
            eps=float(mo.get("eps", 3.0)),
            min_pts=int(mo.get("min_pts", 4)),
            window_n=int(mo.get("window_n", 8)),
            trigger_k=int(mo.get("trigger_k", 6)),
        )
        ti = sub("tiling")
        tiling_cfg = TilingConfig(
            tile=int(ti.get("tile", DEFAULT_TILE)),
            overlap_ratio=float(ti.get("overlap_ratio", DEFAULT_OVERLAP)),
            nms_iou=float(ti.get("nms_iou", DEFAULT_NMS_IOU)),
        )
        re_ = sub("reference")
        reference_cfg = ReferenceConfig(
            threshold=float(re_.get("threshold", 0.02)),
            nms_iou=tiling_cfg.nms_iou,
        )
        mm = sub("miss_model")
        miss_model = MissModel(
            d50=float(mm.get("d50", 4.0)),
            slope=float(mm.get("slope", 1.5)),
            jitter_sigma=float(mm.get("jitter_sigma", 0.5)),
        )
        tr = sub("tracker")
        tracker_params = TrackerParams(
            q=float(tr.get("q", 25.0)),
            r=float(tr.get("r", 1.0)),
            gate_chi2=float(tr.get("gate_chi2", 9.21)),
            confirm_hits=int(tr.get("confirm_hits", 3)),
            confirm_window=int(tr.get("confirm_window", 5)),
            max_misses=int(tr.get("max_misses", 4)),
        )
        fu = sub("fusion")
        if "path" in fu:
            model = load_confusion_model((base / fu["path"]).resolve())
        elif "accuracy_near" in fu or "accuracy_far" in fu:
            from .fuse import symmetric_confusion

            model = ConfusionModel(
                near=symmetric_confusion(float(fu.get("accuracy_near", 0.982))),
                far=symmetric_confusion(float(fu.get("accuracy_far", 0.70))),
                d_near=float(fu.get("d_near", 14.0)),
                d_far=float(fu.get("d_far", 2.0)),
            )
        else:
            model = default_confusion_model()
        fusion = FusionConfig(
            model=model, beta=float(fu.get("beta", 1.0)), hard=bool(fu.get("hard", False))
        )
        ma = sub("manager")
        zone_obj = ma.get("zone")
        manager_cfg = None
        if zone_obj is not None:
            center = zone_obj["center"]
            manager_cfg = ManagerConfig(
                zone=DangerZone(
                    center=Vec3(float(center[0]), float(center[1]), float(center[2])),
                    radius_m=float(zone_obj.get("radius_m", 250.0)),
                    height_m=float(zone_obj.get("height_m", 300.0)),
                ),
                tau_stop=float(ma.get("tau_stop", 0.9)),
                t_resume_s=float(ma.get("t_resume_s", 30.0)),
                sigma_disparity_px=float(ma.get("sigma_disparity_px", 0.5)),
                max_slew_rad_s=float(ma.get("max_slew_rad_s", 1.5)),
            )
        scenario_cfg = scenario
        if "frame_rate_hz" in obj:
            scenario_cfg = replace(scenario_cfg, frame_rate_hz=float(obj["frame_rate_hz"]))
        return PipelineConfig(
            scenario=scenario_cfg,
            detector=str(obj.get("detector", "oracle")),
            seed=int(obj["seed"]) if "seed" in obj else None,
            resolution_scale=float(obj.get("resolution_scale", 1.0)),
            workers=int(obj.get("workers", 1)),
            render=obj.get("render"),
            figures=bool(obj.get("figures", True)),
            output_dir=Path(obj.get("output_dir", "out")),
            turbine_webhook=Path(obj["turbine_webhook"]) if obj.get("turbine_webhook") else None,
            match_iou=float(obj.get("match_iou", MATCH_IOU)),
            motion_cfg=motion_cfg,
            tiling_cfg=tiling_cfg,
            reference_cfg=reference_cfg,
            miss_model=miss_model,
            tracker_params=tracker_params,
            fusion=fusion,
            manager_cfg=manager_cfg,
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from None


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"{path}: {e}") from None
    return config_from_dict(obj, path.parent, str(path))


@dataclass
class RunResult:
    events: list
    commands: list
    metrics: RunMetrics
    detail: MetricsDetail
    frames_processed: int
    wall_s: float
    fps: float
    stage_seconds: dict


class _CameraStream:
    """Per-camera mutable stage state: previous frame, clutter mask, tracker."""

    def __init__(self, cam, config: PipelineConfig, id_source):
        self.cam = cam
        self.tracker = Tracker(config.tracker_params, id_source=id_source)
        w, h = cam.model.sensor
        self.mask = motion.ClutterMask(
            w, h, config.motion_cfg.window_n, config.motion_cfg.trigger_k
        )
        self.grid = plan_tiles(w, h, config.tiling_cfg.tile, config.tiling_cfg.overlap_ratio)
        self.reference = ReferenceDetector(config.reference_cfg)
        self.prev: ImageFrame | None = None
        self.truth_votes: dict[int, Counter] = {}


class _StageClock:
    def __init__(self):
        self.seconds: dict[str, float] = {}
        self._t0 = 0.0
        self._stage = None

    def start(self, stage: str):
        self._stage = stage
        self._t0 = time.perf_counter()

    def stop(self):
        if self._stage is not None:
            self.seconds[self._stage] = self.seconds.get(self._stage, 0.0) + (
                time.perf_counter() - self._t0
            )
            self._stage = None


def _unit_ray(pan: float, tilt: float) -> Vec3:
    return Vec3(math.cos(tilt) * math.cos(pan), math.cos(tilt) * math.sin(pan), math.sin(tilt))


def _pixel_ray(cam_model, u: float, v: float) -> Vec3:
    fwd, right, down = cam_model.axes()
    dx = (u - cam_model.principal_point[0]) / cam_model.focal_px
    dy = (v - cam_model.principal_point[1]) / cam_model.focal_px
    d = Vec3(
        fwd.x + right.x * dx + down.x * dy,
        fwd.y + right.y * dx + down.y * dy,
        fwd.z + right.z * dx + down.z * dy,
    )
    return d.scaled(1.0 / d.norm())


def run_scenario(
    config: PipelineConfig,
    frames_dir: Path | None = None,
    duration_limit_s: float | None = None,
) -> RunResult:
    """Run the full pipeline over the configured scenario.

    frames_dir replays pre-rendered PGM frames instead of rendering. All
    event and command records are deterministic in (config, seed).
    """
    scenario = config.scenario.scaled(config.resolution_scale)
    seed = config.seed if config.seed is not None else scenario.seed
    scenario = replace(scenario, seed=seed)
    if duration_limit_s is not None:
        scenario = replace(scenario, duration_s=min(scenario.duration_s, duration_limit_s))

    use_frames = config.wants_frames or frames_dir is not None
    n_frames = scenario.n_frames
    if frames_dir is not None:
        for cam in scenario.cameras:
            for k in range(n_frames):
                p = frames_dir / frame_filename(cam.id, k)
                if not p.exists():
                    raise ConfigError(f"replay frame missing: {p}")

    id_source = itertools.count(1).__next__
    # canonical stream order: everything the manager sees is keyed (t, camera id)
    ordered_cameras = sorted(scenario.cameras, key=lambda c: c.id)
    streams = [_CameraStream(cam, config, id_source) for cam in ordered_cameras]

    rig_spec = scenario.rigs[0] if scenario.rigs else None
    mgr_cfg = config.manager_cfg
    ptu = None
    shutdown = None
    if mgr_cfg is not None:
        shutdown = ShutdownManager(
            mgr_cfg.zone, ShutdownPolicy(mgr_cfg.tau_stop, mgr_cfg.t_resume_s)
        )
        if rig_spec is not None:
            ptu = PtuState(rig_spec.home_pan, rig_spec.home_tilt, mgr_cfg.max_slew_rad_s)

    stereo_store: dict[int, tuple[float, float]] = {}
    events: list[dict] = []
    commands: list[dict] = []
    clock = _StageClock()
    dt = 1.0 / scenario.frame_rate_hz
    wall_start = time.perf_counter()

    pool = ThreadPoolExecutor(max_workers=config.workers) if config.workers > 1 else None
    try:
        for k in range(n_frames):
            t = scenario.frame_time(k)

            # Frame acquisition (pure per camera; safe to fan out).
            frames: dict[str, ImageFrame] = {}
            if use_frames:
                clock.start("render")
                if frames_dir is not None:
                    for cam in scenario.cameras:
                        pixels = read_pgm(frames_dir / frame_filename(cam.id, k))
                        frames[cam.id] = ImageFrame(camera_id=cam.id, t_s=t, pixels=pixels)
                elif pool is not None:
                    futures = {
                        cam.id: pool.submit(render_frame, scenario, cam.id, t)
                        for cam in scenario.cameras
                    }
                    frames = {cid: f.result() for cid, f in futures.items()}
                else:
                    frames = {
                        cam.id: render_frame(scenario, cam.id, t) for cam in scenario.cameras
                    }
                clock.stop()

            snapshots: list[TrackSnapshot] = []
            for s in streams:
                cam_id = s.cam.id
                frame = frames.get(cam_id)
                filtered = None

                if frame is not None and s.prev is not None:
                    clock.start("motion")
                    change = motion.frame_diff(s.prev, frame, config.motion_cfg.threshold)
                    s.mask.update(change)
                    filtered = s.mask.filter(change)
                    clock.stop()
                    events.append(
                        {
                            "kind": "mask",
                            "frame": k,
                            "camera": cam_id,
                            "masked_fraction": s.mask.masked_fraction,
                        }
                    )

                clock.start("detect")
                if config.detector == "reference" and frame is not None:
                    detections = run_tiled(
                        s.reference,
                        frame.pixels,
                        s.grid,
                        config.tiling_cfg.nms_iou,
                        workers=config.workers,
                    )
                elif config.detector == "blob" and filtered is not None:
                    labels = motion.dbscan(
                        filtered.points, config.motion_cfg.eps, config.motion_cfg.min_pts
                    )
                    clusters = motion.clusters_from_labels(filtered.points, labels)
                    detections = clusters_to_detections(
                        clusters, config.motion_cfg.min_pts, s.prev.pixels, frame.pixels
                    )
                elif config.detector == "oracle":
                    detections = oracle_detect(scenario, cam_id, t, config.miss_model, seed)
                else:
                    detections = []
                clock.stop()

                for det in detections:
                    events.append(
                        {
                            "kind": "detection",
                            "frame": k,
                            "t": t,
                            "camera": cam_id,
                            "bbox": [det.bbox.x, det.bbox.y, det.bbox.w, det.bbox.h],
                            "objectness": det.objectness,
                            "scores": list(det.class_scores),
                        }
                    )

                clock.start("track")
                matched = s.tracker.step(t, detections)

                truth_boxes = ground_truth_boxes(scenario, cam_id, t)
                det_to_truth = dict(
                    greedy_match(
                        [(d.bbox, d.objectness) for d in detections],
                        [b.bbox for b in truth_boxes],
                        config.match_iou,
                    )
                )
                for track, det_idx in matched:
                    det = detections[det_idx]
                    truth = (
                        truth_boxes[det_to_truth[det_idx]] if det_idx in det_to_truth else None
                    )
                    true_class = class_index(truth.species) if truth else class_index("Other")
                    votes = s.truth_votes.setdefault(track.id, Counter())
                    votes[truth.target_id if truth else None] += 1
                    reported, likelihood = synthetic_classify(
                        true_class,
                        det.bbox.diag,
                        config.fusion.model,
                        seed,
                        (cam_id, k, track.id),
                        hard=config.fusion.hard,
                    )
                    s.tracker.classify_update(track, likelihood, config.fusion.beta)
                    events.append(
                        {
                            "kind": "classify",
                            "frame": k,
                            "t": t,
                            "camera": cam_id,
                            "track": track.id,
                            "true_class": true_class,
                            "reported": reported,
                            "diag": det.bbox.diag,
                        }
                    )

                for track in s.tracker.tracks:
                    events.append(
                        {
                            "kind": "track",
                            "frame": k,
                            "t": t,
                            "camera": cam_id,
                            "id": track.id,
                            "status": track.status,
                            "x": [float(v) for v in track.state.x],
                            "P_diag": [float(v) for v in np.diag(track.state.P)],
                            "posterior": [float(v) for v in track.posterior.p],
                        }
                    )

                    if track.status == CONFIRMED:
                        snapshots.append(
                            _make_snapshot(s, track, stereo_store, config)
                        )
                clock.stop()

                s.prev = frame

            # Manager phase: aim, range, decide - strictly in tick order.
            clock.start("manage")
            priority = select_priority(snapshots)
            position = None
            if priority is not None:
                events.append(
                    {
                        "kind": "priority",
                        "frame": k,
                        "t": t,
                        "track": priority.track_id,
                        "camera": priority.camera_id,
                    }
                )
                est_pos = _estimate_position(scenario, priority)
                if rig_spec is not None and ptu is not None and est_pos is not None:
                    desired = aim_angles(rig_spec.position, est_pos)
                    ptu, err = ptu_step(ptu, desired, dt)
                    if err <= rig_spec.half_fov() and priority.truth_target is not None:
                        true_pos = _target_position(scenario, priority.truth_target, t)
                        if true_pos is not None:
                            noise = stream(seed, "stereo", k, priority.track_id).normal()
                            oriented = rig_spec.rig_at(ptu.pan, ptu.tilt)
                            try:
                                dist, sig = stereo_measure(
                                    oriented, true_pos, mgr_cfg.sigma_disparity_px, noise
                                )
                                stereo_store[priority.track_id] = (dist, sig)
                                events.append(
                                    {
                                        "kind": "stereo",
                                        "frame": k,
                                        "t": t,
                                        "track": priority.track_id,
                                        "distance_m": dist,
                                        "sigma_z_m": sig,
                                    }
                                )
                            except (DegenerateDisparity, BehindCamera):
                                if priority.track_id in stereo_store:
                                    d0, s0 = stereo_store[priority.track_id]
                                    stereo_store[priority.track_id] = (d0, s0 * 2.0)
                                events.append(
                                    {
                                        "kind": "stereo_degenerate",
                                        "frame": k,
                                        "t": t,
                                        "track": priority.track_id,
                                    }
                                )
                    if priority.track_id in stereo_store:
                        dist, sig = stereo_store[priority.track_id]
                        ray = _unit_ray(ptu.pan, ptu.tilt)
                        position = rig_spec.position + ray.scaled(dist)
                        priority = replace(priority, est_distance_m=dist, est_sigma_m=sig)
                    else:
                        position = est_pos
                else:
                    position = est_pos
            if shutdown is not None:
                command = shutdown.decide(t, priority, position)
                if command is not None:
                    commands.append(
                        {
                            "t": command.t_s,
                            "action": command.action,
                            "track_id": command.track_id,
                            "posterior": command.posterior,
                            "distance_m": command.distance_m,
                            "sigma_z": command.sigma_z_m,
                        }
                    )
            clock.stop()
    finally:
        if pool is not None:
            pool.shutdown()

    wall = time.perf_counter() - wall_start
    fps = n_frames / wall if wall > 0 else float("inf")
    metrics, detail = compute_metrics(
        events, commands, scenario, config.match_iou, throughput_fps=fps
    )
    return RunResult(
        events=events,
        commands=commands,
        metrics=metrics,
        detail=detail,
        frames_processed=n_frames,
        wall_s=wall,
        fps=fps,
        stage_seconds=dict(clock.seconds),
    )


def _make_snapshot(
    s: _CameraStream, track, stereo_store: dict, config: PipelineConfig
) -> TrackSnapshot:
    """Manager-facing view of one confirmed track, with its best range estimate."""
    diag = track.last_bbox.diag if track.last_bbox is not None else None
    est = stereo_store.get(track.id)
    dist = sigma = None
    if est is not None:
        dist, sigma = est
    elif diag is not None:
        # Size-based range fallback: curve size is the box side for our
        # square boxes, hence diag / sqrt(2).
        try:
            dist = invert_diag(s.cam.curve, diag / math.sqrt(2.0))
            frac = config.manager_cfg.fallback_sigma_frac if config.manager_cfg else 0.25
            sigma = frac * dist
        except OutOfDomain:
            dist = sigma = None
    votes = s.truth_votes.get(track.id)
    truth_target = None
    if votes:
        top, _count = votes.most_common(1)[0]
        truth_target = top
    return TrackSnapshot(
        track_id=track.id,
        camera_id=s.cam.id,
        status=track.status,
        kite_posterior=track.posterior[KITE],
        center_px=track.state.position,
        bbox_diag_px=diag,
        est_distance_m=dist,
        est_sigma_m=sigma,
        truth_target=truth_target,
    )


def _estimate_position(scenario: Scenario, snapshot: TrackSnapshot) -> Vec3 | None:
    if snapshot.est_distance_m is None:
        return None
    cam = scenario.camera(snapshot.camera_id)
    ray = _pixel_ray(cam.model, *snapshot.center_px)
    return cam.model.position + ray.scaled(snapshot.est_distance_m)


def _target_position(scenario: Scenario, target_id: str, t_s: float) -> Vec3 | None:
    for tid, pos, _vel in sample_state(scenario, t_s):
        if tid == target_id:
            return pos
    return None


# ---------------------------------------------------------------------------
# Output files
# ---------------------------------------------------------------------------


def _dump_jsonl(records: list[dict], path: Path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def write_outputs(result: RunResult, outdir: Path, webhook: Path | None = None) -> dict:
    """Write events.jsonl, commands.jsonl, and metrics.csv; returns the paths."""
    from .metrics import write_metrics_csv

    outdir.mkdir(parents=True, exist_ok=True)
    events_path = outdir / "events.jsonl"
    commands_path = outdir / "commands.jsonl"
    metrics_path = outdir / "metrics.csv"
    _dump_jsonl(result.events, events_path)
    _dump_jsonl(result.commands, commands_path)
    write_metrics_csv(result.metrics, metrics_path)
    if webhook is not None:
        with open(webhook, "a") as fh:
            for rec in result.commands:
                fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
    return {"events": events_path, "commands": commands_path, "metrics": metrics_path}


# ---------------------------------------------------------------------------
# Benchmark
# ---------------------------------------------------------------------------


@dataclass
class BenchReport:
    frames: int
    wall_s: float
    fps: float
    stage_seconds: dict
    frame_rate_target_hz: float
    meets_target: bool
    resolution: str
    host: str

    def lines(self) -> list[str]:
        out = [
            f"frames processed   {self.frames}",
            f"wall time          {self.wall_s:.3f} s",
            f"throughput         {self.fps:.2f} fps",
            f"target             {self.frame_rate_target_hz:.2f} fps "
            f"({'met' if self.meets_target else 'NOT met'})",
            f"resolution         {self.resolution}",
            f"host               {self.host}",
        ]
        for stage, sec in sorted(self.stage_seconds.items()):
            out.append(f"  stage {stage:<10} {sec:.3f} s")
        return out


def bench(config: PipelineConfig, seconds: float) -> BenchReport:
    """Wall-clock throughput of the full pipeline over `seconds` of scenario time."""
    import platform

    host = f"{platform.machine()} x{__import__('os').cpu_count()}"
    scenario = config.scenario.scaled(config.resolution_scale)
    resolution = ", ".join(
        f"{c.id}:{c.model.sensor[0]}x{c.model.sensor[1]}" for c in scenario.cameras
    )
    target = scenario.frame_rate_hz
    if seconds <= 0:
        return BenchReport(0, 0.0, 0.0, {}, target, False, resolution, host)
    result = run_scenario(config, duration_limit_s=seconds)
    return BenchReport(
        frames=result.frames_processed,
        wall_s=result.wall_s,
        fps=result.fps,
        stage_seconds=result.stage_seconds,
        frame_rate_target_hz=target,
        meets_target=result.fps >= target,
        resolution=resolution,
        host=host,
    )
