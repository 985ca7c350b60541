"""Run evaluation: detection matching, precision/recall/AP, distance-binned
track detection rates, classification confusion, and fusion timing."""

from __future__ import annotations

import csv
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MismatchedRun
from .fuse import CLASS_NAMES
from .geometry import BBox
from .synthsky import Scenario, ground_truth_boxes
from .tiling import iou

MATCH_IOU = 0.3  # tiny objects starve at the usual 0.5

DISTANCE_BINS = (("near_0_350m", 0.0, 350.0), ("far_351_700m", 350.0, 700.0))

CONFIDENCE_THRESHOLD = 0.99


@dataclass
class RunMetrics:
    n_frames: int = 0
    n_detections: int = 0
    n_truth_boxes: int = 0
    n_tracks_confirmed: int = 0
    precision: float | None = None
    recall: float | None = None
    average_precision: float | None = None
    bin_rates: dict = field(default_factory=dict)  # bin name -> rate | None
    confusion: np.ndarray = field(default_factory=lambda: np.zeros((4, 4), dtype=np.int64))
    per_frame_accuracy: float | None = None
    fused_accuracy: float | None = None
    ttc_median_s: float | None = None
    ttc_p99_s: float | None = None
    ttc_reached_fraction: float | None = None
    masked_fraction: float | None = None
    throughput_fps: float | None = None
    n_stop: int = 0
    n_run: int = 0
    first_stop_t_s: float | None = None
    first_stop_distance_m: float | None = None


@dataclass
class MetricsDetail:
    """Per-run payloads for plots: PR curve, per-track posterior series, etc."""

    pr_recall: np.ndarray | None = None
    pr_precision: np.ndarray | None = None
    posterior_series: dict = field(default_factory=dict)  # track -> (ts, 4xN array)
    raw_series: dict = field(default_factory=dict)  # track -> (ts, reported one-hot kite prob)
    track_truth: dict = field(default_factory=dict)  # track -> class index
    ttc_values: list = field(default_factory=list)
    bin_counts: dict = field(default_factory=dict)  # bin -> (detected, total)


def greedy_match(
    detections: list[tuple[BBox, float]],
    truths: list[BBox],
    iou_threshold: float = MATCH_IOU,
) -> list[tuple[int, int]]:
    """Match detections (bbox, score) to truth boxes within one frame.

    Strongest detections claim first; each truth is claimed at most once.
    Returns (detection_index, truth_index) pairs.
    """
    order = sorted(range(len(detections)), key=lambda i: (-detections[i][1], i))
    claimed: set[int] = set()
    matches = []
    for di in order:
        best_iou, best_ti = iou_threshold, None
        for ti, truth in enumerate(truths):
            if ti in claimed:
                continue
            val = iou(detections[di][0], truth)
            if val >= best_iou:
                best_iou, best_ti = val, ti
        if best_ti is not None:
            claimed.add(best_ti)
            matches.append((di, best_ti))
    return matches


def average_precision_101(scores: np.ndarray, is_tp: np.ndarray, n_truth: int) -> float:
    """101-point interpolated AP from per-detection scores and TP flags."""
    if n_truth == 0:
        return float("nan")
    if len(scores) == 0:
        return 0.0
    order = np.argsort(-scores, kind="stable")
    tp = np.cumsum(is_tp[order])
    fp = np.cumsum(~is_tp[order])
    recall = tp / n_truth
    precision = tp / np.maximum(tp + fp, 1)
    ap = 0.0
    for r in np.linspace(0.0, 1.0, 101):
        mask = recall >= r
        ap += float(precision[mask].max()) if mask.any() else 0.0
    return ap / 101.0


def _percentile(sorted_vals: list[float], q: float) -> float:
    idx = min(len(sorted_vals) - 1, max(0, math.ceil(q * len(sorted_vals)) - 1))
    return sorted_vals[idx]


def compute_metrics(
    events: list[dict],
    commands: list[dict],
    scenario: Scenario,
    iou_threshold: float = MATCH_IOU,
    throughput_fps: float | None = None,
) -> tuple[RunMetrics, MetricsDetail]:
    """Evaluate one run's event log against the scenario's ground truth.

    Raises MismatchedRun when the log references cameras or frames the
    scenario does not have.
    """
    m = RunMetrics(throughput_fps=throughput_fps)
    detail = MetricsDetail()
    camera_ids = {c.id for c in scenario.cameras}
    n_frames = scenario.n_frames

    detections_by_frame: dict[tuple[int, str], list[tuple[BBox, float]]] = defaultdict(list)
    mask_fracs: list[float] = []
    track_events: dict[int, list[dict]] = defaultdict(list)
    classify_events: dict[int, list[dict]] = defaultdict(list)

    for ev in events:
        kind = ev.get("kind")
        if kind == "detection":
            frame, camera = int(ev["frame"]), ev["camera"]
            if camera not in camera_ids or not (0 <= frame < n_frames):
                raise MismatchedRun(f"detection event for unknown frame {frame}/{camera}")
            bbox = BBox(*ev["bbox"])
            detections_by_frame[(frame, camera)].append((bbox, float(ev["objectness"])))
        elif kind == "mask":
            mask_fracs.append(float(ev["masked_fraction"]))
        elif kind == "track":
            track_events[int(ev["id"])].append(ev)
        elif kind == "classify":
            classify_events[int(ev["track"])].append(ev)

    m.n_frames = n_frames

    # Truth boxes per (frame, camera), regenerated deterministically.
    truth_by_frame: dict[tuple[int, str], list] = {}
    n_truth = 0
    for k in range(n_frames):
        t = scenario.frame_time(k)
        for cam in scenario.cameras:
            boxes = ground_truth_boxes(scenario, cam.id, t)
            truth_by_frame[(k, cam.id)] = boxes
            n_truth += len(boxes)
    m.n_truth_boxes = n_truth

    # Global detection scoring: greedy per-frame matching, then AP over all scores.
    scores: list[float] = []
    tp_flags: list[bool] = []
    detected_target_frames: set[tuple[str, int]] = set()
    for key, dets in sorted(detections_by_frame.items()):
        truths = truth_by_frame.get(key, [])
        matches = greedy_match(dets, [b.bbox for b in truths], iou_threshold)
        matched_dets = {di for di, _ in matches}
        for di, (bbox, score) in enumerate(dets):
            scores.append(score)
            tp_flags.append(di in matched_dets)
        for di, ti in matches:
            detected_target_frames.add((truths[ti].target_id, key[0]))
    m.n_detections = len(scores)
    tp = sum(tp_flags)
    m.precision = tp / len(scores) if scores else None
    m.recall = tp / n_truth if n_truth else None
    ap = average_precision_101(np.array(scores), np.array(tp_flags, dtype=bool), n_truth)
    m.average_precision = None if math.isnan(ap) else ap

    if scores and n_truth:
        order = np.argsort(-np.array(scores), kind="stable")
        flags = np.array(tp_flags, dtype=bool)[order]
        detail.pr_recall = np.cumsum(flags) / n_truth
        detail.pr_precision = np.cumsum(flags) / np.arange(1, len(flags) + 1)

    # Distance-binned track detection: a target counts as detected in a bin
    # when >= 1 matched detection falls in a frame where it sits in that bin.
    for name, lo, hi in DISTANCE_BINS:
        residents: set[str] = set()
        detected: set[str] = set()
        for (k, cam_id), boxes in truth_by_frame.items():
            for box in boxes:
                if lo < box.distance_m <= hi or (lo == 0.0 and box.distance_m <= hi):
                    residents.add(box.target_id)
                    if (box.target_id, k) in detected_target_frames:
                        detected.add(box.target_id)
        detail.bin_counts[name] = (len(detected), len(residents))
        m.bin_rates[name] = len(detected) / len(residents) if residents else None

    # Classification: per-frame confusion plus per-track fused outcomes.
    correct = total = 0
    for track_id, evs in classify_events.items():
        votes = Counter(int(e["true_class"]) for e in evs)
        truth_class = votes.most_common(1)[0][0]
        detail.track_truth[track_id] = truth_class
        for e in evs:
            m.confusion[int(e["true_class"]), int(e["reported"])] += 1
            total += 1
            correct += int(e["true_class"]) == int(e["reported"])
    m.per_frame_accuracy = correct / total if total else None

    fused_ok = fused_total = 0
    ttc: list[float] = []
    reached = 0
    for track_id, evs in sorted(track_events.items()):
        statuses = [e["status"] for e in evs]
        if "Confirmed" not in statuses:
            continue
        m.n_tracks_confirmed += 1
        ts = [float(e["t"]) for e in evs]
        posts = np.array([e["posterior"] for e in evs])
        detail.posterior_series[track_id] = (ts, posts)
        if track_id not in detail.track_truth:
            continue
        truth_class = detail.track_truth[track_id]
        fused_total += 1
        fused_ok += int(np.argmax(posts[-1])) == truth_class
        t_confirm = ts[statuses.index("Confirmed")]
        hit = next(
            (t - t_confirm for t, p in zip(ts, posts[:, truth_class]) if t >= t_confirm and p >= CONFIDENCE_THRESHOLD),
            None,
        )
        if hit is not None:
            reached += 1
            ttc.append(hit)
    m.fused_accuracy = fused_ok / fused_total if fused_total else None
    detail.ttc_values = sorted(ttc)
    if fused_total:
        m.ttc_reached_fraction = reached / fused_total
    if ttc:
        m.ttc_median_s = _percentile(detail.ttc_values, 0.5)
        m.ttc_p99_s = _percentile(detail.ttc_values, 0.99)

    # Raw (unfused) per-frame kite report series for the smoothing comparison.
    for track_id, evs in classify_events.items():
        ts = [float(e["t"]) for e in evs]
        raw = [1.0 if int(e["reported"]) == 0 else 0.0 for e in evs]
        detail.raw_series[track_id] = (ts, raw)

    m.masked_fraction = float(np.mean(mask_fracs)) if mask_fracs else None

    m.n_stop = sum(1 for c in commands if c["action"] == "STOP")
    m.n_run = sum(1 for c in commands if c["action"] == "RUN")
    for c in commands:
        if c["action"] == "STOP":
            m.first_stop_t_s = float(c["t"])
            m.first_stop_distance_m = c.get("distance_m")
            break
    return m, detail


def _fmt(value) -> str:
    if value is None:
        return "NA"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_metrics_csv(metrics: RunMetrics, path: str | Path) -> None:
    """Flat key,value CSV; undefined rates are written as NA, never NaN."""
    rows: list[tuple[str, str]] = [
        ("n_frames", _fmt(metrics.n_frames)),
        ("n_detections", _fmt(metrics.n_detections)),
        ("n_truth_boxes", _fmt(metrics.n_truth_boxes)),
        ("n_tracks_confirmed", _fmt(metrics.n_tracks_confirmed)),
        ("precision", _fmt(metrics.precision)),
        ("recall", _fmt(metrics.recall)),
        ("average_precision", _fmt(metrics.average_precision)),
    ]
    for name, _, _ in DISTANCE_BINS:
        rows.append((f"detection_rate_{name}", _fmt(metrics.bin_rates.get(name))))
    rows += [
        ("per_frame_accuracy", _fmt(metrics.per_frame_accuracy)),
        ("fused_accuracy", _fmt(metrics.fused_accuracy)),
        ("time_to_confidence_median_s", _fmt(metrics.ttc_median_s)),
        ("time_to_confidence_p99_s", _fmt(metrics.ttc_p99_s)),
        ("time_to_confidence_reached_fraction", _fmt(metrics.ttc_reached_fraction)),
        ("masked_area_fraction", _fmt(metrics.masked_fraction)),
        ("throughput_fps", _fmt(metrics.throughput_fps)),
        ("commands_stop", _fmt(metrics.n_stop)),
        ("commands_run", _fmt(metrics.n_run)),
        ("first_stop_t_s", _fmt(metrics.first_stop_t_s)),
        ("first_stop_distance_m", _fmt(metrics.first_stop_distance_m)),
    ]
    for i, true_name in enumerate(CLASS_NAMES):
        for j, rep_name in enumerate(CLASS_NAMES):
            rows.append((f"confusion_{true_name}_{rep_name}", str(int(metrics.confusion[i, j]))))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        writer.writerows(rows)
