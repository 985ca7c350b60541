"""Detector implementations behind one contract: detect(tile, origin) -> detections.

Three interchangeable detectors:
  * reference - deterministic multi-scale difference-of-Gaussians matched
    filter, the learned-detector stand-in for image-path experiments;
  * oracle - samples detections from ground truth with a size-dependent
    miss probability and center jitter, for pipeline experiments decoupled
    from image quality;
  * blob - the legacy motion/differencing baseline, kept for comparison,
    including its masked-region blind spots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import cv2
import numpy as np

from . import motion
from .geometry import BBox
from .rng import stream
from .synthsky import ImageFrame, Scenario, ground_truth_boxes
from .tiling import Detection, nms

DETECTOR_NAMES = ("reference", "oracle", "blob")

_UNIFORM = (0.25, 0.25, 0.25, 0.25)
_MAX3 = np.ones((3, 3), dtype=np.uint8)


# ---------------------------------------------------------------------------
# Reference detector
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReferenceConfig:
    # Response threshold on dark blobs over unit-range luminance; the noise
    # floor of the band-pass response sits well below this for sigma <= 4.
    threshold: float = 0.02
    scales: tuple[float, ...] = (1.0, 2.0, 4.0)
    nms_iou: float = 0.45
    response_norm: float = 0.30  # response mapped to objectness 1.0
    max_per_tile: int = 64  # strongest responses kept per tile


def _blur(img: np.ndarray, sigma: float) -> np.ndarray:
    k = 2 * int(3.0 * sigma + 0.5) + 1
    return cv2.GaussianBlur(img, (k, k), sigma, borderType=cv2.BORDER_REPLICATE)


def _blur_coarse(img: np.ndarray, sigma: float) -> np.ndarray:
    """Large-sigma blur computed at half resolution; the result only serves
    as the low-pass reference of the widest band, where the approximation
    error is far below the detection threshold."""
    h, w = img.shape
    if min(h, w) < 16:
        return _blur(img, sigma)
    small = cv2.resize(img, ((w + 1) // 2, (h + 1) // 2), interpolation=cv2.INTER_AREA)
    small = _blur(small, sigma / 2.0)
    return cv2.resize(small, (w, h), interpolation=cv2.INTER_LINEAR)


def reference_detect(
    tile: np.ndarray, origin: tuple[int, int] = (0, 0), config: ReferenceConfig = ReferenceConfig()
) -> list[Detection]:
    """Band-pass blob detection on one 8-bit tile.

    Dark-on-bright blobs are scored by difference-of-Gaussians responses at
    three scales; local maxima above threshold become detections with box
    side 3 sigma of the best-responding scale and objectness proportional to
    the response. Class scores stay uniform - classification is downstream.
    """
    th, tw = tile.shape
    img = (np.float32(255.0) - tile) * np.float32(1.0 / 255.0)
    blurred = [_blur(img, s) for s in config.scales]
    blurred.append(_blur_coarse(img, config.scales[-1] * 2.0))
    dogs = [blurred[i] - blurred[i + 1] for i in range(len(config.scales))]
    best = np.maximum(dogs[0], dogs[1])
    np.maximum(best, dogs[2], out=best)
    if float(best.max()) <= config.threshold:  # quiet tile, nothing can fire
        return []

    local_max = cv2.dilate(best, _MAX3) <= best
    ys, xs = np.nonzero(local_max & (best > config.threshold))
    if len(xs) > config.max_per_tile:
        resp = best[ys, xs]
        order = np.lexsort((ys, xs, -resp))[: config.max_per_tile]
        xs, ys = xs[order], ys[order]
    scale_idx = np.argmax(np.stack([d[ys, xs] for d in dogs]), axis=0)
    detections = []
    for x, y, si in zip(xs, ys, scale_idx):
        sigma = config.scales[int(si)]
        side = 3.0 * sigma
        bx = min(max(x - side / 2.0, 0.0), tw - side) if tw > side else 0.0
        by = min(max(y - side / 2.0, 0.0), th - side) if th > side else 0.0
        objectness = min(1.0, float(best[y, x]) / config.response_norm)
        detections.append(
            Detection(
                bbox=BBox(bx, by, min(side, tw), min(side, th)),
                objectness=objectness,
                class_scores=_UNIFORM,
            )
        )
    return nms(detections, config.nms_iou)


class ReferenceDetector:
    """Stateless tile detector satisfying the detector contract."""

    def __init__(self, config: ReferenceConfig = ReferenceConfig()):
        self.config = config

    def __call__(self, tile: np.ndarray, origin: tuple[int, int]) -> list[Detection]:
        return reference_detect(tile, origin, self.config)


# ---------------------------------------------------------------------------
# Oracle detector
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MissModel:
    """Size-dependent detection probability plus center jitter.

    p(diag) = 1 / (1 + exp(-slope * (diag - d50))). Defaults are calibrated
    against the shipped scenarios so near targets are found reliably and
    far ones intermittently.
    """

    d50: float = 4.0
    slope: float = 1.5
    jitter_sigma: float = 0.5

    def __post_init__(self):
        if self.d50 <= 0 or self.slope <= 0:
            raise ValueError("d50 and slope must be > 0")

    def detection_probability(self, diag_px: float) -> float:
        return 1.0 / (1.0 + math.exp(-self.slope * (diag_px - self.d50)))


def oracle_detect(
    scenario: Scenario,
    camera_id: str,
    t_s: float,
    miss_model: MissModel,
    seed: int,
) -> list[Detection]:
    """Detections sampled from ground truth under the miss model.

    Each true box is reported with probability p(diag) and its center
    jittered by the model's Gaussian. Draws are keyed by
    (seed, camera, frame, target), so they replay identically regardless of
    evaluation order.
    """
    k = scenario.frame_index(t_s)
    out = []
    for box in ground_truth_boxes(scenario, camera_id, t_s):
        s = stream(seed, "oracle", camera_id, k, box.target_id)
        p = miss_model.detection_probability(box.bbox.diag)
        if s.uniform() >= p:
            continue
        jitter = s.normals(2) * miss_model.jitter_sigma
        out.append(
            Detection(
                bbox=BBox(
                    box.bbox.x + float(jitter[0]),
                    box.bbox.y + float(jitter[1]),
                    box.bbox.w,
                    box.bbox.h,
                ),
                objectness=min(1.0, max(0.0, p)),
                class_scores=_UNIFORM,
            )
        )
    return out


# ---------------------------------------------------------------------------
# Blob baseline
# ---------------------------------------------------------------------------


def _extent_box(members: np.ndarray) -> BBox:
    x0, y0 = members.min(axis=0)
    x1, y1 = members.max(axis=0)
    return BBox(float(x0), float(y0), float(x1 - x0 + 1), float(y1 - y0 + 1))


def clusters_to_detections(
    clusters: list[np.ndarray],
    min_pts: int,
    prev_pixels: np.ndarray | None = None,
    curr_pixels: np.ndarray | None = None,
) -> list[Detection]:
    """Cluster extents as detections; objectness grows with cluster size.

    Given the frame pair, each cluster is split into its darkening (object
    arrived) and brightening (object left) pixel groups, yielding separate
    boxes at the old and new positions of a moving blob instead of one box
    spanning both.
    """
    out = []
    for members in clusters:
        if len(members) == 0:
            continue
        objectness = min(1.0, len(members) / min_pts * 0.25)
        groups = [members]
        if prev_pixels is not None and curr_pixels is not None:
            darker = (
                curr_pixels[members[:, 1], members[:, 0]]
                < prev_pixels[members[:, 1], members[:, 0]]
            )
            split = [members[darker], members[~darker]]
            floor = max(1, min_pts // 2)
            split = [g for g in split if len(g) >= floor]
            if split:
                groups = split
        for g in groups:
            out.append(
                Detection(bbox=_extent_box(g), objectness=objectness, class_scores=_UNIFORM)
            )
    return out


class BlobBaselineDetector:
    """Differencing + clustering baseline over one camera stream.

    Owns the stream's clutter mask. Cannot see anything over masked
    (persistently moving) regions - that blind spot is the point of
    comparison with the tiled detector.
    """

    def __init__(self, width: int, height: int, config: motion.MotionConfig = motion.MotionConfig()):
        self.config = config
        self.mask = motion.ClutterMask(width, height, config.window_n, config.trigger_k)

    def detect_pair(self, prev: ImageFrame, curr: ImageFrame) -> list[Detection]:
        change = motion.frame_diff(prev, curr, self.config.threshold)
        motion.update_clutter_mask(self.mask, change)
        filtered = self.mask.filter(change)
        labels = motion.dbscan(filtered.points, self.config.eps, self.config.min_pts)
        clusters = motion.clusters_from_labels(filtered.points, labels)
        return clusters_to_detections(
            clusters, self.config.min_pts, prev.pixels, curr.pixels
        )


def blob_baseline_detect(
    prev: ImageFrame,
    curr: ImageFrame,
    config: motion.MotionConfig = motion.MotionConfig(),
    detector: BlobBaselineDetector | None = None,
) -> list[Detection]:
    """One-shot form of the baseline; pass a detector to keep mask state."""
    if detector is None:
        detector = BlobBaselineDetector(curr.width, curr.height, config)
    return detector.detect_pair(prev, curr)
