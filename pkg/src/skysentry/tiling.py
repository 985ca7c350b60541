"""Sliced inference over overlapping tiles with duplicate suppression.

A fixed-receptive-field detector runs on overlapping crops of a large
frame; detections are remapped to frame coordinates and merged with greedy
non-maximum suppression. The overlap guarantees every small object appears
whole in at least one tile.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import TileDetectionError
from .geometry import BBox

DEFAULT_TILE = 300
DEFAULT_OVERLAP = 0.25
DEFAULT_NMS_IOU = 0.45


@dataclass(frozen=True)
class Detection:
    """Detector output box with objectness in [0, 1] and normalized class scores."""

    bbox: BBox
    objectness: float
    class_scores: tuple[float, float, float, float] = (0.25, 0.25, 0.25, 0.25)

    def __post_init__(self):
        if not (0.0 <= self.objectness <= 1.0):
            raise ValueError(f"objectness {self.objectness} outside [0, 1]")
        if abs(sum(self.class_scores) - 1.0) > 1e-6:
            raise ValueError("class_scores must sum to 1")

    def offset(self, dx: float, dy: float) -> "Detection":
        return Detection(
            bbox=BBox(self.bbox.x + dx, self.bbox.y + dy, self.bbox.w, self.bbox.h),
            objectness=self.objectness,
            class_scores=self.class_scores,
        )


@dataclass(frozen=True)
class TileGrid:
    width: int
    height: int
    tile: int
    overlap_ratio: float
    offsets: tuple[tuple[int, int], ...]


def _axis_origins(dim: int, tile: int, stride: int) -> list[int]:
    if dim <= tile:
        return [0]
    count = math.ceil((dim - tile) / stride) + 1
    return [min(k * stride, dim - tile) for k in range(count)]


def plan_tiles(
    width: int,
    height: int,
    tile: int = DEFAULT_TILE,
    overlap_ratio: float = DEFAULT_OVERLAP,
) -> TileGrid:
    """Tile origins covering the frame.

    stride = floor(tile * (1 - overlap_ratio)); origins advance by stride
    with the final row/column clamped flush to the frame edge. Frames not
    larger than the tile get a single origin at (0, 0).
    """
    if tile <= 0:
        raise ValueError("tile must be > 0")
    if not (0.0 <= overlap_ratio < 1.0):
        raise ValueError("overlap_ratio must be in [0, 1)")
    stride = max(1, int(tile * (1.0 - overlap_ratio)))
    xs = _axis_origins(width, tile, stride)
    ys = _axis_origins(height, tile, stride)
    offsets = tuple((x, y) for y in ys for x in xs)
    return TileGrid(width=width, height=height, tile=tile, overlap_ratio=overlap_ratio, offsets=offsets)


def iou(b1: BBox, b2: BBox) -> float:
    """Intersection over union of two boxes."""
    x0 = max(b1.x, b2.x)
    y0 = max(b1.y, b2.y)
    x1 = min(b1.x + b1.w, b2.x + b2.w)
    y1 = min(b1.y + b1.h, b2.y + b2.h)
    if x1 <= x0 or y1 <= y0:
        return 0.0
    inter = (x1 - x0) * (y1 - y0)
    return inter / (b1.area + b2.area - inter)


def nms(detections: list[Detection], iou_threshold: float = DEFAULT_NMS_IOU) -> list[Detection]:
    """Greedy suppression: strongest first, drop anything overlapping a keeper.

    Ordering is by descending objectness with ties broken by lower x then y,
    so results are stable under input permutation.
    """
    if not (0.0 < iou_threshold <= 1.0):
        raise ValueError("iou_threshold must be in (0, 1]")
    if len(detections) <= 1:
        return list(detections)
    x = np.array([d.bbox.x for d in detections])
    y = np.array([d.bbox.y for d in detections])
    x2 = np.array([d.bbox.x + d.bbox.w for d in detections])
    y2 = np.array([d.bbox.y + d.bbox.h for d in detections])
    area = (x2 - x) * (y2 - y)
    score = np.array([d.objectness for d in detections])
    order = np.lexsort((y, x, -score))
    kept = []
    while len(order):
        i = order[0]
        kept.append(int(i))
        rest = order[1:]
        ix = np.maximum(x[i], x[rest])
        iy = np.maximum(y[i], y[rest])
        ix2 = np.minimum(x2[i], x2[rest])
        iy2 = np.minimum(y2[i], y2[rest])
        inter = np.clip(ix2 - ix, 0.0, None) * np.clip(iy2 - iy, 0.0, None)
        overlap = inter / (area[i] + area[rest] - inter)
        order = rest[overlap < iou_threshold]
    return [detections[i] for i in kept]


def run_tiled(
    detector,
    frame_pixels: np.ndarray,
    grid: TileGrid,
    iou_threshold: float = DEFAULT_NMS_IOU,
    workers: int = 1,
) -> list[Detection]:
    """Run detector(tile, origin) over every tile and merge with nms.

    Tile results are gathered in grid order and sorted before suppression,
    so the output is identical for any worker count. Detections crossing a
    tile border are kept; duplicate removal is nms's job. Detector failures
    are re-raised with the offending tile index attached.
    """
    h, w = frame_pixels.shape

    def detect_one(index: int) -> list[Detection]:
        x, y = grid.offsets[index]
        crop = frame_pixels[y : min(y + grid.tile, h), x : min(x + grid.tile, w)]
        try:
            found = detector(crop, (x, y))
        except Exception as e:  # noqa: BLE001 - annotate and re-raise
            raise TileDetectionError(index, str(e)) from e
        return [d.offset(x, y) for d in found]

    if workers > 1 and len(grid.offsets) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_tile = list(pool.map(detect_one, range(len(grid.offsets))))
    else:
        per_tile = [detect_one(i) for i in range(len(grid.offsets))]

    merged = [d for tile in per_tile for d in tile]
    merged.sort(key=lambda d: (-d.objectness, d.bbox.x, d.bbox.y))
    return nms(merged, iou_threshold)
