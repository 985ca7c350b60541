"""Classical motion pipeline: frame differencing, density clustering of
changed pixels, persistent-clutter masking, and fixed-size ROI extraction."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import cv2
import numpy as np

from .errors import DimensionMismatch
from .synthsky import ImageFrame

ROI_SIZE = 128

UNVISITED = -2
NOISE = -1

_DILATE_KERNEL = np.ones((3, 3), dtype=np.uint8)


@dataclass(frozen=True)
class MotionConfig:
    """Tunables for the classical path. These are reconstruction defaults,
    chosen so the shipped scenarios separate targets from noise; none of
    them is a measured constant."""

    threshold: int = 12  # gray levels
    eps: float = 3.0  # px
    min_pts: int = 4
    window_n: int = 8  # frames
    trigger_k: int = 6  # changes within window to mask a pixel


@dataclass(frozen=True)
class ChangeSet:
    """Pixels that changed between two frames of one camera stream.

    points is an (n, 2) int array of (x, y), unique, in row-major scan order.
    """

    camera_id: str
    t_prev: float
    t_curr: float
    points: np.ndarray
    width: int
    height: int

    def __len__(self) -> int:
        return len(self.points)

    def with_points(self, points: np.ndarray) -> "ChangeSet":
        return ChangeSet(self.camera_id, self.t_prev, self.t_curr, points, self.width, self.height)


def frame_diff(prev: ImageFrame, curr: ImageFrame, threshold: int) -> ChangeSet:
    """Pixels where |curr - prev| exceeds threshold. Symmetric in its frames."""
    if prev.pixels.shape != curr.pixels.shape or prev.camera_id != curr.camera_id:
        raise DimensionMismatch(
            f"frame pair mismatch: {prev.camera_id}{prev.pixels.shape} vs "
            f"{curr.camera_id}{curr.pixels.shape}"
        )
    diff = cv2.absdiff(prev.pixels, curr.pixels)
    ys, xs = np.nonzero(diff > threshold)
    points = np.column_stack([xs, ys]).astype(np.int32)
    return ChangeSet(
        camera_id=curr.camera_id,
        t_prev=prev.t_s,
        t_curr=curr.t_s,
        points=points,
        width=curr.width,
        height=curr.height,
    )


def dbscan(points: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """Density-based clustering of 2-D points under Euclidean distance.

    Returns a label per point: -1 for noise, otherwise a cluster id assigned
    in first-discovery order. Clusters are seeded and expanded in point
    index order, so the labeling is deterministic for a given input order.
    Neighborhoods use d <= eps and include the point itself.

    Unique non-negative integer points (the frame-differencing case) take a
    vectorized raster path; anything else uses the grid walk. Both produce
    identical labels on inputs valid for either.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if min_pts < 1:
        raise ValueError("min_pts must be >= 1")
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    n = len(pts)
    if n == 0:
        return np.full(0, UNVISITED, dtype=np.int64)
    as_int = pts.astype(np.int64)
    if (
        np.array_equal(as_int, pts)
        and np.all(as_int >= 0)
        and len(np.unique(as_int, axis=0)) == n
    ):
        extent = (as_int[:, 0].max() - as_int[:, 0].min() + 1) * (
            as_int[:, 1].max() - as_int[:, 1].min() + 1
        )
        if extent <= max(1 << 22, 64 * n):  # raster stays a sane size
            return _dbscan_pixels(as_int, eps, min_pts)
    return _dbscan_general(pts, eps, min_pts)


def _disc_offsets(eps: float) -> np.ndarray:
    r = int(math.floor(eps))
    span = np.arange(-r, r + 1)
    dx, dy = np.meshgrid(span, span)
    inside = dx * dx + dy * dy <= eps * eps
    return np.column_stack([dx[inside], dy[inside]])


def _dbscan_pixels(pts: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """Raster variant: neighbor counts by disc filtering, clusters by
    level-synchronous flood fill from each seed. Same semantics as the
    point-walk version (seed scan and claims in index order)."""
    n = len(pts)
    x0, y0 = pts.min(axis=0)
    local = pts - np.array([x0, y0])
    w = int(local[:, 0].max()) + 1
    h = int(local[:, 1].max()) + 1
    index_raster = np.full((h, w), -1, dtype=np.int64)
    index_raster[local[:, 1], local[:, 0]] = np.arange(n)

    offsets = _disc_offsets(eps)
    kernel = np.zeros((int(2 * math.floor(eps)) + 1, int(2 * math.floor(eps)) + 1), np.float32)
    r = int(math.floor(eps))
    kernel[offsets[:, 1] + r, offsets[:, 0] + r] = 1.0
    occupied = (index_raster >= 0).astype(np.uint8)
    counts = cv2.filter2D(occupied.astype(np.float32), -1, kernel, borderType=cv2.BORDER_CONSTANT)
    core = np.rint(counts[local[:, 1], local[:, 0]]).astype(np.int64) >= min_pts

    labels = np.full(n, UNVISITED, dtype=np.int64)
    cluster = 0
    for i in range(n):
        if labels[i] != UNVISITED:
            continue
        if not core[i]:
            labels[i] = NOISE
            continue
        labels[i] = cluster
        frontier = local[i : i + 1]
        while len(frontier):
            cand = (frontier[:, None, :] + offsets[None, :, :]).reshape(-1, 2)
            ok = (
                (cand[:, 0] >= 0) & (cand[:, 0] < w) & (cand[:, 1] >= 0) & (cand[:, 1] < h)
            )
            cand = cand[ok]
            idx = index_raster[cand[:, 1], cand[:, 0]]
            idx = np.unique(idx[idx >= 0])
            idx = idx[(labels[idx] == UNVISITED) | (labels[idx] == NOISE)]
            fresh = idx[labels[idx] == UNVISITED]
            labels[idx] = cluster  # claims former noise as border points too
            expandable = fresh[core[fresh]]
            frontier = local[expandable]
        cluster += 1
    return labels


def _dbscan_general(pts: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    n = len(pts)
    labels = np.full(n, UNVISITED, dtype=np.int64)

    # Grid hash with cell size eps: neighbors live in the 3x3 cell block.
    cells: dict[tuple[int, int], list[int]] = {}
    cx = np.floor(pts[:, 0] / eps).astype(np.int64)
    cy = np.floor(pts[:, 1] / eps).astype(np.int64)
    for i in range(n):
        cells.setdefault((int(cx[i]), int(cy[i])), []).append(i)

    eps2 = eps * eps

    def neighbors(i: int) -> list[int]:
        found = []
        xi, yi = pts[i]
        for gx in (cx[i] - 1, cx[i], cx[i] + 1):
            for gy in (cy[i] - 1, cy[i], cy[i] + 1):
                for j in cells.get((gx, gy), ()):
                    dx = pts[j, 0] - xi
                    dy = pts[j, 1] - yi
                    if dx * dx + dy * dy <= eps2:
                        found.append(j)
        found.sort()
        return found

    cluster = 0
    for i in range(n):
        if labels[i] != UNVISITED:
            continue
        nb = neighbors(i)
        if len(nb) < min_pts:
            labels[i] = NOISE
            continue
        labels[i] = cluster
        queue = deque(j for j in nb if j != i)
        while queue:
            j = queue.popleft()
            if labels[j] == NOISE:
                labels[j] = cluster  # border point claimed by this cluster
            if labels[j] != UNVISITED:
                continue
            labels[j] = cluster
            nb_j = neighbors(j)
            if len(nb_j) >= min_pts:
                queue.extend(nb_j)
        cluster += 1
    return labels


def clusters_from_labels(points: np.ndarray, labels: np.ndarray) -> list[np.ndarray]:
    """Member points per cluster id, in cluster-id order."""
    out = []
    for cid in range(labels.max() + 1 if len(labels) else 0):
        out.append(points[labels == cid])
    return out


class ClutterMask:
    """Per-pixel suppression of persistently changing regions.

    A ring buffer of the last window_n change planes feeds a per-pixel
    counter; a pixel is masked once it changed in >= trigger_k of them. The
    mask is dilated by 1 px to catch clutter edges. Mutable, owned by
    exactly one camera stream.
    """

    def __init__(self, width: int, height: int, window_n: int = 8, trigger_k: int = 6):
        if not (0 < trigger_k <= window_n):
            raise ValueError("need 0 < trigger_k <= window_n")
        self.width = width
        self.height = height
        self.window_n = window_n
        self.trigger_k = trigger_k
        self._planes: deque[np.ndarray] = deque()
        self._count = np.zeros((height, width), dtype=np.uint8)
        self.mask = np.zeros((height, width), dtype=bool)

    def frames_seen(self) -> int:
        return len(self._planes)

    @property
    def masked_fraction(self) -> float:
        return float(self.mask.mean())

    def update(self, change: ChangeSet) -> None:
        if change.width != self.width or change.height != self.height:
            raise DimensionMismatch(
                f"change set {change.width}x{change.height} vs mask {self.width}x{self.height}"
            )
        plane = np.zeros((self.height, self.width), dtype=np.uint8)
        if len(change.points):
            plane[change.points[:, 1], change.points[:, 0]] = 1
        self._planes.append(plane)
        self._count += plane
        if len(self._planes) > self.window_n:
            self._count -= self._planes.popleft()
        hot = (self._count >= self.trigger_k).astype(np.uint8)
        self.mask = cv2.dilate(hot, _DILATE_KERNEL).astype(bool)

    def filter(self, change: ChangeSet) -> ChangeSet:
        """Drop change pixels at masked locations; others pass untouched."""
        if len(change.points) == 0:
            return change
        keep = ~self.mask[change.points[:, 1], change.points[:, 0]]
        return change.with_points(change.points[keep])


def update_clutter_mask(mask: ClutterMask, change: ChangeSet) -> ClutterMask:
    mask.update(change)
    return mask


@dataclass(frozen=True)
class Roi:
    """128x128 crop centered on a cluster centroid (window clamped in-frame)."""

    center: tuple[int, int]
    crop: np.ndarray
    frame_t: float
    cluster_size: int


def dump_rois(rois: list[Roi], outdir, prefix: str = "roi") -> list:
    """Write ROI crops as PGM files plus an index.jsonl with one record per
    crop (frame time, center, cluster size)."""
    import json
    from pathlib import Path

    from .synthsky import write_pgm

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    with open(outdir / "index.jsonl", "a") as index:
        for i, roi in enumerate(rois):
            path = outdir / f"{prefix}_{roi.frame_t:.3f}_{i}.pgm"
            write_pgm(path, roi.crop)
            index.write(
                json.dumps(
                    {
                        "file": path.name,
                        "frame_t": roi.frame_t,
                        "center": list(roi.center),
                        "cluster_size": roi.cluster_size,
                    },
                    separators=(",", ":"),
                )
                + "\n"
            )
            paths.append(path)
    return paths


def extract_rois(clusters: list[np.ndarray], frame: ImageFrame) -> list[Roi]:
    """One ROI per cluster, in cluster order. The crop window shifts to stay
    inside the frame; the recorded center is the unclamped centroid."""
    rois = []
    h, w = frame.pixels.shape
    for members in clusters:
        if len(members) == 0:
            continue
        cx = int(round(float(members[:, 0].mean())))
        cy = int(round(float(members[:, 1].mean())))
        half = ROI_SIZE // 2
        # Clipped index grids replicate edges when the frame is smaller than a crop.
        xs = np.clip(np.arange(cx - half, cx - half + ROI_SIZE), 0, w - 1)
        ys = np.clip(np.arange(cy - half, cy - half + ROI_SIZE), 0, h - 1)
        if w >= ROI_SIZE:
            x0 = min(max(cx - half, 0), w - ROI_SIZE)
            xs = np.arange(x0, x0 + ROI_SIZE)
        if h >= ROI_SIZE:
            y0 = min(max(cy - half, 0), h - ROI_SIZE)
            ys = np.arange(y0, y0 + ROI_SIZE)
        crop = frame.pixels[np.ix_(ys, xs)]
        rois.append(Roi(center=(cx, cy), crop=crop, frame_t=frame.t_s, cluster_size=len(members)))
    return rois
