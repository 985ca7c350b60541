"""Multi-object tracking: constant-velocity Kalman filtering per track,
gated greedy association, and hit/miss lifecycle management.

State is [px, py, vx, vy] in sensor pixels and pixels/second. The tracker
owns all mutable track state for one camera stream (single writer);
snapshots handed out are copies.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NumericalFailure
from .fuse import ClassPosterior, bayes_update
from .geometry import BBox
from .tiling import Detection

TENTATIVE = "Tentative"
CONFIRMED = "Confirmed"
LOST = "Lost"

_H = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])


@dataclass(frozen=True)
class TrackerParams:
    """Defaults give stable tracking at 4 Hz for targets up to ~50 px/s."""

    q: float = 25.0  # white-acceleration intensity, (px/s^2)^2
    r: float = 1.0  # measurement variance, px^2
    gate_chi2: float = 9.21  # chi-square (2 dof) at 99%
    confirm_hits: int = 3  # M
    confirm_window: int = 5  # N
    max_misses: int = 4  # K consecutive misses -> Lost
    init_velocity_sigma: float = 50.0  # px/s, spawn covariance


@dataclass(frozen=True)
class KalmanState:
    x: np.ndarray  # (4,)
    P: np.ndarray  # (4, 4)
    q: float
    r: float

    def __post_init__(self):
        if self.q <= 0 or self.r <= 0:
            raise ValueError("q and r must be > 0")

    @property
    def position(self) -> tuple[float, float]:
        return float(self.x[0]), float(self.x[1])

    @property
    def velocity(self) -> tuple[float, float]:
        return float(self.x[2]), float(self.x[3])


def make_state(
    position: tuple[float, float], params: TrackerParams = TrackerParams()
) -> KalmanState:
    """Fresh state at a detection: zero velocity, inflated covariance."""
    x = np.array([position[0], position[1], 0.0, 0.0])
    v2 = params.init_velocity_sigma**2
    P = np.diag([params.r, params.r, v2, v2])
    return KalmanState(x=x, P=P, q=params.q, r=params.r)


def _predict(x: np.ndarray, P: np.ndarray, F: np.ndarray, Q: np.ndarray):
    x_new = F @ x
    P_new = F @ P @ F.T + Q
    return x_new, 0.5 * (P_new + P_new.T)


def _update(x: np.ndarray, P: np.ndarray, H: np.ndarray, R: np.ndarray, z: np.ndarray):
    """Standard linear-Gaussian measurement update (Joseph-form covariance)."""
    innovation = z - H @ x
    S = H @ P @ H.T + R
    try:
        S_inv = np.linalg.inv(S)
    except np.linalg.LinAlgError:
        raise NumericalFailure("innovation covariance is singular") from None
    maha2 = float(innovation @ S_inv @ innovation)
    K = P @ H.T @ S_inv
    x_new = x + K @ innovation
    I_KH = np.eye(len(x)) - K @ H
    P_new = I_KH @ P @ I_KH.T + K @ R @ K.T
    return x_new, 0.5 * (P_new + P_new.T), innovation, maha2


def cv_transition(dt_s: float) -> tuple[np.ndarray, np.ndarray]:
    """Constant-velocity F and white-acceleration Q for a step of dt_s (unit q)."""
    F = np.eye(4)
    F[0, 2] = dt_s
    F[1, 3] = dt_s
    dt2 = dt_s * dt_s
    qpp = dt2 * dt2 / 4.0
    qpv = dt2 * dt_s / 2.0
    Q = np.array(
        [
            [qpp, 0.0, qpv, 0.0],
            [0.0, qpp, 0.0, qpv],
            [qpv, 0.0, dt2, 0.0],
            [0.0, qpv, 0.0, dt2],
        ]
    )
    return F, Q


def kf_predict(state: KalmanState, dt_s: float) -> KalmanState:
    """Advance the state dt_s seconds under the constant-velocity model."""
    if dt_s <= 0:
        raise ValueError("dt_s must be > 0")
    F, Q = cv_transition(dt_s)
    x, P = _predict(state.x, state.P, F, state.q * Q)
    return replace(state, x=x, P=P)


def kf_update(
    state: KalmanState, measurement: tuple[float, float]
) -> tuple[KalmanState, np.ndarray, float]:
    """Fuse a position measurement; returns (state, innovation, mahalanobis^2)."""
    z = np.asarray(measurement, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("measurement must be finite")
    R = state.r * np.eye(2)
    x, P, innovation, maha2 = _update(state.x, state.P, _H, R, z)
    return replace(state, x=x, P=P), innovation, maha2


def gating_distance(state: KalmanState, measurement: tuple[float, float]) -> float:
    """Squared Mahalanobis distance of a measurement from the predicted position."""
    z = np.asarray(measurement, dtype=np.float64)
    innovation = z - _H @ state.x
    S = _H @ state.P @ _H.T + state.r * np.eye(2)
    try:
        return float(innovation @ np.linalg.solve(S, innovation))
    except np.linalg.LinAlgError:
        raise NumericalFailure("innovation covariance is singular") from None


@dataclass
class Track:
    id: int
    state: KalmanState
    status: str = TENTATIVE
    hits: int = 1
    consecutive_misses: int = 0
    posterior: ClassPosterior = field(default_factory=ClassPosterior.uniform)
    history: list = field(default_factory=list)  # (t, (x, y), BBox | None)
    window: deque = field(default_factory=lambda: deque(maxlen=5))
    last_bbox: BBox | None = None

    def record(self, t_s: float, bbox: BBox | None) -> None:
        self.history.append((t_s, self.state.position, bbox))
        if bbox is not None:
            self.last_bbox = bbox


def associate(
    tracks: list[Track], detections: list[Detection], gate_chi2: float
) -> tuple[list[tuple[int, int]], list[int], list[int]]:
    """Greedy one-to-one assignment over globally sorted candidate pairs.

    Pairs are ranked by squared Mahalanobis distance (ties broken by track
    id then detection index); pairs beyond the gate are never matched.
    Returns (matches as (track_index, det_index), unmatched track indices,
    unmatched detection indices).
    """
    if gate_chi2 <= 0:
        raise ValueError("gate_chi2 must be > 0")
    if not tracks or not detections:
        return [], list(range(len(tracks))), list(range(len(detections)))

    # Batched gate matrix: with H selecting position, S is just the top-left
    # 2x2 of P plus R, inverted in closed form per track.
    pos = np.array([t.state.x[:2] for t in tracks])  # (T, 2)
    S = np.array([t.state.P[:2, :2] + t.state.r * np.eye(2) for t in tracks])  # (T, 2, 2)
    det_s = S[:, 0, 0] * S[:, 1, 1] - S[:, 0, 1] * S[:, 1, 0]
    if np.any(det_s <= 0):
        raise NumericalFailure("innovation covariance is singular")
    z = np.array([d.bbox.center for d in detections])  # (D, 2)
    dx = z[None, :, 0] - pos[:, None, 0]
    dy = z[None, :, 1] - pos[:, None, 1]
    inv00 = (S[:, 1, 1] / det_s)[:, None]
    inv11 = (S[:, 0, 0] / det_s)[:, None]
    inv01 = (-S[:, 0, 1] / det_s)[:, None]
    m2 = dx * dx * inv00 + 2.0 * dx * dy * inv01 + dy * dy * inv11  # (T, D)

    ti_all, di_all = np.nonzero(m2 <= gate_chi2)
    track_ids = np.array([t.id for t in tracks])
    order = np.lexsort((di_all, track_ids[ti_all], m2[ti_all, di_all]))
    used_tracks: set[int] = set()
    used_dets: set[int] = set()
    matches = []
    for idx in order:
        ti, di = int(ti_all[idx]), int(di_all[idx])
        if ti in used_tracks or di in used_dets:
            continue
        matches.append((ti, di))
        used_tracks.add(ti)
        used_dets.add(di)
    unmatched_tracks = [i for i in range(len(tracks)) if i not in used_tracks]
    unmatched_dets = [i for i in range(len(detections)) if i not in used_dets]
    return matches, unmatched_tracks, unmatched_dets


def step_lifecycle(
    tracks: list[Track],
    matched_track_indices: set[int],
    unmatched_detections: list[Detection],
    t_s: float,
    params: TrackerParams,
    take_id,
) -> tuple[list[Track], list[Track]]:
    """Apply hit/miss bookkeeping and spawn tracks for unmatched detections.

    Confirmation needs confirm_hits hits within the last confirm_window
    outcomes; max_misses consecutive misses retire a track. take_id yields
    fresh track ids (strictly increasing, never reused). Returns
    (alive, newly lost).
    """
    alive: list[Track] = []
    lost: list[Track] = []
    for i, track in enumerate(tracks):
        if i in matched_track_indices:
            track.hits += 1
            track.consecutive_misses = 0
            track.window.append(True)
        else:
            track.consecutive_misses += 1
            track.window.append(False)
            track.record(t_s, None)
        if track.status == TENTATIVE and sum(track.window) >= params.confirm_hits:
            track.status = CONFIRMED
        if track.consecutive_misses >= params.max_misses:
            track.status = LOST
            lost.append(track)
        else:
            alive.append(track)
    for det in unmatched_detections:
        track = Track(
            id=take_id(),
            state=make_state(det.bbox.center, params),
            window=deque([True], maxlen=params.confirm_window),
        )
        track.record(t_s, det.bbox)
        alive.append(track)
    return alive, lost


class Tracker:
    """Per-camera multi-object tracker; single writer of its track state.

    Pass a shared id_source (a callable yielding fresh ints) to keep ids
    unique across several camera streams in one run.
    """

    def __init__(self, params: TrackerParams = TrackerParams(), id_source=None):
        self.params = params
        self.tracks: list[Track] = []
        self.finished: list[Track] = []
        self._id_source = id_source
        self._next_id = 1
        self._last_t: float | None = None

    def _take_id(self) -> int:
        if self._id_source is not None:
            return self._id_source()
        nid = self._next_id
        self._next_id += 1
        return nid

    def step(self, t_s: float, detections: list[Detection]) -> list[tuple[Track, int]]:
        """One frame: predict, associate, update, lifecycle.

        Returns (track, detection_index) pairs for this frame's matches,
        after measurement updates, so callers can run classification on them.
        """
        if self._last_t is not None:
            dt = t_s - self._last_t
            if dt <= 0:
                raise ValueError("timestamps must strictly increase")
            for track in self.tracks:
                track.state = kf_predict(track.state, dt)
        self._last_t = t_s

        matches, _, unmatched_dets = associate(self.tracks, detections, self.params.gate_chi2)
        matched_pairs = []
        for ti, di in matches:
            track = self.tracks[ti]
            det = detections[di]
            track.state, _, _ = kf_update(track.state, det.bbox.center)
            track.record(t_s, det.bbox)
            matched_pairs.append((track, di))

        alive, lost = step_lifecycle(
            self.tracks,
            {ti for ti, _ in matches},
            [detections[i] for i in unmatched_dets],
            t_s,
            self.params,
            self._take_id,
        )
        self.tracks = alive
        self.finished.extend(lost)
        return matched_pairs

    def classify_update(self, track: Track, likelihood: np.ndarray, beta: float = 1.0) -> None:
        track.posterior = bayes_update(track.posterior, likelihood, beta)
