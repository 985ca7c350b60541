"""Decision hub: priority target selection, pan-tilt slewing, stereo range
measurements, danger-zone evaluation, and turbine commands with hysteresis.

The manager is the single serialization point of the system: it consumes
immutable track snapshots in (t, camera) order and its transitions are
deterministic in arrival order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .geometry import StereoRig, Vec3, project, stereo_sigma, triangulate


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]; values already in range pass through untouched."""
    if -math.pi < a <= math.pi:
        return a
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


@dataclass(frozen=True)
class PtuState:
    pan: float
    tilt: float
    max_slew: float  # rad/s

    def __post_init__(self):
        if not (-math.pi <= self.pan <= math.pi):
            raise ValueError("pan must be within [-pi, pi]")
        if not (-math.pi / 2 <= self.tilt <= math.pi / 2):
            raise ValueError("tilt must be within [-pi/2, pi/2]")
        if self.max_slew <= 0:
            raise ValueError("max_slew must be > 0")


def ptu_step(
    ptu: PtuState, desired: tuple[float, float], dt_s: float
) -> tuple[PtuState, float]:
    """Move each axis toward desired by at most max_slew * dt_s.

    Pan takes the shortest path around the wrap; tilt is clamped to its
    mechanical range. Returns the new state and the residual angular error
    (Euclidean over both axes).
    """
    if dt_s <= 0:
        raise ValueError("dt_s must be > 0")
    budget = ptu.max_slew * dt_s
    pan_err = wrap_angle(desired[0] - ptu.pan)
    tilt_err = min(max(desired[1], -math.pi / 2), math.pi / 2) - ptu.tilt
    pan_move = min(max(pan_err, -budget), budget)
    tilt_move = min(max(tilt_err, -budget), budget)
    new = replace(ptu, pan=wrap_angle(ptu.pan + pan_move), tilt=ptu.tilt + tilt_move)
    residual = math.hypot(pan_err - pan_move, tilt_err - tilt_move)
    return new, residual


def aim_angles(origin: Vec3, target: Vec3) -> tuple[float, float]:
    """(pan, tilt) pointing from origin toward target."""
    d = target - origin
    pan = math.atan2(d.y, d.x)
    tilt = math.atan2(d.z, math.hypot(d.x, d.y))
    return pan, tilt


@dataclass(frozen=True)
class DangerZone:
    """Vertical cylinder of protected airspace above the turbine base."""

    center: Vec3
    radius_m: float
    height_m: float

    def __post_init__(self):
        if self.radius_m <= 0 or self.height_m <= 0:
            raise ValueError("radius_m and height_m must be > 0")

    def contains(self, p: Vec3) -> bool:
        dx = p.x - self.center.x
        dy = p.y - self.center.y
        if dx * dx + dy * dy > self.radius_m * self.radius_m:
            return False
        return self.center.z <= p.z <= self.center.z + self.height_m


@dataclass(frozen=True)
class TurbineCommand:
    t_s: float
    action: str  # "STOP" | "RUN"
    track_id: int | None
    posterior: float | None
    distance_m: float | None
    sigma_z_m: float | None


@dataclass(frozen=True)
class TrackSnapshot:
    """Immutable view of one confirmed track as the manager sees it."""

    track_id: int
    camera_id: str
    status: str
    kite_posterior: float
    center_px: tuple[float, float]
    bbox_diag_px: float | None
    est_distance_m: float | None
    est_sigma_m: float | None
    truth_target: str | None  # simulation-side link for stereo ranging


def select_priority(snapshots: list[TrackSnapshot]) -> TrackSnapshot | None:
    """Highest kite posterior among confirmed tracks.

    Ties go to the smaller estimated distance, then the smaller id, so the
    choice is invariant to input ordering. None when nothing is confirmed.
    """
    confirmed = [s for s in snapshots if s.status == "Confirmed"]
    if not confirmed:
        return None
    def key(s: TrackSnapshot):
        dist = s.est_distance_m if s.est_distance_m is not None else math.inf
        return (-s.kite_posterior, dist, s.track_id)
    return min(confirmed, key=key)


def stereo_measure(
    rig: StereoRig,
    target_point: Vec3,
    sigma_disparity_px: float,
    noise_draw: float,
) -> tuple[float, float]:
    """Simulated stereo range to a world point.

    Disparity comes from the two projections plus noise_draw * sigma
    (noise_draw is a unit-normal sample supplied by the caller so streams
    stay keyed and replayable). Raises DegenerateDisparity when the noisy
    disparity is not positive.
    """
    ul, _, _ = project(rig.left, target_point)
    ur, _, _ = project(rig.right, target_point)
    disparity = (ul - ur) + noise_draw * sigma_disparity_px
    distance = triangulate(rig, disparity)  # raises DegenerateDisparity on <= 0
    return distance, stereo_sigma(rig, distance, sigma_disparity_px)


@dataclass(frozen=True)
class ShutdownPolicy:
    tau_stop: float = 0.9
    t_resume_s: float = 30.0


class ShutdownManager:
    """Hysteresis state machine issuing alternating STOP/RUN commands.

    STOP when the kite posterior reaches tau_stop and the estimated position
    is inside the zone; RUN only after that condition has been false
    continuously for t_resume_s.
    """

    def __init__(self, zone: DangerZone, policy: ShutdownPolicy = ShutdownPolicy()):
        self.zone = zone
        self.policy = policy
        self.action = "RUN"
        self._false_since: float | None = None
        self._last_t: float | None = None

    def decide(
        self,
        t_s: float,
        snapshot: TrackSnapshot | None,
        position: Vec3 | None,
    ) -> TurbineCommand | None:
        """Evaluate the danger condition at t_s; returns a command only on a
        transition (None means no change)."""
        if self._last_t is not None and t_s < self._last_t:
            raise ValueError("decide() timestamps must be non-decreasing")
        self._last_t = t_s

        condition = (
            snapshot is not None
            and position is not None
            and snapshot.kite_posterior >= self.policy.tau_stop
            and self.zone.contains(position)
        )

        if condition:
            self._false_since = None
            if self.action == "RUN":
                self.action = "STOP"
                return TurbineCommand(
                    t_s=t_s,
                    action="STOP",
                    track_id=snapshot.track_id,
                    posterior=snapshot.kite_posterior,
                    distance_m=snapshot.est_distance_m,
                    sigma_z_m=snapshot.est_sigma_m,
                )
            return None

        if self.action == "STOP":
            if self._false_since is None:
                self._false_since = t_s
            if t_s - self._false_since >= self.policy.t_resume_s:
                self.action = "RUN"
                self._false_since = None
                return TurbineCommand(
                    t_s=t_s, action="RUN", track_id=None, posterior=None,
                    distance_m=None, sigma_z_m=None,
                )
        return None
