import math

import numpy as np
import pytest

from skysentry.errors import DegenerateDisparity
from skysentry.geometry import CameraModel, StereoRig, Vec3, stereo_sigma
from skysentry.manager import (
    DangerZone,
    PtuState,
    ShutdownManager,
    ShutdownPolicy,
    TrackSnapshot,
    aim_angles,
    ptu_step,
    select_priority,
    stereo_measure,
    wrap_angle,
)
from skysentry.rng import stream


def snapshot(track_id=1, kite=0.95, dist=200.0, status="Confirmed") -> TrackSnapshot:
    return TrackSnapshot(
        track_id=track_id,
        camera_id="c0",
        status=status,
        kite_posterior=kite,
        center_px=(100.0, 100.0),
        bbox_diag_px=8.0,
        est_distance_m=dist,
        est_sigma_m=10.0,
        truth_target="t1",
    )


class TestSelectPriority:
    def test_single_confirmed(self):
        assert select_priority([snapshot(track_id=4)]).track_id == 4

    def test_highest_kite_wins(self):
        picked = select_priority([snapshot(1, kite=0.5), snapshot(2, kite=0.9)])
        assert picked.track_id == 2

    def test_distance_breaks_ties(self):
        picked = select_priority([snapshot(1, kite=0.9, dist=600.0), snapshot(2, kite=0.9, dist=400.0)])
        assert picked.track_id == 2

    def test_id_breaks_remaining_ties(self):
        picked = select_priority([snapshot(7, kite=0.9), snapshot(3, kite=0.9)])
        assert picked.track_id == 3

    def test_tentative_only_gives_none(self):
        assert select_priority([snapshot(status="Tentative")]) is None

    def test_permutation_invariance(self):
        snaps = [snapshot(i, kite=0.5 + 0.01 * i, dist=100.0 * i) for i in range(1, 6)]
        a = select_priority(snaps)
        b = select_priority(list(reversed(snaps)))
        assert a.track_id == b.track_id


class TestPtuStep:
    def test_rate_limited_advance(self):
        ptu = PtuState(pan=0.0, tilt=0.0, max_slew=math.radians(20.0))
        desired = (math.radians(10.0), 0.0)
        new, err = ptu_step(ptu, desired, 0.25)  # budget 5 degrees
        assert new.pan == pytest.approx(math.radians(5.0))
        assert err == pytest.approx(math.radians(5.0))

    def test_already_there(self):
        ptu = PtuState(pan=0.3, tilt=-0.1, max_slew=1.0)
        new, err = ptu_step(ptu, (0.3, -0.1), 0.25)
        assert (new.pan, new.tilt) == (0.3, -0.1)
        assert err == 0.0

    def test_pan_wraps_shortest_path(self):
        ptu = PtuState(pan=math.radians(179.0), tilt=0.0, max_slew=math.radians(8.0))
        new, err = ptu_step(ptu, (math.radians(-179.0), 0.0), 0.25)  # 2 deg away through the wrap
        assert err == pytest.approx(0.0, abs=1e-12)
        assert new.pan == pytest.approx(math.radians(-179.0))

    def test_slew_limit_never_exceeded(self):
        s = stream(3, "ptu")
        ptu = PtuState(pan=0.0, tilt=0.0, max_slew=0.7)
        for _ in range(200):
            desired = (float(s.uniform() * 2 * math.pi - math.pi), float(s.uniform() * 3 - 1.5))
            dt = 0.05 + float(s.uniform()) * 0.4
            new, _ = ptu_step(ptu, desired, dt)
            assert abs(wrap_angle(new.pan - ptu.pan)) <= 0.7 * dt + 1e-12
            assert abs(new.tilt - ptu.tilt) <= 0.7 * dt + 1e-12
            ptu = new

    def test_aim_angles(self):
        pan, tilt = aim_angles(Vec3(0, 0, 0), Vec3(100.0, 100.0, 100.0 * math.sqrt(2)))
        assert pan == pytest.approx(math.pi / 4)
        assert tilt == pytest.approx(math.pi / 4)


def make_rig(f=1000.0, baseline=1.0, aimed_at=None) -> StereoRig:
    left = CameraModel(Vec3(0, baseline / 2, 0), 0.0, 0.0, f, (500.0, 500.0), (1000, 1000))
    right = CameraModel(Vec3(0, -baseline / 2, 0), 0.0, 0.0, f, (500.0, 500.0), (1000, 1000))
    return StereoRig(left=left, right=right, baseline_m=baseline)


class TestStereoMeasure:
    def test_noiseless_on_axis_exact(self):
        rig = make_rig()
        dist, sigma = stereo_measure(rig, Vec3(500.0, 0.0, 0.0), 0.5, noise_draw=0.0)
        assert dist == pytest.approx(500.0, rel=1e-12)
        assert sigma == pytest.approx(stereo_sigma(rig, 500.0, 0.5))

    def test_sigma_formula(self):
        rig = make_rig(f=1000.0, baseline=1.0)
        _, sigma = stereo_measure(rig, Vec3(500.0, 0.0, 0.0), 0.5, noise_draw=0.0)
        assert sigma == pytest.approx(125.0)

    def test_monte_carlo_std_matches_first_order(self):
        rig = make_rig()
        point = Vec3(300.0, 0.0, 0.0)
        predicted = stereo_sigma(rig, 300.0, 0.5)
        draws = stream(41, "stereo-mc").normals(10000)
        measured = []
        for n in draws:
            d, _ = stereo_measure(rig, point, 0.5, noise_draw=float(n))
            measured.append(d)
        assert np.std(measured) == pytest.approx(predicted, rel=0.15)

    def test_negative_disparity_rejected(self):
        rig = make_rig()
        # true disparity f*B/Z = 2 px; a -5 sigma draw at sigma 1 flips it negative
        with pytest.raises(DegenerateDisparity):
            stereo_measure(rig, Vec3(500.0, 0.0, 0.0), 1.0, noise_draw=-5.0)


class TestDangerZone:
    def test_contains(self):
        zone = DangerZone(center=Vec3(100.0, 0.0, 0.0), radius_m=50.0, height_m=200.0)
        assert zone.contains(Vec3(120.0, 10.0, 100.0))
        assert not zone.contains(Vec3(160.0, 0.0, 100.0))
        assert not zone.contains(Vec3(100.0, 0.0, 250.0))
        assert not zone.contains(Vec3(100.0, 0.0, -1.0))


class TestShutdownManager:
    def zone(self):
        return DangerZone(center=Vec3(0.0, 0.0, 0.0), radius_m=100.0, height_m=300.0)

    def run_sequence(self, conditions, dt=0.25, t_resume=30.0):
        mgr = ShutdownManager(self.zone(), ShutdownPolicy(tau_stop=0.9, t_resume_s=t_resume))
        inside = Vec3(0.0, 0.0, 50.0)
        outside = Vec3(500.0, 0.0, 50.0)
        commands = []
        for k, cond in enumerate(conditions):
            cmd = mgr.decide(
                k * dt,
                snapshot(kite=0.95),
                inside if cond else outside,
            )
            if cmd is not None:
                commands.append(cmd)
        return commands

    def test_stop_when_inside_and_confident(self):
        cmds = self.run_sequence([False, True])
        assert [c.action for c in cmds] == ["STOP"]
        assert cmds[0].track_id == 1

    def test_no_stop_outside_zone(self):
        assert self.run_sequence([False] * 10) == []

    def test_low_posterior_never_stops(self):
        mgr = ShutdownManager(self.zone())
        cmd = mgr.decide(0.0, snapshot(kite=0.5), Vec3(0.0, 0.0, 50.0))
        assert cmd is None

    def test_resume_after_clear_interval(self):
        n_false = int(31.0 / 0.25)
        cmds = self.run_sequence([True] + [False] * n_false)
        assert [c.action for c in cmds] == ["STOP", "RUN"]
        stop, run = cmds
        assert run.t_s - stop.t_s >= 30.0

    def test_29s_clear_then_retrip_holds_stop(self):
        # clears for 29 s (116 ticks), re-trips: hysteresis must hold
        seq = [True] + [False] * 116 + [True] * 8
        cmds = self.run_sequence(seq)
        assert [c.action for c in cmds] == ["STOP"]

    def test_commands_alternate_and_increase_in_time(self):
        seq = ([True] * 4 + [False] * 125) * 3
        cmds = self.run_sequence(seq)
        assert [c.action for c in cmds] == ["STOP", "RUN"] * 3
        ts = [c.t_s for c in cmds]
        assert all(a < b for a, b in zip(ts, ts[1:]))

    def test_zone_crossing_scripted(self):
        # a confident track crosses the zone; exactly one STOP before the
        # closest approach and a RUN at least t_resume after exit
        mgr = ShutdownManager(self.zone(), ShutdownPolicy(tau_stop=0.9, t_resume_s=30.0))
        commands = []
        closest_t = None
        best = math.inf
        for k in range(4 * 240):
            t = k * 0.25
            x = -300.0 + 4.0 * t  # crosses x in [-100, 100] for t in [50, 100]
            pos = Vec3(x, 0.0, 50.0)
            if abs(x) < best:
                best = abs(x)
                closest_t = t
            cmd = mgr.decide(t, snapshot(kite=0.97), pos)
            if cmd:
                commands.append(cmd)
        assert [c.action for c in commands] == ["STOP", "RUN"]
        stop, run = commands
        assert stop.t_s < closest_t
        exit_t = 100.0
        assert run.t_s >= exit_t + 30.0
