import numpy as np
import pytest

from skysentry.errors import MismatchedRun
from skysentry.geometry import BBox, CalibCurve, CameraModel, Vec3
from skysentry.metrics import (
    RunMetrics,
    average_precision_101,
    compute_metrics,
    greedy_match,
    write_metrics_csv,
)
from skysentry.synthsky import Scenario, SceneCamera, TargetTruth, ground_truth_boxes


def scenario_with_targets(targets, duration=2.5) -> Scenario:
    cam = SceneCamera(
        id="c0",
        model=CameraModel(Vec3(0, 0, 10), 0.0, 0.0, 600.0, (320.0, 256.0), (640, 512)),
        kind="static",
        curve=CalibCurve(600.0, 0.0, 0.0),
    )
    return Scenario(
        duration_s=duration,
        frame_rate_hz=4.0,
        cameras=(cam,),
        rigs=(),
        targets=tuple(targets),
        clutter=(),
        pixel_noise_sigma=0.0,
        seed=1,
    )


def target(tid="t1", species="Bird", x=150.0, y=0.0, z=10.0, duration=2.5, size=1.0):
    return TargetTruth(
        id=tid,
        species=species,
        size_m=size,
        waypoints=((0.0, Vec3(x, y, z)), (duration, Vec3(x, y, z))),
    )


def detection_event(frame, bbox, camera="c0", objectness=0.9):
    return {
        "kind": "detection",
        "frame": frame,
        "t": frame / 4.0,
        "camera": camera,
        "bbox": list(bbox),
        "objectness": objectness,
        "scores": [0.25] * 4,
    }


class TestGreedyMatch:
    def test_strongest_claims_first(self):
        dets = [(BBox(0, 0, 10, 10), 0.5), (BBox(1, 1, 10, 10), 0.9)]
        truths = [BBox(0, 0, 10, 10)]
        matches = greedy_match(dets, truths)
        assert matches == [(1, 0)]

    def test_iou_threshold_respected(self):
        dets = [(BBox(50, 50, 10, 10), 0.9)]
        truths = [BBox(0, 0, 10, 10)]
        assert greedy_match(dets, truths) == []


class TestAveragePrecision:
    def test_perfect_detector(self):
        ap = average_precision_101(np.array([0.9, 0.8]), np.array([True, True]), 2)
        assert ap == pytest.approx(1.0)

    def test_empty_detections(self):
        assert average_precision_101(np.array([]), np.array([], dtype=bool), 5) == 0.0

    def test_no_truth_is_nan(self):
        assert np.isnan(average_precision_101(np.array([0.9]), np.array([True]), 0))


class TestComputeMetrics:
    def test_hand_counted_precision_recall(self):
        # 4 truth boxes (one target over 4 frames); detections: 2 true + 1 false
        sc = scenario_with_targets([target()], duration=1.0)
        truth0 = ground_truth_boxes(sc, "c0", 0.0)[0].bbox
        events = [
            detection_event(0, [truth0.x, truth0.y, truth0.w, truth0.h]),
            detection_event(1, [truth0.x + 0.5, truth0.y, truth0.w, truth0.h]),
            detection_event(2, [500.0, 400.0, 4.0, 4.0]),  # false positive
        ]
        metrics, _ = compute_metrics(events, [], sc)
        assert metrics.n_truth_boxes == 4
        assert metrics.precision == pytest.approx(2.0 / 3.0)
        assert metrics.recall == pytest.approx(0.5)

    def test_empty_run_is_all_na(self):
        sc = scenario_with_targets([])
        metrics, _ = compute_metrics([], [], sc)
        assert metrics.precision is None
        assert metrics.recall is None
        assert metrics.bin_rates["near_0_350m"] is None
        assert metrics.fused_accuracy is None

    def test_brute_force_recount_small_scenario(self):
        # 10-frame scenario, hand-checkable: recount TP/FP/recall naively
        near = target("near", x=150.0)
        far = target("far", x=500.0, size=2.0)
        sc = scenario_with_targets([near, far], duration=2.5)
        events = []
        for k in range(10):
            boxes = ground_truth_boxes(sc, "c0", k / 4.0)
            for b in boxes:
                if b.target_id == "near" or k % 2 == 0:  # far seen half the time
                    bb = b.bbox
                    events.append(detection_event(k, [bb.x, bb.y, bb.w, bb.h]))
        metrics, _ = compute_metrics(events, [], sc)
        n_truth = 20
        n_det = 10 + 5
        assert metrics.n_truth_boxes == n_truth
        assert metrics.precision == pytest.approx(1.0)
        assert metrics.recall == pytest.approx(15 / 20)
        assert metrics.bin_rates["near_0_350m"] == 1.0
        assert metrics.bin_rates["far_351_700m"] == 1.0

    def test_bin_rates_from_misses(self):
        far = target("far", x=500.0, size=2.0)
        sc = scenario_with_targets([far], duration=2.5)
        metrics, _ = compute_metrics([], [], sc)  # no detections at all
        assert metrics.bin_rates["far_351_700m"] == 0.0
        assert metrics.bin_rates["near_0_350m"] is None

    def test_mismatched_run_rejected(self):
        sc = scenario_with_targets([target()])
        events = [detection_event(99, [0, 0, 4, 4])]
        with pytest.raises(MismatchedRun):
            compute_metrics(events, [], sc)
        events = [detection_event(0, [0, 0, 4, 4], camera="ghost")]
        with pytest.raises(MismatchedRun):
            compute_metrics(events, [], sc)

    def test_command_summary(self):
        sc = scenario_with_targets([])
        commands = [
            {"t": 3.25, "action": "STOP", "track_id": 1, "posterior": 0.95, "distance_m": 210.0, "sigma_z_m": 4.0},
            {"t": 60.0, "action": "RUN", "track_id": None, "posterior": None, "distance_m": None, "sigma_z_m": None},
        ]
        metrics, _ = compute_metrics([], commands, sc)
        assert metrics.n_stop == 1 and metrics.n_run == 1
        assert metrics.first_stop_t_s == 3.25
        assert metrics.first_stop_distance_m == 210.0


class TestCsv:
    def test_na_markers_not_nan(self, tmp_path):
        metrics = RunMetrics()
        path = tmp_path / "metrics.csv"
        write_metrics_csv(metrics, path)
        text = path.read_text()
        assert "NA" in text
        assert "nan" not in text.lower()
        assert text.splitlines()[0] == "metric,value"
