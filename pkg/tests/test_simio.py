import warnings

import numpy as np
import pytest

from occtrack.errors import ParseError, SpecInvalid
from occtrack.filter import TrackEstimate, TrackOutput
from occtrack.metrics import TrajectorySet
from occtrack.occlusion import BBox2D, CameraModel, OcclusionConfig, PodCurve, project_bbox, visibility_ratio
from occtrack.simio import (
    DetectionFrame,
    ObjectSpec,
    ScenarioSpec,
    crossing_spec,
    generate_scenario,
    ground_truth,
    read_detections,
    read_gt,
    read_results,
    read_seqinfo,
    simulate_detections,
    write_detections,
    write_gt,
    write_results,
    write_seqinfo,
)

CFG = OcclusionConfig()


def static_spec(n=20, **kw):
    return ScenarioSpec(objects=(ObjectSpec(1, x=0.0, z=8.0),), n_frames=n, **kw)


class TestScenario:
    def test_static_object(self):
        sc = generate_scenario(static_spec())
        first = sc.states[0][1]
        for s in sc.states:
            np.testing.assert_array_equal(s[1], first)

    def test_deterministic(self):
        spec = crossing_spec(n_frames=60, crossing_frame=30, occlusion_frames=10, accel_std=0.2)
        a, b = generate_scenario(spec, 4), generate_scenario(spec, 4)
        for sa, sb in zip(a.states, b.states):
            assert sa.keys() == sb.keys()
            for k in sa:
                np.testing.assert_array_equal(sa[k], sb[k])

    def test_crossing_occludes(self):
        spec = crossing_spec(n_frames=100, crossing_frame=50, occlusion_frames=10)
        sc = generate_scenario(spec)
        vis = [visibility_ratio(s[1], [s[2]], sc.camera, CFG) for s in sc.states]
        assert vis[49] == 0.0
        assert vis[0] == 1.0 and vis[-1] == 1.0
        # Full occlusion lasts for the requested duration (one frame of slack).
        assert abs(sum(v == 0.0 for v in vis) - 10) <= 1

    @pytest.mark.parametrize(
        "spec",
        [
            ScenarioSpec(objects=(), n_frames=0),
            ScenarioSpec(objects=(ObjectSpec(1, 0, 5), ObjectSpec(1, 1, 5))),
            ScenarioSpec(objects=(ObjectSpec(1, 0, 5, start=5, end=3),)),
            ScenarioSpec(objects=(ObjectSpec(1, 0, 5, width=0.0),)),
            ScenarioSpec(objects=(), clutter_rate=-1.0),
        ],
    )
    def test_invalid(self, spec):
        with pytest.raises(SpecInvalid):
            generate_scenario(spec)

    def test_front_too_narrow(self):
        with pytest.raises(SpecInvalid):
            crossing_spec(w_front=0.1)

    def test_ground_truth_visibility_is_exact(self):
        spec = crossing_spec(n_frames=80, crossing_frame=40, occlusion_frames=10)
        sc = generate_scenario(spec)
        gt = ground_truth(sc, CFG)
        for k, s in enumerate(sc.states, start=1):
            assert gt.vis(1, k) == visibility_ratio(s[1], [s[2]], sc.camera, CFG)


class TestDetections:
    def test_perfect_detector(self):
        sc = generate_scenario(static_spec(clutter_rate=0.0, noise_std=(0, 0, 0, 0)))
        frames = simulate_detections(sc, PodCurve.constant(1.0), CFG, 0)
        bb = project_bbox(sc.states[0][1], sc.camera)
        for fr in frames:
            assert len(fr.measurements) == 1
            np.testing.assert_allclose(fr.measurements[0], bb.as_array())

    def test_blind_detector(self):
        sc = generate_scenario(static_spec(n=200, clutter_rate=2.0))
        frames = simulate_detections(sc, PodCurve.constant(0.0), CFG, 0)
        # Clutter only: every box lies inside the clutter size ranges.
        for fr in frames:
            for z in fr.measurements:
                assert 10.0 <= z[2] <= 200.0 and 20.0 <= z[3] <= 500.0
        assert sum(len(fr.measurements) for fr in frames) > 0

    def test_deterministic(self):
        sc = generate_scenario(crossing_spec(n_frames=40, crossing_frame=20, occlusion_frames=6))
        a = simulate_detections(sc, PodCurve.constant(0.7), CFG, 3)
        b = simulate_detections(sc, PodCurve.constant(0.7), CFG, 3)
        for fa, fb in zip(a, b):
            np.testing.assert_array_equal(np.array(fa.measurements), np.array(fb.measurements))

    def test_frame_index(self):
        with pytest.raises(ValueError):
            DetectionFrame(0)


class TestFiles:
    def test_empty_detection_file(self, tmp_path):
        p = tmp_path / "det.txt"
        p.write_text("")
        assert read_detections(p) == []

    def test_single_row(self, tmp_path):
        p = tmp_path / "det.txt"
        p.write_text("3,-1,10.5,20,30,40,0.9,-1,-1,-1\n")
        frames = read_detections(p)
        assert [f.frame for f in frames] == [1, 2, 3]
        np.testing.assert_array_equal(frames[2].measurements[0], [10.5, 20, 30, 40])
        assert frames[2].confidences == [0.9]

    def test_n_frames_pads(self, tmp_path):
        p = tmp_path / "det.txt"
        p.write_text("1,-1,1,2,3,4,1\n")
        assert len(read_detections(p, n_frames=5)) == 5

    @pytest.mark.parametrize("text,line", [("1,-1,1,2,3\n", 1), ("1,-1,1,2,3,4,1\n2,-1,x,2,3,4,1\n", 2), ("0,-1,1,2,3,4,1\n", 1)])
    def test_parse_errors(self, tmp_path, text, line):
        p = tmp_path / "det.txt"
        p.write_text(text)
        with pytest.raises(ParseError) as info:
            read_detections(p)
        assert info.value.line == line

    def test_detection_round_trip(self, tmp_path):
        sc = generate_scenario(crossing_spec(n_frames=30, crossing_frame=15, occlusion_frames=6))
        frames = simulate_detections(sc, PodCurve.constant(0.8), CFG, 1)
        write_detections(tmp_path / "det.txt", frames)
        back = read_detections(tmp_path / "det.txt", n_frames=30)
        assert len(back) == 30
        for a, b in zip(frames, back):
            assert len(a.measurements) == len(b.measurements)
            for za, zb in zip(a.measurements, b.measurements):
                np.testing.assert_allclose(za, zb, atol=5e-7)

    def test_gt_round_trip(self, tmp_path):
        sc = generate_scenario(crossing_spec(n_frames=30, crossing_frame=15, occlusion_frames=6))
        gt = ground_truth(sc, CFG)
        write_gt(tmp_path / "gt.txt", gt)
        back = read_gt(tmp_path / "gt.txt")
        assert back.ids == gt.ids
        for tid in gt.ids:
            for k, box in gt.boxes[tid].items():
                np.testing.assert_allclose(back.boxes[tid][k], box, atol=5e-7)
                assert back.vis(tid, k) == pytest.approx(gt.vis(tid, k), abs=5e-7)

    def test_gt_class_filter(self, tmp_path):
        p = tmp_path / "gt.txt"
        p.write_text("1,1,0,0,10,20,1,1,0.5\n1,2,0,0,10,20,1,3,0.9\n")
        assert read_gt(p).ids == [1]

    def test_gt_missing_visibility(self, tmp_path):
        p = tmp_path / "gt.txt"
        p.write_text("1,1,0,0,10,20\n")
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            gt = read_gt(p)
        assert gt.vis(1, 1) == 1.0
        assert caught

    def test_gt_bad_visibility(self, tmp_path):
        p = tmp_path / "gt.txt"
        p.write_text("1,1,0,0,10,20,1,1,1.5\n")
        with pytest.raises(ParseError):
            read_gt(p)

    def test_results_round_trip(self, tmp_path):
        out = TrackOutput()
        state = np.arange(8.0)
        out.frames.append((1, [TrackEstimate(4, state, BBox2D(1.25, 2.5, 10.0, 20.0), 0.9)]))
        out.frames.append((2, [TrackEstimate(4, state, BBox2D(2.0, 2.5, 10.0, 20.0), 0.8), TrackEstimate(1, state, None, 0.7)]))
        write_results(tmp_path / "res.txt", out)
        res = read_results(tmp_path / "res.txt")
        assert isinstance(res, TrajectorySet)
        assert res.ids == [4]
        np.testing.assert_allclose(res.boxes[4][2], [2.0, 2.5, 10.0, 20.0])

    def test_duplicate_result_row(self, tmp_path):
        p = tmp_path / "res.txt"
        p.write_text("1,1,0,0,1,1\n1,1,0,0,1,1\n")
        with pytest.raises(ParseError):
            read_results(p)

    def test_seqinfo(self, tmp_path):
        write_seqinfo(tmp_path / "seqinfo.ini", 120, 25.0, CameraModel())
        assert read_seqinfo(tmp_path / "seqinfo.ini") == {"seqLength": 120, "frameRate": 25.0}


class TestCalibration:
    def test_detection_rate_and_clutter(self):
        n = 10_000
        sc = generate_scenario(static_spec(n=n, clutter_rate=0.5))
        curve = PodCurve(((0.0, 0.05), (1.0, 0.8)))
        frames = simulate_detections(sc, curve, CFG, 11)
        bb = project_bbox(sc.states[0][1], sc.camera).as_array()
        hits = clutter = 0
        for fr in frames:
            near = [np.abs(z - bb).max() < 15 for z in fr.measurements]
            hits += any(near)
            clutter += len(fr.measurements) - sum(near)
        assert hits / n == pytest.approx(0.8, abs=0.01)
        assert abs(clutter / n - 0.5) <= 3 * np.sqrt(0.5 / n)
