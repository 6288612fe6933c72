"""End-to-end judging: composition, caching behavior, and accounting."""

from pathlib import Path

import numpy as np
import pytest

from repjudge import (
    CachePolicy,
    ThresholdConfig,
    calibrate_tau,
    get_schema,
    judge_stream,
    load_gray_frames,
    load_rule_set,
    read_keypoint_stream,
)
from repjudge.errors import ConfigurationError
from repjudge.keypoints import PersonInstance, PoseFrame
from repjudge.pipeline import PoseSource, SimulatedPoseSource, rep_class_counts
from repjudge.validator import RepLabel
from synth import make_squat_trace, squat_pose

FIXTURES = Path(__file__).parent / "fixtures"
RULES = load_rule_set(
    Path(__file__).resolve().parent.parent / "src" / "repjudge" / "data" / "rules" / "squat.json"
)
COCO = get_schema("coco")
TH = ThresholdConfig()


@pytest.fixture(scope="module")
def fixture_frames():
    return read_keypoint_stream(FIXTURES / "synthetic_squat.jsonl")


@pytest.fixture(scope="module")
def fixture_gray():
    return load_gray_frames(FIXTURES / "synthetic_squat.gray")


@pytest.fixture(scope="module")
def fixture_dither():
    return load_gray_frames(FIXTURES / "synthetic_squat_dither.gray")


def test_three_rep_fixture_matches_truth(fixture_frames):
    result = judge_stream(fixture_frames, RULES, COCO, TH)
    labels = [r.label for r in result.records]
    assert labels == [RepLabel.VALID, RepLabel.INVALID, RepLabel.VALID]


def test_judge_stream_deterministic(fixture_frames):
    a = judge_stream(fixture_frames, RULES, COCO, TH)
    b = judge_stream(fixture_frames, RULES, COCO, TH)
    assert a.records_json() == b.records_json()


def test_records_sorted_and_non_overlapping(fixture_frames):
    records = judge_stream(fixture_frames, RULES, COCO, TH).records
    for first, second in zip(records, records[1:]):
        assert first.t_end < second.t_start


def test_rtc_tau_zero_on_changing_frames_is_byte_identical(fixture_frames, fixture_dither):
    base = judge_stream(fixture_frames, RULES, COCO, TH)
    cached = judge_stream(
        fixture_frames,
        RULES,
        COCO,
        TH,
        cache_policy=CachePolicy(rtc_enabled=True, rtc_tau=0.0),
        gray_frames=fixture_dither,
    )
    assert cached.records_json() == base.records_json()
    assert cached.diagnostics.cache.rtc_skips == 0


def test_rtc_accounting_identity(fixture_frames, fixture_gray):
    result = judge_stream(
        fixture_frames,
        RULES,
        COCO,
        TH,
        cache_policy=CachePolicy(rtc_enabled=True, rtc_tau=2.0),
        gray_frames=fixture_gray,
    )
    stats = result.diagnostics.cache
    assert stats.rtc_skips + stats.pose_inferences == stats.frames_total
    assert stats.rtc_skips > 0
    assert len(stats.rpd_trace) == stats.frames_total


def test_no_cache_runs_inference_every_frame(fixture_frames):
    stats = judge_stream(fixture_frames, RULES, COCO, TH).diagnostics.cache
    assert stats.pose_inferences == stats.frames_total
    assert stats.detector_invocations == stats.frames_total


def test_dc_invokes_detector_once(fixture_frames):
    result = judge_stream(
        fixture_frames, RULES, COCO, TH, cache_policy=CachePolicy(dc_enabled=True)
    )
    assert result.diagnostics.cache.detector_invocations == 1
    assert result.diagnostics.dc_box is not None
    base = judge_stream(fixture_frames, RULES, COCO, TH)
    assert result.records_json() == base.records_json()


def test_dc_requires_detector_stream():
    trace = make_squat_trace([True], [8], [4], with_bbox=False)
    with pytest.raises(ConfigurationError):
        judge_stream(
            trace.frames, RULES, COCO, TH, cache_policy=CachePolicy(dc_enabled=True)
        )


def test_bottom_up_stream_tracks_with_oks():
    trace = make_squat_trace([True], [10], [4], with_bbox=False)
    result = judge_stream(trace.frames, RULES, COCO, TH, tracker_mode="oks")
    assert [r.label for r in result.records] == [RepLabel.VALID]
    assert result.diagnostics.cache.detector_invocations == 0


def test_calibrate_tau_on_fixture(fixture_frames, fixture_gray):
    tau = calibrate_tau(fixture_gray, fixture_frames, RULES, COCO, TH, [0, 1, 2, 4])
    assert tau == 2.0


def test_calibrate_tau_static_scene_takes_largest():
    frames = [
        PoseFrame(i, i / 30.0, (squat_pose(0.0, scale=0.15),), schema_name="coco")
        for i in range(40)
    ]
    from repjudge.cache import GrayFrame

    gray = [GrayFrame(80, 60, np.full((60, 80), 90, np.uint8)) for _ in range(40)]
    tau = calibrate_tau(gray, frames, RULES, COCO, TH, [0, 1, 2, 4])
    assert tau == 4.0


def test_calibrate_tau_falls_back_to_zero(fixture_frames, fixture_gray):
    assert calibrate_tau(fixture_gray, fixture_frames, RULES, COCO, TH, [8.0]) == 0.0


def test_calibrate_tau_empty_grid(fixture_frames, fixture_gray):
    with pytest.raises(ConfigurationError):
        calibrate_tau(fixture_gray, fixture_frames, RULES, COCO, TH, [])


def test_empty_stream():
    result = judge_stream([], RULES, COCO, TH)
    assert result.records == []
    assert result.diagnostics.no_target is False


def test_empty_first_frame_retries_target_selection():
    trace = make_squat_trace([True], [10], [4])
    frames = [PoseFrame(0, 0.0, (), schema_name="coco")] + [
        PoseFrame(f.frame_index + 1, f.timestamp + 1 / 30.0, f.instances, f.schema_name)
        for f in trace.frames
    ]
    result = judge_stream(frames, RULES, COCO, TH)
    assert result.diagnostics.no_target is False
    assert result.diagnostics.target_missing_frames == 1
    assert [r.label for r in result.records] == [RepLabel.VALID]


def test_no_person_ever_sets_no_target_diagnostic():
    frames = [PoseFrame(i, i / 30.0, (), schema_name="coco") for i in range(10)]
    result = judge_stream(frames, RULES, COCO, TH)
    assert result.records == []
    assert result.diagnostics.no_target is True


def test_schema_mismatch_is_configuration_error(fixture_frames):
    with pytest.raises(ConfigurationError):
        judge_stream(fixture_frames, RULES, get_schema("halpe26"), TH)


def test_keypoint_count_mismatch_detected():
    bad = PoseFrame(
        0, 0.0, (PersonInstance(keypoints=np.zeros((5, 3)), bbox=(0, 0, 5, 5)),)
    )
    with pytest.raises(ConfigurationError):
        judge_stream([bad], RULES, COCO, TH)


def test_rtc_requires_gray_frames(fixture_frames):
    with pytest.raises(ConfigurationError):
        judge_stream(
            fixture_frames, RULES, COCO, TH, cache_policy=CachePolicy(rtc_enabled=True)
        )


def test_streamed_requires_fps(fixture_frames):
    with pytest.raises(ConfigurationError):
        judge_stream(fixture_frames[:5], RULES, COCO, TH, streamed=True)


def test_streamed_paces_and_reports_busy_rtf(fixture_frames):
    result = judge_stream(
        fixture_frames[:30], RULES, COCO, TH, fps=300.0, streamed=True
    )
    timing = result.diagnostics.timing
    assert timing["rtf"] == timing["rtf_busy"]
    assert timing["wall_s"] >= 29 / 300.0


def test_simulated_source_costs_show_up(fixture_frames):
    frames = fixture_frames[:40]
    slow = SimulatedPoseSource(frames, pose_cost_s=0.002, detector_cost_s=0.001)
    fast = PoseSource(frames)
    slow_result = judge_stream(slow, RULES, COCO, TH, fps=30.0)
    fast_result = judge_stream(fast, RULES, COCO, TH, fps=30.0)
    assert slow_result.records_json() == fast_result.records_json()
    assert slow_result.diagnostics.timing["wall_s"] > fast_result.diagnostics.timing["wall_s"]
    assert slow_result.diagnostics.timing["rtf"] is not None


def test_lowering_conf_floor_moves_labels_toward_valid():
    # The requirement references wrists held at confidence 0.4 while the
    # start/end joints stay confident. A floor of 0.5 hides the requirement
    # evidence (invalid rep); lowering it to 0.3 reveals a condition that
    # holds on every frame, so the same stream turns valid.
    import json as json_mod
    from dataclasses import replace as dc_replace

    from repjudge.rules import parse_rule_set

    doc = {
        "movement": "floor-probe",
        "y_axis": "down",
        "response": {
            "rep_start": {"standing": {
                "keypoints": ["left_hip", "left_knee", "left_ankle"],
                "condition": "Angle(left_hip,left_knee,left_ankle) ~= 180 deg"}},
            "rep_end": {"standing_again": {
                "keypoints": ["left_hip", "left_knee", "left_ankle"],
                "condition": "Angle(left_hip,left_knee,left_ankle) ~= 180 deg"}},
            "rep_requirements": {"arms_hang": {
                "keypoints": ["left_wrist", "left_shoulder"],
                "condition": "Y(left_wrist) > Y(left_shoulder)"}},
        },
    }
    rules = parse_rule_set(json_mod.dumps(doc))

    frames = []
    fracs = [0.0] * 8 + [x / 7 for x in range(1, 7)] + [1.0] * 4 \
        + [1 - x / 7 for x in range(1, 7)] + [0.0] * 8
    for i, frac in enumerate(fracs):
        inst = squat_pose(frac)
        kps = inst.keypoints.copy()
        kps[COCO.index("left_wrist"), 2] = 0.4
        kps[COCO.index("right_wrist"), 2] = 0.4
        frames.append(
            PoseFrame(i, i / 30.0, (dc_replace(inst, keypoints=kps),), schema_name="coco")
        )
    strict = judge_stream(frames, rules, COCO, ThresholdConfig(conf_floor=0.5))
    loose = judge_stream(frames, rules, COCO, ThresholdConfig(conf_floor=0.3))
    assert [r.label for r in strict.records] == [RepLabel.INVALID]
    assert strict.records[0].failed_requirements == ("arms_hang",)
    assert [r.label for r in loose.records] == [RepLabel.VALID]
    assert strict.diagnostics.unavailable_feature_frames > 0


def test_rep_class_counts(fixture_frames):
    counts = rep_class_counts(judge_stream(fixture_frames, RULES, COCO, TH).records)
    assert counts[RepLabel.VALID] == 2
    assert counts[RepLabel.INVALID] == 1


def test_diagnostics_dict_shape(fixture_frames):
    diag = judge_stream(fixture_frames, RULES, COCO, TH).diagnostics.to_dict()
    assert set(diag) >= {
        "cache",
        "unavailable_feature_frames",
        "no_target",
        "timing",
    }
    assert "rtf" in diag["timing"]
