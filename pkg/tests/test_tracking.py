"""IoU/OKS association, greedy matching, and target lock-on."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import oks_direct
from repjudge.errors import ConfigurationError, NoTargetError, UndefinedSimilarityError
from repjudge.keypoints import PersonInstance, PoseFrame
from repjudge.tracking import TrackState, iou, oks, select_target, track_step

KAPPA4 = np.array([0.1, 0.1, 0.1, 0.1])


def inst(bbox=None, kps=None, conf=1.0):
    if kps is None:
        x, y, w, h = bbox
        kps = np.array(
            [
                [x, y, conf],
                [x + w, y, conf],
                [x, y + h, conf],
                [x + w, y + h, conf],
            ]
        )
    else:
        kps = np.asarray(kps, dtype=float)
    return PersonInstance(keypoints=kps, bbox=bbox)


def frame(i, *instances):
    return PoseFrame(frame_index=i, timestamp=i / 30.0, instances=tuple(instances))


# ---------------------------------------------------------------------------
# IoU
# ---------------------------------------------------------------------------

def test_iou_identical_boxes():
    assert iou((2, 3, 10, 10), (2, 3, 10, 10)) == 1.0


def test_iou_half_overlap_by_hand():
    # overlap 5x10 = 50; union 100 + 100 - 50 = 150
    assert iou((0, 0, 10, 10), (5, 0, 10, 10)) == pytest.approx(1 / 3)


def test_iou_disjoint():
    assert iou((0, 0, 10, 10), (50, 50, 5, 5)) == 0.0


def test_iou_zero_union():
    assert iou((0, 0, 0, 0), (5, 5, 0, 0)) == 0.0


def test_iou_symmetric():
    a, b = (0, 0, 7, 9), (3, 4, 10, 2)
    assert iou(a, b) == iou(b, a)


# ---------------------------------------------------------------------------
# OKS
# ---------------------------------------------------------------------------

def test_oks_identical_poses():
    ref = np.array([[10, 10, 1], [20, 20, 1], [30, 10, 1], [15, 25, 1]], dtype=float)
    assert oks(ref, ref[:, :2], 5.0, KAPPA4) == pytest.approx(1.0)


def test_oks_two_joint_hand_value():
    # d = (0, sqrt(2)), s = 1, kappa = 1: (exp(0) + exp(-1)) / 2
    ref = np.array([[0, 0, 1], [0, 0, 1]], dtype=float)
    cand = np.array([[0, 0], [1, 1]], dtype=float)
    expected = (1 + math.exp(-1)) / 2
    assert oks(ref, cand, 1.0, np.array([1.0, 1.0])) == pytest.approx(expected, abs=1e-12)


def test_oks_no_visible_joints():
    ref = np.array([[0, 0, 0], [1, 1, 0]], dtype=float)
    with pytest.raises(UndefinedSimilarityError):
        oks(ref, ref[:, :2], 1.0, np.array([1.0, 1.0]))


def test_oks_invisible_joints_ignored():
    ref = np.array([[0, 0, 1], [100, 100, 0]], dtype=float)
    cand = np.array([[0, 0], [0, 0]], dtype=float)
    assert oks(ref, cand, 1.0, np.array([1.0, 1.0])) == pytest.approx(1.0)


def test_oks_matches_direct_evaluation():
    rng = np.random.default_rng(17)
    for _ in range(100):
        k = rng.integers(1, 20)
        ref = np.column_stack(
            [rng.uniform(0, 100, k), rng.uniform(0, 100, k), rng.integers(0, 2, k)]
        )
        if not np.any(ref[:, 2] > 0):
            ref[0, 2] = 1
        cand = rng.uniform(0, 100, (k, 2))
        s = float(rng.uniform(0.1, 50))
        kappa = rng.uniform(0.01, 0.3, k)
        assert oks(ref, cand, s, kappa) == pytest.approx(
            oks_direct(ref, cand, s, kappa), abs=1e-12
        )


@given(st.floats(0.01, 100.0))
@settings(max_examples=60, deadline=None)
def test_oks_scale_invariance(c):
    ref = np.array([[1, 2, 1], [5, 9, 1], [3, 3, 0]], dtype=float)
    cand = np.array([[2, 2], [4, 7], [0, 0]], dtype=float)
    kappa = np.array([0.1, 0.2, 0.3])
    base = oks(ref, cand, 2.0, kappa)
    scaled_ref = ref * [c, c, 1]
    assert oks(scaled_ref, cand * c, 2.0 * c, kappa) == pytest.approx(base, abs=1e-9)


def test_oks_symmetric_with_shared_visibility():
    a = np.array([[0, 0, 1], [4, 4, 1]], dtype=float)
    b = np.array([[1, 1, 1], [5, 3, 1]], dtype=float)
    kappa = np.array([0.2, 0.2])
    assert oks(a, b[:, :2], 3.0, kappa) == pytest.approx(oks(b, a[:, :2], 3.0, kappa))


# ---------------------------------------------------------------------------
# track_step
# ---------------------------------------------------------------------------

def test_clear_match_inherits_id():
    state = TrackState()
    ids0 = track_step(state, frame(0, inst(bbox=(0, 0, 10, 10))), "iou")
    ids1 = track_step(state, frame(1, inst(bbox=(1, 0, 10, 10))), "iou")
    assert ids0 == [0]
    assert ids1 == [0]


def test_crossing_instances_keep_ids_via_greedy():
    state = TrackState()
    a0 = inst(bbox=(0, 0, 10, 10))
    b0 = inst(bbox=(6, 0, 10, 10))
    assert track_step(state, frame(0, a0, b0), "iou") == [0, 1]
    # next frame: each instance overlaps its own previous box most
    a1 = inst(bbox=(1, 0, 10, 10))
    b1 = inst(bbox=(5, 0, 10, 10))
    assert track_step(state, frame(1, a1, b1), "iou") == [0, 1]


def test_below_threshold_gets_fresh_id():
    state = TrackState(iou_threshold=0.3)
    track_step(state, frame(0, inst(bbox=(0, 0, 10, 10))), "iou")
    ids = track_step(state, frame(1, inst(bbox=(9, 9, 10, 10))), "iou")
    assert ids == [1]


def test_ids_never_reused():
    state = TrackState(max_gap_frames=1)
    seen = set()
    for i in range(6):
        bbox = (i * 40.0, 0.0, 10.0, 10.0)  # never overlaps the previous
        ids = track_step(state, frame(i, inst(bbox=bbox)), "iou")
        assert ids[0] not in seen
        seen.add(ids[0])


def test_stale_tracks_retired():
    state = TrackState(max_gap_frames=2)
    track_step(state, frame(0, inst(bbox=(0, 0, 10, 10))), "iou")
    track_step(state, frame(1), "iou")
    track_step(state, frame(2), "iou")
    assert 0 in state.tracks
    track_step(state, frame(4), "iou")
    assert 0 not in state.tracks


def test_iou_mode_requires_boxes():
    state = TrackState()
    with pytest.raises(ConfigurationError):
        track_step(state, frame(0, inst(kps=[[0, 0, 1]])), "iou")


def test_oks_mode_tracks_without_boxes():
    state = TrackState(kappa=KAPPA4)
    kps = [[0, 0, 1], [10, 0, 1], [0, 10, 1], [10, 10, 1]]
    ids0 = track_step(state, frame(0, inst(kps=kps)), "oks")
    moved = [[1, 0, 1], [11, 0, 1], [1, 10, 1], [11, 10, 1]]
    ids1 = track_step(state, frame(1, inst(kps=moved)), "oks")
    assert ids0 == ids1 == [0]


def test_oks_mode_requires_kappa():
    state = TrackState()
    with pytest.raises(ConfigurationError):
        track_step(state, frame(0, inst(kps=[[0, 0, 1]])), "oks")


# ---------------------------------------------------------------------------
# Target selection
# ---------------------------------------------------------------------------

def test_target_is_largest_area():
    f = frame(0, inst(bbox=(0, 0, 50, 100)), inst(bbox=(60, 0, 90, 100)))
    state = TrackState()
    ids = track_step(state, f, "iou")
    tracked = f.with_track_ids(ids)
    assert select_target(tracked) == 1


def test_target_sticky_when_other_grows():
    state = TrackState()
    f0 = frame(0, inst(bbox=(0, 0, 50, 100)), inst(bbox=(200, 0, 90, 100)))
    ids = track_step(state, f0, "iou")
    state.target_id = select_target(f0.with_track_ids(ids))
    assert state.target_id == 1
    # other person balloons next frame; selection must not be redone
    f1 = frame(1, inst(bbox=(0, 0, 80, 200)), inst(bbox=(200, 0, 90, 100)))
    track_step(state, f1, "iou")
    assert state.target_id == 1


def test_area_tie_takes_lowest_index():
    f = frame(0, inst(bbox=(0, 0, 10, 10)), inst(bbox=(50, 0, 10, 10)))
    state = TrackState()
    ids = track_step(state, f, "iou")
    assert select_target(f.with_track_ids(ids)) == 0


def test_empty_frame_has_no_target():
    with pytest.raises(NoTargetError):
        select_target(frame(0))


def test_single_person_constant_target_over_stream():
    state = TrackState()
    target = None
    for i in range(30):
        f = frame(i, inst(bbox=(10 + 0.5 * i, 5, 20, 40)))
        ids = track_step(state, f, "iou")
        if target is None:
            target = select_target(f.with_track_ids(ids))
        assert ids[0] == target
