"""Keypoint schemas, joint geometry, proxies, and stream files."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repjudge.errors import (
    ConfigurationError,
    DegenerateGeometryError,
    LowConfidenceError,
    MissingKeypointError,
)
from repjudge.keypoints import (
    KeypointSchema,
    PersonInstance,
    PoseFrame,
    barbell_proxy,
    get_schema,
    joint_angle,
    load_schema_registry,
    read_keypoint_stream,
    resolve_joint,
    select_side,
    write_keypoint_stream,
)

WB = get_schema("coco_wholebody")
COCO = get_schema("coco")


def instance_for(schema, points: dict, default_conf=0.9, bbox=None):
    kps = np.zeros((len(schema), 3))
    for name, value in points.items():
        idx = schema.index(name)
        x, y = value[0], value[1]
        conf = value[2] if len(value) > 2 else default_conf
        kps[idx] = [x, y, conf]
    return PersonInstance(keypoints=kps, bbox=bbox)


# ---------------------------------------------------------------------------
# joint_angle
# ---------------------------------------------------------------------------

def test_collinear_is_180():
    assert joint_angle((0, 0), (1, 0), (2, 0)) == pytest.approx(180.0)


def test_perpendicular_is_90():
    assert joint_angle((0, 1), (0, 0), (1, 0)) == pytest.approx(90.0)


def test_45_degrees_by_hand():
    # u = (1,0), v = (1,1): cos = 1/sqrt(2) -> 45 degrees
    assert joint_angle((1, 0), (0, 0), (1, 1)) == pytest.approx(45.0)


def test_zero_length_vector_is_degenerate():
    with pytest.raises(DegenerateGeometryError):
        joint_angle((0, 0), (0, 0), (1, 1))


def test_symmetry_in_endpoints():
    assert joint_angle((3, 1), (0, 0), (-2, 5)) == pytest.approx(
        joint_angle((-2, 5), (0, 0), (3, 1))
    )


@given(
    st.floats(-50, 50), st.floats(-50, 50),
    st.floats(-50, 50), st.floats(-50, 50),
    st.floats(-50, 50), st.floats(-50, 50),
    st.floats(0, 2 * math.pi),
    st.floats(0.1, 10.0),
    st.floats(-100, 100), st.floats(-100, 100),
)
@settings(max_examples=120, deadline=None)
def test_invariance_under_scaled_rigid_motion(ax, ay, bx, by, cx, cy, theta, scale, tx, ty):
    a, b, c = (ax, ay), (bx, by), (cx, cy)
    if math.hypot(ax - bx, ay - by) < 1e-3 or math.hypot(cx - bx, cy - by) < 1e-3:
        return
    base = joint_angle(a, b, c)
    if base < 0.01 or base > 179.99:
        # Near-degenerate configurations are numerically ill-conditioned.
        return
    cos_t, sin_t = math.cos(theta), math.sin(theta)

    def tf(p):
        x, y = p
        return (
            scale * (x * cos_t - y * sin_t) + tx,
            scale * (x * sin_t + y * cos_t) + ty,
        )

    assert joint_angle(tf(a), tf(b), tf(c)) == pytest.approx(base, abs=1e-6)


# ---------------------------------------------------------------------------
# Schema registry and joint resolution
# ---------------------------------------------------------------------------

def test_registry_schemas_are_wellformed():
    registry = load_schema_registry()
    assert {"coco", "body7", "halpe26", "aic", "crowdpose", "coco_wholebody"} <= set(registry)
    for schema in registry.values():
        assert len(set(schema.joints)) == len(schema.joints)
        assert all(k > 0 for k in schema.kappa)
        for i, name in enumerate(schema.joints):
            assert schema.index(name) == i


def test_unknown_schema_name():
    with pytest.raises(ConfigurationError):
        get_schema("made_up")


def test_resolve_direct_lookup():
    assert resolve_joint(COCO, "left_knee").index == COCO.index("left_knee")


def test_resolve_barbell_directives():
    assert resolve_joint(WB, "barbell").directive == "barbell_mcp"
    assert resolve_joint(COCO, "barbell").directive == "barbell_wrist_offset"


def test_resolve_active_side_and_exclusion():
    assert resolve_joint(COCO, "active_wrist").directive == "side_select"
    assert resolve_joint(COCO, "active_middle_finger1").directive == "exclude"
    assert resolve_joint(COCO, "left_middle_finger1").directive == "exclude"
    assert resolve_joint(WB, "active_middle_finger1").directive == "side_select"


def test_resolve_unknown_errors():
    with pytest.raises(MissingKeypointError):
        resolve_joint(COCO, "tail")


def test_bad_schema_construction():
    with pytest.raises(ConfigurationError):
        KeypointSchema("dup", ("a", "a"), (0.1, 0.1))
    with pytest.raises(ConfigurationError):
        KeypointSchema("zero_kappa", ("a", "b"), (0.1, 0.0))


# ---------------------------------------------------------------------------
# Barbell proxy
# ---------------------------------------------------------------------------

def test_wrist_offset_proxy():
    inst = instance_for(COCO, {"left_wrist": (100, 200), "right_wrist": (140, 200)})
    assert barbell_proxy(inst, COCO).tolist() == [120.0, 220.0]


def test_mcp_midpoint_proxy_on_hand_schema():
    inst = instance_for(
        WB, {"left_middle_finger1": (100, 220), "right_middle_finger1": (140, 220)}
    )
    assert barbell_proxy(inst, WB).tolist() == [120.0, 220.0]


def test_single_visible_wrist_used_alone():
    inst = instance_for(
        COCO, {"left_wrist": (100, 200, 0.0), "right_wrist": (140, 200, 0.9)}
    )
    assert barbell_proxy(inst, COCO).tolist() == [140.0, 220.0]


def test_both_wrists_low_confidence_errors():
    inst = instance_for(
        COCO, {"left_wrist": (100, 200, 0.1), "right_wrist": (140, 200, 0.0)}
    )
    with pytest.raises(LowConfidenceError):
        barbell_proxy(inst, COCO)


def test_custom_offset():
    inst = instance_for(COCO, {"left_wrist": (0, 0), "right_wrist": (10, 0)})
    assert barbell_proxy(inst, COCO, offset=7.0).tolist() == [5.0, 7.0]


# ---------------------------------------------------------------------------
# Side selection
# ---------------------------------------------------------------------------

def test_side_selection_prefers_higher_mean_confidence():
    points = {}
    for base in ("shoulder", "elbow", "wrist"):
        points[f"left_{base}"] = (0, 0, 0.4)
        points[f"right_{base}"] = (0, 0, 0.9)
    inst = instance_for(COCO, points)
    assert select_side(inst, COCO) == "right"


def test_side_selection_tie_goes_left():
    points = {}
    for base in ("shoulder", "elbow", "wrist"):
        points[f"left_{base}"] = (0, 0, 0.7)
        points[f"right_{base}"] = (0, 0, 0.7)
    inst = instance_for(COCO, points)
    assert select_side(inst, COCO) == "left"


# ---------------------------------------------------------------------------
# Containers and stream files
# ---------------------------------------------------------------------------

def test_instance_invariants():
    with pytest.raises(ConfigurationError):
        PersonInstance(keypoints=np.zeros((3, 2)))
    with pytest.raises(ConfigurationError):
        PersonInstance(keypoints=np.array([[0, 0, 1.5]]))
    with pytest.raises(ConfigurationError):
        PersonInstance(keypoints=np.zeros((1, 3)), bbox=(0, 0, -1, 5))


def test_extent_box_uses_visible_joints_only():
    kps = np.array([[0, 0, 0.0], [10, 5, 0.5], [20, 25, 0.5]])
    inst = PersonInstance(keypoints=kps)
    assert inst.extent_box() == (10.0, 5.0, 10.0, 20.0)


def test_stream_roundtrip(tmp_path):
    frames = [
        PoseFrame(
            frame_index=i,
            timestamp=i / 30.0,
            instances=(
                PersonInstance(
                    keypoints=np.random.default_rng(i).uniform(0, 100, (17, 3)) * [1, 1, 0.01],
                    bbox=(1.0, 2.0, 3.0, 4.0) if i % 2 == 0 else None,
                    track_id=i if i % 3 == 0 else None,
                ),
            ),
            schema_name="coco",
        )
        for i in range(5)
    ]
    path = tmp_path / "stream.jsonl"
    write_keypoint_stream(frames, path)
    loaded = read_keypoint_stream(path)
    assert len(loaded) == 5
    for orig, back in zip(frames, loaded):
        assert back.frame_index == orig.frame_index
        assert back.schema_name == "coco"
        inst_o, inst_b = orig.instances[0], back.instances[0]
        assert np.allclose(inst_o.keypoints, inst_b.keypoints)
        assert inst_b.bbox == inst_o.bbox
        assert inst_b.track_id == inst_o.track_id


def test_stream_requires_strictly_increasing_frames(tmp_path):
    path = tmp_path / "bad.jsonl"
    line = '{"frame": 5, "t": 0.1, "schema": "coco", "instances": []}\n'
    path.write_text(line + line)
    with pytest.raises(ConfigurationError):
        read_keypoint_stream(path)
