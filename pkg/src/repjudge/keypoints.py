"""Keypoint schemas, pose-frame containers, and joint geometry.

A schema is the named, ordered joint set one pose-model family emits, plus
per-joint localization constants used by the keypoint-similarity metric.
The shipped registry covers the common body schemas (coco, body7, halpe26,
aic, crowdpose, coco_wholebody); joints outside the published 17-joint body
set inherit the constant of their nearest anatomical neighbor.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .errors import (
    ConfigurationError,
    DegenerateGeometryError,
    LowConfidenceError,
    MissingKeypointError,
)

DEFAULT_CONF_FLOOR = 0.3
# Offset (pixels, image +y) applied to the wrist midpoint when a schema has
# no hand keypoints and a bar position must be approximated.
BARBELL_WRIST_OFFSET_PX = 20.0

_HAND_MARKERS = ("finger", "thumb", "hand_root")


@dataclass(frozen=True)
class KeypointSchema:
    schema_name: str
    joints: tuple[str, ...]
    kappa: tuple[float, ...]
    has_hands: bool = False

    def __post_init__(self):
        if len(self.joints) != len(set(self.joints)):
            raise ConfigurationError(f"duplicate joint names in schema {self.schema_name!r}")
        if len(self.kappa) != len(self.joints):
            raise ConfigurationError("kappa length must match joint count")
        if any(k <= 0 for k in self.kappa):
            raise ConfigurationError("kappa constants must be positive")
        object.__setattr__(self, "_index", {name: i for i, name in enumerate(self.joints)})

    def index(self, name: str) -> Optional[int]:
        return self._index.get(name)

    def __len__(self) -> int:
        return len(self.joints)


@dataclass(frozen=True)
class PersonInstance:
    keypoints: np.ndarray  # (K, 3) of x, y, confidence
    bbox: Optional[tuple[float, float, float, float]] = None  # x, y, w, h
    track_id: Optional[int] = None

    def __post_init__(self):
        kps = np.asarray(self.keypoints, dtype=float)
        if kps.ndim != 2 or kps.shape[1] != 3:
            raise ConfigurationError("keypoints must have shape (K, 3)")
        if np.any(kps[:, 2] < 0) or np.any(kps[:, 2] > 1):
            raise ConfigurationError("keypoint confidence must lie in [0, 1]")
        if self.bbox is not None:
            x, y, w, h = self.bbox
            if w <= 0 or h <= 0:
                raise ConfigurationError("bbox width/height must be positive")
            object.__setattr__(self, "bbox", (float(x), float(y), float(w), float(h)))
        object.__setattr__(self, "keypoints", kps)

    def extent_box(self) -> Optional[tuple[float, float, float, float]]:
        """Tight box over keypoints with nonzero confidence."""
        visible = self.keypoints[self.keypoints[:, 2] > 0]
        if len(visible) == 0:
            return None
        x0, y0 = visible[:, 0].min(), visible[:, 1].min()
        x1, y1 = visible[:, 0].max(), visible[:, 1].max()
        return (float(x0), float(y0), float(x1 - x0), float(y1 - y0))

    def area_box(self) -> Optional[tuple[float, float, float, float]]:
        return self.bbox if self.bbox is not None else self.extent_box()


@dataclass(frozen=True)
class PoseFrame:
    frame_index: int
    timestamp: float
    instances: tuple[PersonInstance, ...] = ()
    schema_name: Optional[str] = None

    def __post_init__(self):
        if self.frame_index < 0:
            raise ConfigurationError("frame_index must be >= 0")
        object.__setattr__(self, "instances", tuple(self.instances))

    def with_track_ids(self, ids: Sequence[Optional[int]]) -> "PoseFrame":
        insts = tuple(
            replace(inst, track_id=tid) for inst, tid in zip(self.instances, ids)
        )
        return replace(self, instances=insts)


# --------------------------------------------------------------------------
# Registry
# --------------------------------------------------------------------------

def load_schema_registry(path: Optional[Union[str, Path]] = None) -> dict[str, KeypointSchema]:
    """Load schemas from a registry JSON file (the packaged one by default)."""
    if path is None:
        raw = json.loads(
            resources.files("repjudge").joinpath("data/schemas.json").read_text("utf-8")
        )
    else:
        raw = json.loads(Path(path).read_text("utf-8"))
    registry = {}
    for name, spec in raw.items():
        registry[name] = KeypointSchema(
            schema_name=name,
            joints=tuple(spec["joints"]),
            kappa=tuple(float(k) for k in spec["kappa"]),
            has_hands=bool(spec.get("has_hands", False)),
        )
    return registry


def get_schema(name: str, registry: Optional[dict[str, KeypointSchema]] = None) -> KeypointSchema:
    registry = registry if registry is not None else load_schema_registry()
    if name not in registry:
        raise ConfigurationError(f"unknown keypoint schema {name!r}")
    return registry[name]


# --------------------------------------------------------------------------
# Geometry
# --------------------------------------------------------------------------

def joint_angle(a: Sequence[float], b: Sequence[float], c: Sequence[float]) -> float:
    """Interior angle at vertex ``b`` of the triangle a-b-c, in degrees [0, 180]."""
    u = (a[0] - b[0], a[1] - b[1])
    v = (c[0] - b[0], c[1] - b[1])
    nu = math.hypot(*u)
    nv = math.hypot(*v)
    if nu == 0.0 or nv == 0.0:
        raise DegenerateGeometryError("zero-length limb vector at angle vertex")
    cos = (u[0] * v[0] + u[1] * v[1]) / (nu * nv)
    cos = max(-1.0, min(1.0, cos))
    return math.degrees(math.acos(cos))


# --------------------------------------------------------------------------
# Joint resolution and proxies
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ResolvedJoint:
    """Outcome of resolving a semantic joint name against a schema.

    Exactly one of ``index`` / ``directive`` is set. Directives:
      - "barbell_mcp": midpoint of the middle-finger MCP joints
      - "barbell_wrist_offset": wrist midpoint plus a fixed image-y offset
      - "side_select": per-frame higher-confidence side (active_* names)
      - "exclude": hand-dependent constraint under a hands-absent schema
    """
    name: str
    index: Optional[int] = None
    directive: Optional[str] = None


def is_hand_joint(name: str) -> bool:
    return any(marker in name for marker in _HAND_MARKERS)


def resolve_joint(schema: KeypointSchema, name: str) -> ResolvedJoint:
    """Resolve ``name`` to a joint index or a documented fallback directive."""
    idx = schema.index(name)
    if idx is not None:
        return ResolvedJoint(name, index=idx)
    if name == "barbell":
        directive = "barbell_mcp" if schema.has_hands else "barbell_wrist_offset"
        return ResolvedJoint(name, directive=directive)
    if name.startswith("active_"):
        base = name[len("active_"):]
        if schema.index(f"left_{base}") is not None and schema.index(f"right_{base}") is not None:
            return ResolvedJoint(name, directive="side_select")
        if is_hand_joint(base) and not schema.has_hands:
            return ResolvedJoint(name, directive="exclude")
        raise MissingKeypointError(name, f"no left/right {base!r} in schema {schema.schema_name!r}")
    if is_hand_joint(name) and not schema.has_hands:
        return ResolvedJoint(name, directive="exclude")
    raise MissingKeypointError(name, f"{name!r} not in schema {schema.schema_name!r} and no fallback applies")


def barbell_proxy(
    instance: PersonInstance,
    schema: KeypointSchema,
    conf_floor: float = DEFAULT_CONF_FLOOR,
    offset: float = BARBELL_WRIST_OFFSET_PX,
) -> np.ndarray:
    """Approximate the bar position from hand or wrist keypoints.

    Hand-bearing schemas use the midpoint of the middle-finger MCP joints;
    otherwise the wrist midpoint displaced by ``offset`` px along image +y
    (toward a hanging bar). When one side is below the confidence floor the
    visible side is used alone; with both below, LowConfidenceError.
    """
    if schema.has_hands:
        names = ("left_middle_finger1", "right_middle_finger1")
        displacement = 0.0
    else:
        names = ("left_wrist", "right_wrist")
        displacement = offset
    points = []
    for name in names:
        idx = schema.index(name)
        if idx is None:
            raise MissingKeypointError(name, f"{name!r} missing from schema {schema.schema_name!r}")
        kp = instance.keypoints[idx]
        if kp[2] >= conf_floor:
            points.append(kp[:2])
    if not points:
        raise LowConfidenceError("both proxy keypoints below the confidence floor")
    mid = np.mean(points, axis=0)
    return np.array([mid[0], mid[1] + displacement])


def select_side(
    instance: PersonInstance, schema: KeypointSchema
) -> str:
    """Pick the body side with higher mean (shoulder, elbow, wrist) confidence.

    Ties go left. Sides whose joints are missing from the schema score 0.
    """
    scores = {}
    for side in ("left", "right"):
        confs = []
        for base in ("shoulder", "elbow", "wrist"):
            idx = schema.index(f"{side}_{base}")
            if idx is not None:
                confs.append(instance.keypoints[idx, 2])
        scores[side] = float(np.mean(confs)) if confs else 0.0
    return "left" if scores["left"] >= scores["right"] else "right"


# --------------------------------------------------------------------------
# Keypoint stream files (JSON Lines, one frame per line)
# --------------------------------------------------------------------------

def frame_to_json(frame: PoseFrame) -> dict:
    instances = []
    for inst in frame.instances:
        rec: dict = {"kps": [[float(x), float(y), float(c)] for x, y, c in inst.keypoints]}
        if inst.track_id is not None:
            rec["track_id"] = int(inst.track_id)
        if inst.bbox is not None:
            rec["bbox"] = [float(v) for v in inst.bbox]
        instances.append(rec)
    return {
        "frame": frame.frame_index,
        "t": frame.timestamp,
        "schema": frame.schema_name,
        "instances": instances,
    }


def frame_from_json(obj: dict) -> PoseFrame:
    instances = []
    for rec in obj.get("instances", []):
        bbox = tuple(rec["bbox"]) if rec.get("bbox") is not None else None
        instances.append(
            PersonInstance(
                keypoints=np.asarray(rec["kps"], dtype=float),
                bbox=bbox,
                track_id=rec.get("track_id"),
            )
        )
    return PoseFrame(
        frame_index=int(obj["frame"]),
        timestamp=float(obj.get("t", 0.0)),
        instances=tuple(instances),
        schema_name=obj.get("schema"),
    )


def write_keypoint_stream(frames: Iterable[PoseFrame], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for frame in frames:
            f.write(json.dumps(frame_to_json(frame)) + "\n")


def read_keypoint_stream(path: Union[str, Path]) -> list[PoseFrame]:
    frames = []
    last_index = -1
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                frame = frame_from_json(json.loads(line))
            except (json.JSONDecodeError, KeyError) as exc:
                raise ConfigurationError(f"bad keypoint stream line {line_no}: {exc}") from exc
            if frame.frame_index <= last_index:
                raise ConfigurationError(
                    f"frame indices must increase strictly (line {line_no})"
                )
            last_index = frame.frame_index
            frames.append(frame)
    return frames
