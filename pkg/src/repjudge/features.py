"""Per-frame kinematic features: exactly the angles and positions a rule
set's constraints reference, computed from one tracked person instance.

Positions are normalized by person bounding-box height so positional
tolerances are scale-free. A feature whose constituent keypoints fall below
the confidence floor is flagged unavailable rather than given a default
value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import conditions
from .conditions import Angle, Coord, FeatureLookup, iter_primitives
from .errors import (
    DegenerateGeometryError,
    LowConfidenceError,
    MissingFeatureError,
    MissingKeypointError,
)
from .keypoints import (
    DEFAULT_CONF_FLOOR,
    KeypointSchema,
    PersonInstance,
    barbell_proxy,
    joint_angle,
    resolve_joint,
    select_side,
)
from .rules import MovementRuleSet


@dataclass
class KinematicFeatures(FeatureLookup):
    """Named feature values plus explicit availability flags."""

    values: dict[str, float] = field(default_factory=dict)
    unavailable: dict[str, str] = field(default_factory=dict)  # key -> reason

    def lookup(self, key: str) -> tuple[Optional[float], str]:
        if key in self.values:
            return self.values[key], ""
        return None, self.unavailable.get(key, "not computed")

    def get(self, key: str) -> float:
        value, reason = self.lookup(key)
        if value is None:
            raise MissingFeatureError(key, reason)
        return value

    def available(self, key: str) -> bool:
        return key in self.values


def referenced_primitives(rules: MovementRuleSet) -> list:
    """Deduplicated primitives across every constraint, in canonical-key order."""
    seen: dict[str, object] = {}
    for _, constraint in rules.all_constraints():
        for prim in iter_primitives(constraint.condition):
            seen.setdefault(prim.key, prim)
    return [seen[key] for key in sorted(seen)]


class _PointResolver:
    """Resolves semantic joint names to image-space points for one instance."""

    def __init__(self, instance: PersonInstance, schema: KeypointSchema, conf_floor: float):
        self.instance = instance
        self.schema = schema
        self.conf_floor = conf_floor
        self._active_side = None

    def point(self, name: str) -> tuple[Optional[np.ndarray], str]:
        """Return (xy point, "") or (None, reason)."""
        try:
            resolved = resolve_joint(self.schema, name)
        except MissingKeypointError as exc:
            return None, str(exc)
        if resolved.index is not None:
            kp = self.instance.keypoints[resolved.index]
            if kp[2] < self.conf_floor:
                return None, f"{name} below confidence floor"
            return kp[:2], ""
        if resolved.directive in ("barbell_mcp", "barbell_wrist_offset"):
            try:
                return barbell_proxy(self.instance, self.schema, self.conf_floor), ""
            except (LowConfidenceError, MissingKeypointError) as exc:
                return None, f"barbell proxy failed: {exc}"
        if resolved.directive == "side_select":
            if self._active_side is None:
                self._active_side = select_side(self.instance, self.schema)
            base = name[len("active_"):]
            return self.point(f"{self._active_side}_{base}")
        # "exclude" directives reach here only if binding was skipped.
        return None, f"{name} excluded under schema {self.schema.schema_name!r}"


def compute_features(
    instance: PersonInstance,
    rules: MovementRuleSet,
    schema: KeypointSchema,
    conf_floor: float = DEFAULT_CONF_FLOOR,
) -> KinematicFeatures:
    """Compute every angle and normalized position the rule set references.

    Features with any constituent keypoint below ``conf_floor`` (or with
    degenerate geometry) are flagged unavailable with a reason.
    """
    features = KinematicFeatures()
    box = instance.area_box()
    box_height = box[3] if box is not None else 0.0
    resolver = _PointResolver(instance, schema, conf_floor)
    point_cache: dict[str, tuple[Optional[np.ndarray], str]] = {}

    def point(name: str):
        if name not in point_cache:
            point_cache[name] = resolver.point(name)
        return point_cache[name]

    for prim in referenced_primitives(rules):
        key = prim.key
        if isinstance(prim, Angle):
            pts = []
            reason = None
            for joint in prim.joints():
                p, why = point(joint)
                if p is None:
                    reason = why
                    break
                pts.append(p)
            if reason is not None:
                features.unavailable[key] = reason
                continue
            try:
                features.values[key] = joint_angle(pts[0], pts[1], pts[2])
            except DegenerateGeometryError as exc:
                features.unavailable[key] = str(exc)
        elif isinstance(prim, Coord):
            p, why = point(prim.joint)
            if p is None:
                features.unavailable[key] = why
                continue
            if box_height <= 0:
                features.unavailable[key] = "degenerate person box"
                continue
            coord = p[0] if prim.axis == "x" else p[1]
            features.values[key] = float(coord) / box_height
    return features


def evaluate_constraint(
    constraint,
    features: KinematicFeatures,
    thresholds,
) -> bool:
    """Evaluate one named constraint; unavailable features raise through."""
    override = thresholds.overrides.get(constraint.semantic_key, constraint.tolerance)
    return conditions.evaluate_condition(
        constraint.condition, features, thresholds, tolerance_override=override
    )
