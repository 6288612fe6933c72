"""Movement rule sets: the structured representation the judge executes.

A rule document is strict JSON shaped like the structuring pipeline's
output::

    {
      "movement": "Air Squat",
      "y_axis": "up",
      "response": {
        "rep_start":        {"<semantic_key>": {"keypoints": [...], "condition": "..."}},
        "rep_end":          {...},
        "rep_requirements": {...},
        "no_rep_conditions": {...} | ["free text", ...]
      }
    }

``y_axis`` ("up" by default, matching the rulebook templates) controls
normalization of Y orderings into image coordinates. Each constraint may
carry an optional numeric ``tolerance`` overriding the global approximate-
equality tolerance for its unit class. ``no_rep_conditions`` entries whose
condition does not parse under the grammar are kept as inert annotations.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Union

from . import conditions
from .conditions import ConditionExpr, referenced_joints
from .errors import GrammarError, RuleParseError, RuleSchemaError
from .keypoints import KeypointSchema, MissingKeypointError, resolve_joint

GROUPS = ("rep_start", "rep_end", "rep_requirements", "no_rep_conditions")


@dataclass(frozen=True)
class NamedConstraint:
    semantic_key: str
    keypoints: tuple[str, ...]
    condition: ConditionExpr
    tolerance: Optional[float] = None

    def __post_init__(self):
        if not self.semantic_key:
            raise RuleSchemaError("constraint semantic_key must be non-empty")
        missing = referenced_joints(self.condition) - set(self.keypoints)
        if missing:
            raise RuleSchemaError(
                f"constraint {self.semantic_key!r} references joints not in its "
                f"keypoints list: {sorted(missing)}"
            )


@dataclass(frozen=True)
class MovementRuleSet:
    movement_name: str
    rep_start: tuple[NamedConstraint, ...]
    rep_end: tuple[NamedConstraint, ...]
    rep_requirements: tuple[NamedConstraint, ...] = ()
    no_rep_conditions: tuple[NamedConstraint, ...] = ()
    # Free-text no-rep clauses that did not parse under the grammar; carried
    # for reporting, never evaluated.
    no_rep_annotations: tuple[str, ...] = ()
    y_axis: str = "up"

    def __post_init__(self):
        if not self.movement_name:
            raise RuleSchemaError("movement name must be non-empty")
        if not self.rep_start:
            raise RuleSchemaError("rule set is missing rep_start constraints")
        if not self.rep_end:
            raise RuleSchemaError("rule set is missing rep_end constraints")
        for group in GROUPS:
            keys = [c.semantic_key for c in getattr(self, group)]
            if len(keys) != len(set(keys)):
                raise RuleSchemaError(f"duplicate constraint names in {group}")

    def all_constraints(self) -> list[tuple[str, NamedConstraint]]:
        out = []
        for group in GROUPS:
            out.extend((group, c) for c in getattr(self, group))
        return out


def _slug(text: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "_", text.lower()).strip("_")
    return slug or "annotation"


def _parse_constraint(key: str, spec: dict, y_axis: str) -> NamedConstraint:
    if not isinstance(spec, dict) or "condition" not in spec:
        raise RuleSchemaError(f"constraint {key!r} must be an object with a 'condition'")
    try:
        expr = conditions.parse_condition(str(spec["condition"]))
    except GrammarError as exc:
        raise GrammarError(f"constraint {key!r}: {exc}") from exc
    if y_axis == "up":
        expr = conditions.flip_y_comparisons(expr)
    keypoints = tuple(spec.get("keypoints") or sorted(referenced_joints(expr)))
    tolerance = spec.get("tolerance")
    return NamedConstraint(
        semantic_key=key,
        keypoints=keypoints,
        condition=expr,
        tolerance=float(tolerance) if tolerance is not None else None,
    )


def _parse_group(name: str, raw, y_axis: str) -> tuple[list[NamedConstraint], list[str]]:
    constraints: list[NamedConstraint] = []
    annotations: list[str] = []
    if raw is None:
        return constraints, annotations
    if isinstance(raw, dict):
        for key, spec in raw.items():
            if name == "no_rep_conditions":
                try:
                    constraints.append(_parse_constraint(key, spec, y_axis))
                except GrammarError:
                    annotations.append(str(spec.get("condition", spec) if isinstance(spec, dict) else spec))
            else:
                constraints.append(_parse_constraint(key, spec, y_axis))
        return constraints, annotations
    if isinstance(raw, list):
        # Plain-list form: free-text clauses; grammar-parseable ones become
        # active constraints, the rest are inert annotations.
        for entry in raw:
            text = str(entry)
            try:
                expr = conditions.parse_condition(text)
            except GrammarError:
                annotations.append(text)
                continue
            if y_axis == "up":
                expr = conditions.flip_y_comparisons(expr)
            constraints.append(
                NamedConstraint(
                    semantic_key=_slug(text),
                    keypoints=tuple(sorted(referenced_joints(expr))),
                    condition=expr,
                )
            )
        if name != "no_rep_conditions" and annotations:
            raise RuleSchemaError(
                f"group {name!r} contains free-text entries that do not parse: {annotations}"
            )
        return constraints, annotations
    raise RuleSchemaError(f"group {name!r} must be an object or a list")


def parse_rule_set(document: str) -> MovementRuleSet:
    """Parse a rule document (JSON text) into a MovementRuleSet.

    Raises RuleParseError (with byte offset) on malformed JSON,
    RuleSchemaError on missing/empty required groups, and GrammarError
    (naming the semantic key) on unparseable conditions.
    """
    try:
        obj = json.loads(document)
    except json.JSONDecodeError as exc:
        raise RuleParseError(f"invalid JSON: {exc.msg}", offset=exc.pos) from exc
    if not isinstance(obj, dict):
        raise RuleSchemaError("rule document must be a JSON object")

    movement = obj.get("movement") or obj.get("movement_name") or ""
    y_axis = obj.get("y_axis", "up")
    if y_axis not in ("up", "down"):
        raise RuleSchemaError(f"y_axis must be 'up' or 'down', got {y_axis!r}")
    body = obj.get("response", obj)
    if not isinstance(body, dict):
        raise RuleSchemaError("'response' must be a JSON object")

    parsed: dict[str, list[NamedConstraint]] = {}
    annotations: list[str] = []
    for group in GROUPS:
        if group in ("rep_start", "rep_end") and not body.get(group):
            raise RuleSchemaError(f"rule document is missing group {group!r}")
        group_constraints, group_annotations = _parse_group(group, body.get(group), y_axis)
        parsed[group] = group_constraints
        annotations.extend(group_annotations)

    return MovementRuleSet(
        movement_name=str(movement),
        rep_start=tuple(parsed["rep_start"]),
        rep_end=tuple(parsed["rep_end"]),
        rep_requirements=tuple(parsed["rep_requirements"]),
        no_rep_conditions=tuple(parsed["no_rep_conditions"]),
        no_rep_annotations=tuple(annotations),
        y_axis=y_axis,
    )


def load_rule_set(path: Union[str, Path]) -> MovementRuleSet:
    return parse_rule_set(Path(path).read_text("utf-8"))


# --------------------------------------------------------------------------
# Schema-aware validation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class JointGap:
    """One joint a rule set references but the schema does not provide."""
    group: str
    semantic_key: str
    joint: str
    coverage: Optional[str]  # resolve directive, or None when uncovered

    @property
    def covered(self) -> bool:
        return self.coverage is not None


@dataclass(frozen=True)
class ValidationReport:
    schema_name: str
    gaps: tuple[JointGap, ...] = ()
    excluded_constraints: tuple[str, ...] = ()  # semantic keys dropped for this schema
    annotations: tuple[str, ...] = ()  # inert no-rep clauses

    @property
    def runnable(self) -> bool:
        return all(gap.covered for gap in self.gaps)

    def to_dict(self) -> dict:
        return {
            "schema": self.schema_name,
            "runnable": self.runnable,
            "gaps": [
                {
                    "group": g.group,
                    "constraint": g.semantic_key,
                    "joint": g.joint,
                    "covered_by": g.coverage,
                }
                for g in self.gaps
            ],
            "excluded_constraints": list(self.excluded_constraints),
            "inert_no_rep_annotations": list(self.annotations),
        }


def validate_rule_set(rules: MovementRuleSet, schema: KeypointSchema) -> ValidationReport:
    """Report every joint the rules need but the schema lacks, and whether a
    declared fallback (bar proxy, side selection, wrist-angle exclusion)
    covers it. Report-only: never raises for gaps.
    """
    gaps: list[JointGap] = []
    excluded: list[str] = []
    for group, constraint in rules.all_constraints():
        constraint_excluded = False
        for joint in constraint.keypoints:
            try:
                resolved = resolve_joint(schema, joint)
            except MissingKeypointError:
                gaps.append(JointGap(group, constraint.semantic_key, joint, None))
                continue
            if resolved.index is not None:
                continue
            gaps.append(JointGap(group, constraint.semantic_key, joint, resolved.directive))
            if resolved.directive == "exclude":
                constraint_excluded = True
        if constraint_excluded:
            excluded.append(constraint.semantic_key)
    return ValidationReport(
        schema_name=schema.schema_name,
        gaps=tuple(gaps),
        excluded_constraints=tuple(excluded),
        annotations=rules.no_rep_annotations,
    )


def bind_rule_set(rules: MovementRuleSet, schema: KeypointSchema) -> MovementRuleSet:
    """Drop constraints the schema cannot support (per the validation report).

    Raises RuleSchemaError when an uncovered gap remains or when exclusion
    empties rep_start/rep_end.
    """
    report = validate_rule_set(rules, schema)
    if not report.runnable:
        bad = [g for g in report.gaps if not g.covered]
        raise RuleSchemaError(
            f"rule set not runnable under schema {schema.schema_name!r}; "
            f"uncovered joints: {[(g.semantic_key, g.joint) for g in bad]}"
        )
    if not report.excluded_constraints:
        return rules
    dropped = set(report.excluded_constraints)

    def keep(group: tuple[NamedConstraint, ...]) -> tuple[NamedConstraint, ...]:
        return tuple(c for c in group if c.semantic_key not in dropped)

    return replace(
        rules,
        rep_start=keep(rules.rep_start),
        rep_end=keep(rules.rep_end),
        rep_requirements=keep(rules.rep_requirements),
        no_rep_conditions=keep(rules.no_rep_conditions),
    )
