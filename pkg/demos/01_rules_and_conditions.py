"""Movement rules and the condition grammar.

Walks through parsing a rule document, evaluating individual conditions
against hand-made features, and checking which joints a schema can serve.
"""

from pathlib import Path

from repjudge import (
    ThresholdConfig,
    evaluate_condition,
    get_schema,
    load_rule_set,
    parse_condition,
    pretty,
    validate_rule_set,
)

RULES_DIR = Path(__file__).resolve().parent.parent / "src" / "repjudge" / "data" / "rules"


def main():
    print("== condition grammar ==")
    for text in (
        "Angle(left_hip, left_knee, left_ankle) ~= 180 deg",
        "Y(left_hip) < Y(left_knee)",
        "X(left_shoulder) ~= X(left_hip) and X(right_shoulder) ~= X(right_hip)",
    ):
        expr = parse_condition(text)
        print(f"  {text!r}\n    -> {pretty(expr)}")

    thresholds = ThresholdConfig(angle_tolerance=5.0)
    expr = parse_condition("Angle(a,b,c) ~= 180 deg")
    for angle in (178.0, 172.0):
        verdict = evaluate_condition(expr, {"angle(a,b,c)": angle}, thresholds)
        print(f"  angle {angle} vs ~=180 at tolerance 5: {verdict}")

    print("\n== rule documents ==")
    for name in ("squat", "deadlift", "double_under"):
        rules = load_rule_set(RULES_DIR / f"{name}.json")
        print(f"  {rules.movement_name}:")
        print(f"    start constraints: {[c.semantic_key for c in rules.rep_start]}")
        print(f"    requirements:      {[c.semantic_key for c in rules.rep_requirements]}")
        if rules.no_rep_annotations:
            print(f"    inert no-rep text: {list(rules.no_rep_annotations)}")

    print("\n== schema-aware validation ==")
    rules = load_rule_set(RULES_DIR / "double_under.json")
    for schema_name in ("coco", "coco_wholebody"):
        report = validate_rule_set(rules, get_schema(schema_name))
        print(f"  under {schema_name}: runnable={report.runnable}, "
              f"excluded={list(report.excluded_constraints)}")
        for gap in report.gaps[:3]:
            print(f"    gap: {gap.joint} -> covered by {gap.coverage}")


if __name__ == "__main__":
    main()
