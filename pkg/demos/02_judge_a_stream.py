"""Judging a keypoint stream end to end.

Loads the committed 300-frame synthetic squat (two clean reps and one
shallow one), runs the full pipeline, and prints the rep records the
state machine emits.
"""

from pathlib import Path

from repjudge import (
    ThresholdConfig,
    get_schema,
    judge_stream,
    load_rule_set,
    read_keypoint_stream,
)

ROOT = Path(__file__).resolve().parent.parent
RULES = ROOT / "src" / "repjudge" / "data" / "rules" / "squat.json"
STREAM = ROOT / "tests" / "fixtures" / "synthetic_squat.jsonl"


def main():
    rules = load_rule_set(RULES)
    frames = read_keypoint_stream(STREAM)
    print(f"judging {len(frames)} frames of {rules.movement_name!r}")

    result = judge_stream(frames, rules, get_schema("coco"), ThresholdConfig())
    for i, record in enumerate(result.records, 1):
        span = f"frames {record.t_start}-{record.t_end}"
        verdict = record.label.value.upper()
        extra = ""
        if record.failed_requirements:
            extra = f"  failed: {', '.join(record.failed_requirements)}"
        print(f"  rep {i}: {span:>18}  {verdict}{extra}")

    diag = result.diagnostics
    timing = diag.timing
    print(f"\nframes judged: {diag.cache.frames_total}, "
          f"pose inferences: {diag.cache.pose_inferences}")
    if timing["rtf"] is not None:
        print(f"wall {timing['wall_s']*1000:.0f} ms, RTF {timing['rtf']:.3f}")


if __name__ == "__main__":
    main()
