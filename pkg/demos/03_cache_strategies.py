"""Dual caching on a simulated edge budget.

Replays the committed fixture through a pose source with artificial
per-inference cost (a stand-in for a real detector + pose model), then
compares wall-clock, latency, and skip accounting across the four cache
configurations. Ends with the ROI-difference threshold calibration sweep.
"""

from pathlib import Path

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
from repjudge.pipeline import SimulatedPoseSource

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "tests" / "fixtures"

POSE_COST_MS = 5.0
DETECTOR_COST_MS = 3.0


def main():
    rules = load_rule_set(ROOT / "src" / "repjudge" / "data" / "rules" / "squat.json")
    schema = get_schema("coco")
    thresholds = ThresholdConfig()
    frames = read_keypoint_stream(FIXTURES / "synthetic_squat.jsonl")
    gray = load_gray_frames(FIXTURES / "synthetic_squat.gray")

    print("calibrating the ROI-difference threshold over {0, 1, 2, 4} ...")
    tau = calibrate_tau(gray, frames, rules, schema, thresholds, [0, 1, 2, 4])
    print(f"  chosen tau = {tau} (largest value preserving per-class rep counts)\n")

    configurations = [
        ("no cache", None),
        ("detector cache", CachePolicy(dc_enabled=True)),
        ("roi temporal cache", CachePolicy(rtc_enabled=True, rtc_tau=tau)),
        ("combined", CachePolicy(dc_enabled=True, rtc_enabled=True, rtc_tau=tau)),
    ]
    print(f"{'config':<20} {'wall ms':>8} {'RTF':>7} {'inferences':>11} "
          f"{'detector':>9} {'skips':>6}")
    baseline_wall = None
    for name, policy in configurations:
        source = SimulatedPoseSource(
            frames,
            pose_cost_s=POSE_COST_MS / 1000.0,
            detector_cost_s=DETECTOR_COST_MS / 1000.0,
        )
        result = judge_stream(
            source, rules, schema, thresholds,
            cache_policy=policy,
            gray_frames=gray if policy and policy.rtc_enabled else None,
            fps=30.0,
        )
        timing = result.diagnostics.timing
        stats = result.diagnostics.cache
        wall_ms = timing["wall_s"] * 1000
        if baseline_wall is None:
            baseline_wall = wall_ms
        print(f"{name:<20} {wall_ms:>8.0f} {timing['rtf']:>7.3f} "
              f"{stats.pose_inferences:>11} {stats.detector_invocations:>9} "
              f"{stats.rtc_skips:>6}")
    print(f"\ncombined speedup vs no cache: {baseline_wall / wall_ms:.1f}x "
          f"(simulated {POSE_COST_MS:.0f} ms pose + {DETECTOR_COST_MS:.0f} ms detector)")


if __name__ == "__main__":
    main()
