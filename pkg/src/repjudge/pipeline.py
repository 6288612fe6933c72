"""End-to-end judging of a keypoint stream.

Composes tracking, feature extraction, the rep validator, and the dual
caching mechanism. Records are a pure function of the inputs; wall-clock
measurements live in a separate timing block of the diagnostics so golden
comparisons can ignore them.
"""

from __future__ import annotations

import json
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .cache import CachePolicy, CacheStats, GrayFrame, RtcState, dc_bbox
from .errors import ConfigurationError, NoTargetError
from .features import KinematicFeatures, compute_features
from .keypoints import KeypointSchema, PersonInstance, PoseFrame
from .rules import MovementRuleSet, bind_rule_set
from .tracking import TrackState, select_target, track_step
from .validator import RepRecord, RepValidator, ThresholdConfig


class PoseSource:
    """Supplies pose frames on demand so skipped frames cost nothing.

    ``meta`` is free (frame index and timestamp); ``infer`` stands in for
    running detection plus pose estimation and is only called on frames the
    cache does not skip.
    """

    def __init__(self, frames: Sequence[PoseFrame]):
        self._frames = list(frames)
        self.has_detector = any(
            inst.bbox is not None for f in self._frames for inst in f.instances
        )

    def __len__(self) -> int:
        return len(self._frames)

    def meta(self, i: int) -> tuple[int, float]:
        frame = self._frames[i]
        return frame.frame_index, frame.timestamp

    def schema_name(self) -> Optional[str]:
        for frame in self._frames:
            if frame.schema_name:
                return frame.schema_name
        return None

    def infer(self, i: int, run_detector: bool) -> PoseFrame:
        return self._frames[i]


class SimulatedPoseSource(PoseSource):
    """Pose source with configurable per-invocation inference cost, used to
    benchmark cache strategies without real models."""

    def __init__(
        self,
        frames: Sequence[PoseFrame],
        pose_cost_s: float = 0.0,
        detector_cost_s: float = 0.0,
    ):
        super().__init__(frames)
        self.pose_cost_s = pose_cost_s
        self.detector_cost_s = detector_cost_s

    def infer(self, i: int, run_detector: bool) -> PoseFrame:
        cost = self.pose_cost_s + (self.detector_cost_s if run_detector else 0.0)
        if cost > 0:
            time.sleep(cost)
        return self._frames[i]


@dataclass
class Diagnostics:
    cache: CacheStats = field(default_factory=CacheStats)
    unavailable_feature_frames: int = 0
    suppressed_short_reps: int = 0
    target_missing_frames: int = 0
    no_target: bool = False
    partial_start_seen: bool = False
    dc_box: Optional[tuple[float, float, float, float]] = None
    timing: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "cache": self.cache.to_dict(),
            "unavailable_feature_frames": self.unavailable_feature_frames,
            "suppressed_short_reps": self.suppressed_short_reps,
            "target_missing_frames": self.target_missing_frames,
            "no_target": self.no_target,
            "partial_start_seen": self.partial_start_seen,
            "dc_box": list(self.dc_box) if self.dc_box else None,
            "timing": dict(self.timing),
        }


@dataclass
class JudgeResult:
    movement: str
    records: list[RepRecord]
    diagnostics: Diagnostics

    def to_dict(self) -> dict:
        return {
            "movement": self.movement,
            "reps": [r.to_dict() for r in self.records],
            "diagnostics": self.diagnostics.to_dict(),
        }

    def records_json(self) -> bytes:
        """Canonical serialization of the records alone (no timing)."""
        return json.dumps([r.to_dict() for r in self.records], sort_keys=True).encode()


def write_records(result: JudgeResult, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(result.to_dict(), indent=1), "utf-8")


def read_records(path: Union[str, Path]) -> dict:
    return json.loads(Path(path).read_text("utf-8"))


def judge_stream(
    poses: Union[PoseSource, Sequence[PoseFrame]],
    rules: MovementRuleSet,
    schema: KeypointSchema,
    thresholds: ThresholdConfig,
    tracker_mode: str = "iou",
    cache_policy: Optional[CachePolicy] = None,
    gray_frames: Optional[Sequence[GrayFrame]] = None,
    fps: Optional[float] = None,
    streamed: bool = False,
) -> JudgeResult:
    """Judge one keypoint stream and return rep records plus diagnostics.

    Deterministic in its inputs. ``streamed`` paces ingestion at ``fps``
    (which it then requires) and reports busy-time RTF; prerecorded runs
    report wall-clock RTF.
    """
    source = poses if isinstance(poses, PoseSource) else PoseSource(poses)
    policy = cache_policy or CachePolicy()
    n = len(source)
    diag = Diagnostics()
    stats = diag.cache
    stats.frames_total = n

    stream_schema = source.schema_name()
    if stream_schema is not None and stream_schema != schema.schema_name:
        raise ConfigurationError(
            f"stream carries schema {stream_schema!r} but judge was configured "
            f"with {schema.schema_name!r}"
        )
    if policy.rtc_enabled:
        if gray_frames is None or len(gray_frames) < n:
            raise ConfigurationError("RTC needs a grayscale frame per pose frame")
    if policy.dc_enabled and not source.has_detector:
        raise ConfigurationError("detector cache applies to detector-backed (top-down) streams only")
    if streamed and not fps:
        raise ConfigurationError("streamed mode requires frame pacing metadata (fps)")

    bound = bind_rule_set(rules, schema)
    validator = RepValidator(bound, thresholds)
    tracker = TrackState(kappa=np.asarray(schema.kappa))
    rtc = RtcState(policy=policy)

    frame_size = None
    if gray_frames is not None and len(gray_frames) > 0:
        frame_size = (gray_frames[0].width, gray_frames[0].height)

    records: list[RepRecord] = []
    last_target_inst: Optional[PersonInstance] = None
    target_seen = False
    detection_cached = False
    per_frame_ms: list[float] = []
    decision_latency_ms: list[float] = []
    timestamps: list[float] = []

    wall_start = time.perf_counter()
    busy_s = 0.0

    for i in range(n):
        frame_index, timestamp = source.meta(i)
        timestamps.append(timestamp)
        if streamed:
            due = wall_start + i / fps
            now = time.perf_counter()
            if now < due:
                time.sleep(due - now)

        t_in = time.perf_counter()
        decision, d_t = ("infer", None)
        if policy.rtc_enabled and target_seen and gray_frames is not None:
            decision, d_t = rtc.decide(gray_frames[i])
        stats.rpd_trace.append(d_t)

        if decision == "skip":
            stats.rtc_skips += 1
            target_inst = last_target_inst
        else:
            run_detector = source.has_detector and not (policy.dc_enabled and detection_cached)
            frame = source.infer(i, run_detector)
            if run_detector:
                stats.detector_invocations += 1
            stats.pose_inferences += 1
            for inst in frame.instances:
                if len(inst.keypoints) != len(schema):
                    raise ConfigurationError(
                        f"frame {frame.frame_index}: instance has {len(inst.keypoints)} "
                        f"keypoints, schema {schema.schema_name!r} defines {len(schema)}"
                    )
            ids = track_step(tracker, frame, mode=tracker_mode)
            tracked = frame.with_track_ids(ids)
            if tracker.target_id is None and tracked.instances:
                try:
                    tracker.target_id = select_target(tracked)
                except NoTargetError:
                    pass
            target_inst = None
            for inst in tracked.instances:
                if inst.track_id == tracker.target_id and tracker.target_id is not None:
                    target_inst = inst
                    break
            if target_inst is not None:
                target_seen = True
                last_target_inst = target_inst
                if policy.dc_enabled and not detection_cached and target_inst.bbox is not None:
                    bounds = frame_size or (float("inf"), float("inf"))
                    diag.dc_box = dc_bbox(target_inst.bbox, policy.dc_offset, bounds)
                    detection_cached = True
                if policy.rtc_enabled and gray_frames is not None:
                    extent = target_inst.extent_box()
                    if extent is not None and extent[2] > 0 and extent[3] > 0:
                        rtc.update_after_inference(gray_frames[i], extent)

        if target_inst is None:
            diag.target_missing_frames += 1
            features = KinematicFeatures()
        else:
            features = compute_features(target_inst, bound, schema, thresholds.conf_floor)

        record = validator.step(frame_index, features)
        t_out = time.perf_counter()
        busy_s += t_out - t_in
        per_frame_ms.append((t_out - t_in) * 1000.0)
        if record is not None:
            records.append(record)
            decision_latency_ms.append((t_out - t_in) * 1000.0)

    if n > 0:
        final = validator.finalize(source.meta(n - 1)[0])
        if final is not None:
            records.append(final)

    wall_s = time.perf_counter() - wall_start
    diag.no_target = n > 0 and not target_seen
    diag.unavailable_feature_frames = validator.state.unavailable_feature_frames
    diag.suppressed_short_reps = validator.state.suppressed_short_reps
    diag.partial_start_seen = validator.state.partial_start_seen

    duration_s = None
    if fps:
        duration_s = n / fps
    elif n > 1 and timestamps[-1] > timestamps[0]:
        duration_s = (timestamps[-1] - timestamps[0]) * n / (n - 1)
    rtf_wall = wall_s / duration_s if duration_s else None
    rtf_busy = busy_s / duration_s if duration_s else None
    diag.timing = {
        "wall_s": wall_s,
        "busy_s": busy_s,
        "duration_s": duration_s,
        "rtf": rtf_busy if streamed else rtf_wall,
        "rtf_wall": rtf_wall,
        "rtf_busy": rtf_busy,
        "per_frame_ms": per_frame_ms,
        "decision_latency_ms": decision_latency_ms,
        "mean_decision_latency_ms": (
            float(np.mean(decision_latency_ms)) if decision_latency_ms else None
        ),
        "median_decision_latency_ms": (
            float(np.median(decision_latency_ms)) if decision_latency_ms else None
        ),
    }
    return JudgeResult(movement=rules.movement_name, records=records, diagnostics=diag)


def rep_class_counts(records: Sequence[RepRecord]) -> Counter:
    return Counter(r.label for r in records)


def calibrate_tau(
    gray_frames: Sequence[GrayFrame],
    poses: Union[PoseSource, Sequence[PoseFrame]],
    rules: MovementRuleSet,
    schema: KeypointSchema,
    thresholds: ThresholdConfig,
    tau_grid: Sequence[float],
    tracker_mode: str = "iou",
    base_policy: Optional[CachePolicy] = None,
) -> float:
    """Largest tau in the grid whose cached run preserves the no-cache
    per-class rep counts; 0.0 when none does."""
    if not tau_grid:
        raise ConfigurationError("tau grid must be non-empty")
    frames = list(poses) if not isinstance(poses, PoseSource) else poses
    oracle = judge_stream(
        frames, rules, schema, thresholds, tracker_mode=tracker_mode, cache_policy=None
    )
    oracle_counts = rep_class_counts(oracle.records)
    base = base_policy or CachePolicy()
    for tau in sorted(tau_grid, reverse=True):
        policy = CachePolicy(
            dc_enabled=base.dc_enabled,
            dc_offset=base.dc_offset,
            rtc_enabled=True,
            rtc_tau=float(tau),
            patch_size=base.patch_size,
            smooth_kernel=base.smooth_kernel,
            smooth_sigma=base.smooth_sigma,
            roi_padding=base.roi_padding,
            strict_chaining=base.strict_chaining,
        )
        cached = judge_stream(
            frames,
            rules,
            schema,
            thresholds,
            tracker_mode=tracker_mode,
            cache_policy=policy,
            gray_frames=gray_frames,
        )
        if rep_class_counts(cached.records) == oracle_counts:
            return float(tau)
    return 0.0
