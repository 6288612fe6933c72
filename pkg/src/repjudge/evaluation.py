"""Detection-style evaluation of predicted reps against ground truth.

Predicted and annotated reps are frame segments with a class (valid or
invalid). Within each class, predictions are matched one-to-one to ground
truth by temporal IoU; a pair at or above the tIoU threshold is a true
positive, unmatched predictions are false positives, unmatched annotations
false negatives. Precision/recall/F1 are computed per class and macro-
averaged.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import AnnotationError, ConfigurationError
from .validator import RepLabel, RepRecord, ThresholdConfig

DEFAULT_TIOU_THRESHOLD = 0.2

# Ground-truth files encode valid = 0, invalid = 1.
_LABEL_BY_CODE = {0: RepLabel.VALID, 1: RepLabel.INVALID}
_CODE_BY_LABEL = {v: k for k, v in _LABEL_BY_CODE.items()}

Segment = tuple[int, int]


@dataclass(frozen=True)
class GroundTruthRep:
    t_start: int
    t_end: int
    label: RepLabel

    def __post_init__(self):
        if self.t_start > self.t_end:
            raise AnnotationError("ground-truth rep must satisfy t_start <= t_end")


def load_ground_truth(path: Union[str, Path]) -> dict:
    """Read one ground-truth file: video id, movement, view, reps."""
    obj = json.loads(Path(path).read_text("utf-8"))
    reps = [
        GroundTruthRep(int(r["start"]), int(r["end"]), _LABEL_BY_CODE[int(r["label"])])
        for r in obj["reps"]
    ]
    check_non_overlapping(reps)
    return {
        "video": obj.get("video"),
        "movement": obj.get("movement"),
        "view": obj.get("view"),
        "reps": reps,
    }


def save_ground_truth(path: Union[str, Path], video, movement, view, reps: Sequence[GroundTruthRep]):
    obj = {
        "video": video,
        "movement": movement,
        "view": view,
        "reps": [
            {"start": r.t_start, "end": r.t_end, "label": _CODE_BY_LABEL[r.label]}
            for r in reps
        ],
    }
    Path(path).write_text(json.dumps(obj, indent=1), "utf-8")


def check_non_overlapping(reps: Sequence[GroundTruthRep]) -> None:
    ordered = sorted(reps, key=lambda r: r.t_start)
    for a, b in zip(ordered, ordered[1:]):
        if b.t_start <= a.t_end:
            raise AnnotationError(
                f"ground-truth reps overlap: ({a.t_start},{a.t_end}) and ({b.t_start},{b.t_end})"
            )


def tiou(a: Segment, b: Segment) -> float:
    """Temporal IoU over inclusive frame intervals; 0 for disjoint segments."""
    if a[0] > a[1] or b[0] > b[1]:
        raise ConfigurationError("segments must be well-ordered")
    inter = min(a[1], b[1]) - max(a[0], b[0]) + 1
    if inter <= 0:
        return 0.0
    union = (a[1] - a[0] + 1) + (b[1] - b[0] + 1) - inter
    return inter / union


@dataclass
class MatchResult:
    tp: dict[RepLabel, int] = field(default_factory=dict)
    fp: dict[RepLabel, int] = field(default_factory=dict)
    fn: dict[RepLabel, int] = field(default_factory=dict)
    matches: list[tuple[int, int, float]] = field(default_factory=list)  # (pred idx, gt idx, tIoU)

    def total(self, counter: dict) -> int:
        return sum(counter.values())


def _greedy_match(pred_segments, gt_segments, tau):
    pairs = []
    for pi, p in enumerate(pred_segments):
        for gi, g in enumerate(gt_segments):
            value = tiou(p, g)
            if value >= tau:
                pairs.append((value, pi, gi))
    pairs.sort(key=lambda x: (-x[0], x[1], x[2]))
    used_p: set[int] = set()
    used_g: set[int] = set()
    matched = []
    for value, pi, gi in pairs:
        if pi in used_p or gi in used_g:
            continue
        used_p.add(pi)
        used_g.add(gi)
        matched.append((pi, gi, value))
    return matched


def _optimal_match(pred_segments, gt_segments, tau):
    """Maximum-cardinality matching over pairs with tIoU >= tau, breaking
    cardinality ties toward larger total tIoU."""
    if not pred_segments or not gt_segments:
        return []
    benefit = []
    for p in pred_segments:
        row = []
        for g in gt_segments:
            value = tiou(p, g)
            # Eligible pairs dominate: cardinality first, then total tIoU.
            row.append((1000.0 + value) if value >= tau else 0.0)
        benefit.append(row)
    benefit = np.asarray(benefit)
    rows, cols = linear_sum_assignment(benefit, maximize=True)
    matched = []
    for pi, gi in zip(rows, cols):
        if benefit[pi, gi] > 0:
            matched.append((int(pi), int(gi), tiou(pred_segments[pi], gt_segments[gi])))
    return matched


def match_reps(
    pred: Sequence[RepRecord],
    gt: Sequence[GroundTruthRep],
    tau_tiou: float = DEFAULT_TIOU_THRESHOLD,
    algorithm: str = "greedy",
) -> MatchResult:
    """Class-partitioned one-to-one matching of predictions to ground truth.

    ``algorithm`` is "greedy" (descending tIoU, the default) or "optimal"
    (maximum-cardinality assignment); they can differ only in pathological
    overlap patterns.
    """
    check_non_overlapping(gt)
    if algorithm not in ("greedy", "optimal"):
        raise ConfigurationError(f"unknown matching algorithm {algorithm!r}")
    result = MatchResult()
    for label in (RepLabel.VALID, RepLabel.INVALID):
        pred_idx = [i for i, p in enumerate(pred) if p.label is label]
        gt_idx = [i for i, g in enumerate(gt) if g.label is label]
        pred_segments = [(pred[i].t_start, pred[i].t_end) for i in pred_idx]
        gt_segments = [(gt[i].t_start, gt[i].t_end) for i in gt_idx]
        matcher = _greedy_match if algorithm == "greedy" else _optimal_match
        matched = matcher(pred_segments, gt_segments, tau_tiou)
        result.tp[label] = len(matched)
        result.fp[label] = len(pred_segments) - len(matched)
        result.fn[label] = len(gt_segments) - len(matched)
        result.matches.extend(
            (pred_idx[pi], gt_idx[gi], value) for pi, gi, value in matched
        )
    return result


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class PrfReport:
    per_class: dict[RepLabel, ClassMetrics]
    macro_precision: float
    macro_recall: float
    macro_f1: float

    def to_dict(self) -> dict:
        return {
            "per_class": {
                label.value: {
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                }
                for label, m in self.per_class.items()
            },
            "macro": {
                "precision": self.macro_precision,
                "recall": self.macro_recall,
                "f1": self.macro_f1,
            },
        }


def prf(result: MatchResult) -> PrfReport:
    """Per-class precision/recall/F1 with zero-denominator metrics scored 0,
    macro-averaged over the two classes."""
    per_class = {}
    for label in (RepLabel.VALID, RepLabel.INVALID):
        tp = result.tp.get(label, 0)
        fp = result.fp.get(label, 0)
        fn = result.fn.get(label, 0)
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        per_class[label] = ClassMetrics(precision, recall, f1)
    values = list(per_class.values())
    return PrfReport(
        per_class=per_class,
        macro_precision=sum(m.precision for m in values) / len(values),
        macro_recall=sum(m.recall for m in values) / len(values),
        macro_f1=sum(m.f1 for m in values) / len(values),
    )


def evaluate_video(
    pred: Sequence[RepRecord],
    gt: Sequence[GroundTruthRep],
    tau_tiou: float = DEFAULT_TIOU_THRESHOLD,
    algorithm: str = "greedy",
) -> PrfReport:
    return prf(match_reps(pred, gt, tau_tiou, algorithm))


def rtf(processing_time: float, video_duration: float) -> float:
    """Real-time factor: processing time over media duration."""
    if video_duration <= 0:
        raise ConfigurationError("video duration must be positive")
    return processing_time / video_duration


# --------------------------------------------------------------------------
# Threshold grid search
# --------------------------------------------------------------------------

def threshold_grid(
    angle_tolerances: Sequence[float] = (3.0, 5.0, 8.0, 12.0),
    position_tolerances: Sequence[float] = (0.02, 0.05, 0.1),
    debounces: Sequence[int] = (1, 2, 3),
    base: Optional[ThresholdConfig] = None,
) -> list[ThresholdConfig]:
    """Cartesian grid over the searched threshold dimensions."""
    base = base or ThresholdConfig()
    grid = []
    for angle, position, debounce in itertools.product(
        angle_tolerances, position_tolerances, debounces
    ):
        grid.append(
            ThresholdConfig(
                angle_tolerance=float(angle),
                position_tolerance=float(position),
                debounce=int(debounce),
                overrides=dict(base.overrides),
                conf_floor=base.conf_floor,
                min_rep_duration=base.min_rep_duration,
                include_end_frame_requirements=base.include_end_frame_requirements,
            )
        )
    return grid


def _tie_key(config: ThresholdConfig) -> tuple:
    # Ties prefer the stricter judge: smaller tolerances, then smaller debounce.
    return (config.angle_tolerance, config.position_tolerance, config.debounce)


def grid_search_thresholds(
    space: Sequence[ThresholdConfig],
    dataset: Sequence[tuple],  # (pose frames, ground-truth reps) per video
    rules,
    schema,
    tau_tiou: float = DEFAULT_TIOU_THRESHOLD,
    tracker_mode: str = "iou",
    judge=None,
) -> tuple[ThresholdConfig, float]:
    """Exhaustive search; returns the config maximizing mean macro-F1 across
    the group's videos and that best score. Deterministic: grid order never
    affects the winner (ties go to the smaller tolerances).
    """
    from .pipeline import judge_stream

    if not space:
        raise ConfigurationError("threshold grid must be non-empty")
    if not dataset:
        raise ConfigurationError("dataset group must be non-empty")
    judge = judge or (
        lambda frames, config: judge_stream(
            frames, rules, schema, config, tracker_mode=tracker_mode
        ).records
    )
    best: Optional[tuple[float, tuple, ThresholdConfig]] = None
    for config in space:
        scores = []
        for frames, gt in dataset:
            records = judge(frames, config)
            scores.append(evaluate_video(records, gt, tau_tiou).macro_f1)
        mean_f1 = sum(scores) / len(scores)
        candidate = (-mean_f1, _tie_key(config), config)
        if best is None or candidate[:2] < best[:2]:
            best = candidate
    return best[2], -best[0]


# --------------------------------------------------------------------------
# Report formatting
# --------------------------------------------------------------------------

def format_report_table(rows: Sequence[dict]) -> str:
    """Plain-text table of per-(model, view) metrics; rows carry keys
    model, view, precision, recall, f1."""
    header = f"{'Model':<16} {'View':<8} {'Precision':>9} {'Recall':>9} {'F1':>9}"
    lines = [header, "-" * len(header)]
    for row in rows:
        lines.append(
            f"{row['model']:<16} {row['view']:<8} "
            f"{row['precision']:>9.3f} {row['recall']:>9.3f} {row['f1']:>9.3f}"
        )
    return "\n".join(lines)
