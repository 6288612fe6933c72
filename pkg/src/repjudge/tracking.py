"""Frame-to-frame person association and target lock-on.

Matching is greedy by descending similarity (IoU of detector boxes for
top-down pipelines, keypoint similarity otherwise); streams here hold at
most a handful of people, so greedy is deterministic and cheap. Track ids
are never reused within a stream. The judged athlete is the largest
instance at initialization and stays locked thereafter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigurationError, NoTargetError, UndefinedSimilarityError
from .keypoints import PersonInstance, PoseFrame

DEFAULT_IOU_THRESHOLD = 0.3
DEFAULT_OKS_THRESHOLD = 0.5
DEFAULT_MAX_GAP_FRAMES = 15

Box = tuple[float, float, float, float]


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two (x, y, w, h) boxes; 0 when union is 0."""
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    if aw < 0 or ah < 0 or bw < 0 or bh < 0:
        raise ConfigurationError("box width/height must be non-negative")
    ix = max(ax, bx)
    iy = max(ay, by)
    ix2 = min(ax + aw, bx + bw)
    iy2 = min(ay + ah, by + bh)
    inter = max(0.0, ix2 - ix) * max(0.0, iy2 - iy)
    union = aw * ah + bw * bh - inter
    if union <= 0:
        return 0.0
    return inter / union


def oks(
    reference: np.ndarray,
    candidate: np.ndarray,
    scale: float,
    kappa,
) -> float:
    """Keypoint similarity: mean of exp(-d_i^2 / (2 s^2 k_i^2)) over joints
    visible in the reference.

    ``reference`` is (K, 3) with the confidence column acting as the
    visibility indicator (v_i > 0); ``candidate`` is (K, 2) or (K, 3).
    """
    reference = np.asarray(reference, dtype=float)
    candidate = np.asarray(candidate, dtype=float)
    if scale <= 0:
        raise ConfigurationError("object scale must be positive")
    kappa = np.asarray(kappa, dtype=float)
    if reference.shape[0] != candidate.shape[0] or reference.shape[0] != kappa.shape[0]:
        raise ConfigurationError("keypoint/kappa lengths must agree")
    visible = reference[:, 2] > 0
    if not np.any(visible):
        raise UndefinedSimilarityError("no visible joints in reference pose")
    d2 = np.sum((reference[visible, :2] - candidate[visible, :2]) ** 2, axis=1)
    k = kappa[visible]
    sims = np.exp(-d2 / (2.0 * scale**2 * k**2))
    return float(np.mean(sims))


@dataclass
class _Track:
    bbox: Optional[Box]
    keypoints: np.ndarray
    last_seen: int


@dataclass
class TrackState:
    iou_threshold: float = DEFAULT_IOU_THRESHOLD
    oks_threshold: float = DEFAULT_OKS_THRESHOLD
    max_gap_frames: int = DEFAULT_MAX_GAP_FRAMES
    kappa: Optional[np.ndarray] = None  # required for OKS mode
    next_track_id: int = 0
    target_id: Optional[int] = None
    tracks: dict[int, _Track] = field(default_factory=dict)

    def _new_id(self) -> int:
        tid = self.next_track_id
        self.next_track_id += 1
        return tid


def _similarity(state: TrackState, track: _Track, inst: PersonInstance, mode: str) -> float:
    if mode == "iou":
        return iou(track.bbox, inst.bbox)
    box = track.bbox
    if box is None:
        ref_inst = PersonInstance(keypoints=track.keypoints)
        box = ref_inst.extent_box()
    if box is None or box[2] <= 0 or box[3] <= 0:
        return 0.0
    scale = math.sqrt(box[2] * box[3])
    try:
        return oks(track.keypoints, inst.keypoints, scale, state.kappa)
    except UndefinedSimilarityError:
        return 0.0


def track_step(state: TrackState, frame: PoseFrame, mode: str = "iou") -> list[int]:
    """Assign a track id to each instance of ``frame``; mutates ``state``.

    Greedy best-match: pairs sorted by descending similarity; an instance
    inherits the id of its best unmatched active track when similarity
    exceeds the mode threshold, else starts a fresh track. Tracks unseen
    for more than ``max_gap_frames`` are retired first.
    """
    if mode not in ("iou", "oks"):
        raise ConfigurationError(f"unknown tracker mode {mode!r}")
    if mode == "oks" and state.kappa is None:
        raise ConfigurationError("OKS tracking requires per-joint kappa constants")

    stale = [
        tid
        for tid, track in state.tracks.items()
        if frame.frame_index - track.last_seen > state.max_gap_frames
        and tid != state.target_id
    ]
    for tid in stale:
        del state.tracks[tid]

    if mode == "iou":
        for inst in frame.instances:
            if inst.bbox is None:
                raise ConfigurationError("IoU tracking requires detector boxes on every instance")

    threshold = state.iou_threshold if mode == "iou" else state.oks_threshold
    pairs = []
    for tid, track in state.tracks.items():
        for idx, inst in enumerate(frame.instances):
            sim = _similarity(state, track, inst, mode)
            if sim > threshold:
                pairs.append((sim, tid, idx))
    # Descending similarity; ties resolved by older track then instance order.
    pairs.sort(key=lambda p: (-p[0], p[1], p[2]))

    assigned: dict[int, int] = {}
    used_tracks: set[int] = set()
    for sim, tid, idx in pairs:
        if tid in used_tracks or idx in assigned:
            continue
        assigned[idx] = tid
        used_tracks.add(tid)

    ids: list[int] = []
    for idx, inst in enumerate(frame.instances):
        tid = assigned.get(idx)
        if tid is None:
            tid = state._new_id()
        state.tracks[tid] = _Track(
            bbox=inst.bbox if inst.bbox is not None else inst.extent_box(),
            keypoints=inst.keypoints,
            last_seen=frame.frame_index,
        )
        ids.append(tid)
    return ids


def select_target(frame: PoseFrame) -> int:
    """Track id of the largest-area instance (detector box, else keypoint
    extent). Ties take the lowest instance index. Selection happens once;
    callers keep the returned id sticky for the rest of the stream.
    """
    best_tid = None
    best_area = -1.0
    for inst in frame.instances:
        box = inst.area_box()
        if box is None:
            continue
        area = box[2] * box[3]
        if area > best_area:
            best_area = area
            best_tid = inst.track_id
    if best_tid is None:
        raise NoTargetError("no person instance with a usable box in this frame")
    return best_tid
