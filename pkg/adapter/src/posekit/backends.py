"""Pose backends.

The default "silhouette" family is fully self-contained: it estimates a
static background from sampled frames, extracts the largest foreground
blob per frame, and fits a proportional 17-joint skeleton into its box.
Crude but real - keypoints respond to what is actually in the video - and
it needs no model weights, so the adapter runs anywhere.

Heavier toolkits plug in through ``register_backend``: a backend is any
callable taking the decoded BGR frame list and returning per-frame
instance lists in the keypoint-stream shape.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import cv2
import numpy as np

COCO_SCHEMA = "coco"

# (x fraction of bbox width, y fraction of bbox height) for each coco joint,
# standing-person proportions.
_PROPORTIONS = {
    "nose": (0.50, 0.06),
    "left_eye": (0.46, 0.05),
    "right_eye": (0.54, 0.05),
    "left_ear": (0.42, 0.06),
    "right_ear": (0.58, 0.06),
    "left_shoulder": (0.35, 0.20),
    "right_shoulder": (0.65, 0.20),
    "left_elbow": (0.30, 0.35),
    "right_elbow": (0.70, 0.35),
    "left_wrist": (0.27, 0.50),
    "right_wrist": (0.73, 0.50),
    "left_hip": (0.40, 0.52),
    "right_hip": (0.60, 0.52),
    "left_knee": (0.40, 0.74),
    "right_knee": (0.60, 0.74),
    "left_ankle": (0.40, 0.95),
    "right_ankle": (0.60, 0.95),
}
_COCO_ORDER = list(_PROPORTIONS)


class AdapterError(Exception):
    """Backend or codec failure, with its cause in the message."""


@dataclass(frozen=True)
class BackendInfo:
    name: str
    schema: str
    top_down: bool  # detector-backed: instances carry boxes
    run: Callable


_REGISTRY: dict[str, BackendInfo] = {}


def register_backend(info: BackendInfo) -> None:
    _REGISTRY[info.name] = info


def get_backend(name: str) -> BackendInfo:
    if name not in _REGISTRY:
        raise AdapterError(
            f"unknown pose model {name!r}; available: {sorted(_REGISTRY)}"
        )
    return _REGISTRY[name]


def available_backends() -> list[str]:
    return sorted(_REGISTRY)


# ---------------------------------------------------------------------------
# Silhouette backend
# ---------------------------------------------------------------------------

def _background(frames: list[np.ndarray], samples: int = 15) -> np.ndarray:
    idx = np.linspace(0, len(frames) - 1, min(samples, len(frames))).astype(int)
    stack = np.stack([cv2.cvtColor(frames[i], cv2.COLOR_BGR2GRAY) for i in idx])
    return np.median(stack, axis=0).astype(np.uint8)


def _foreground_box(gray: np.ndarray, background: np.ndarray, threshold: int = 25):
    """Box and fill ratio of the largest changed region, or None."""
    diff = cv2.absdiff(gray, background)
    mask = (diff > threshold).astype(np.uint8)
    if mask.sum() < 9:
        return None
    count, labels, stats, _ = cv2.connectedComponentsWithStats(mask, connectivity=8)
    if count < 2:
        return None
    largest = 1 + int(np.argmax(stats[1:, cv2.CC_STAT_AREA]))
    x = int(stats[largest, cv2.CC_STAT_LEFT])
    y = int(stats[largest, cv2.CC_STAT_TOP])
    w = int(stats[largest, cv2.CC_STAT_WIDTH])
    h = int(stats[largest, cv2.CC_STAT_HEIGHT])
    area = int(stats[largest, cv2.CC_STAT_AREA])
    if w < 3 or h < 3:
        return None
    fill = area / float(w * h)
    return (x, y, w, h), fill


def _skeleton_in_box(box, fill: float) -> list[list[float]]:
    x, y, w, h = box
    conf = float(np.clip(0.3 + 0.7 * fill, 0.0, 0.95))
    return [
        [x + fx * w, y + fy * h, conf]
        for fx, fy in (_PROPORTIONS[j] for j in _COCO_ORDER)
    ]


def _run_silhouette(frames: list[np.ndarray], with_boxes: bool) -> list[list[dict]]:
    if not frames:
        return []
    background = _background(frames)
    per_frame = []
    for frame in frames:
        gray = cv2.cvtColor(frame, cv2.COLOR_BGR2GRAY)
        found = _foreground_box(gray, background)
        if found is None:
            per_frame.append([])
            continue
        box, fill = found
        instance = {"kps": _skeleton_in_box(box, fill)}
        if with_boxes:
            instance["bbox"] = [float(v) for v in box]
        per_frame.append([instance])
    return per_frame


register_backend(
    BackendInfo(
        name="silhouette-td",
        schema=COCO_SCHEMA,
        top_down=True,
        run=lambda frames: _run_silhouette(frames, with_boxes=True),
    )
)
register_backend(
    BackendInfo(
        name="silhouette-bu",
        schema=COCO_SCHEMA,
        top_down=False,
        run=lambda frames: _run_silhouette(frames, with_boxes=False),
    )
)
