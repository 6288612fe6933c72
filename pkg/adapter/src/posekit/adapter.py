"""Extraction entry points: video in, engine file formats out."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import cv2
import numpy as np

from .backends import AdapterError, get_backend
from .formats import RawStreamWriter, keypoint_line, write_keypoint_stream

DEFAULT_MODEL = "silhouette-td"


@dataclass(frozen=True)
class AdapterConfig:
    video: str
    model: str = DEFAULT_MODEL
    detector: bool = True
    keypoints_out: Optional[str] = None
    frames_out: Optional[str] = None
    fps_override: Optional[float] = None

    def __post_init__(self):
        backend = get_backend(self.model)
        if backend.top_down and not self.detector:
            raise AdapterError(
                f"model {self.model!r} is detector-backed (top-down); "
                "the detector toggle must stay on"
            )


def decode_video(path: str) -> tuple[list[np.ndarray], float]:
    """All frames (BGR) plus the container frame rate."""
    if not Path(path).exists():
        raise AdapterError(f"video not found: {path}")
    capture = cv2.VideoCapture(str(path))
    if not capture.isOpened():
        raise AdapterError(f"cannot decode video: {path}")
    fps = capture.get(cv2.CAP_PROP_FPS) or 0.0
    frames = []
    while True:
        ok, frame = capture.read()
        if not ok:
            break
        frames.append(frame)
    capture.release()
    if not frames:
        raise AdapterError(f"no decodable frames in: {path}")
    return frames, (fps if fps > 0 else 30.0)


def extract(config: AdapterConfig) -> int:
    """Run the pose backend over the video and write the keypoint stream.

    Returns the number of stream lines (one per decoded frame).
    """
    if not config.keypoints_out:
        raise AdapterError("extract needs a keypoint output path")
    backend = get_backend(config.model)
    frames, fps = decode_video(config.video)
    fps = config.fps_override or fps
    try:
        per_frame = backend.run(frames)
    except AdapterError:
        raise
    except Exception as exc:  # backend implementations vary
        raise AdapterError(f"pose backend {config.model!r} failed: {exc}") from exc
    lines = (
        keypoint_line(i, i / fps, backend.schema, instances)
        for i, instances in enumerate(per_frame)
    )
    return write_keypoint_stream(lines, config.keypoints_out)


def export_frames(config: AdapterConfig) -> int:
    """Write the video as an 8-bit grayscale raw stream with sidecar.

    Grayscale conversion uses the standard luma weights; frame dimensions
    are preserved. Returns the frame count.
    """
    if not config.frames_out:
        raise AdapterError("export-frames needs a frame output path")
    frames, _ = decode_video(config.video)
    with RawStreamWriter(config.frames_out) as writer:
        for frame in frames:
            writer.add(cv2.cvtColor(frame, cv2.COLOR_BGR2GRAY))
    return writer.frames
