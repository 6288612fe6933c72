"""Writers for the judging engine's input file formats.

These are the adapter's contract with the engine: a JSON-Lines keypoint
stream (one frame per line) and a raw 8-bit grayscale frame stream with a
JSON sidecar. The layouts are written natively here so the adapter stays
dependency-free of the engine itself.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np


def keypoint_line(
    frame_index: int,
    timestamp: float,
    schema: str,
    instances: Sequence[dict],
) -> str:
    """One stream line; each instance dict carries ``kps`` ([[x, y, c], ...])
    and optionally ``bbox`` ([x, y, w, h]) and ``track_id``."""
    return json.dumps(
        {
            "frame": frame_index,
            "t": timestamp,
            "schema": schema,
            "instances": list(instances),
        }
    )


def write_keypoint_stream(lines: Iterable[str], path) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for line in lines:
            f.write(line + "\n")
            count += 1
    return count


class RawStreamWriter:
    """Accumulates grayscale frames and writes the raw stream + sidecar."""

    def __init__(self, path):
        self.path = Path(path)
        self._file = open(self.path, "wb")
        self.width: Optional[int] = None
        self.height: Optional[int] = None
        self.frames = 0

    def add(self, gray: np.ndarray) -> None:
        gray = np.asarray(gray, dtype=np.uint8)
        h, w = gray.shape
        if self.width is None:
            self.width, self.height = w, h
        elif (w, h) != (self.width, self.height):
            raise ValueError("all frames must share one size")
        self._file.write(gray.tobytes())
        self.frames += 1

    def close(self) -> None:
        self._file.close()
        sidecar = {"width": self.width or 0, "height": self.height or 0, "frames": self.frames}
        self.path.with_suffix(self.path.suffix + ".json").write_text(
            json.dumps(sidecar), "utf-8"
        )

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
