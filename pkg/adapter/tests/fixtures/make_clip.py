"""Regenerates the committed test clip: 2 seconds of a synthetic figure
bobbing against a dark background (64x48 @ 30 fps, MJPG).

    python tests/fixtures/make_clip.py
"""

from __future__ import annotations

import math
from pathlib import Path

import cv2
import numpy as np

OUT = Path(__file__).resolve().parent / "clip.avi"
W, H, FPS, FRAMES = 64, 48, 30, 60


def frame_at(i: int) -> np.ndarray:
    img = np.full((H, W, 3), 30, np.uint8)
    # torso block whose top edge bobs up and down
    phase = math.sin(2 * math.pi * i / 30.0)
    top = int(14 + 8 * phase)
    cv2.rectangle(img, (22, top), (42, 44), (200, 200, 200), thickness=-1)
    # a small head riding the torso
    cv2.circle(img, (32, max(4, top - 5)), 4, (180, 180, 180), thickness=-1)
    return img


def main() -> None:
    writer = cv2.VideoWriter(str(OUT), cv2.VideoWriter_fourcc(*"MJPG"), FPS, (W, H))
    assert writer.isOpened()
    for i in range(FRAMES):
        writer.write(frame_at(i))
    writer.release()
    print(f"wrote {OUT} ({OUT.stat().st_size} bytes, {FRAMES} frames)")


if __name__ == "__main__":
    main()
