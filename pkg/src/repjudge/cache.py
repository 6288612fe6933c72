"""Dual strategy caching: detector-box reuse and ROI temporal skipping.

The detector cache (DC) reuses the first frame's person box, enlarged by a
fixed offset, instead of re-running detection. The ROI temporal cache (RTC)
compares a smoothed, downsampled grayscale patch of the person ROI between
frames; when the mean absolute intensity difference (RPD) stays at or below
a threshold tau, pose inference is skipped and the cached keypoints are
reused.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ConfigurationError

Box = tuple[float, float, float, float]

DEFAULT_DC_OFFSET = 20.0
DEFAULT_PATCH_SIZE = (32, 32)
DEFAULT_ROI_PADDING = 0.1
DEFAULT_SMOOTH_KERNEL = 5
DEFAULT_SMOOTH_SIGMA = 1.0

SKIP = "skip"
INFER = "infer"


@dataclass(frozen=True)
class CachePolicy:
    dc_enabled: bool = False
    dc_offset: float = DEFAULT_DC_OFFSET
    rtc_enabled: bool = False
    rtc_tau: float = 0.0
    patch_size: tuple[int, int] = DEFAULT_PATCH_SIZE  # (w, h)
    smooth_kernel: int = DEFAULT_SMOOTH_KERNEL
    smooth_sigma: float = DEFAULT_SMOOTH_SIGMA
    roi_padding: float = DEFAULT_ROI_PADDING
    # Compare against the previous frame's patch instead of the last
    # inferred frame's. The default is conservative: drift below tau cannot
    # accumulate unseen across a run of skipped frames.
    strict_chaining: bool = False

    def __post_init__(self):
        if self.dc_offset < 0:
            raise ConfigurationError("dc_offset must be non-negative")
        if self.rtc_tau < 0:
            raise ConfigurationError("rtc_tau must be non-negative")
        w, h = self.patch_size
        if w < 1 or h < 1:
            raise ConfigurationError("patch dimensions must be >= 1")
        if self.smooth_kernel < 1 or self.smooth_kernel % 2 == 0:
            raise ConfigurationError("smoothing kernel size must be odd and >= 1")

    def to_dict(self) -> dict:
        return {
            "dc_enabled": self.dc_enabled,
            "dc_offset": self.dc_offset,
            "rtc_enabled": self.rtc_enabled,
            "rtc_tau": self.rtc_tau,
            "patch_size": list(self.patch_size),
            "smooth_kernel": self.smooth_kernel,
            "smooth_sigma": self.smooth_sigma,
            "roi_padding": self.roi_padding,
            "strict_chaining": self.strict_chaining,
        }


@dataclass(frozen=True)
class GrayFrame:
    width: int
    height: int
    pixels: np.ndarray  # (height, width) uint8

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.shape != (self.height, self.width):
            raise ConfigurationError(
                f"pixel buffer shape {px.shape} does not match {self.height}x{self.width}"
            )
        object.__setattr__(self, "pixels", px)


@dataclass
class CacheStats:
    frames_total: int = 0
    detector_invocations: int = 0
    pose_inferences: int = 0
    rtc_skips: int = 0
    rpd_trace: list[Optional[float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "frames_total": self.frames_total,
            "detector_invocations": self.detector_invocations,
            "pose_inferences": self.pose_inferences,
            "rtc_skips": self.rtc_skips,
            "rpd_trace": self.rpd_trace,
        }


# --------------------------------------------------------------------------
# Detector cache
# --------------------------------------------------------------------------

def dc_bbox(first_detection: Box, offset: float, frame_bounds: tuple[int, int]) -> Box:
    """Expand the first detection by ``offset`` on all sides, clamped to the
    frame; the result is reused for all subsequent frames."""
    x, y, w, h = first_detection
    frame_w, frame_h = frame_bounds
    x0 = max(0.0, x - offset)
    y0 = max(0.0, y - offset)
    x1 = min(float(frame_w), x + w + offset)
    y1 = min(float(frame_h), y + h + offset)
    return (x0, y0, x1 - x0, y1 - y0)


# --------------------------------------------------------------------------
# ROI patch pipeline
# --------------------------------------------------------------------------

def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    radius = size // 2
    xs = np.arange(-radius, radius + 1, dtype=float)
    k = np.exp(-(xs**2) / (2.0 * sigma**2))
    return k / k.sum()


def _smooth(img: np.ndarray, size: int, sigma: float) -> np.ndarray:
    if size <= 1:
        return img.astype(float)
    kernel = _gaussian_kernel(size, sigma)
    radius = size // 2
    padded = np.pad(img.astype(float), radius, mode="edge")
    rows = np.apply_along_axis(lambda r: np.convolve(r, kernel, mode="valid"), 1, padded)
    cols = np.apply_along_axis(lambda c: np.convolve(c, kernel, mode="valid"), 0, rows)
    return cols


def _area_average_weights(src: int, dst: int) -> np.ndarray:
    """(dst, src) weight matrix for exact area-average 1-D resampling."""
    weights = np.zeros((dst, src))
    scale = src / dst
    for i in range(dst):
        lo = i * scale
        hi = (i + 1) * scale
        j0 = int(math.floor(lo))
        j1 = min(int(math.ceil(hi)), src)
        for j in range(j0, j1):
            overlap = min(hi, j + 1) - max(lo, j)
            if overlap > 0:
                weights[i, j] = overlap / scale
    return weights


def _resize_area(img: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    out_w, out_h = size
    h, w = img.shape
    wy = _area_average_weights(h, out_h)
    wx = _area_average_weights(w, out_w)
    return wy @ img @ wx.T


def clamp_box(box: Box, width: int, height: int) -> Optional[tuple[int, int, int, int]]:
    """Integer pixel window of ``box`` clipped to the frame, or None if empty."""
    x0 = max(0, int(math.floor(box[0])))
    y0 = max(0, int(math.floor(box[1])))
    x1 = min(width, int(math.ceil(box[0] + box[2])))
    y1 = min(height, int(math.ceil(box[1] + box[3])))
    if x1 <= x0 or y1 <= y0:
        return None
    return x0, y0, x1, y1


def roi_patch(frame: GrayFrame, roi: Box, policy: CachePolicy) -> np.ndarray:
    """Compact descriptor of the person region: pad, crop, Gaussian-smooth,
    and area-average down to ``policy.patch_size``. Deterministic.
    """
    pad_x = roi[2] * policy.roi_padding
    pad_y = roi[3] * policy.roi_padding
    padded = (roi[0] - pad_x, roi[1] - pad_y, roi[2] + 2 * pad_x, roi[3] + 2 * pad_y)
    window = clamp_box(padded, frame.width, frame.height)
    if window is None:
        raise ConfigurationError("ROI does not intersect the frame")
    x0, y0, x1, y1 = window
    crop = frame.pixels[y0:y1, x0:x1]
    smoothed = _smooth(crop, policy.smooth_kernel, policy.smooth_sigma)
    return _resize_area(smoothed, policy.patch_size)


def rpd(p1: np.ndarray, p2: np.ndarray) -> float:
    """Mean absolute intensity difference between two equal-size patches."""
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if p1.shape != p2.shape:
        raise ConfigurationError(f"patch shapes differ: {p1.shape} vs {p2.shape}")
    return float(np.mean(np.abs(p1 - p2)))


def cache_decide(d_t: float, tau: float) -> str:
    """SKIP when the ROI difference is at or below tau, else INFER."""
    return SKIP if d_t <= tau else INFER


# --------------------------------------------------------------------------
# Grayscale frame streams
# --------------------------------------------------------------------------

def write_raw_stream(frames: Sequence[GrayFrame], path: Union[str, Path]) -> None:
    """Single raw 8-bit stream plus a JSON sidecar next to it."""
    path = Path(path)
    if not frames:
        raise ConfigurationError("cannot write an empty frame stream")
    w, h = frames[0].width, frames[0].height
    with open(path, "wb") as f:
        for frame in frames:
            if (frame.width, frame.height) != (w, h):
                raise ConfigurationError("all frames must share one size")
            f.write(frame.pixels.tobytes())
    sidecar = {"width": w, "height": h, "frames": len(frames)}
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar), "utf-8")


def read_raw_stream(path: Union[str, Path]) -> list[GrayFrame]:
    path = Path(path)
    sidecar_path = path.with_suffix(path.suffix + ".json")
    if not sidecar_path.exists():
        raise ConfigurationError(f"missing sidecar {sidecar_path}")
    meta = json.loads(sidecar_path.read_text("utf-8"))
    w, h, n = int(meta["width"]), int(meta["height"]), int(meta["frames"])
    data = path.read_bytes()
    if len(data) != w * h * n:
        raise ConfigurationError("raw stream length does not match its sidecar")
    frames = []
    for i in range(n):
        buf = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=i * w * h)
        frames.append(GrayFrame(width=w, height=h, pixels=buf.reshape(h, w).copy()))
    return frames


def write_pgm(frame: GrayFrame, path: Union[str, Path]) -> None:
    header = f"P5\n{frame.width} {frame.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + frame.pixels.tobytes())


def read_pgm(path: Union[str, Path]) -> GrayFrame:
    data = Path(path).read_bytes()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if m is None:
        raise ConfigurationError(f"{path} is not a binary 8-bit PGM")
    w, h, maxval = int(m.group(1)), int(m.group(2)), int(m.group(3))
    if maxval != 255:
        raise ConfigurationError("only 8-bit PGM frames are supported")
    pixels = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=m.end())
    return GrayFrame(width=w, height=h, pixels=pixels.reshape(h, w).copy())


def read_frame_dir(directory: Union[str, Path]) -> list[GrayFrame]:
    """Directory of PGM files named by frame index."""
    paths = sorted(Path(directory).glob("*.pgm"), key=lambda p: int(p.stem))
    if not paths:
        raise ConfigurationError(f"no .pgm frames in {directory}")
    return [read_pgm(p) for p in paths]


def load_gray_frames(path: Union[str, Path]) -> list[GrayFrame]:
    path = Path(path)
    if path.is_dir():
        return read_frame_dir(path)
    return read_raw_stream(path)


# --------------------------------------------------------------------------
# RTC decision state
# --------------------------------------------------------------------------

@dataclass
class RtcState:
    """Reference patch bookkeeping for one stream.

    The reference ROI always tracks the last inference. By default the
    reference patch does too; under strict chaining it follows every frame
    so each decision compares consecutive frames as in the plain
    inter-frame difference definition.
    """

    policy: CachePolicy
    roi: Optional[Box] = None
    patch: Optional[np.ndarray] = None

    def decide(self, frame: GrayFrame) -> tuple[str, Optional[float]]:
        if not self.policy.rtc_enabled or self.roi is None or self.patch is None:
            return INFER, None
        current = roi_patch(frame, self.roi, self.policy)
        d_t = rpd(current, self.patch)
        decision = cache_decide(d_t, self.policy.rtc_tau)
        if self.policy.strict_chaining:
            self.patch = current
        return decision, d_t

    def update_after_inference(self, frame: Optional[GrayFrame], roi: Box) -> None:
        self.roi = roi
        if frame is not None:
            self.patch = roi_patch(frame, roi, self.policy)
