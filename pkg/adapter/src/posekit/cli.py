"""Command-line surface mirroring the engine's naming: extract, export-frames."""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .adapter import DEFAULT_MODEL, AdapterConfig, export_frames, extract
from .backends import AdapterError, available_backends


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="posekit", description="Video to keypoint/frame streams"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="emit a keypoint stream (JSON Lines)")
    p.add_argument("--video", required=True)
    p.add_argument("--model", default=DEFAULT_MODEL,
                   help=f"pose backend; one of {available_backends()}")
    p.add_argument("--no-detector", action="store_true",
                   help="disable the person detector (bottom-up models only)")
    p.add_argument("--out", required=True, help="keypoint stream path")
    p.add_argument("--fps", type=float, help="override the container frame rate")
    p.set_defaults(run=_cmd_extract)

    p = sub.add_parser("export-frames", help="emit a grayscale raw stream + sidecar")
    p.add_argument("--video", required=True)
    p.add_argument("--out", required=True, help="raw stream path")
    p.set_defaults(run=_cmd_export)

    return parser


def _cmd_extract(args) -> int:
    config = AdapterConfig(
        video=args.video,
        model=args.model,
        detector=not args.no_detector,
        keypoints_out=args.out,
        fps_override=args.fps,
    )
    lines = extract(config)
    print(f"{args.out}: {lines} frames ({args.model})")
    return 0


def _cmd_export(args) -> int:
    config = AdapterConfig(video=args.video, frames_out=args.out)
    frames = export_frames(config)
    print(f"{args.out}: {frames} grayscale frames")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.run(args)
    except AdapterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
