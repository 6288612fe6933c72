"""Command-line surface: judging, evaluation, calibration, benchmarking,
and retrieval over the package's file formats.

Exit codes: 0 success, 1 judging anomaly (e.g. no trackable target),
2 configuration or I/O error.
"""

from __future__ import annotations

import argparse
import json
import re
import statistics
import sys
from collections import defaultdict
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .cache import CachePolicy, load_gray_frames
from .errors import ConfigurationError, NoTargetError, PairingError, RepJudgeError
from .evaluation import (
    DEFAULT_TIOU_THRESHOLD,
    evaluate_video,
    format_report_table,
    grid_search_thresholds,
    load_ground_truth,
    threshold_grid,
)
from .keypoints import get_schema, load_schema_registry, read_keypoint_stream
from .pipeline import SimulatedPoseSource, calibrate_tau, judge_stream
from .retrieval import HashEmbedder, ingest, load_store, retrieve, save_store
from .rules import load_rule_set
from .validator import RepRecord, ThresholdConfig

EXIT_OK = 0
EXIT_ANOMALY = 1
EXIT_CONFIG = 2


# --------------------------------------------------------------------------
# Config file support ("TOML-style"; flags win)
# --------------------------------------------------------------------------

_TOML_KV = re.compile(r"^([A-Za-z0-9_.-]+)\s*=\s*(.+)$")


def _parse_toml_value(raw: str):
    raw = raw.strip()
    if raw.startswith("[") and raw.endswith("]"):
        inner = raw[1:-1].strip()
        if not inner:
            return []
        return [_parse_toml_value(part) for part in inner.split(",")]
    if raw.startswith('"') and raw.endswith('"'):
        return raw[1:-1]
    if raw.startswith("'") and raw.endswith("'"):
        return raw[1:-1]
    if raw in ("true", "false"):
        return raw == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def load_config_file(path: str) -> dict:
    """Read a flat TOML-style config: key = value lines, section headers
    tolerated and flattened. Uses stdlib tomllib when present."""
    text = Path(path).read_text("utf-8")
    try:
        import tomllib  # Python >= 3.11

        data = tomllib.loads(text)
        flat: dict = {}
        for key, value in data.items():
            if isinstance(value, dict):
                flat.update(value)
            else:
                flat[key] = value
        return flat
    except ModuleNotFoundError:
        pass
    config: dict = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line or line.startswith("["):
            continue
        m = _TOML_KV.match(line)
        if m is None:
            raise ConfigurationError(f"cannot parse config line: {line!r}")
        config[m.group(1).replace("-", "_")] = _parse_toml_value(m.group(2))
    return config


# --------------------------------------------------------------------------
# Shared argument plumbing
# --------------------------------------------------------------------------

def _parse_patch(text: str) -> tuple[int, int]:
    m = re.match(r"^(\d+)x(\d+)$", text)
    if m is None:
        raise ConfigurationError(f"--patch expects WxH, got {text!r}")
    return int(m.group(1)), int(m.group(2))


def _cache_policy_from_args(args) -> Optional[CachePolicy]:
    if not (args.dc or args.rtc):
        return None
    return CachePolicy(
        dc_enabled=args.dc,
        dc_offset=args.dc_offset,
        rtc_enabled=args.rtc,
        rtc_tau=args.rtc_tau,
        patch_size=_parse_patch(args.patch),
    )


def _load_thresholds(path: Optional[str]) -> ThresholdConfig:
    """Accept a flat threshold config or a single-group calibrate output."""
    if path is None:
        return ThresholdConfig()
    obj = json.loads(Path(path).read_text("utf-8"))
    if "groups" in obj:
        groups = obj["groups"]
        if len(groups) != 1:
            raise ConfigurationError(
                f"{path} holds {len(groups)} calibrated groups; extract the "
                "one you want into its own thresholds file"
            )
        obj = groups[0]["thresholds"]
    return ThresholdConfig.from_dict(obj)


def _load_schema(args):
    registry = load_schema_registry(args.registry) if args.registry else None
    return get_schema(args.schema, registry)


def _add_judge_inputs(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--rules", required=True, help="movement rule-set JSON")
    parser.add_argument("--schema", required=True, help="keypoint schema name")
    parser.add_argument("--registry", help="schema registry JSON (default: packaged)")
    parser.add_argument("--stream", required=True, help="keypoint stream (JSON Lines)")
    parser.add_argument("--frames", help="grayscale frames: raw stream or PGM directory")
    parser.add_argument("--thresholds", help="threshold config JSON")
    parser.add_argument("--tracker", choices=("iou", "oks"), default="iou")
    parser.add_argument("--dc", action="store_true", help="enable the detector cache")
    parser.add_argument("--dc-offset", type=float, default=20.0)
    parser.add_argument("--rtc", action="store_true", help="enable the ROI temporal cache")
    parser.add_argument("--rtc-tau", type=float, default=0.0)
    parser.add_argument("--patch", default="32x32", help="RTC patch size WxH")
    parser.add_argument("--fps", type=float, help="frame rate for pacing/RTF")
    parser.add_argument(
        "--streamed", action="store_true", help="pace ingestion at --fps (live simulation)"
    )


def _records_from_file(path: str) -> tuple[Optional[str], list[RepRecord]]:
    obj = json.loads(Path(path).read_text("utf-8"))
    return obj.get("video"), [RepRecord.from_dict(r) for r in obj["reps"]]


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

def cmd_judge(args) -> int:
    rules = load_rule_set(args.rules)
    schema = _load_schema(args)
    thresholds = _load_thresholds(args.thresholds)
    frames = read_keypoint_stream(args.stream)
    gray = load_gray_frames(args.frames) if args.frames else None
    result = judge_stream(
        frames,
        rules,
        schema,
        thresholds,
        tracker_mode=args.tracker,
        cache_policy=_cache_policy_from_args(args),
        gray_frames=gray,
        fps=args.fps,
        streamed=args.streamed,
    )
    payload = result.to_dict()
    payload["video"] = args.video or Path(args.stream).stem
    out = Path(args.out) if args.out else None
    text = json.dumps(payload, indent=1)
    if out:
        out.write_text(text, "utf-8")
    else:
        print(text)
    valid = sum(1 for r in result.records if r.label.value == "valid")
    print(
        f"{payload['video']}: {len(result.records)} reps ({valid} valid), "
        f"skips={result.diagnostics.cache.rtc_skips}",
        file=sys.stderr,
    )
    if result.diagnostics.no_target:
        print("warning: no trackable target in the stream", file=sys.stderr)
        return EXIT_ANOMALY
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if len(args.pred) != len(args.gt):
        raise PairingError(
            f"{len(args.pred)} prediction files vs {len(args.gt)} ground-truth files"
        )
    pred_entries = []
    for path in args.pred:
        video, records = _records_from_file(path)
        pred_entries.append((video or Path(path).stem, records))
    gt_by_video = {}
    for path in args.gt:
        obj = load_ground_truth(path)
        gt_by_video[obj["video"] or Path(path).stem] = obj

    reports = []
    for video, records in pred_entries:
        if video not in gt_by_video:
            raise PairingError(f"no ground truth for video {video!r}")
        entry = gt_by_video[video]
        report = evaluate_video(records, entry["reps"], args.tiou, args.algorithm)
        reports.append((video, entry.get("view") or "-", report))

    macro_p = statistics.mean(r.macro_precision for _, _, r in reports)
    macro_r = statistics.mean(r.macro_recall for _, _, r in reports)
    macro_f1 = statistics.mean(r.macro_f1 for _, _, r in reports)
    payload = {
        "tiou_threshold": args.tiou,
        "videos": {video: report.to_dict() for video, _, report in reports},
        "macro": {"precision": macro_p, "recall": macro_r, "f1": macro_f1},
    }
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=1), "utf-8")
    rows = [
        {
            "model": video,
            "view": view,
            "precision": report.macro_precision,
            "recall": report.macro_recall,
            "f1": report.macro_f1,
        }
        for video, view, report in reports
    ]
    print(format_report_table(rows))
    print(json.dumps(payload["macro"], indent=1))
    return EXIT_OK


def _load_manifest(path: str) -> list[dict]:
    entries = json.loads(Path(path).read_text("utf-8"))
    if not isinstance(entries, list):
        raise ConfigurationError("manifest must be a JSON list")
    return entries


def cmd_calibrate(args) -> int:
    entries = _load_manifest(args.manifest)
    if not entries:
        raise ConfigurationError("manifest contains no videos")
    if args.grid:
        spec = json.loads(Path(args.grid).read_text("utf-8"))
        grid = threshold_grid(
            angle_tolerances=spec.get("angle_tolerances", (3.0, 5.0, 8.0, 12.0)),
            position_tolerances=spec.get("position_tolerances", (0.02, 0.05, 0.1)),
            debounces=spec.get("debounces", (1, 2, 3)),
        )
    else:
        grid = threshold_grid()

    groups: dict[tuple, list[dict]] = defaultdict(list)
    for entry in entries:
        key = (entry.get("model", ""), entry.get("movement", ""), entry.get("view", ""))
        groups[key].append(entry)

    results = []
    for (model, movement, view), group in sorted(groups.items()):
        dataset = []
        rules = None
        schema = None
        for entry in group:
            rules = load_rule_set(entry.get("rules", args.rules))
            schema = get_schema(entry.get("schema", args.schema))
            frames = read_keypoint_stream(entry["stream"])
            gt = load_ground_truth(entry["gt"])["reps"]
            dataset.append((frames, gt))
        if not dataset:
            raise ConfigurationError(f"empty manifest group {(model, movement, view)}")
        best, f1 = grid_search_thresholds(
            grid, dataset, rules, schema, tau_tiou=args.tiou, tracker_mode=args.tracker
        )
        results.append(
            {
                "model": model,
                "movement": movement,
                "view": view,
                "thresholds": best.to_dict(),
                "mean_macro_f1": f1,
            }
        )
        print(f"{model}/{movement}/{view}: F1={f1:.3f} -> {best.to_dict()}")
    payload = {"groups": results}
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=1), "utf-8")
    return EXIT_OK


def cmd_calibrate_tau(args) -> int:
    rules = load_rule_set(args.rules)
    schema = _load_schema(args)
    thresholds = _load_thresholds(args.thresholds)
    frames = read_keypoint_stream(args.stream)
    gray = load_gray_frames(args.frames)
    grid = [float(v) for v in args.tau_grid.split(",") if v.strip()]
    tau = calibrate_tau(
        gray, frames, rules, schema, thresholds, grid, tracker_mode=args.tracker
    )
    print(f"calibrated rtc_tau = {tau}")
    if args.out:
        Path(args.out).write_text(json.dumps({"rtc_tau": tau}), "utf-8")
    return EXIT_OK


def cmd_bench(args) -> int:
    rules = load_rule_set(args.rules)
    schema = _load_schema(args)
    thresholds = _load_thresholds(args.thresholds)
    frames = read_keypoint_stream(args.stream)
    gray = load_gray_frames(args.frames) if args.frames else None

    configurations = [("none", None)]
    has_detector = any(inst.bbox is not None for f in frames for inst in f.instances)
    if has_detector:
        configurations.append(("dc", CachePolicy(dc_enabled=True, dc_offset=args.dc_offset)))
    if gray is not None:
        configurations.append(
            ("rtc", CachePolicy(rtc_enabled=True, rtc_tau=args.rtc_tau))
        )
        if has_detector:
            configurations.append(
                (
                    "combined",
                    CachePolicy(
                        dc_enabled=True,
                        dc_offset=args.dc_offset,
                        rtc_enabled=True,
                        rtc_tau=args.rtc_tau,
                    ),
                )
            )

    rows = []
    for name, policy in configurations:
        latencies = []
        rtfs = []
        stats = None
        for _ in range(args.repetitions):
            source = SimulatedPoseSource(
                frames,
                pose_cost_s=args.pose_cost_ms / 1000.0,
                detector_cost_s=args.detector_cost_ms / 1000.0,
            )
            result = judge_stream(
                source,
                rules,
                schema,
                thresholds,
                tracker_mode=args.tracker,
                cache_policy=policy,
                gray_frames=gray,
                fps=args.fps,
                streamed=args.streamed,
            )
            timing = result.diagnostics.timing
            latencies.extend(timing["decision_latency_ms"])
            if timing["rtf"] is not None:
                rtfs.append(timing["rtf"])
            stats = result.diagnostics.cache
        rows.append(
            {
                "config": name,
                "mean_latency_ms": statistics.mean(latencies) if latencies else None,
                "median_latency_ms": statistics.median(latencies) if latencies else None,
                "rtf": statistics.mean(rtfs) if rtfs else None,
                "pose_inferences": stats.pose_inferences,
                "detector_invocations": stats.detector_invocations,
                "rtc_skips": stats.rtc_skips,
                "frames_total": stats.frames_total,
            }
        )

    header = (
        f"{'Config':<10} {'Mean lat (ms)':>14} {'Median (ms)':>12} {'RTF':>8} "
        f"{'Inferences':>11} {'Detector':>9} {'Skips':>6}"
    )
    print(header)
    print("-" * len(header))
    for row in rows:
        mean_l = f"{row['mean_latency_ms']:.2f}" if row["mean_latency_ms"] is not None else "-"
        med_l = f"{row['median_latency_ms']:.2f}" if row["median_latency_ms"] is not None else "-"
        rtf_s = f"{row['rtf']:.3f}" if row["rtf"] is not None else "-"
        print(
            f"{row['config']:<10} {mean_l:>14} {med_l:>12} {rtf_s:>8} "
            f"{row['pose_inferences']:>11} {row['detector_invocations']:>9} {row['rtc_skips']:>6}"
        )
    if args.out:
        Path(args.out).write_text(json.dumps({"rows": rows}, indent=1), "utf-8")
    return EXIT_OK


def cmd_ingest(args) -> int:
    pages = json.loads(Path(args.pages).read_text("utf-8"))
    tuples = [
        (p["text"], int(p["label"]), p.get("sourceType", ""), int(p.get("pageIndex", i)))
        for i, p in enumerate(pages)
    ]
    store = ingest(tuples, HashEmbedder(dimension=args.dim))
    save_store(store, args.out)
    print(f"ingested {len(store)} chunks (dim {store.dimension}) -> {args.out}")
    return EXIT_OK


def cmd_retrieve(args) -> int:
    store = load_store(args.store)
    if args.query_file:
        query = np.fromfile(args.query_file, dtype="<f4")
    elif args.query_text is not None:
        query = HashEmbedder(dimension=store.dimension).embed([args.query_text])[0]
    else:
        raise ConfigurationError("provide --query-file or --query-text")
    results = retrieve(query, store, label=args.label, k=args.k, threshold=args.threshold)
    for chunk, score in results:
        print(
            json.dumps(
                {
                    "score": round(score, 6),
                    "label": chunk.label,
                    "sourceType": chunk.source_type,
                    "pageIndex": chunk.page_index,
                    "text": chunk.text[:120],
                }
            )
        )
    return EXIT_OK


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="repjudge",
        description="Rule-grounded rep judging, evaluation, and calibration",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("judge", help="judge one keypoint stream")
    _add_judge_inputs(p)
    p.add_argument("--out", help="output records JSON path (default: stdout)")
    p.add_argument("--video", help="video id recorded in the output")
    p.add_argument("--config", help="TOML-style config file (flags win)")
    p.set_defaults(func=cmd_judge)

    p = sub.add_parser("evaluate", help="score predictions against ground truth")
    p.add_argument("--pred", nargs="+", required=True)
    p.add_argument("--gt", nargs="+", required=True)
    p.add_argument("--tiou", type=float, default=DEFAULT_TIOU_THRESHOLD)
    p.add_argument("--algorithm", choices=("greedy", "optimal"), default="greedy")
    p.add_argument("--out")
    p.add_argument("--config")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("calibrate", help="threshold grid search per manifest group")
    p.add_argument("--manifest", required=True)
    p.add_argument("--grid", help="grid spec JSON")
    p.add_argument("--rules", help="fallback rules path for manifest entries")
    p.add_argument("--schema", help="fallback schema name")
    p.add_argument("--tracker", choices=("iou", "oks"), default="iou")
    p.add_argument("--tiou", type=float, default=DEFAULT_TIOU_THRESHOLD)
    p.add_argument("--out")
    p.add_argument("--config")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("calibrate-tau", help="RTC threshold sweep for one view")
    _add_judge_inputs(p)
    p.add_argument("--tau-grid", default="0,0.5,1,2,4,8")
    p.add_argument("--out")
    p.add_argument("--config")
    p.set_defaults(func=cmd_calibrate_tau)

    p = sub.add_parser("bench", help="latency/RTF across cache configurations")
    _add_judge_inputs(p)
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--pose-cost-ms", type=float, default=0.0)
    p.add_argument("--detector-cost-ms", type=float, default=0.0)
    p.add_argument("--out")
    p.add_argument("--config")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("ingest", help="build a chunk store from a pages JSON file")
    p.add_argument("--pages", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int, default=512)
    p.add_argument("--config")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("retrieve", help="query a chunk store")
    p.add_argument("--store", required=True)
    p.add_argument("--label", type=int, required=True, choices=(0, 1))
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--threshold", type=float)
    p.add_argument("--query-file", help="little-endian float32 vector file")
    p.add_argument("--query-text", help="embed with the deterministic hash embedder")
    p.add_argument("--config")
    p.set_defaults(func=cmd_retrieve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if "--config" in argv:
        config_path = argv[argv.index("--config") + 1]
        try:
            defaults = load_config_file(config_path)
        except (OSError, ConfigurationError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        for action in parser._subparsers._group_actions:
            for sub in getattr(action, "choices", {}).values():
                known = {a.dest for a in sub._actions}
                sub.set_defaults(**{k: v for k, v in defaults.items() if k in known})
                for sub_action in sub._actions:
                    if sub_action.dest in defaults:
                        sub_action.required = False
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NoTargetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ANOMALY
    except (RepJudgeError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
