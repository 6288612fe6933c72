"""Rule-grounded repetition judging for functional-fitness movements.

The package turns machine-readable movement rules into deterministic rep
decisions over pose keypoint streams, with detector/ROI caching for
streaming efficiency, detection-style evaluation, retrieval utilities for
rulebook chunks, and rater-agreement statistics.
"""

from .cache import (
    CachePolicy,
    CacheStats,
    GrayFrame,
    cache_decide,
    dc_bbox,
    load_gray_frames,
    read_raw_stream,
    roi_patch,
    rpd,
    write_raw_stream,
)
from .conditions import evaluate_condition, parse_condition, pretty
from .errors import RepJudgeError
from .evaluation import (
    GroundTruthRep,
    MatchResult,
    PrfReport,
    grid_search_thresholds,
    load_ground_truth,
    match_reps,
    prf,
    rtf,
    threshold_grid,
    tiou,
)
from .features import KinematicFeatures, compute_features
from .keypoints import (
    KeypointSchema,
    PersonInstance,
    PoseFrame,
    barbell_proxy,
    get_schema,
    joint_angle,
    load_schema_registry,
    read_keypoint_stream,
    resolve_joint,
    write_keypoint_stream,
)
from .pipeline import (
    JudgeResult,
    PoseSource,
    SimulatedPoseSource,
    calibrate_tau,
    judge_stream,
    write_records,
)
from .raterstats import (
    RubricScores,
    ScoreMatrix,
    WeightVector,
    aggregate_human,
    icc2k,
    kendall_tau,
    load_scores_csv,
    mean_abs_delta,
    mws,
    sd_per_item,
    spearman_rho,
)
from .retrieval import (
    Chunk,
    ChunkStore,
    HashEmbedder,
    LabeledPair,
    cosine_similarity,
    ingest,
    load_store,
    retrieve,
    save_store,
    sweep_threshold,
)
from .rules import (
    MovementRuleSet,
    NamedConstraint,
    ValidationReport,
    bind_rule_set,
    load_rule_set,
    parse_rule_set,
    validate_rule_set,
)
from .tracking import TrackState, iou, oks, select_target, track_step
from .validator import RepLabel, RepRecord, RepValidator, ThresholdConfig

__version__ = "0.1.0"
