"""Generation-quality statistics: weighted scoring, inter-annotator
variability, and human-vs-model calibration.

Rubric scores live on a 1-5 scale and normalize to [0, 1] via (s - 1) / 4.
The weighted score combines faithfulness, completeness, and internal
consistency; reliability uses a two-way random-effects, average-measures
intraclass correlation over the item-by-rater table; calibration uses the
mean absolute score difference plus Kendall and Spearman rank agreement.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ConfigurationError, DomainError

DEFAULT_WEIGHTS = (0.4, 0.4, 0.2)
DIMENSIONS = ("F", "C", "S")  # faithfulness, completeness, internal consistency

RUBRIC_MIN = 1.0
RUBRIC_MAX = 5.0


@dataclass(frozen=True)
class WeightVector:
    w1: float = DEFAULT_WEIGHTS[0]
    w2: float = DEFAULT_WEIGHTS[1]
    w3: float = DEFAULT_WEIGHTS[2]

    def __post_init__(self):
        if min(self.w1, self.w2, self.w3) < 0:
            raise DomainError("weights must be non-negative")
        if abs(self.w1 + self.w2 + self.w3 - 1.0) > 1e-9:
            raise DomainError("weights must sum to 1")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.w1, self.w2, self.w3)


def normalize_rubric(score: float) -> float:
    """Map a 1-5 rubric score onto [0, 1]."""
    if not RUBRIC_MIN <= score <= RUBRIC_MAX:
        raise DomainError(f"rubric score {score} outside [1, 5]")
    return (score - RUBRIC_MIN) / (RUBRIC_MAX - RUBRIC_MIN)


def mws(f: float, c: float, s: float, weights: WeightVector = WeightVector()) -> float:
    """Weighted combination of normalized faithfulness, completeness, and
    consistency scores."""
    for name, value in (("F", f), ("C", c), ("S", s)):
        if not 0.0 <= value <= 1.0:
            raise DomainError(f"{name} score {value} outside [0, 1]")
    w1, w2, w3 = weights.as_tuple()
    return w1 * f + w2 * c + w3 * s


@dataclass
class ScoreMatrix:
    """Raters-by-items rubric scores for one evaluation dimension."""

    scores: np.ndarray  # (raters, items)
    raters: tuple[str, ...] = ()
    items: tuple[str, ...] = ()
    dimension: Optional[str] = None

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=float)
        if scores.ndim != 2 or scores.size == 0:
            raise DomainError("score matrix must be 2-D and non-empty")
        if np.any(scores < RUBRIC_MIN) or np.any(scores > RUBRIC_MAX):
            raise DomainError("scores must lie within the 1-5 rubric")
        self.scores = scores
        if not self.raters:
            self.raters = tuple(f"rater{i}" for i in range(scores.shape[0]))
        if not self.items:
            self.items = tuple(f"item{i}" for i in range(scores.shape[1]))

    @property
    def n_raters(self) -> int:
        return self.scores.shape[0]

    @property
    def n_items(self) -> int:
        return self.scores.shape[1]

    def normalized(self) -> np.ndarray:
        return (self.scores - RUBRIC_MIN) / (RUBRIC_MAX - RUBRIC_MIN)


def aggregate_human(matrix: ScoreMatrix) -> np.ndarray:
    """Arithmetic mean over raters, per item."""
    return matrix.scores.mean(axis=0)


def sd_per_item(matrix: ScoreMatrix) -> np.ndarray:
    """Population standard deviation over raters, per item (divisor k)."""
    return matrix.scores.std(axis=0, ddof=0)


def icc2k(matrix_or_scores) -> float:
    """Two-way random-effects, average-measures intraclass correlation.

    Computed as (MSR - MSE) / (MSR + (MSC - MSE)/n + (k - 1) * MSE) with n
    items, k raters, and mean squares from the two-way ANOVA decomposition
    of the item-by-rater table. An all-equal table has zero between-item
    variance and is degenerate.
    """
    if isinstance(matrix_or_scores, ScoreMatrix):
        data = matrix_or_scores.scores
    else:
        data = np.asarray(matrix_or_scores, dtype=float)
    if data.ndim != 2:
        raise DomainError("need a 2-D raters-by-items table")
    k, n = data.shape  # raters, items
    if k < 2 or n < 2:
        raise DomainError("need at least 2 raters and 2 items")
    table = data.T  # items as rows
    grand = table.mean()
    row_means = table.mean(axis=1)
    col_means = table.mean(axis=0)
    ssr = k * float(np.sum((row_means - grand) ** 2))
    ssc = n * float(np.sum((col_means - grand) ** 2))
    sse = float(np.sum((table - row_means[:, None] - col_means[None, :] + grand) ** 2))
    msr = ssr / (n - 1)
    msc = ssc / (k - 1)
    mse = sse / ((n - 1) * (k - 1))
    denominator = msr + (msc - mse) / n + (k - 1) * mse
    if denominator == 0.0:
        raise DomainError("degenerate score table: no variance anywhere")
    return (msr - mse) / denominator


def mean_abs_delta(a: Sequence[float], b: Sequence[float]) -> float:
    """Mean absolute per-item score difference."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ConfigurationError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise DomainError("need at least one item")
    return float(np.mean(np.abs(a - b)))


def kendall_tau(a: Sequence[float], b: Sequence[float]) -> float:
    """Kendall rank correlation (tau-a): (concordant - discordant) pairs
    over C(N, 2); tied pairs count as neither."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ConfigurationError("inputs must have equal length")
    n = a.size
    if n < 2:
        raise DomainError("need at least two items")
    concordant = discordant = 0
    for i in range(n):
        for j in range(i + 1, n):
            da = a[i] - a[j]
            db = b[i] - b[j]
            product = da * db
            if product > 0:
                concordant += 1
            elif product < 0:
                discordant += 1
    return (concordant - discordant) / (n * (n - 1) / 2)


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=float)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        # 1-based ranks; ties share the average of their positions.
        rank = (i + j) / 2 + 1
        for idx in range(i, j + 1):
            ranks[order[idx]] = rank
        i = j + 1
    return ranks


def spearman_rho(a: Sequence[float], b: Sequence[float]) -> float:
    """Spearman rank correlation via 1 - 6*sum(d^2)/(N(N^2-1)); ties take
    average ranks."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ConfigurationError("inputs must have equal length")
    n = a.size
    if n < 2:
        raise DomainError("need at least two items")
    ra = _average_ranks(a)
    rb = _average_ranks(b)
    d2 = float(np.sum((ra - rb) ** 2))
    return 1.0 - 6.0 * d2 / (n * (n * n - 1))


# --------------------------------------------------------------------------
# Rubric score files and summary reports
# --------------------------------------------------------------------------

@dataclass
class RubricScores:
    """Per-dimension score matrices sharing one rater/item axis."""

    by_dimension: dict[str, ScoreMatrix] = field(default_factory=dict)

    @property
    def items(self) -> tuple[str, ...]:
        return next(iter(self.by_dimension.values())).items

    @property
    def raters(self) -> tuple[str, ...]:
        return next(iter(self.by_dimension.values())).raters

    def per_rater_mws(self, weights: WeightVector = WeightVector()) -> np.ndarray:
        """(raters, items) table of weighted scores on [0, 1]."""
        f = self.by_dimension["F"].normalized()
        c = self.by_dimension["C"].normalized()
        s = self.by_dimension["S"].normalized()
        w1, w2, w3 = weights.as_tuple()
        return w1 * f + w2 * c + w3 * s

    def item_mws(self, weights: WeightVector = WeightVector()) -> np.ndarray:
        """Aggregated (over raters) weighted score per item."""
        return self.per_rater_mws(weights).mean(axis=0)


def load_scores_csv(path: Union[str, Path]) -> RubricScores:
    """Read ``rater,item,dimension,score`` rows into per-dimension matrices.

    The table must be rectangular: every (rater, item, dimension) cell
    filled exactly once.
    """
    cells: dict[str, dict[tuple[str, str], float]] = {d: {} for d in DIMENSIONS}
    raters: list[str] = []
    items: list[str] = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        required = {"rater", "item", "dimension", "score"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ConfigurationError(f"score CSV must have columns {sorted(required)}")
        for row in reader:
            dim = row["dimension"].strip().upper()
            if dim not in DIMENSIONS:
                raise ConfigurationError(f"unknown dimension {row['dimension']!r}")
            rater = row["rater"].strip()
            item = row["item"].strip()
            if rater not in raters:
                raters.append(rater)
            if item not in items:
                items.append(item)
            key = (rater, item)
            if key in cells[dim]:
                raise ConfigurationError(f"duplicate cell for {key} in dimension {dim}")
            cells[dim][key] = float(row["score"])
    matrices = {}
    for dim in DIMENSIONS:
        table = np.empty((len(raters), len(items)))
        for ri, rater in enumerate(raters):
            for ii, item in enumerate(items):
                key = (rater, item)
                if key not in cells[dim]:
                    raise ConfigurationError(f"missing cell {key} in dimension {dim}")
                table[ri, ii] = cells[dim][key]
        matrices[dim] = ScoreMatrix(
            scores=table, raters=tuple(raters), items=tuple(items), dimension=dim
        )
    return RubricScores(by_dimension=matrices)


def human_summary(scores: RubricScores, weights: WeightVector = WeightVector()) -> dict:
    """Movement-averaged weighted score, mean within-item SD, and ICC over
    the rater-by-item weighted-score table."""
    table = scores.per_rater_mws(weights)
    per_item_sd = table.std(axis=0, ddof=0)
    return {
        "mws": float(table.mean()),
        "sd": float(per_item_sd.mean()),
        "icc": icc2k(table),
    }


def calibration_summary(
    human_item_scores: Sequence[float],
    model_item_scores: Sequence[float],
) -> dict:
    """Mean absolute difference, SD of per-item differences, and rank
    agreement between two per-item score vectors."""
    human = np.asarray(human_item_scores, dtype=float)
    model = np.asarray(model_item_scores, dtype=float)
    diffs = human - model
    return {
        "delta": mean_abs_delta(human, model),
        "sd": float(diffs.std(ddof=0)),
        "tau": kendall_tau(human, model),
        "rho": spearman_rho(human, model),
    }
