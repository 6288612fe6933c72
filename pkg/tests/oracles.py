"""Independent reference implementations used only to check the package.

Each oracle recomputes its quantity from the definition, on a different
code path from the production module (plain loops, scipy, or exhaustive
enumeration), so agreement is evidence and not tautology.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.stats import rankdata


def oks_direct(reference, candidate, scale, kappa) -> float:
    """Per-joint transcription of the keypoint-similarity definition."""
    num = 0.0
    den = 0
    for i in range(len(reference)):
        x, y, v = reference[i]
        if v > 0:
            dx = x - candidate[i][0]
            dy = y - candidate[i][1]
            d2 = dx * dx + dy * dy
            num += math.exp(-d2 / (2.0 * scale * scale * kappa[i] * kappa[i]))
            den += 1
    if den == 0:
        raise ZeroDivisionError("no visible joints")
    return num / den


def icc2k_anova(table) -> float:
    """Two-way ANOVA mean squares by explicit loops, then the average-
    measures reliability formula. ``table`` is items x raters."""
    table = [list(map(float, row)) for row in table]
    n = len(table)
    k = len(table[0])
    total = sum(sum(row) for row in table)
    grand = total / (n * k)
    row_means = [sum(row) / k for row in table]
    col_means = [sum(table[i][j] for i in range(n)) / n for j in range(k)]
    ssr = k * sum((m - grand) ** 2 for m in row_means)
    ssc = n * sum((m - grand) ** 2 for m in col_means)
    sse = 0.0
    for i in range(n):
        for j in range(k):
            sse += (table[i][j] - row_means[i] - col_means[j] + grand) ** 2
    msr = ssr / (n - 1)
    msc = ssc / (k - 1)
    mse = sse / ((n - 1) * (k - 1))
    denom = msr + (msc - mse) / n + (k - 1) * mse
    return (msr - mse) / denom


def kendall_tau_pairs(a, b) -> float:
    """Sign-product over all index pairs via numpy outer differences."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = len(a)
    da = np.sign(a[:, None] - a[None, :])
    db = np.sign(b[:, None] - b[None, :])
    upper = np.triu_indices(n, k=1)
    products = (da * db)[upper]
    concordant = int(np.sum(products > 0))
    discordant = int(np.sum(products < 0))
    return (concordant - discordant) / (n * (n - 1) / 2)


def spearman_rank_formula(a, b) -> float:
    """Average ranks from scipy, then the 1 - 6 sum(d^2) / (N(N^2-1)) form."""
    ra = rankdata(a, method="average")
    rb = rankdata(b, method="average")
    n = len(ra)
    d2 = float(np.sum((ra - rb) ** 2))
    return 1.0 - 6.0 * d2 / (n * (n * n - 1))


def tiou_segments(a, b) -> float:
    inter = min(a[1], b[1]) - max(a[0], b[0]) + 1
    if inter <= 0:
        return 0.0
    union = (a[1] - a[0] + 1) + (b[1] - b[0] + 1) - inter
    return inter / union


def brute_force_match_count(pred_segments, gt_segments, tau) -> int:
    """Maximum TP count over every one-to-one matching (exhaustive)."""
    n_pred = len(pred_segments)
    n_gt = len(gt_segments)
    if n_pred == 0 or n_gt == 0:
        return 0
    eligible = [
        [tiou_segments(p, g) >= tau for g in gt_segments] for p in pred_segments
    ]
    best = 0
    smaller, larger = (range(n_pred), range(n_gt))
    if n_pred <= n_gt:
        for assignment in itertools.permutations(range(n_gt), n_pred):
            count = sum(1 for pi, gi in enumerate(assignment) if eligible[pi][gi])
            best = max(best, count)
    else:
        for assignment in itertools.permutations(range(n_pred), n_gt):
            count = sum(1 for gi, pi in enumerate(assignment) if eligible[pi][gi])
            best = max(best, count)
    return best
