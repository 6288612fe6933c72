"""Rater statistics: weighted scores, agreement, and calibration.

Loads the committed rubric-score table (4 raters x 8 movements x 3
dimensions), reports the human summary, then compares the aggregated
human scores with a synthetic single-evaluator column.
"""

from pathlib import Path

import numpy as np

from repjudge import load_scores_csv, mws
from repjudge.raterstats import calibration_summary, human_summary

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def main():
    print("== weighted score ==")
    print(f"  F=0.9 C=0.8 S=1.0 with weights (0.4, 0.4, 0.2) -> {mws(0.9, 0.8, 1.0):.2f}")

    scores = load_scores_csv(FIXTURES / "rater_scores.csv")
    print(f"\nloaded {len(scores.raters)} raters x {len(scores.items)} items")

    summary = human_summary(scores)
    print("\n== human panel summary ==")
    print(f"  movement-averaged weighted score: {summary['mws']:.3f}")
    print(f"  mean within-item SD:              {summary['sd']:.3f}")
    print(f"  ICC(2,k) across items:            {summary['icc']:.3f}")

    human = scores.item_mws()
    rng = np.random.default_rng(11)
    model = np.clip(human + rng.normal(0.0, 0.05, human.shape), 0.0, 1.0)

    print("\n== human vs synthetic evaluator ==")
    cal = calibration_summary(human, model)
    print(f"  mean absolute difference: {cal['delta']:.3f}")
    print(f"  SD of differences:        {cal['sd']:.3f}")
    print(f"  Kendall tau:              {cal['tau']:.3f}")
    print(f"  Spearman rho:             {cal['rho']:.3f}")


if __name__ == "__main__":
    main()
