"""Detection-style scoring of rep predictions.

Matches the golden fixture records against their ground truth with
temporal IoU, then shows how boundary drift and class confusion move
precision, recall, and F1.
"""

import json
from pathlib import Path

from repjudge import ThresholdConfig, match_reps, prf, tiou
from repjudge.evaluation import GroundTruthRep, load_ground_truth
from repjudge.validator import RepRecord

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "tests" / "fixtures"


def records_from(path):
    payload = json.loads(Path(path).read_text())
    return [RepRecord.from_dict(r) for r in payload["reps"]]


def show(result):
    report = prf(result)
    for label, metrics in report.per_class.items():
        print(f"    {label.value:<8} P={metrics.precision:.2f} "
              f"R={metrics.recall:.2f} F1={metrics.f1:.2f}")
    print(f"    macro    P={report.macro_precision:.2f} "
          f"R={report.macro_recall:.2f} F1={report.macro_f1:.2f}")


def main():
    preds = records_from(FIXTURES / "golden_records.json")
    gt = load_ground_truth(FIXTURES / "synthetic_squat_gt.json")["reps"]

    print("== temporal IoU basics ==")
    print(f"  identical segments: {tiou((0, 10), (0, 10)):.3f}")
    print(f"  [0,10] vs [5,15]:   {tiou((0, 10), (5, 15)):.3f}")
    print(f"  disjoint:           {tiou((0, 5), (10, 20)):.3f}")

    print("\n== golden predictions vs ground truth (tIoU >= 0.2) ==")
    show(match_reps(preds, gt, 0.2))

    print("\n== dropping one valid rep ==")
    show(match_reps(preds[1:], gt, 0.2))

    print("\n== a prediction drifting off its rep ==")
    drifted = [preds[0]] + [
        RepRecord(preds[1].t_start + 40, preds[1].t_end + 40,
                  preds[1].label, preds[1].failed_requirements)
    ] + preds[2:]
    show(match_reps(drifted, gt, 0.2))


if __name__ == "__main__":
    main()
