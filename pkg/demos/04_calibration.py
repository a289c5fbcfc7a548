"""Fit the scoring parameters from human-labeled calibration records.

Each record pairs a claim's features and simulated-flawed-audit tallies
with a human verdict. Calibration has two parts: a ridge regression
that predicts claim boldness (feeding the dynamic threshold), and an
exhaustive grid search for the (alpha, lambda) pair whose verdicts
agree with the humans most often.
"""

import tempfile
from pathlib import Path

from claimaudit.calibration import (
    Grid,
    fit_boldness_model,
    grid_search,
    load_calibration_records,
    load_params,
    save_params,
    simulate_flawed_audit,
)
from claimaudit.core import ALL_CHECKS
from claimaudit.scoring import HvParams
from claimaudit.threshold import ThresholdConfig

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def main() -> None:
    records = load_calibration_records(FIXTURES / "calibration.jsonl")
    verdict_counts: dict[str, int] = {}
    for record in records:
        verdict_counts[record.human_verdict] = verdict_counts.get(record.human_verdict, 0) + 1
    print(f"loaded {len(records)} calibration records: "
          + ", ".join(f"{count} {name}" for name, count in sorted(verdict_counts.items())))

    # The simulator degrades a perfect audit so the grid search sees the
    # score behave under realistic flaws: every draw fails 2-4 checks.
    sample = simulate_flawed_audit(seed=42, checks=ALL_CHECKS)
    flawed = sorted(check.name for check, score in sample.scores.items() if score < 1.0)
    print(f"simulated flawed audit (seed 42) degrades checks: {', '.join(flawed)}")

    ridge = fit_boldness_model(records, gamma=1.0)
    rounded = ", ".join(f"{weight:+.3f}" for weight in ridge.weights)
    print(f"\nboldness ridge fit: weights=[{rounded}], intercept={ridge.intercept:.3f}")

    cfg = ThresholdConfig()
    grid = Grid(
        alpha_values=(0.0, 0.25, 0.5, 0.75, 1.0),
        lambda_values=(0.05, 0.1, 0.2, 0.4, 0.8),
    )
    alpha, lam = grid_search(records, grid, cfg, ridge)
    print(f"grid search over {len(grid.alpha_values)}x{len(grid.lambda_values)} cells"
          f" -> alpha={alpha}, lambda={lam}")
    print("(ties break toward the lexicographically smallest pair, so reruns are stable)")

    with tempfile.TemporaryDirectory() as scratch:
        path = Path(scratch) / "params.json"
        save_params(path, HvParams(alpha=alpha, lambda_=lam), ridge)
        params, model = load_params(path)
        print(f"\nround-tripped params.json: alpha={params.alpha}, lambda={params.lambda_},"
              f" ridge intercept={model.intercept:.3f}")


if __name__ == "__main__":
    main()
