"""Show how the acceptance bar adapts to the claim and the evidence volume.

The threshold blends a prior keyed to the required standard of evidence
with a regression-predicted boldness score, then rises as more evidence
accumulates (extraordinary claims backed by piles of documents need a
higher score to pass), clamped to [0.5, 0.95].
"""

from pathlib import Path

from claimaudit.calibration import fit_boldness_model, load_calibration_records
from claimaudit.core import RequiredStandard
from claimaudit.threshold import (
    ThresholdConfig,
    base_threshold,
    constant_boldness_model,
    encode_features,
    ridge_predict,
    tau_auto,
    verdict,
)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


class _ClaimFeatures:
    def __init__(self, specificity: int, testability: int, required_standard: RequiredStandard):
        self.specificity = specificity
        self.testability = testability
        self.required_standard = required_standard


def main() -> None:
    cfg = ThresholdConfig()
    print("priors by required standard of evidence:")
    for standard in RequiredStandard:
        print(f"  {standard.value:18s} pi={cfg.prior_for(standard):.2f}")

    print("\nbase threshold = 0.5*prior + 0.5*predicted boldness:")
    neutral = constant_boldness_model()  # always predicts 0.5
    fitted = fit_boldness_model(load_calibration_records(FIXTURES / "calibration.jsonl"), gamma=1.0)
    bold = _ClaimFeatures(9, 9, RequiredStandard.SETTLED_SCIENCE)
    modest = _ClaimFeatures(3, 4, RequiredStandard.PLAUSIBLE_EVIDENCE)
    for name, claim in (("bold, settled-science claim", bold), ("modest, plausible-evidence claim", modest)):
        prior = cfg.prior_for(claim.required_standard)
        prediction = ridge_predict(fitted, encode_features(claim))
        print(f"  {name}: prior={prior:.2f}, fitted boldness={prediction:.3f}"
              f" -> tau_base={base_threshold(prior, prediction):.3f}"
              f" (constant model would give {base_threshold(prior, ridge_predict(neutral, encode_features(claim))):.3f})")

    print("\nthe bar rises with evidence volume (tau_base=0.70, C=0.05, N_base=10):")
    for n_ev in (5, 10, 20, 40, 80, 200):
        tau = tau_auto(0.70, n_ev, cfg)
        print(f"  {n_ev:4d} evidence documents -> tau_auto={tau:.3f}{'  (clamped)' if tau == cfg.clamp_hi else ''}")

    print("\nthe same evidence score can pass a small pile and fail a large one:")
    score = 0.78
    for n_ev in (10, 40):
        tau = tau_auto(0.70, n_ev, cfg)
        print(f"  score={score:.2f} against tau_auto={tau:.3f} ({n_ev} docs) -> {verdict(score, tau).value}")


if __name__ == "__main__":
    main()
