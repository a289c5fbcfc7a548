"""Shared domain model: checks, claims, audits, masks, and verdict vocabulary.

Every other module builds on these types. All of them are immutable
values after construction and safe to share across threads.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Any, Mapping

logger = logging.getLogger(__name__)


class SchemaError(ValueError):
    """A claim or document payload violates the expected schema."""


class UncertainGroundTruthError(SchemaError):
    """Raised at ingestion for claims whose ground truth is not binary."""


class CheckId(enum.IntEnum):
    """The 11 methodological audit checks, totally ordered C1 < ... < C11."""

    C1 = 1
    C2 = 2
    C3 = 3
    C4 = 4
    C5 = 5
    C6 = 6
    C7 = 7
    C8 = 8
    C9 = 9
    C10 = 10
    C11 = 11


CHECK_TITLES: Mapping[CheckId, str] = {
    CheckId.C1: "Data Integrity",
    CheckId.C2: "Missing Data Patterns",
    CheckId.C3: "Sample Representativeness",
    CheckId.C4: "Outcome Variability",
    CheckId.C5: "Estimation Validity",
    CheckId.C6: "Statistical Power",
    CheckId.C7: "Outlier Influence",
    CheckId.C8: "Confounding Control",
    CheckId.C9: "Source Consistency",
    CheckId.C10: "Effect Homogeneity",
    CheckId.C11: "Subgroup Consistency",
}

ALL_CHECKS: tuple[CheckId, ...] = tuple(CheckId)

# Document stance toward a claim. Kept as plain ints because they are
# summed and compared; use the constants, not magic numbers.
STANCE_SUPPORTS = 1
STANCE_NEUTRAL = 0
STANCE_REFUTES = -1
VALID_STANCES = (STANCE_REFUTES, STANCE_NEUTRAL, STANCE_SUPPORTS)

STANCE_LABELS: Mapping[str, int] = {
    "Supports": STANCE_SUPPORTS,
    "Neutral": STANCE_NEUTRAL,
    "Refutes": STANCE_REFUTES,
}

# Audit scores are the only three legal values; anything else is rejected.
AUDIT_SCORE_VALUES = (0.0, 0.5, 1.0)

SCORE_LABELS: Mapping[str, float] = {
    "Pass": 1.0,
    "Uncertain": 0.5,
    "Fail": 0.0,
}


class ClaimType(str, enum.Enum):
    SIMPLE = "simple"
    COMPOSITE = "composite"


class RequiredStandard(str, enum.Enum):
    """Minimum standard of evidence a claim demands."""

    SETTLED_SCIENCE = "SettledScience"
    ROBUST_STUDY = "RobustStudy"
    PLAUSIBLE_EVIDENCE = "PlausibleEvidence"


class Verdict(str, enum.Enum):
    SUPPORTS = "Supports"
    REFUTES = "Refutes"
    NEUTRAL = "Neutral"
    UNVERIFIABLE = "Unverifiable"
    VALID = "Valid"
    INVALID = "Invalid"


def parse_check_id(raw: str | CheckId) -> CheckId:
    if isinstance(raw, CheckId):
        return raw
    try:
        return CheckId[raw]
    except KeyError:
        raise SchemaError(f"unknown check id {raw!r}") from None


@dataclass(frozen=True)
class Claim:
    """A claim to verify, with its pre-computed features and ground truth."""

    id: str
    text: str
    claim_type: ClaimType
    topic: str
    specificity: int
    testability: int
    required_standard: RequiredStandard
    probe_questions: tuple[str, str, str]
    ground_truth: Verdict

    def __post_init__(self) -> None:
        if not self.text:
            raise SchemaError(f"claim {self.id!r}: text must be nonempty")
        for name, value in (("specificity", self.specificity), ("testability", self.testability)):
            if not isinstance(value, int) or not 1 <= value <= 10:
                raise SchemaError(f"claim {self.id!r}: {name} must be an integer in 1..10, got {value!r}")
        if len(self.probe_questions) != 3:
            raise SchemaError(f"claim {self.id!r}: exactly 3 probe questions required, got {len(self.probe_questions)}")
        if self.ground_truth not in (Verdict.VALID, Verdict.INVALID):
            raise SchemaError(f"claim {self.id!r}: ground truth must be Valid or Invalid, got {self.ground_truth!r}")

    @classmethod
    def from_json(cls, payload: Mapping[str, Any]) -> "Claim":
        required = {
            "id", "text", "claim_type", "topic", "specificity",
            "testability", "required_standard", "probe_questions", "ground_truth",
        }
        missing = required - payload.keys()
        if missing:
            raise SchemaError(f"claim payload missing fields: {sorted(missing)}")
        unknown = payload.keys() - required
        if unknown:
            raise SchemaError(f"claim payload has unknown fields: {sorted(unknown)}")
        if payload["ground_truth"] == "Uncertain":
            raise UncertainGroundTruthError(
                f"claim {payload['id']!r}: Uncertain ground truth is excluded at ingestion"
            )
        try:
            ground_truth = Verdict(payload["ground_truth"])
        except ValueError:
            raise SchemaError(f"claim {payload['id']!r}: bad ground truth {payload['ground_truth']!r}") from None
        return cls(
            id=str(payload["id"]),
            text=str(payload["text"]),
            claim_type=ClaimType(payload["claim_type"]),
            topic=str(payload["topic"]),
            specificity=int(payload["specificity"]),
            testability=int(payload["testability"]),
            required_standard=RequiredStandard(payload["required_standard"]),
            probe_questions=tuple(payload["probe_questions"]),
            ground_truth=ground_truth,
        )

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "text": self.text,
            "claim_type": self.claim_type.value,
            "topic": self.topic,
            "specificity": self.specificity,
            "testability": self.testability,
            "required_standard": self.required_standard.value,
            "probe_questions": list(self.probe_questions),
            "ground_truth": self.ground_truth.value,
        }


@dataclass(frozen=True)
class GlobalIntegritySignals:
    funding_transparency: str
    conflict_of_interest: str
    data_availability: str


@dataclass(frozen=True)
class CheckSignal:
    is_applicable: bool
    objective_analysis: str

    def __post_init__(self) -> None:
        if not self.is_applicable and self.objective_analysis != "N/A":
            raise SchemaError(
                'inapplicable checks must carry objective_analysis "N/A", '
                f"got {self.objective_analysis!r}"
            )


@dataclass(frozen=True)
class AnalysisDocument:
    """Structured methodological signals for one paper.

    The JSON field names (`global_integrity_signals`,
    `veritable_check_signals`, `is_applicable`, `objective_analysis`)
    are a fixed external contract; do not rename them.
    """

    global_integrity_signals: GlobalIntegritySignals
    veritable_check_signals: Mapping[CheckId, CheckSignal]

    def __post_init__(self) -> None:
        for check in ALL_CHECKS:
            if check not in self.veritable_check_signals:
                raise SchemaError(f"analysis is missing check entry {check.name}")

    @classmethod
    def from_json(cls, payload: Mapping[str, Any]) -> "AnalysisDocument":
        try:
            gis = payload["global_integrity_signals"]
            raw_signals = payload["veritable_check_signals"]
        except KeyError as exc:
            raise SchemaError(f"analysis payload missing {exc.args[0]!r}") from None
        signals: dict[CheckId, CheckSignal] = {}
        for check in ALL_CHECKS:
            if check.name not in raw_signals:
                raise SchemaError(f"analysis is missing check entry {check.name}")
            entry = raw_signals[check.name]
            signals[check] = CheckSignal(
                is_applicable=bool(entry["is_applicable"]),
                objective_analysis=str(entry["objective_analysis"]),
            )
        return cls(
            global_integrity_signals=GlobalIntegritySignals(
                funding_transparency=str(gis["funding_transparency"]),
                conflict_of_interest=str(gis["conflict_of_interest"]),
                data_availability=str(gis["data_availability"]),
            ),
            veritable_check_signals=signals,
        )

    def to_json(self) -> dict[str, Any]:
        return {
            "global_integrity_signals": {
                "funding_transparency": self.global_integrity_signals.funding_transparency,
                "conflict_of_interest": self.global_integrity_signals.conflict_of_interest,
                "data_availability": self.global_integrity_signals.data_availability,
            },
            "veritable_check_signals": {
                check.name: {
                    "is_applicable": signal.is_applicable,
                    "objective_analysis": signal.objective_analysis,
                }
                for check, signal in sorted(self.veritable_check_signals.items())
            },
        }


@dataclass(frozen=True)
class AuditVector:
    """Per-document audit scores over the checks, in {0.0, 0.5, 1.0}."""

    scores: Mapping[CheckId, float]
    reasoning: Mapping[CheckId, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for check, score in self.scores.items():
            if not isinstance(check, CheckId):
                raise SchemaError(f"audit score keyed by non-check {check!r}")
            if score not in AUDIT_SCORE_VALUES:
                raise SchemaError(
                    f"audit score for {check.name} must be one of {AUDIT_SCORE_VALUES}, got {score!r}"
                )


@dataclass(frozen=True)
class ApplicabilityMask:
    """Total bit map over the 11 checks; K is the applicable-check count."""

    bits: Mapping[CheckId, int]

    def __post_init__(self) -> None:
        for check in ALL_CHECKS:
            if check not in self.bits:
                raise SchemaError(f"mask is missing check {check.name}")
            if self.bits[check] not in (0, 1):
                raise SchemaError(f"mask bit for {check.name} must be 0 or 1")

    @property
    def k(self) -> int:
        return sum(self.bits[check] for check in ALL_CHECKS)

    def applicable_checks(self) -> tuple[CheckId, ...]:
        return tuple(check for check in ALL_CHECKS if self.bits[check] == 1)


@dataclass(frozen=True)
class AuditResult:
    """One document's audited relation to a claim: stance plus audit vector."""

    paper_id: str
    stance: int
    audit: AuditVector

    def __post_init__(self) -> None:
        if self.stance not in VALID_STANCES:
            raise SchemaError(f"stance must be one of {VALID_STANCES}, got {self.stance!r}")


def derive_mask(analysis: AnalysisDocument) -> ApplicabilityMask:
    """Project the per-check applicability flags into a bit mask."""
    return ApplicabilityMask(
        bits={check: 1 if analysis.veritable_check_signals[check].is_applicable else 0 for check in ALL_CHECKS}
    )


def map_verdict(v: Verdict) -> Verdict:
    """Binarize any verdict: Supports/Valid count as Valid, the rest as Invalid."""
    return Verdict.VALID if v in (Verdict.SUPPORTS, Verdict.VALID) else Verdict.INVALID


def validate_audit(audit: AuditVector, mask: ApplicabilityMask) -> AuditVector:
    """Restrict an audit to applicable checks, dropping over-answered scores.

    A score on a masked-out check is a warning, not a failure: an LLM
    auditor may over-answer, and such scores simply do not count.
    """
    kept_scores: dict[CheckId, float] = {}
    kept_reasoning: dict[CheckId, str] = {}
    for check, score in audit.scores.items():
        if mask.bits.get(check, 0) == 1:
            kept_scores[check] = score
            if check in audit.reasoning:
                kept_reasoning[check] = audit.reasoning[check]
        else:
            logger.warning("dropping audit score for inapplicable check %s", check.name)
    return AuditVector(scores=kept_scores, reasoning=kept_reasoning)
