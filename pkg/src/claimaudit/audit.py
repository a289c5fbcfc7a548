"""Batch audit assembly: prompt building, response parsing, offline mock.

A claim's evidence papers are audited in one batched request; the
response carries a stance and per-check scores for each paper. Parsing
is strict and retryable, and a seeded mock double makes the whole path
runnable offline.
"""

from __future__ import annotations

import json
import logging
import re
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

from ._rng import DeterministicStream
from .core import (
    AnalysisDocument,
    AuditResult,
    AuditVector,
    CheckId,
    SCORE_LABELS,
    STANCE_LABELS,
    SchemaError,
    derive_mask,
    parse_check_id,
    validate_audit,
)
from .llm import (
    LlmClient,
    LlmError,
    LlmReply,
    TokenUsage,
    approx_token_count,
    extract_json_object,
)

logger = logging.getLogger(__name__)

DEFAULT_TOKEN_BUDGET = 100_000

_PLACEHOLDER = re.compile(r"\{\{([A-Z_]+)\}\}")
_SCORE_NAMES = {value: name for name, value in SCORE_LABELS.items()}
_STANCE_NAMES = {value: name for name, value in STANCE_LABELS.items()}


class AuditParseError(ValueError):
    """The audit response does not match the wire contract (retryable)."""


class AuditFailureError(RuntimeError):
    """The audit could not be completed for this claim."""


class PromptBudgetError(ValueError):
    """The serialized prompt exceeds the configured token budget."""


# Optional directory that shadows the packaged prompt templates.
_template_directory: Path | None = None


def use_template_directory(directory: str | Path | None) -> None:
    """Point template loading at a directory instead of the packaged assets.

    Pass None to restore the packaged templates. A named template absent
    from the directory still falls back to the packaged copy.
    """
    global _template_directory
    _template_directory = None if directory is None else Path(directory)


def load_template(name: str) -> str:
    """Read a prompt template asset shipped with the package."""
    if _template_directory is not None:
        override = _template_directory / f"{name}.txt"
        if override.exists():
            return override.read_text(encoding="utf-8")
    return (resources.files(__package__) / "templates" / f"{name}.txt").read_text(encoding="utf-8")


def render_template(template: str, mapping: Mapping[str, str]) -> str:
    """Fill every {{KEY}} placeholder; unknown or unfilled keys are errors."""

    def substitute(match: re.Match[str]) -> str:
        key = match.group(1)
        if key not in mapping:
            raise ValueError(f"template placeholder {{{{{key}}}}} has no value")
        return mapping[key]

    return _PLACEHOLDER.sub(substitute, template)


@dataclass(frozen=True)
class PaperToAudit:
    paper_id: str
    analysis: AnalysisDocument
    chunks: tuple[str, ...]


@dataclass(frozen=True)
class AuditRequest:
    claim_text: str
    papers: tuple[PaperToAudit, ...]

    def __post_init__(self) -> None:
        if not self.claim_text:
            raise ValueError("audit request needs a nonempty claim text")
        if not self.papers:
            raise ValueError("audit request must contain at least one paper")
        seen: set[str] = set()
        for paper in self.papers:
            if not paper.chunks:
                raise ValueError(f"paper {paper.paper_id!r} has no evidence chunks")
            if paper.paper_id in seen:
                raise ValueError(f"duplicate paper id {paper.paper_id!r} in audit request")
            seen.add(paper.paper_id)


BATCH_AUDIT_SCHEMA: Mapping[str, Any] = {
    "title": "batch_audit_response",
    "type": "object",
    "required": ["all_papers_audit"],
    "properties": {
        "all_papers_audit": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["paper_id", "stance", "checks"],
                "properties": {
                    "paper_id": {"type": "string"},
                    "stance": {"enum": sorted(STANCE_LABELS)},
                    "checks": {"type": "object"},
                },
            },
        }
    },
}


def _paper_payload(paper: PaperToAudit) -> dict[str, Any]:
    return {
        "paper_id": paper.paper_id,
        "paper_json_content": paper.analysis.to_json(),
        "evidence_text_chunks": list(paper.chunks),
    }


def build_audit_prompt(req: AuditRequest, *, token_budget: int | None = None) -> str:
    papers_json = json.dumps([_paper_payload(paper) for paper in req.papers], indent=2)
    prompt = render_template(
        load_template("batch_audit"),
        {"CLAIM_TEXT": req.claim_text, "PAPERS_TO_AUDIT_JSON": papers_json},
    )
    if token_budget is not None:
        total = approx_token_count(prompt)
        if total > token_budget:
            sizes = ", ".join(
                f"{paper.paper_id}: ~{approx_token_count(json.dumps(_paper_payload(paper)))} tokens"
                for paper in req.papers
            )
            raise PromptBudgetError(
                f"audit prompt is ~{total} tokens, over the budget of {token_budget}; "
                f"per-paper sizes: {sizes}"
            )
    return prompt


def _extract_json(raw: str) -> Any:
    try:
        return extract_json_object(raw)
    except ValueError:
        raise AuditParseError("audit response is not valid JSON") from None


def parse_audit_response(raw: str, req: AuditRequest) -> list[AuditResult]:
    """Validate the wire payload and map labels to numeric scores/stances.

    Unknown paper ids are dropped with a warning; any requested paper
    left unanswered makes the response incomplete, hence retryable.
    """
    payload = _extract_json(raw)
    if not isinstance(payload, dict) or "all_papers_audit" not in payload:
        raise AuditParseError("audit response lacks the all_papers_audit key")
    entries = payload["all_papers_audit"]
    if not isinstance(entries, list):
        raise AuditParseError("all_papers_audit must be an array")
    known = {paper.paper_id for paper in req.papers}
    results: list[AuditResult] = []
    seen: set[str] = set()
    for entry in entries:
        if not isinstance(entry, dict):
            raise AuditParseError("audit entries must be objects")
        try:
            paper_id = str(entry["paper_id"])
            stance_label = entry["stance"]
            checks = entry["checks"]
        except KeyError as exc:
            raise AuditParseError(f"audit entry missing field {exc.args[0]!r}") from None
        if paper_id not in known:
            logger.warning("dropping audit for unknown paper id %r", paper_id)
            continue
        if paper_id in seen:
            raise AuditParseError(f"duplicate audit entry for paper {paper_id!r}")
        seen.add(paper_id)
        if stance_label not in STANCE_LABELS:
            raise AuditParseError(f"unknown stance {stance_label!r} for paper {paper_id!r}")
        if not isinstance(checks, dict):
            raise AuditParseError(f"checks for paper {paper_id!r} must be an object")
        scores: dict[CheckId, float] = {}
        reasoning: dict[CheckId, str] = {}
        for name, cell in checks.items():
            try:
                check = parse_check_id(name)
            except SchemaError as exc:
                raise AuditParseError(str(exc)) from None
            if not isinstance(cell, dict) or "score" not in cell:
                raise AuditParseError(f"check {name} for paper {paper_id!r} lacks a score")
            score_label = cell["score"]
            if score_label not in SCORE_LABELS:
                raise AuditParseError(f"unknown score {score_label!r} for check {name}")
            scores[check] = SCORE_LABELS[score_label]
            reasoning[check] = str(cell.get("reasoning", ""))
        results.append(
            AuditResult(paper_id=paper_id, stance=STANCE_LABELS[stance_label], audit=AuditVector(scores, reasoning))
        )
    missing = sorted(known - seen)
    if missing:
        raise AuditParseError(f"audit response is missing papers: {missing}")
    return results


def render_audit_response(results: Sequence[AuditResult]) -> str:
    """Serialize results back into the wire shape (mock replies, tests)."""
    entries = []
    for result in results:
        checks = {
            check.name: {
                "score": _SCORE_NAMES[score],
                "reasoning": result.audit.reasoning.get(check, ""),
            }
            for check, score in sorted(result.audit.scores.items())
        }
        entries.append(
            {"paper_id": result.paper_id, "stance": _STANCE_NAMES[result.stance], "checks": checks}
        )
    return json.dumps({"all_papers_audit": entries}, indent=2)


_APPLICABILITY_PATH = re.compile(r"^\$\.veritable_check_signals\.(C(?:1[01]|[1-9]))\.is_applicable$")


def applicability_query(analysis: AnalysisDocument, path: str) -> bool:
    """Evaluate the one supported JSONPath shape against an analysis."""
    match = _APPLICABILITY_PATH.match(path)
    if match is None:
        raise ValueError(
            f"unsupported applicability path {path!r}; "
            "expected $.veritable_check_signals.<CheckId>.is_applicable"
        )
    return analysis.veritable_check_signals[CheckId[match.group(1)]].is_applicable


_MOCK_STANCE_WEIGHTS = (("Supports", 45.0), ("Refutes", 30.0), ("Neutral", 25.0))
_MOCK_SCORE_WEIGHTS = ((1.0, 60.0), (0.5, 20.0), (0.0, 20.0))


def mock_audit(req: AuditRequest, seed: int) -> list[AuditResult]:
    """Deterministic offline auditor; a pure function of seed and ids."""
    results = []
    for paper in req.papers:
        stream = DeterministicStream(seed, "mock-audit", req.claim_text, paper.paper_id)
        stance = STANCE_LABELS[stream.weighted_choice(_MOCK_STANCE_WEIGHTS)]
        scores: dict[CheckId, float] = {}
        reasoning: dict[CheckId, str] = {}
        for check in derive_mask(paper.analysis).applicable_checks():
            scores[check] = stream.weighted_choice(_MOCK_SCORE_WEIGHTS)
            reasoning[check] = f"mock audit of {check.name}"
        results.append(AuditResult(paper_id=paper.paper_id, stance=stance, audit=AuditVector(scores, reasoning)))
    return results


def mock_audit_with_usage(req: AuditRequest, seed: int) -> tuple[list[AuditResult], TokenUsage]:
    """Mock audit plus approximate token accounting for the skipped call."""
    results = mock_audit(req, seed)
    usage = TokenUsage()
    usage.record(build_audit_prompt(req), LlmReply(text=render_audit_response(results)))
    return results, usage


def run_audit(
    client: LlmClient,
    req: AuditRequest,
    *,
    token_budget: int = DEFAULT_TOKEN_BUDGET,
    retries: int = 3,
    sleep: Callable[[float], None] = time.sleep,
) -> tuple[list[AuditResult], TokenUsage]:
    """Audit every paper in the request, splitting batches over budget.

    Parse failures retry with backoff; exhausting retries (or a single
    paper that alone exceeds the budget) is a claim-level failure.
    """
    usage = TokenUsage()
    try:
        prompt = build_audit_prompt(req, token_budget=token_budget)
    except PromptBudgetError as exc:
        if len(req.papers) == 1:
            raise AuditFailureError(f"single paper exceeds the audit token budget: {exc}") from exc
        logger.warning("splitting oversized audit batch into %d single-paper requests", len(req.papers))
        results = []
        for paper in req.papers:
            sub_results, sub_usage = run_audit(
                client,
                AuditRequest(claim_text=req.claim_text, papers=(paper,)),
                token_budget=token_budget,
                retries=retries,
                sleep=sleep,
            )
            results.extend(sub_results)
            usage.merge(sub_usage)
        return results, usage

    masks = {paper.paper_id: derive_mask(paper.analysis) for paper in req.papers}
    last_error: AuditParseError | None = None
    for attempt in range(retries + 1):
        if attempt > 0:
            sleep(float(2 ** (attempt - 1)))
        try:
            reply = client.complete(prompt, schema=BATCH_AUDIT_SCHEMA)
        except LlmError as exc:
            raise AuditFailureError(f"audit transport failed: {exc}") from exc
        usage.record(prompt, reply)
        try:
            parsed = parse_audit_response(reply.text, req)
        except AuditParseError as exc:
            last_error = exc
            logger.warning("audit parse attempt %d failed: %s", attempt + 1, exc)
            continue
        validated = [
            AuditResult(
                paper_id=result.paper_id,
                stance=result.stance,
                audit=validate_audit(result.audit, masks[result.paper_id]),
            )
            for result in parsed
        ]
        return validated, usage
    raise AuditFailureError(f"audit response unparseable after {retries + 1} attempts: {last_error}")
