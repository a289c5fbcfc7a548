"""The four baseline verification protocols, as prompt-chain drivers.

Each driver runs a fixed chain of turns over the shared `LlmClient`
interface, validates every structured reply, and degrades gracefully:
an unparseable or failed turn never raises past the driver.

COT     one pass: verdict + justification.
SELFRAG two turns: per-passage critiques feed a synthesis verdict,
        with the synthesis rules re-enforced on our side.
FLARE   two turns: the first may request one paper's full text.
CIBER   one COT turn plus three probe turns, fused by Dempster's rule.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from typing import Any, Callable, Mapping, Protocol, Sequence, TypeVar

from .audit import load_template, render_template
from .core import Claim, Verdict
from .llm import LlmClient, LlmTransportError, TokenUsage, extract_json_object

logger = logging.getLogger(__name__)

T = TypeVar("T")

# Method slugs; "audit" (the primary pipeline) lives in evaluation.
METHOD_COT = "cot"
METHOD_SELFRAG = "selfrag"
METHOD_FLARE = "flare"
METHOD_CIBER = "ciber"

RELEVANT = "Relevant"
IRRELEVANT = "Irrelevant"
FULLY_SUPPORTED = "Fully Supported"
PARTIALLY_SUPPORTED = "Partially Supported"
CONTRADICTORY = "Contradictory"
NO_SUPPORT = "No Support"
SUPPORT_LABELS = (FULLY_SUPPORTED, PARTIALLY_SUPPORTED, CONTRADICTORY, NO_SUPPORT)

_MASS_TOLERANCE = 1e-9
_TIE_MARGIN = 1e-9


class EvidenceLike(Protocol):
    doc_id: str
    text: str


class TotalConflictError(ArithmeticError):
    """Dempster combination hit a zero normalizer (complete conflict)."""


@dataclass(frozen=True)
class MassFunction:
    """Belief masses over {support}, {refute}, and the frame theta."""

    support: float
    refute: float
    theta: float

    def __post_init__(self) -> None:
        for name, value in (("support", self.support), ("refute", self.refute), ("theta", self.theta)):
            if value < 0:
                raise ValueError(f"mass {name} must be nonnegative, got {value}")
        total = self.support + self.refute + self.theta
        if abs(total - 1.0) > _MASS_TOLERANCE:
            raise ValueError(f"masses must sum to 1, got {total}")

    @classmethod
    def vacuous(cls) -> "MassFunction":
        return cls(support=0.0, refute=0.0, theta=1.0)

    @classmethod
    def from_verdict(cls, verdict: Verdict, confidence: float) -> "MassFunction":
        """Mass `confidence` on the verdict's hypothesis, remainder on theta."""
        if not 0.0 <= confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {confidence}")
        if verdict in (Verdict.SUPPORTS, Verdict.VALID):
            return cls(support=confidence, refute=0.0, theta=1.0 - confidence)
        if verdict in (Verdict.REFUTES, Verdict.INVALID):
            return cls(support=0.0, refute=confidence, theta=1.0 - confidence)
        if verdict in (Verdict.NEUTRAL, Verdict.UNVERIFIABLE):
            return cls.vacuous()
        raise ValueError(f"no mass assignment for verdict {verdict!r}")

    def combine(self, other: "MassFunction") -> "MassFunction":
        """Dempster's rule with conflict renormalization."""
        support = self.support * other.support + self.support * other.theta + self.theta * other.support
        refute = self.refute * other.refute + self.refute * other.theta + self.theta * other.refute
        theta = self.theta * other.theta
        norm = support + refute + theta
        if norm <= 0.0:
            raise TotalConflictError("total conflict: all combined mass cancelled")
        return MassFunction(support=support / norm, refute=refute / norm, theta=theta / norm)


def wbu_fuse(verdicts: Sequence[tuple[Verdict, float]]) -> Verdict:
    """Fuse (verdict, confidence) pairs; the winner needs a clear margin.

    Returns Supports, Refutes, or Neutral. Neutral/Unverifiable inputs
    contribute vacuous mass; total conflict collapses to Neutral.
    """
    if not verdicts:
        raise ValueError("wbu_fuse needs at least one verdict")
    fused = MassFunction.vacuous()
    try:
        for verdict, confidence in verdicts:
            fused = fused.combine(MassFunction.from_verdict(verdict, confidence))
    except TotalConflictError:
        return Verdict.NEUTRAL
    if fused.support > fused.refute + _TIE_MARGIN:
        return Verdict.SUPPORTS
    if fused.refute > fused.support + _TIE_MARGIN:
        return Verdict.REFUTES
    return Verdict.NEUTRAL


@dataclass(frozen=True)
class BaselineVerdict:
    method: str
    verdict: Verdict
    justification: str
    tokens_in: int
    tokens_out: int
    tokens_approximate: bool = False

    def __post_init__(self) -> None:
        if self.tokens_in < 0 or self.tokens_out < 0:
            raise ValueError("token counts must be nonnegative")


@dataclass(frozen=True)
class Critique:
    passage_id: str
    relevance: str
    support: str
    note: str = ""


_VERDICT_PROPERTIES: Mapping[str, Any] = {
    "verdict": {"enum": ["Valid", "Invalid", "Unverifiable"]},
    "justification": {"type": "string"},
    "confidence": {"type": "integer", "minimum": 0, "maximum": 100},
}

COT_VERDICT_SCHEMA: Mapping[str, Any] = {
    "title": "cot_verdict",
    "type": "object",
    "required": ["verdict", "justification"],
    "properties": dict(_VERDICT_PROPERTIES),
}

SELFRAG_CRITIQUES_SCHEMA: Mapping[str, Any] = {
    "title": "selfrag_critiques",
    "type": "object",
    "required": ["critiques"],
    "properties": {
        "critiques": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["passage_id", "relevance", "support"],
                "properties": {
                    "passage_id": {"type": "string"},
                    "relevance": {"enum": [RELEVANT, IRRELEVANT]},
                    "support": {"enum": list(SUPPORT_LABELS)},
                    "note": {"type": "string"},
                },
            },
        }
    },
}

SELFRAG_VERDICT_SCHEMA: Mapping[str, Any] = {
    "title": "selfrag_verdict",
    "type": "object",
    "required": ["verdict", "justification"],
    "properties": dict(_VERDICT_PROPERTIES),
}

FLARE_INITIAL_SCHEMA: Mapping[str, Any] = {
    "title": "flare_initial_verdict",
    "type": "object",
    "required": ["verdict", "justification", "request_full_review"],
    "properties": {**_VERDICT_PROPERTIES, "request_full_review": {"type": "string"}},
}

FLARE_FINAL_SCHEMA: Mapping[str, Any] = {
    "title": "flare_final_verdict",
    "type": "object",
    "required": ["verdict", "justification"],
    "properties": dict(_VERDICT_PROPERTIES),
}

CIBER_PROBE_SCHEMA: Mapping[str, Any] = {
    "title": "ciber_probe_verdict",
    "type": "object",
    "required": ["verdict", "justification"],
    "properties": {
        "verdict": {"enum": ["Agree", "Disagree", "Neutral"]},
        "justification": {"type": "string"},
        "confidence": {"type": "integer", "minimum": 0, "maximum": 100},
    },
}


def render_snippets(snippets: Sequence[EvidenceLike]) -> str:
    """Number snippets [S1].. and tag each with its source paper id."""
    return "\n".join(
        f"[S{index}] (paper {snippet.doc_id}) {snippet.text}"
        for index, snippet in enumerate(snippets, start=1)
    )


def snippet_paper_ids(snippets: Sequence[EvidenceLike]) -> list[str]:
    """Distinct source paper ids in first-appearance order."""
    seen: dict[str, None] = {}
    for snippet in snippets:
        seen.setdefault(snippet.doc_id, None)
    return list(seen)


_BASELINE_VERDICTS: Mapping[str, Verdict] = {
    "Valid": Verdict.VALID,
    "Invalid": Verdict.INVALID,
    "Unverifiable": Verdict.UNVERIFIABLE,
}

_PROBE_VERDICTS: Mapping[str, Verdict] = {
    "Agree": Verdict.SUPPORTS,
    "Disagree": Verdict.REFUTES,
    "Neutral": Verdict.NEUTRAL,
}


def _read_confidence(payload: Mapping[str, Any]) -> float:
    raw = payload.get("confidence")
    if raw is None:
        return 0.5
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ValueError(f"confidence must be numeric, got {raw!r}")
    if not 0 <= raw <= 100:
        raise ValueError(f"confidence must be in 0..100, got {raw!r}")
    return float(raw) / 100.0


def _read_verdict(payload: Any) -> tuple[Verdict, str, float]:
    if not isinstance(payload, dict):
        raise ValueError("verdict payload must be a JSON object")
    label = payload.get("verdict")
    if label not in _BASELINE_VERDICTS:
        raise ValueError(f"unknown verdict {label!r}")
    return _BASELINE_VERDICTS[label], str(payload.get("justification", "")), _read_confidence(payload)


def _read_probe(payload: Any) -> tuple[Verdict, float]:
    if not isinstance(payload, dict):
        raise ValueError("probe payload must be a JSON object")
    label = payload.get("verdict")
    if label not in _PROBE_VERDICTS:
        raise ValueError(f"unknown probe verdict {label!r}")
    return _PROBE_VERDICTS[label], _read_confidence(payload)


def _read_critiques(payload: Any) -> list[Critique]:
    if not isinstance(payload, dict) or not isinstance(payload.get("critiques"), list):
        raise ValueError("critiques payload must carry a critiques array")
    critiques = []
    for entry in payload["critiques"]:
        if not isinstance(entry, dict):
            raise ValueError("each critique must be a JSON object")
        relevance = entry.get("relevance")
        support = entry.get("support")
        if relevance not in (RELEVANT, IRRELEVANT):
            raise ValueError(f"unknown relevance label {relevance!r}")
        if support not in SUPPORT_LABELS:
            raise ValueError(f"unknown support label {support!r}")
        critiques.append(
            Critique(
                passage_id=str(entry.get("passage_id", "")),
                relevance=relevance,
                support=support,
                note=str(entry.get("note", "")),
            )
        )
    return critiques


def _read_flare_initial(payload: Any) -> tuple[Verdict, str, float, str]:
    verdict, justification, confidence = _read_verdict(payload)
    return verdict, justification, confidence, str(payload.get("request_full_review", "None"))


def _call_with_retries(
    client: LlmClient,
    prompt: str,
    schema: Mapping[str, Any],
    usage: TokenUsage,
    parse: Callable[[Any], T],
    *,
    retries: int,
    sleep: Callable[[float], None],
) -> T | None:
    """One turn with parse retries; None means the turn is a lost cause.

    Transport errors are not retried here (the client already retried);
    parse/validation errors retry with 1s, 2s, 4s backoff.
    """
    last_error: ValueError | None = None
    for attempt in range(retries + 1):
        if attempt > 0:
            sleep(float(2 ** (attempt - 1)))
        try:
            reply = client.complete(prompt, schema=schema)
        except LlmTransportError as exc:
            logger.warning("turn failed in transport: %s", exc)
            return None
        usage.record(prompt, reply)
        try:
            return parse(extract_json_object(reply.text))
        except ValueError as exc:
            last_error = exc
            logger.warning("turn parse attempt %d failed: %s", attempt + 1, exc)
    logger.warning("turn unparseable after %d attempts: %s", retries + 1, last_error)
    return None


def enforce_synthesis_rules(model_verdict: Verdict, critiques: Sequence[Critique]) -> Verdict:
    """Re-apply the synthesis decision rules to the model's verdict.

    Only Relevant critiques count. With none, the claim is
    Unverifiable no matter what the synthesis turn said. A Valid from
    the model is kept only when backed by at least one Fully Supported
    critique and no Contradictory one.
    """
    relevant = [critique for critique in critiques if critique.relevance == RELEVANT]
    if not relevant:
        return Verdict.UNVERIFIABLE
    if model_verdict is Verdict.VALID:
        if any(critique.support == CONTRADICTORY for critique in relevant):
            return Verdict.INVALID
        if not any(critique.support == FULLY_SUPPORTED for critique in relevant):
            return Verdict.UNVERIFIABLE
    return model_verdict


def _finish(method: str, verdict: Verdict, justification: str, usage: TokenUsage) -> BaselineVerdict:
    return BaselineVerdict(
        method=method,
        verdict=verdict,
        justification=justification,
        tokens_in=usage.tokens_in,
        tokens_out=usage.tokens_out,
        tokens_approximate=usage.approximate,
    )


def _require_snippets(snippets: Sequence[EvidenceLike]) -> None:
    if not snippets:
        raise ValueError("baseline run needs at least one evidence snippet")


def _cot_turn(
    client: LlmClient,
    claim: Claim,
    snippets: Sequence[EvidenceLike],
    usage: TokenUsage,
    *,
    retries: int,
    sleep: Callable[[float], None],
) -> tuple[Verdict, str, float]:
    prompt = render_template(
        load_template("cot_verdict"),
        {"CLAIM_TEXT": claim.text, "EVIDENCE_SNIPPETS": render_snippets(snippets)},
    )
    parsed = _call_with_retries(client, prompt, COT_VERDICT_SCHEMA, usage, _read_verdict, retries=retries, sleep=sleep)
    if parsed is None:
        return Verdict.UNVERIFIABLE, "no parseable verdict was produced", 0.5
    return parsed


def run_cot(
    client: LlmClient,
    claim: Claim,
    snippets: Sequence[EvidenceLike],
    *,
    retries: int = 3,
    sleep: Callable[[float], None] = time.sleep,
) -> BaselineVerdict:
    """Single-pass verdict with justification."""
    _require_snippets(snippets)
    usage = TokenUsage()
    verdict, justification, _ = _cot_turn(client, claim, snippets, usage, retries=retries, sleep=sleep)
    return _finish(METHOD_COT, verdict, justification, usage)


def run_selfrag(
    client: LlmClient,
    claim: Claim,
    snippets: Sequence[EvidenceLike],
    *,
    retries: int = 3,
    sleep: Callable[[float], None] = time.sleep,
) -> BaselineVerdict:
    """Critique turn feeding a synthesis turn, with rules re-enforced."""
    _require_snippets(snippets)
    usage = TokenUsage()
    rendered = render_snippets(snippets)
    critique_prompt = render_template(
        load_template("selfrag_critique"),
        {"CLAIM_TEXT": claim.text, "EVIDENCE_SNIPPETS_WITH_IDS": rendered},
    )
    critiques = _call_with_retries(
        client, critique_prompt, SELFRAG_CRITIQUES_SCHEMA, usage, _read_critiques, retries=retries, sleep=sleep
    )
    if critiques is None:
        return _finish(METHOD_SELFRAG, Verdict.UNVERIFIABLE, "critique turn produced no usable output", usage)
    critiques_json = json.dumps(
        {"critiques": [critique.__dict__ for critique in critiques]}, indent=2
    )
    synthesis_prompt = render_template(
        load_template("selfrag_synthesis"),
        {"CLAIM_TEXT": claim.text, "EVIDENCE_SNIPPETS_WITH_IDS": rendered, "CRITIQUES_JSON": critiques_json},
    )
    parsed = _call_with_retries(
        client, synthesis_prompt, SELFRAG_VERDICT_SCHEMA, usage, _read_verdict, retries=retries, sleep=sleep
    )
    if parsed is None:
        model_verdict, justification = Verdict.UNVERIFIABLE, "synthesis turn produced no usable output"
    else:
        model_verdict, justification, _ = parsed
    final = enforce_synthesis_rules(model_verdict, critiques)
    if final is not model_verdict:
        justification = f"{justification} [adjusted to {final.value} by the synthesis rules]"
    return _finish(METHOD_SELFRAG, final, justification, usage)


def run_flare(
    client: LlmClient,
    claim: Claim,
    snippets: Sequence[EvidenceLike],
    full_texts: Mapping[str, str],
    *,
    retries: int = 3,
    sleep: Callable[[float], None] = time.sleep,
) -> BaselineVerdict:
    """Snippet verdict first; optionally one full-text review turn.

    The review request must match a listed paper id exactly; anything
    else (or a paper without stored full text) keeps the first verdict.
    """
    _require_snippets(snippets)
    usage = TokenUsage()
    rendered = render_snippets(snippets)
    paper_ids = snippet_paper_ids(snippets)
    initial_prompt = render_template(
        load_template("flare_initial"),
        {
            "CLAIM_TEXT": claim.text,
            "REQUIRED_STANDARD": claim.required_standard.value,
            "PAPER_IDS": ", ".join(paper_ids),
            "EVIDENCE_SNIPPETS": rendered,
        },
    )
    parsed = _call_with_retries(
        client, initial_prompt, FLARE_INITIAL_SCHEMA, usage, _read_flare_initial, retries=retries, sleep=sleep
    )
    if parsed is None:
        return _finish(METHOD_FLARE, Verdict.UNVERIFIABLE, "initial turn produced no usable output", usage)
    verdict, justification, _, request = parsed
    if request == "None":
        return _finish(METHOD_FLARE, verdict, justification, usage)
    if request not in paper_ids:
        logger.warning("full-review request %r matches no listed paper id; keeping the first verdict", request)
        return _finish(METHOD_FLARE, verdict, justification, usage)
    full_text = full_texts.get(request)
    if full_text is None:
        logger.warning("paper %r has no stored full text; keeping the first verdict", request)
        return _finish(METHOD_FLARE, verdict, justification, usage)
    review_prompt = render_template(
        load_template("flare_full_review"),
        {
            "PAPER_ID": request,
            "CLAIM_TEXT": claim.text,
            "EVIDENCE_SNIPPETS": rendered,
            "FULL_PAPER_TEXT": full_text,
        },
    )
    reviewed = _call_with_retries(
        client, review_prompt, FLARE_FINAL_SCHEMA, usage, _read_verdict, retries=retries, sleep=sleep
    )
    if reviewed is None:
        logger.warning("full-review turn produced no usable output; keeping the first verdict")
        return _finish(METHOD_FLARE, verdict, justification, usage)
    final_verdict, final_justification, _ = reviewed
    return _finish(METHOD_FLARE, final_verdict, final_justification, usage)


# Probe order convention: [agreement, conflict, paraphrase]; an "Agree"
# on the conflict probe argues against the claim, so index 1 is flipped.
_CONFLICT_PROBE_INDEX = 1

_FUSED_TO_VERDICT: Mapping[Verdict, Verdict] = {
    Verdict.SUPPORTS: Verdict.VALID,
    Verdict.REFUTES: Verdict.INVALID,
    Verdict.NEUTRAL: Verdict.UNVERIFIABLE,
}

_FLIP: Mapping[Verdict, Verdict] = {
    Verdict.SUPPORTS: Verdict.REFUTES,
    Verdict.REFUTES: Verdict.SUPPORTS,
    Verdict.NEUTRAL: Verdict.NEUTRAL,
}


def run_ciber(
    client: LlmClient,
    claim: Claim,
    snippets: Sequence[EvidenceLike],
    *,
    retries: int = 3,
    sleep: Callable[[float], None] = time.sleep,
) -> BaselineVerdict:
    """COT turn plus three probe turns, fused by Dempster's rule.

    Failed sub-calls contribute vacuous mass. The fused Supports /
    Refutes / Neutral outcome maps to Valid / Invalid / Unverifiable.
    """
    _require_snippets(snippets)
    usage = TokenUsage()
    rendered = render_snippets(snippets)
    cot_verdict, _, cot_confidence = _cot_turn(client, claim, snippets, usage, retries=retries, sleep=sleep)
    pairs: list[tuple[Verdict, float]] = [(cot_verdict, cot_confidence)]
    probe_answers: list[str] = []
    for index, question in enumerate(claim.probe_questions):
        prompt = render_template(
            load_template("ciber_probe"),
            {"PROBE_QUESTION": question, "EVIDENCE_SNIPPETS": rendered},
        )
        parsed = _call_with_retries(
            client, prompt, CIBER_PROBE_SCHEMA, usage, _read_probe, retries=retries, sleep=sleep
        )
        if parsed is None:
            probe_answers.append("failed")
            pairs.append((Verdict.NEUTRAL, 0.5))
            continue
        probe_verdict, confidence = parsed
        probe_answers.append(probe_verdict.value)
        if index == _CONFLICT_PROBE_INDEX:
            probe_verdict = _FLIP[probe_verdict]
        pairs.append((probe_verdict, confidence))
    fused = wbu_fuse(pairs)
    justification = (
        f"belief fusion of the primary verdict {cot_verdict.value} "
        f"with probe answers [{', '.join(probe_answers)}]"
    )
    return _finish(METHOD_CIBER, _FUSED_TO_VERDICT[fused], justification, usage)
