"""Metrics, the verify matrix, and report assembly.

Everything reported is recomputable from the VerdictRecords: metrics
never depend on state the records do not carry. All grouping and
floating-point reductions run in deterministic order so a seeded mock
run reproduces its records and report byte for byte.
"""

from __future__ import annotations

import json
import logging
import math
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Hashable, Mapping, Sequence

from .audit import (
    AuditFailureError,
    AuditRequest,
    DEFAULT_TOKEN_BUDGET,
    PaperToAudit,
    mock_audit_with_usage,
    run_audit,
)
from .baselines import (
    METHOD_CIBER,
    METHOD_COT,
    METHOD_FLARE,
    METHOD_SELFRAG,
    run_ciber,
    run_cot,
    run_flare,
    run_selfrag,
)
from .core import Claim, STANCE_REFUTES, STANCE_SUPPORTS, Verdict, derive_mask, map_verdict
from .corpus import (
    Corpus,
    DEFAULT_RETRIEVAL_K,
    EmbeddingError,
    EvidenceChunk,
    evidence_for_claim,
    filter_scenario,
    n_evidence_docs,
)
from .llm import LlmClient, MockLlm, approx_token_count
from .redundancy import NoVocabularyError, document_weight, redundancy_for_texts
from .scoring import DocumentContribution, HvParams, Tallies, aggregate, hv, intrinsic_quality, make_contribution
from .threshold import RidgeModel, ThresholdConfig, threshold_for_claim
from .threshold import verdict as hv_verdict

logger = logging.getLogger(__name__)

METHOD_AUDIT = "audit"
ALL_METHODS = (METHOD_AUDIT, METHOD_COT, METHOD_SELFRAG, METHOD_FLARE, METHOD_CIBER)

# Threshold used when the dynamic-threshold ablation is switched off:
# the neutral cut of a sigmoid score.
FIXED_TAU = 0.5


@dataclass(frozen=True)
class ConfusionMatrix:
    """Binary confusion counts; the positive class is Valid."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self) -> None:
        for name, value in (("tp", self.tp), ("fp", self.fp), ("fn", self.fn), ("tn", self.tn)):
            if value < 0:
                raise ValueError(f"{name} must be nonnegative, got {value}")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @classmethod
    def from_labels(cls, predicted: Sequence[Verdict], actual: Sequence[Verdict]) -> "ConfusionMatrix":
        if len(predicted) != len(actual):
            raise ValueError(f"label lists differ in length: {len(predicted)} vs {len(actual)}")
        tp = fp = fn = tn = 0
        for raw_pred, raw_act in zip(predicted, actual):
            pred = map_verdict(raw_pred) is Verdict.VALID
            act = map_verdict(raw_act) is Verdict.VALID
            if pred and act:
                tp += 1
            elif pred and not act:
                fp += 1
            elif not pred and act:
                fn += 1
            else:
                tn += 1
        return cls(tp=tp, fp=fp, fn=fn, tn=tn)


def _require_nonempty(cm: ConfusionMatrix) -> None:
    if cm.total == 0:
        raise ValueError("confusion matrix is empty")


def _class_f1(tp: int, fp: int, fn: int) -> float:
    # 2tp/(2tp+fp+fn); a class absent from predictions and actuals scores 0.
    denominator = 2 * tp + fp + fn
    return 0.0 if denominator == 0 else 2 * tp / denominator


def macro_f1(cm: ConfusionMatrix) -> float:
    """Unweighted mean of the Valid-class and Invalid-class F1 scores."""
    _require_nonempty(cm)
    f1_valid = _class_f1(cm.tp, cm.fp, cm.fn)
    f1_invalid = _class_f1(cm.tn, cm.fn, cm.fp)
    return (f1_valid + f1_invalid) / 2


def mcc(cm: ConfusionMatrix) -> float:
    """Matthews correlation; a zero denominator is defined as 0."""
    _require_nonempty(cm)
    numerator = cm.tp * cm.tn - cm.fp * cm.fn
    denominator = (cm.tp + cm.fp) * (cm.tp + cm.fn) * (cm.tn + cm.fp) * (cm.tn + cm.fn)
    if denominator == 0:
        return 0.0
    return numerator / math.sqrt(denominator)


def _check_label_pair(labels_a: Sequence[Hashable], labels_b: Sequence[Hashable]) -> None:
    if len(labels_a) != len(labels_b):
        raise ValueError(f"label lists differ in length: {len(labels_a)} vs {len(labels_b)}")
    if not labels_a:
        raise ValueError("label lists must be nonempty")


def _categories(labels_a: Sequence[Hashable], labels_b: Sequence[Hashable]) -> list[Hashable]:
    # Sorted so floating-point accumulation order is run-independent.
    return sorted(set(labels_a) | set(labels_b), key=str)


def cohen_kappa(labels_a: Sequence[Hashable], labels_b: Sequence[Hashable]) -> float:
    """Chance-corrected agreement with marginal-product expectation."""
    _check_label_pair(labels_a, labels_b)
    n = len(labels_a)
    p_observed = sum(1 for a, b in zip(labels_a, labels_b) if a == b) / n
    count_a = Counter(labels_a)
    count_b = Counter(labels_b)
    p_expected = sum((count_a[k] / n) * (count_b[k] / n) for k in _categories(labels_a, labels_b))
    if p_expected == 1.0:
        return 1.0 if p_observed == 1.0 else 0.0
    return (p_observed - p_expected) / (1.0 - p_expected)


def gwet_ac1(labels_a: Sequence[Hashable], labels_b: Sequence[Hashable]) -> float:
    """Gwet's chance-corrected agreement, stabler than kappa on skewed data."""
    _check_label_pair(labels_a, labels_b)
    n = len(labels_a)
    categories = _categories(labels_a, labels_b)
    p_observed = sum(1 for a, b in zip(labels_a, labels_b) if a == b) / n
    if len(categories) == 1:
        return 1.0 if p_observed == 1.0 else 0.0
    count_a = Counter(labels_a)
    count_b = Counter(labels_b)
    p_expected = sum(
        (pi_k := (count_a[k] / n + count_b[k] / n) / 2) * (1.0 - pi_k) for k in categories
    ) / (len(categories) - 1)
    return (p_observed - p_expected) / (1.0 - p_expected)


def count_tokens(
    prompt: str,
    response: str,
    *,
    prompt_tokens: int | None = None,
    completion_tokens: int | None = None,
) -> tuple[int, int, bool]:
    """(in, out, approximate): provider counts when given, else ceil(bytes/4)."""
    approximate = False
    if prompt_tokens is None:
        prompt_tokens = approx_token_count(prompt)
        approximate = True
    if completion_tokens is None:
        completion_tokens = approx_token_count(response)
        approximate = True
    return prompt_tokens, completion_tokens, approximate


@dataclass(frozen=True)
class AblationFlags:
    use_hv_score: bool = True
    use_dynamic_threshold: bool = True
    use_redundancy_penalty: bool = True

    def to_json(self) -> dict[str, bool]:
        return {
            "use_hv_score": self.use_hv_score,
            "use_dynamic_threshold": self.use_dynamic_threshold,
            "use_redundancy_penalty": self.use_redundancy_penalty,
        }

    @classmethod
    def from_json(cls, payload: Mapping[str, Any]) -> "AblationFlags":
        known = {"use_hv_score", "use_dynamic_threshold", "use_redundancy_penalty"}
        unknown = payload.keys() - known
        if unknown:
            raise ValueError(f"unknown ablation flags: {sorted(unknown)}")
        return cls(**{key: bool(value) for key, value in payload.items()})


@dataclass(frozen=True)
class VerdictRecord:
    """One (claim, method, scenario) cell of the verify matrix."""

    claim_id: str
    method: str
    scenario: str
    verdict: str | None
    ground_truth: str
    hv: float | None
    tau: float | None
    tallies: Tallies | None
    contributions: tuple[DocumentContribution, ...]
    n_evidence_docs: int
    retrieval_mode: str | None
    tokens_in: int
    tokens_out: int
    tokens_approximate: bool
    failure: str | None = None

    def to_json(self) -> dict[str, Any]:
        return {
            "claim_id": self.claim_id,
            "method": self.method,
            "scenario": self.scenario,
            "verdict": self.verdict,
            "ground_truth": self.ground_truth,
            "hv": self.hv,
            "tau": self.tau,
            "tallies": None if self.tallies is None else self.tallies.to_json(),
            "contributions": [
                {
                    "doc_id": c.doc_id,
                    "stance": c.stance,
                    "quality": c.quality,
                    "weight": c.weight,
                    "eta": c.eta,
                }
                for c in self.contributions
            ],
            "n_evidence_docs": self.n_evidence_docs,
            "retrieval_mode": self.retrieval_mode,
            "tokens_in": self.tokens_in,
            "tokens_out": self.tokens_out,
            "tokens_approximate": self.tokens_approximate,
            "failure": self.failure,
        }

    @classmethod
    def from_json(cls, payload: Mapping[str, Any]) -> "VerdictRecord":
        return cls(
            claim_id=payload["claim_id"],
            method=payload["method"],
            scenario=payload["scenario"],
            verdict=payload["verdict"],
            ground_truth=payload["ground_truth"],
            hv=payload["hv"],
            tau=payload["tau"],
            tallies=None if payload["tallies"] is None else Tallies.from_json(payload["tallies"]),
            contributions=tuple(
                DocumentContribution(
                    doc_id=c["doc_id"],
                    stance=c["stance"],
                    quality=c["quality"],
                    weight=c["weight"],
                    eta=c["eta"],
                )
                for c in payload["contributions"]
            ),
            n_evidence_docs=payload["n_evidence_docs"],
            retrieval_mode=payload["retrieval_mode"],
            tokens_in=payload["tokens_in"],
            tokens_out=payload["tokens_out"],
            tokens_approximate=payload["tokens_approximate"],
            failure=payload["failure"],
        )


def dump_records(records: Sequence[VerdictRecord]) -> str:
    """Stable JSON-lines serialization (byte-identical for equal records)."""
    return "".join(
        json.dumps(record.to_json(), sort_keys=True, separators=(",", ":")) + "\n" for record in records
    )


def load_records(path: str | Path) -> list[VerdictRecord]:
    records = []
    with Path(path).open(encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                records.append(VerdictRecord.from_json(json.loads(line)))
    return records


def _failure_record(
    claim_id: str,
    ground_truth: str,
    method: str,
    scenario: str,
    mode: str | None,
    n_docs: int,
    message: str,
) -> VerdictRecord:
    return VerdictRecord(
        claim_id=claim_id,
        method=method,
        scenario=scenario,
        verdict=None,
        ground_truth=ground_truth,
        hv=None,
        tau=None,
        tallies=None,
        contributions=(),
        n_evidence_docs=n_docs,
        retrieval_mode=mode,
        tokens_in=0,
        tokens_out=0,
        tokens_approximate=False,
        failure=message,
    )


def _papers_for(corpus: Corpus, chunks: Sequence[EvidenceChunk]) -> tuple[PaperToAudit, ...]:
    grouped: dict[str, list[str]] = {}
    for chunk in chunks:
        grouped.setdefault(chunk.doc_id, []).append(chunk.text)
    return tuple(
        PaperToAudit(paper_id=doc_id, analysis=corpus.document(doc_id).analysis, chunks=tuple(texts))
        for doc_id, texts in grouped.items()
    )


def _document_weights(
    chunks: Sequence[EvidenceChunk], papers: Sequence[PaperToAudit], use_penalty: bool
) -> dict[str, float]:
    if not use_penalty:
        return {paper.paper_id: 1.0 for paper in papers}
    try:
        rhos = redundancy_for_texts([chunk.text for chunk in chunks])
    except NoVocabularyError:
        # Nothing to compare against; every chunk counts as novel.
        logger.warning("evidence chunks yield no vocabulary; redundancy penalty disabled for this claim")
        rhos = [0.0] * len(chunks)
    rhos_by_doc: dict[str, list[float]] = {}
    for chunk, rho in zip(chunks, rhos):
        rhos_by_doc.setdefault(chunk.doc_id, []).append(rho)
    return {doc_id: document_weight(doc_rhos)[1] for doc_id, doc_rhos in rhos_by_doc.items()}


def _audit_cell(
    corpus: Corpus,
    claim: Claim,
    scenario_label: str,
    chunks: Sequence[EvidenceChunk],
    mode: str,
    flags: AblationFlags,
    hv_params: HvParams,
    ridge: RidgeModel,
    cfg: ThresholdConfig,
    *,
    mock: bool,
    seed: int,
    client: LlmClient | None,
    token_budget: int,
    retries: int,
    sleep: Callable[[float], None],
) -> VerdictRecord:
    n_docs = n_evidence_docs(chunks)
    papers = _papers_for(corpus, chunks)
    request = AuditRequest(claim_text=claim.text, papers=papers)
    try:
        if mock:
            results, usage = mock_audit_with_usage(request, seed)
        else:
            results, usage = run_audit(client, request, token_budget=token_budget, retries=retries, sleep=sleep)
    except (AuditFailureError, ValueError) as exc:
        return _failure_record(claim.id, claim.ground_truth.value, METHOD_AUDIT, scenario_label, mode, n_docs, str(exc))

    weights = _document_weights(chunks, papers, flags.use_redundancy_penalty)
    contributions: list[DocumentContribution] = []
    for result in results:
        mask = derive_mask(corpus.document(result.paper_id).analysis)
        if mask.k == 0:
            logger.warning("document %s has no applicable checks; it contributes nothing", result.paper_id)
            continue
        quality = intrinsic_quality(result.audit, mask)
        contributions.append(make_contribution(result.paper_id, result.stance, quality, weights[result.paper_id]))
    tallies = aggregate(contributions)

    if flags.use_hv_score:
        score = hv(tallies, hv_params)
        tau = threshold_for_claim(claim, n_docs, cfg, ridge) if flags.use_dynamic_threshold else FIXED_TAU
        cell_verdict = hv_verdict(score, tau)
        hv_out: float | None = score
        tau_out: float | None = tau
    else:
        supports = sum(1 for result in results if result.stance == STANCE_SUPPORTS)
        refutes = sum(1 for result in results if result.stance == STANCE_REFUTES)
        cell_verdict = Verdict.VALID if supports > refutes else Verdict.INVALID
        hv_out = tau_out = None

    return VerdictRecord(
        claim_id=claim.id,
        method=METHOD_AUDIT,
        scenario=scenario_label,
        verdict=cell_verdict.value,
        ground_truth=claim.ground_truth.value,
        hv=hv_out,
        tau=tau_out,
        tallies=tallies,
        contributions=tuple(contributions),
        n_evidence_docs=n_docs,
        retrieval_mode=mode,
        tokens_in=usage.tokens_in,
        tokens_out=usage.tokens_out,
        tokens_approximate=usage.approximate,
        failure=None,
    )


def _baseline_cell(
    corpus: Corpus,
    claim: Claim,
    scenario_label: str,
    chunks: Sequence[EvidenceChunk],
    mode: str,
    method: str,
    *,
    client: LlmClient,
    retries: int,
    sleep: Callable[[float], None],
) -> VerdictRecord:
    n_docs = n_evidence_docs(chunks)
    try:
        if method == METHOD_COT:
            result = run_cot(client, claim, chunks, retries=retries, sleep=sleep)
        elif method == METHOD_SELFRAG:
            result = run_selfrag(client, claim, chunks, retries=retries, sleep=sleep)
        elif method == METHOD_CIBER:
            result = run_ciber(client, claim, chunks, retries=retries, sleep=sleep)
        elif method == METHOD_FLARE:
            full_texts = {
                doc_id: "\n\n".join(chunk.text for chunk in corpus.document(doc_id).chunks)
                for doc_id in sorted({chunk.doc_id for chunk in chunks})
            }
            result = run_flare(client, claim, chunks, full_texts, retries=retries, sleep=sleep)
        else:
            raise ValueError(f"unknown method {method!r}")
    except ValueError as exc:
        return _failure_record(claim.id, claim.ground_truth.value, method, scenario_label, mode, n_docs, str(exc))
    return VerdictRecord(
        claim_id=claim.id,
        method=method,
        scenario=scenario_label,
        verdict=result.verdict.value,
        ground_truth=claim.ground_truth.value,
        hv=None,
        tau=None,
        tallies=None,
        contributions=(),
        n_evidence_docs=n_docs,
        retrieval_mode=mode,
        tokens_in=result.tokens_in,
        tokens_out=result.tokens_out,
        tokens_approximate=result.tokens_approximate,
        failure=None,
    )


def run_matrix(
    corpus: Corpus,
    methods: Sequence[str],
    scenario_labels: Sequence[str],
    flags: AblationFlags,
    hv_params: HvParams,
    ridge: RidgeModel,
    cfg: ThresholdConfig,
    *,
    seed: int = 0,
    mock: bool = True,
    client: LlmClient | None = None,
    retrieval_k: int = DEFAULT_RETRIEVAL_K,
    token_budget: int = DEFAULT_TOKEN_BUDGET,
    retries: int = 3,
    sleep: Callable[[float], None] = time.sleep,
) -> "RunReport":
    """Produce one VerdictRecord per (claim, method, scenario) cell.

    Claim-level failures become records with the failure field set;
    the matrix itself never aborts. Record order is claim-major, then
    method, then scenario, so assembly is deterministic.
    """
    unknown = [method for method in methods if method not in ALL_METHODS]
    if unknown:
        raise ValueError(f"unknown methods: {unknown}")
    if not mock and client is None:
        raise ValueError("a live run needs an LLM client; pass client= or use mock=True")
    baseline_client: LlmClient = MockLlm(seed) if mock else client  # type: ignore[assignment]

    records: list[VerdictRecord] = []
    for claim in corpus.claims.values():
        try:
            evidence, mode = evidence_for_claim(corpus, claim, retrieval_k)
        except (EmbeddingError, ValueError) as exc:
            logger.warning("evidence lookup failed for claim %s: %s", claim.id, exc)
            for method in methods:
                for label in scenario_labels:
                    records.append(
                        _failure_record(
                            claim.id,
                            claim.ground_truth.value,
                            method,
                            label,
                            None,
                            0,
                            f"evidence lookup failed: {exc}",
                        )
                    )
            continue
        chunks_by_scenario = {
            label: filter_scenario(evidence, corpus.scenario(label)) for label in scenario_labels
        }
        for method in methods:
            for label in scenario_labels:
                chunks = chunks_by_scenario[label]
                if not chunks:
                    records.append(
                        _failure_record(
                            claim.id,
                            claim.ground_truth.value,
                            method,
                            label,
                            mode,
                            0,
                            f"no evidence chunks survive scenario {label}",
                        )
                    )
                    continue
                if method == METHOD_AUDIT:
                    records.append(
                        _audit_cell(
                            corpus,
                            claim,
                            label,
                            chunks,
                            mode,
                            flags,
                            hv_params,
                            ridge,
                            cfg,
                            mock=mock,
                            seed=seed,
                            client=client,
                            token_budget=token_budget,
                            retries=retries,
                            sleep=sleep,
                        )
                    )
                else:
                    records.append(
                        _baseline_cell(
                            corpus,
                            claim,
                            label,
                            chunks,
                            mode,
                            method,
                            client=baseline_client,
                            retries=retries,
                            sleep=sleep,
                        )
                    )
    return build_report(records)


@dataclass(frozen=True)
class CellMetrics:
    """Aggregates for one (method, scenario) group of records."""

    method: str
    scenario: str
    n: int
    failures: int
    macro_f1: float | None
    mcc: float | None
    avg_tokens_in: float
    avg_tokens_out: float
    tokens_approximate: bool

    def to_json(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "scenario": self.scenario,
            "n": self.n,
            "failures": self.failures,
            "macro_f1": self.macro_f1,
            "mcc": self.mcc,
            "avg_tokens_in": self.avg_tokens_in,
            "avg_tokens_out": self.avg_tokens_out,
            "tokens_approximate": self.tokens_approximate,
        }


@dataclass(frozen=True)
class RunReport:
    records: tuple[VerdictRecord, ...]
    cells: tuple[CellMetrics, ...] = field(default=())

    def to_json(self) -> dict[str, Any]:
        return {"cells": [cell.to_json() for cell in self.cells]}


def build_report(records: Sequence[VerdictRecord]) -> RunReport:
    """Group records by (method, scenario) and compute each cell's metrics."""
    groups: dict[tuple[str, str], list[VerdictRecord]] = {}
    for record in records:
        groups.setdefault((record.method, record.scenario), []).append(record)
    cells = []
    for (method, scenario), members in groups.items():
        scored = [record for record in members if record.failure is None]
        failures = len(members) - len(scored)
        if scored:
            cm = ConfusionMatrix.from_labels(
                [Verdict(record.verdict) for record in scored],
                [Verdict(record.ground_truth) for record in scored],
            )
            f1_value: float | None = macro_f1(cm)
            mcc_value: float | None = mcc(cm)
            avg_in = sum(record.tokens_in for record in scored) / len(scored)
            avg_out = sum(record.tokens_out for record in scored) / len(scored)
            approximate = any(record.tokens_approximate for record in scored)
        else:
            f1_value = mcc_value = None
            avg_in = avg_out = 0.0
            approximate = False
        cells.append(
            CellMetrics(
                method=method,
                scenario=scenario,
                n=len(scored),
                failures=failures,
                macro_f1=f1_value,
                mcc=mcc_value,
                avg_tokens_in=avg_in,
                avg_tokens_out=avg_out,
                tokens_approximate=approximate,
            )
        )
    return RunReport(records=tuple(records), cells=tuple(cells))


def _ordered_unique(values: Sequence[str]) -> list[str]:
    seen: dict[str, None] = {}
    for value in values:
        seen.setdefault(value, None)
    return list(seen)


def render_table(report: RunReport) -> str:
    """Plain-text grid: methods down, scenarios across, F1/MCC per cell."""
    methods = _ordered_unique([cell.method for cell in report.cells])
    scenarios = _ordered_unique([cell.scenario for cell in report.cells])
    by_key = {(cell.method, cell.scenario): cell for cell in report.cells}
    approximate = any(cell.tokens_approximate for cell in report.cells)

    header = ["method"] + scenarios + ["avg tokens in/out"]
    rows = [header]
    for method in methods:
        row = [method]
        method_cells = [by_key[(method, s)] for s in scenarios if (method, s) in by_key]
        for scenario in scenarios:
            cell = by_key.get((method, scenario))
            if cell is None or cell.macro_f1 is None:
                row.append("-")
            else:
                row.append(f"F1 {cell.macro_f1:.3f} MCC {cell.mcc:+.3f}")
        total_n = sum(cell.n for cell in method_cells)
        if total_n:
            avg_in = sum(cell.avg_tokens_in * cell.n for cell in method_cells) / total_n
            avg_out = sum(cell.avg_tokens_out * cell.n for cell in method_cells) / total_n
            row.append(f"{avg_in:.0f}/{avg_out:.0f}")
        else:
            row.append("-")
        rows.append(row)

    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = ["  ".join(value.ljust(widths[i]) for i, value in enumerate(row)).rstrip() for row in rows]
    if approximate:
        lines.append("token counts are approximate (ceil(bytes/4))")
    return "\n".join(lines) + "\n"


def csv_rows(report: RunReport) -> list[str]:
    """Machine-readable rows, one per (method, scenario) cell."""
    lines = ["method,scenario,n,failures,macro_f1,mcc,avg_tokens_in,avg_tokens_out,tokens_approximate"]
    for cell in report.cells:
        f1_text = "" if cell.macro_f1 is None else f"{cell.macro_f1:.6f}"
        mcc_text = "" if cell.mcc is None else f"{cell.mcc:.6f}"
        lines.append(
            f"{cell.method},{cell.scenario},{cell.n},{cell.failures},"
            f"{f1_text},{mcc_text},{cell.avg_tokens_in:.2f},{cell.avg_tokens_out:.2f},"
            f"{str(cell.tokens_approximate).lower()}"
        )
    return lines
