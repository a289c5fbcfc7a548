"""Corpus store: manifest ingestion, embeddings, retrieval, scenarios.

The corpus is an immutable value after ingestion; embedding returns a
new handle. Persistence is a directory of plain files (manifest JSON,
one analysis JSON per document, JSON-lines chunk and embedding stores)
so fixtures stay reviewable and diffable.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Protocol, Sequence

from ._files import write_atomic
from ._rng import fnv1a64
from .core import AnalysisDocument, Claim, SchemaError
from .redundancy import tokenize

logger = logging.getLogger(__name__)

SCENARIO_LABELS = ("TY0", "TY1", "TY3", "TY5")
DEFAULT_RETRIEVAL_K = 10
DEFAULT_EMBED_DIM = 64

EVIDENCE_FROM_MAP = "evidence_map"
EVIDENCE_FROM_RETRIEVAL = "retrieval"


class CorpusIntegrityError(ValueError):
    """The manifest or store violates referential integrity."""


class EmbeddingError(RuntimeError):
    """One or more chunks could not be embedded."""


@dataclass(frozen=True)
class EvidenceChunk:
    id: str
    doc_id: str
    ordinal: int
    text: str
    embedding: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.ordinal < 0:
            raise SchemaError(f"chunk {self.id!r}: ordinal must be nonnegative")
        if self.embedding is not None and not all(math.isfinite(x) for x in self.embedding):
            raise SchemaError(f"chunk {self.id!r}: embedding entries must be finite")


@dataclass(frozen=True)
class Document:
    id: str
    title: str
    source_uri: str
    retracted: bool
    analysis: AnalysisDocument
    chunks: tuple[EvidenceChunk, ...]

    def __post_init__(self) -> None:
        ordinals = [chunk.ordinal for chunk in self.chunks]
        if sorted(ordinals) != list(range(len(self.chunks))):
            raise CorpusIntegrityError(f"document {self.id!r}: chunk ordinals must be dense 0..n-1, got {ordinals}")
        for chunk in self.chunks:
            if chunk.doc_id != self.id:
                raise CorpusIntegrityError(
                    f"chunk {chunk.id!r} belongs to {chunk.doc_id!r}, not document {self.id!r}"
                )


@dataclass(frozen=True)
class Scenario:
    label: str
    member_doc_ids: frozenset[str]


class Embedder(Protocol):
    dim: int

    def embed(self, text: str) -> Sequence[float]: ...


@dataclass(frozen=True)
class Corpus:
    """Immutable handle over documents, claims, scenarios, and evidence."""

    documents: Mapping[str, Document]
    claims: Mapping[str, Claim]
    scenarios: Mapping[str, Scenario]
    evidence_map: Mapping[str, tuple[str, ...]]
    embedder: Embedder | None = field(default=None, compare=False)

    def document(self, doc_id: str) -> Document:
        try:
            return self.documents[doc_id]
        except KeyError:
            raise CorpusIntegrityError(f"unknown document id {doc_id!r}") from None

    def claim(self, claim_id: str) -> Claim:
        try:
            return self.claims[claim_id]
        except KeyError:
            raise CorpusIntegrityError(f"unknown claim id {claim_id!r}") from None

    def scenario(self, label: str) -> Scenario:
        try:
            return self.scenarios[label]
        except KeyError:
            raise CorpusIntegrityError(f"unknown scenario {label!r}") from None

    def all_chunks(self) -> tuple[EvidenceChunk, ...]:
        """Every chunk, in document manifest order then ordinal order."""
        return tuple(chunk for doc in self.documents.values() for chunk in doc.chunks)

    def chunk(self, chunk_id: str) -> EvidenceChunk:
        chunk = self._chunk_index().get(chunk_id)
        if chunk is None:
            raise CorpusIntegrityError(f"unknown chunk id {chunk_id!r}")
        return chunk

    def _chunk_index(self) -> dict[str, EvidenceChunk]:
        return {chunk.id: chunk for chunk in self.all_chunks()}


def _require_keys(payload: Mapping[str, Any], required: set[str], what: str) -> None:
    missing = required - payload.keys()
    if missing:
        raise CorpusIntegrityError(f"{what} missing fields: {sorted(missing)}")
    unknown = payload.keys() - required
    if unknown:
        raise CorpusIntegrityError(f"{what} has unknown fields: {sorted(unknown)}")


def _build_document(payload: Mapping[str, Any]) -> Document:
    _require_keys(payload, {"id", "title", "source_uri", "retracted", "analysis", "chunks"}, "document")
    doc_id = str(payload["id"])
    chunks = []
    for raw in payload["chunks"]:
        _require_keys(raw, {"id", "ordinal", "text"}, f"chunk of document {doc_id!r}")
        chunks.append(
            EvidenceChunk(id=str(raw["id"]), doc_id=doc_id, ordinal=int(raw["ordinal"]), text=str(raw["text"]))
        )
    return Document(
        id=doc_id,
        title=str(payload["title"]),
        source_uri=str(payload["source_uri"]),
        retracted=bool(payload["retracted"]),
        analysis=AnalysisDocument.from_json(payload["analysis"]),
        chunks=tuple(chunks),
    )


def _check_scenarios(scenarios: Mapping[str, Scenario], documents: Mapping[str, Document]) -> None:
    ty0 = scenarios["TY0"].member_doc_ids
    ty1 = scenarios["TY1"].member_doc_ids
    ty3 = scenarios["TY3"].member_doc_ids
    ty5 = scenarios["TY5"].member_doc_ids
    if not ty0 <= ty1:
        raise CorpusIntegrityError(f"TY0 must be a subset of TY1; outside: {sorted(ty0 - ty1)}")
    if not ty1 <= ty3:
        raise CorpusIntegrityError(f"TY1 must be a subset of TY3; outside: {sorted(ty1 - ty3)}")
    retracted_ty0 = {doc_id for doc_id in ty0 if documents[doc_id].retracted}
    overlap = ty5 & retracted_ty0
    if overlap:
        raise CorpusIntegrityError(f"TY5 must exclude retracted TY0 documents: {sorted(overlap)}")


def _build_corpus(payload: Mapping[str, Any]) -> Corpus:
    _require_keys(payload, {"documents", "claims", "scenarios", "evidence_map"}, "manifest")

    documents: dict[str, Document] = {}
    chunk_ids: set[str] = set()
    for raw in payload["documents"]:
        document = _build_document(raw)
        if document.id in documents:
            raise CorpusIntegrityError(f"duplicate document id {document.id!r}")
        for chunk in document.chunks:
            if chunk.id in chunk_ids:
                raise CorpusIntegrityError(f"duplicate chunk id {chunk.id!r}")
            chunk_ids.add(chunk.id)
        documents[document.id] = document

    claims: dict[str, Claim] = {}
    for raw in payload["claims"]:
        claim = Claim.from_json(raw)
        if claim.id in claims:
            raise CorpusIntegrityError(f"duplicate claim id {claim.id!r}")
        claims[claim.id] = claim

    raw_scenarios = payload["scenarios"]
    _require_keys(raw_scenarios, set(SCENARIO_LABELS), "scenarios")
    scenarios: dict[str, Scenario] = {}
    for label in SCENARIO_LABELS:
        members = [str(doc_id) for doc_id in raw_scenarios[label]]
        for doc_id in members:
            if doc_id not in documents:
                raise CorpusIntegrityError(f"scenario {label} references unknown document {doc_id!r}")
        scenarios[label] = Scenario(label=label, member_doc_ids=frozenset(members))
    _check_scenarios(scenarios, documents)

    evidence_map: dict[str, tuple[str, ...]] = {}
    for claim_id, chunk_list in payload["evidence_map"].items():
        if claim_id not in claims:
            raise CorpusIntegrityError(f"evidence_map references unknown claim {claim_id!r}")
        for chunk_id in chunk_list:
            if chunk_id not in chunk_ids:
                raise CorpusIntegrityError(
                    f"evidence_map for claim {claim_id!r} references unknown chunk {chunk_id!r}"
                )
        evidence_map[claim_id] = tuple(str(chunk_id) for chunk_id in chunk_list)

    return Corpus(documents=documents, claims=claims, scenarios=scenarios, evidence_map=evidence_map)


def ingest(manifest_path: str | Path) -> Corpus:
    """Load and integrity-check a corpus manifest."""
    path = Path(manifest_path)
    with path.open(encoding="utf-8") as handle:
        try:
            payload = json.load(handle)
        except json.JSONDecodeError as exc:
            raise CorpusIntegrityError(f"{path}: manifest is not valid JSON: {exc}") from None
    corpus = _build_corpus(payload)
    logger.info(
        "ingested %d documents (%d chunks), %d claims, %d scenarios",
        len(corpus.documents),
        len(corpus.all_chunks()),
        len(corpus.claims),
        len(corpus.scenarios),
    )
    return corpus


class HashEmbedder:
    """Deterministic local embedder: token-hash projection with sign bits.

    Purely integer-hash driven, so vectors are byte-identical across
    platforms and runs. Not semantically meaningful; it exists to make
    retrieval reproducible offline.
    """

    def __init__(self, dim: int = DEFAULT_EMBED_DIM, seed: int = 0) -> None:
        if dim <= 0:
            raise ValueError(f"embedding dimension must be positive, got {dim}")
        self.dim = dim
        self.seed = seed

    def embed(self, text: str) -> tuple[float, ...]:
        values = [0.0] * self.dim
        for token in tokenize(text):
            token_hash = fnv1a64(f"{self.seed}\x1f{token}")
            sign = 1.0 if (token_hash >> 63) == 0 else -1.0
            values[token_hash % self.dim] += sign
        norm = math.sqrt(sum(value * value for value in values))
        if norm == 0.0:
            return tuple(values)
        return tuple(value / norm for value in values)


def embed_chunks(corpus: Corpus, embedder: Embedder) -> Corpus:
    """Return a corpus whose every chunk carries an embedding."""
    failed: list[str] = []
    new_documents: dict[str, Document] = {}
    for doc_id, document in corpus.documents.items():
        new_chunks = []
        for chunk in document.chunks:
            try:
                vector = tuple(float(x) for x in embedder.embed(chunk.text))
            except Exception as exc:
                logger.warning("embedding failed for chunk %s: %s", chunk.id, exc)
                failed.append(chunk.id)
                new_chunks.append(chunk)
                continue
            if len(vector) != embedder.dim:
                raise EmbeddingError(
                    f"embedder returned dimension {len(vector)} for chunk {chunk.id!r}, expected {embedder.dim}"
                )
            if not any(vector):
                logger.warning("chunk %s has no tokens; flagged with a zero embedding", chunk.id)
            new_chunks.append(replace(chunk, embedding=vector))
        new_documents[doc_id] = replace(document, chunks=tuple(new_chunks))
    if failed:
        raise EmbeddingError(f"failed to embed chunks: {failed}")
    return replace(corpus, documents=new_documents, embedder=embedder)


def _cosine_dense(a: Sequence[float], b: Sequence[float]) -> float:
    dot = sum(x * y for x, y in zip(a, b))
    norm_a = math.sqrt(sum(x * x for x in a))
    norm_b = math.sqrt(sum(y * y for y in b))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return dot / (norm_a * norm_b)


def retrieve(claim: Claim, corpus: Corpus, k: int = DEFAULT_RETRIEVAL_K) -> list[EvidenceChunk]:
    """Top-k chunks by cosine to the claim embedding; ties by (doc_id, ordinal)."""
    if k <= 0:
        raise ValueError(f"retrieval depth k must be positive, got {k}")
    if corpus.embedder is None:
        raise EmbeddingError("corpus has no embedder; run embed_chunks first")
    chunks = corpus.all_chunks()
    missing = [chunk.id for chunk in chunks if chunk.embedding is None]
    if missing:
        raise EmbeddingError(f"chunks are missing embeddings: {missing[:5]}")
    claim_vector = tuple(float(x) for x in corpus.embedder.embed(claim.text))
    scored = sorted(
        chunks,
        key=lambda chunk: (-_cosine_dense(claim_vector, chunk.embedding), chunk.doc_id, chunk.ordinal),
    )
    return list(scored[:k])


def filter_scenario(chunks: Iterable[EvidenceChunk], scenario: Scenario) -> list[EvidenceChunk]:
    """Keep chunks whose source document is in the scenario, preserving order."""
    return [chunk for chunk in chunks if chunk.doc_id in scenario.member_doc_ids]


def evidence_for_claim(
    corpus: Corpus, claim: Claim, k: int = DEFAULT_RETRIEVAL_K
) -> tuple[list[EvidenceChunk], str]:
    """Evidence chunks plus the mode used to obtain them.

    A pre-computed evidence_map entry wins over live retrieval so all
    methods share identical evidence when the manifest pins it.
    """
    pinned = corpus.evidence_map.get(claim.id)
    if pinned is not None:
        return [corpus.chunk(chunk_id) for chunk_id in pinned], EVIDENCE_FROM_MAP
    return retrieve(claim, corpus, k), EVIDENCE_FROM_RETRIEVAL


def n_evidence_docs(chunks: Iterable[EvidenceChunk]) -> int:
    """Distinct source documents backing the given chunks."""
    return len({chunk.doc_id for chunk in chunks})


def save_corpus(corpus: Corpus, directory: str | Path) -> None:
    """Write the directory-of-files layout (embeddings included if present)."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    (root / "analyses").mkdir(exist_ok=True)
    manifest = {
        "documents": [
            {"id": doc.id, "title": doc.title, "source_uri": doc.source_uri, "retracted": doc.retracted}
            for doc in corpus.documents.values()
        ],
        "claims": [claim.to_json() for claim in corpus.claims.values()],
        "scenarios": {label: sorted(corpus.scenarios[label].member_doc_ids) for label in SCENARIO_LABELS},
        "evidence_map": {claim_id: list(chunk_ids) for claim_id, chunk_ids in corpus.evidence_map.items()},
    }
    write_atomic(root / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True))
    for doc in corpus.documents.values():
        write_atomic(
            root / "analyses" / f"{doc.id}.json", json.dumps(doc.analysis.to_json(), indent=2, sort_keys=True)
        )
    write_atomic(
        root / "chunks.jsonl",
        "".join(
            json.dumps(
                {"id": chunk.id, "doc_id": chunk.doc_id, "ordinal": chunk.ordinal, "text": chunk.text},
                sort_keys=True,
            )
            + "\n"
            for chunk in corpus.all_chunks()
        ),
    )
    embedded = [chunk for chunk in corpus.all_chunks() if chunk.embedding is not None]
    if embedded:
        write_atomic(
            root / "embeddings.jsonl",
            "".join(
                json.dumps({"chunk_id": chunk.id, "embedding": list(chunk.embedding)}, sort_keys=True) + "\n"
                for chunk in embedded
            ),
        )


def load_corpus(directory: str | Path) -> Corpus:
    """Rebuild a corpus from `save_corpus` output, re-running all checks."""
    root = Path(directory)
    manifest = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
    chunks_by_doc: dict[str, list[dict[str, Any]]] = {}
    with (root / "chunks.jsonl").open(encoding="utf-8") as handle:
        for line in handle:
            record = json.loads(line)
            chunks_by_doc.setdefault(record["doc_id"], []).append(
                {"id": record["id"], "ordinal": record["ordinal"], "text": record["text"]}
            )
    payload = {
        "documents": [
            {
                **doc,
                "analysis": json.loads((root / "analyses" / f"{doc['id']}.json").read_text(encoding="utf-8")),
                "chunks": chunks_by_doc.get(doc["id"], []),
            }
            for doc in manifest["documents"]
        ],
        "claims": manifest["claims"],
        "scenarios": manifest["scenarios"],
        "evidence_map": manifest["evidence_map"],
    }
    corpus = _build_corpus(payload)
    embeddings_path = root / "embeddings.jsonl"
    if embeddings_path.exists():
        vectors: dict[str, tuple[float, ...]] = {}
        with embeddings_path.open(encoding="utf-8") as handle:
            for line in handle:
                record = json.loads(line)
                vectors[record["chunk_id"]] = tuple(float(x) for x in record["embedding"])
        new_documents = {
            doc_id: replace(
                doc,
                chunks=tuple(
                    replace(chunk, embedding=vectors.get(chunk.id)) for chunk in doc.chunks
                ),
            )
            for doc_id, doc in corpus.documents.items()
        }
        corpus = replace(corpus, documents=new_documents)
    return corpus
