"""Provider-agnostic LLM clients: live HTTP, scripted replay, seeded mock.

Every prompt-driven step in the pipeline talks to the one-method
`LlmClient` interface, so live runs, recorded transcripts, and fully
offline mock runs are interchangeable at every call site.
"""

from __future__ import annotations

import abc
import json
import os
import re
import threading
import time
from dataclasses import dataclass
from typing import Any, Callable, Mapping

import requests

from ._rng import DeterministicStream, fnv1a64


class LlmError(RuntimeError):
    """Base class for LLM client failures."""


class LlmConfigError(LlmError):
    """The client is missing configuration (URL, model, or key)."""


class LlmTransportError(LlmError):
    """All transport attempts failed."""


class ScriptMissError(LlmError):
    """A scripted transcript has no entry for the requested prompt."""


@dataclass(frozen=True)
class LlmReply:
    """One completion; token counts are provider-reported when present."""

    text: str
    prompt_tokens: int | None = None
    completion_tokens: int | None = None


def approx_token_count(text: str) -> int:
    """ceil(UTF-8 bytes / 4): the fallback when no provider count exists."""
    return (len(text.encode("utf-8")) + 3) // 4


@dataclass
class TokenUsage:
    """Accumulates in/out token counts across the calls of one run."""

    tokens_in: int = 0
    tokens_out: int = 0
    approximate: bool = False

    def record(self, prompt: str, reply: LlmReply) -> None:
        if reply.prompt_tokens is not None:
            self.tokens_in += reply.prompt_tokens
        else:
            self.tokens_in += approx_token_count(prompt)
            self.approximate = True
        if reply.completion_tokens is not None:
            self.tokens_out += reply.completion_tokens
        else:
            self.tokens_out += approx_token_count(reply.text)
            self.approximate = True

    def merge(self, other: "TokenUsage") -> None:
        self.tokens_in += other.tokens_in
        self.tokens_out += other.tokens_out
        self.approximate = self.approximate or other.approximate


def extract_json_object(raw: str) -> Any:
    """Parse the JSON object in a reply, tolerating markdown fences.

    Providers ignore structured-output hints often enough that the
    parser accepts a fenced or prose-wrapped object; anything else
    raises ValueError so the caller can retry.
    """
    text = raw.strip()
    if text.startswith("```"):
        text = re.sub(r"^```[a-zA-Z]*\s*", "", text)
        text = re.sub(r"\s*```$", "", text)
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        start, end = text.find("{"), text.rfind("}")
        if start != -1 and end > start:
            try:
                return json.loads(text[start : end + 1])
            except json.JSONDecodeError:
                pass
        raise ValueError("reply does not contain a JSON object") from None


class LlmClient(abc.ABC):
    @abc.abstractmethod
    def complete(self, prompt: str, *, schema: Mapping[str, Any] | None = None) -> LlmReply:
        """Send one prompt; `schema` requests structured JSON output."""


class HttpChatClient(LlmClient):
    """Chat-completions client over plain HTTP.

    Configured from arguments or the LLM_BASE_URL / LLM_MODEL /
    LLM_API_KEY environment variables. A missing key fails at
    construction time, before any network traffic.
    """

    def __init__(
        self,
        base_url: str | None = None,
        model: str | None = None,
        api_key: str | None = None,
        *,
        max_in_flight: int = 4,
        retries: int = 3,
        timeout: float = 60.0,
        sleep: Callable[[float], None] = time.sleep,
        session: requests.Session | None = None,
    ) -> None:
        base_url = base_url or os.environ.get("LLM_BASE_URL")
        model = model or os.environ.get("LLM_MODEL")
        api_key = api_key or os.environ.get("LLM_API_KEY")
        if not base_url:
            raise LlmConfigError("LLM_BASE_URL is not set")
        if not model:
            raise LlmConfigError("LLM_MODEL is not set")
        if not api_key:
            raise LlmConfigError("LLM_API_KEY is not set; refusing to start a live run")
        if max_in_flight < 1:
            raise LlmConfigError(f"max_in_flight must be >= 1, got {max_in_flight}")
        self._url = base_url.rstrip("/") + "/chat/completions"
        self._model = model
        self._api_key = api_key
        self._retries = retries
        self._timeout = timeout
        self._sleep = sleep
        self._session = session or requests.Session()
        self._gate = threading.Semaphore(max_in_flight)

    def complete(self, prompt: str, *, schema: Mapping[str, Any] | None = None) -> LlmReply:
        body: dict[str, Any] = {
            "model": self._model,
            "messages": [{"role": "user", "content": prompt}],
        }
        if schema is not None:
            body["response_format"] = {
                "type": "json_schema",
                "json_schema": {"name": schema.get("title", "response"), "schema": dict(schema)},
            }
        headers = {"Authorization": f"Bearer {self._api_key}"}
        last_error: Exception | None = None
        with self._gate:
            # One initial attempt plus `retries` retries, backing off 1s, 2s, 4s.
            for attempt in range(self._retries + 1):
                if attempt > 0:
                    self._sleep(float(2 ** (attempt - 1)))
                try:
                    response = self._session.post(
                        self._url, json=body, headers=headers, timeout=self._timeout
                    )
                    response.raise_for_status()
                    payload = response.json()
                    choice = payload["choices"][0]["message"]["content"]
                    usage = payload.get("usage", {})
                    return LlmReply(
                        text=str(choice),
                        prompt_tokens=usage.get("prompt_tokens"),
                        completion_tokens=usage.get("completion_tokens"),
                    )
                except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
                    last_error = exc
        raise LlmTransportError(f"LLM request failed after {self._retries + 1} attempts: {last_error}")


def prompt_fingerprint(prompt: str) -> str:
    """Stable 16-hex-digit key for a prompt, used by scripted transcripts."""
    return format(fnv1a64(prompt), "016x")


class ScriptedTranscript(LlmClient):
    """Replays canned responses keyed by prompt fingerprint.

    The transcript file is a JSON object mapping fingerprints (as
    produced by `prompt_fingerprint`) to raw response strings.
    """

    def __init__(self, responses: Mapping[str, str]) -> None:
        self._responses = dict(responses)

    @classmethod
    def from_file(cls, path: str) -> "ScriptedTranscript":
        with open(path, encoding="utf-8") as handle:
            return cls(json.load(handle))

    def complete(self, prompt: str, *, schema: Mapping[str, Any] | None = None) -> LlmReply:
        key = prompt_fingerprint(prompt)
        if key not in self._responses:
            raise ScriptMissError(f"no scripted response for prompt fingerprint {key}")
        return LlmReply(text=self._responses[key])


_VERDICT_WEIGHTS = (("Valid", 40.0), ("Invalid", 35.0), ("Unverifiable", 25.0))
_PROBE_WEIGHTS = (("Agree", 40.0), ("Disagree", 30.0), ("Neutral", 30.0))
_RELEVANCE_WEIGHTS = (("Relevant", 75.0), ("Irrelevant", 25.0))
_SUPPORT_WEIGHTS = (
    ("Fully Supported", 35.0),
    ("Partially Supported", 25.0),
    ("Contradictory", 20.0),
    ("No Support", 20.0),
)

_PASSAGE_ID = re.compile(r"^\[(S\d+)\]", re.MULTILINE)
_PAPER_ID_LIST = re.compile(r"from papers: ([^)]*)\)")


class MockLlm(LlmClient):
    """Seeded offline double that answers every baseline prompt shape.

    Replies are a pure function of (seed, prompt text), drawn through
    the portable stream, so full runs are byte-reproducible. Dispatch
    is on the schema title each call site already supplies.
    """

    def __init__(self, seed: int) -> None:
        self._seed = seed

    def complete(self, prompt: str, *, schema: Mapping[str, Any] | None = None) -> LlmReply:
        title = (schema or {}).get("title")
        if title is None:
            raise LlmError("mock client requires a schema with a title")
        stream = DeterministicStream(self._seed, "mock-llm", prompt)
        if title in ("cot_verdict", "selfrag_verdict", "flare_final_verdict"):
            payload = self._verdict_payload(stream)
        elif title == "selfrag_critiques":
            payload = self._critiques_payload(stream, prompt)
        elif title == "flare_initial_verdict":
            payload = self._flare_initial_payload(stream, prompt)
        elif title == "ciber_probe_verdict":
            payload = self._probe_payload(stream)
        else:
            raise LlmError(f"mock client has no generator for schema title {title!r}")
        return LlmReply(text=json.dumps(payload, sort_keys=True))

    @staticmethod
    def _verdict_payload(stream: DeterministicStream) -> dict[str, Any]:
        verdict = stream.weighted_choice(_VERDICT_WEIGHTS)
        return {
            "verdict": verdict,
            "justification": f"mock reasoning toward {verdict}",
            "confidence": 50 + int(stream.random() * 50),
        }

    @staticmethod
    def _critiques_payload(stream: DeterministicStream, prompt: str) -> dict[str, Any]:
        critiques = []
        for passage_id in _PASSAGE_ID.findall(prompt):
            critiques.append(
                {
                    "passage_id": passage_id,
                    "relevance": stream.weighted_choice(_RELEVANCE_WEIGHTS),
                    "support": stream.weighted_choice(_SUPPORT_WEIGHTS),
                    "note": f"mock critique of {passage_id}",
                }
            )
        return {"critiques": critiques}

    @staticmethod
    def _flare_initial_payload(stream: DeterministicStream, prompt: str) -> dict[str, Any]:
        payload = MockLlm._verdict_payload(stream)
        match = _PAPER_ID_LIST.search(prompt)
        ids = [part.strip() for part in match.group(1).split(",")] if match else []
        ids = [part for part in ids if part]
        roll = stream.random()
        if roll < 0.35 and ids:
            request = stream.choice(ids)
        elif roll < 0.40:
            request = "P999"  # deliberately bogus: exercises the fallback path
        else:
            request = "None"
        payload["request_full_review"] = request
        return payload

    @staticmethod
    def _probe_payload(stream: DeterministicStream) -> dict[str, Any]:
        verdict = stream.weighted_choice(_PROBE_WEIGHTS)
        return {
            "verdict": verdict,
            "justification": f"mock probe answer {verdict}",
            "confidence": 40 + int(stream.random() * 60),
        }
