"""Uniform client for the three model capabilities the pipeline consumes.

One wire contract (JSON over HTTP), two backings: a remote server and a
fully deterministic built-in mock. Calls are cached by (task, request
body) in memory and, when configured, on disk, so reruns over large
corpora never repeat a paid call.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import requests

logger = logging.getLogger(__name__)

QG_TEMPLATE = "What is mentioned in connection with {answer}?"
QG_BOOLEAN_TEMPLATE = "Is it true that {clause}?"

_QG_SLOT_RE = re.compile(r"What is mentioned in connection with (.+?)\?")
_QG_BOOLEAN_SLOT_RE = re.compile(r"Is it true that (.+?)\?")


class GatewayError(RuntimeError):
    """Terminal failure of one gateway call; the affected record is skipped."""


@dataclass(frozen=True)
class GatewayConfig:
    endpoint: str = "mock"
    timeout: float = 30.0
    max_retries: int = 3
    backoff_base: float = 0.5
    cache_dir: str | None = None
    max_in_flight: int = 4

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("gateway.timeout must be > 0")
        if self.backoff_base <= 0:
            raise ValueError("gateway.backoff_base must be > 0")
        if self.max_retries < 0:
            raise ValueError("gateway.max_retries must be >= 0")
        if self.max_in_flight < 1:
            raise ValueError("gateway.max_in_flight must be >= 1")


@dataclass(frozen=True)
class QaOutcome:
    answerable: bool
    answer: str

    def __post_init__(self) -> None:
        if not self.answerable and self.answer:
            raise ValueError("unanswerable outcome must carry an empty answer")


def _canonical_body(body: dict) -> str:
    return json.dumps(body, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def _normalize_question(q: str) -> str:
    return " ".join(q.lower().split())


class ModelGateway:
    """Cached front for the four model calls; subclasses provide the transport."""

    boolean_capable = False

    def __init__(self, config: GatewayConfig) -> None:
        self.config = config
        self._memory: dict[str, str] = {}
        self._lock = threading.Lock()
        self._cache_dir = Path(config.cache_dir) if config.cache_dir else None
        if self._cache_dir:
            self._cache_dir.mkdir(parents=True, exist_ok=True)

    # -- public ops ---------------------------------------------------------

    def generate_question(self, context: str, answer: str) -> str:
        if not context:
            raise ValueError("context must be non-empty")
        if not answer:
            raise ValueError("answer must be non-empty")
        resp = self._call("qg", {"context": context, "answer": answer})
        question = resp.get("question")
        if not isinstance(question, str) or not question.endswith("?"):
            raise GatewayError(f"qg returned an invalid question: {question!r}")
        return question

    def generate_boolean_question(self, context: str) -> str:
        if not context:
            raise ValueError("context must be non-empty")
        resp = self._call("qg_boolean", {"context": context})
        question = resp.get("question")
        if not isinstance(question, str) or not question.endswith("?"):
            raise GatewayError(f"qg_boolean returned an invalid question: {question!r}")
        return question

    def answer_question(self, context: str, question: str) -> QaOutcome:
        if not context:
            raise ValueError("context must be non-empty")
        if not question:
            raise ValueError("question must be non-empty")
        resp = self._call("qa", {"context": context, "question": question})
        answerable = resp.get("answerable")
        answer = resp.get("answer")
        if not isinstance(answerable, bool) or not isinstance(answer, str):
            raise GatewayError(f"qa returned an invalid outcome: {resp!r}")
        if not answerable or not answer.strip():
            return QaOutcome(answerable=False, answer="")
        return QaOutcome(answerable=True, answer=answer)

    def paraphrase_question(self, question: str, k: int) -> list[str]:
        if not question:
            raise ValueError("question must be non-empty")
        if k < 1:
            raise ValueError("k must be >= 1")
        resp = self._call("paraphrase", {"question": question, "k": k})
        raw = resp.get("questions")
        if not isinstance(raw, list) or not all(isinstance(q, str) for q in raw):
            raise GatewayError(f"paraphrase returned an invalid list: {raw!r}")
        original = _normalize_question(question)
        seen = {original}
        out: list[str] = []
        for cand in raw:
            if not cand.endswith("?"):
                continue  # not a question; drop rather than fail the record
            norm = _normalize_question(cand)
            if norm in seen:
                continue
            seen.add(norm)
            out.append(cand)
            if len(out) == k:
                break
        return out

    def health(self) -> dict:
        return {"status": "ok"}

    # -- caching ------------------------------------------------------------

    def _call(self, task: str, body: dict) -> dict:
        key = hashlib.sha256(f"{task}\n{_canonical_body(body)}".encode("utf-8")).hexdigest()
        with self._lock:
            cached = self._memory.get(key)
        if cached is None and self._cache_dir:
            path = self._cache_dir / f"{key}.json"
            if path.exists():
                cached = path.read_text(encoding="utf-8")
        if cached is not None:
            return json.loads(cached)
        raw = self._fetch(task, body)
        with self._lock:
            self._memory[key] = raw
        if self._cache_dir:
            path = self._cache_dir / f"{key}.json"
            tmp = path.with_suffix(".tmp")
            tmp.write_text(raw, encoding="utf-8")
            tmp.replace(path)
        return json.loads(raw)

    def _fetch(self, task: str, body: dict) -> str:
        raise NotImplementedError


class MockGateway(ModelGateway):
    """Deterministic offline gateway; a pure function of its arguments.

    Question generation embeds the answer verbatim in a fixed template;
    answering inverts the templates by substring search against the context;
    paraphrasing applies up to five fixed rewrite rules.
    """

    boolean_capable = True

    def __init__(self, config: GatewayConfig | None = None) -> None:
        super().__init__(config or GatewayConfig(endpoint="mock", cache_dir=None))

    def _fetch(self, task: str, body: dict) -> str:
        if task == "qg":
            out = {"question": QG_TEMPLATE.format(answer=body["answer"])}
        elif task == "qg_boolean":
            out = {"question": QG_BOOLEAN_TEMPLATE.format(clause=_boolean_clause(body["context"]))}
        elif task == "qa":
            outcome = _mock_answer(body["context"], body["question"])
            out = {"answerable": outcome.answerable, "answer": outcome.answer}
        elif task == "paraphrase":
            out = {"questions": _mock_rewrites(body["question"], body["k"])}
        else:
            raise GatewayError(f"unknown task {task!r}")
        return json.dumps(out, ensure_ascii=False)


def _boolean_clause(context: str) -> str:
    clause = context.strip().rstrip(".!?").strip()
    return clause[:1].lower() + clause[1:] if clause else clause


def _mock_answer(context: str, question: str) -> QaOutcome:
    match = _QG_SLOT_RE.search(question)
    if match:
        slot = match.group(1)
        if slot.lower() in context.lower():
            return QaOutcome(answerable=True, answer=slot)
        return QaOutcome(answerable=False, answer="")
    match = _QG_BOOLEAN_SLOT_RE.search(question)
    if match:
        clause = match.group(1)
        if clause.lower() in context.lower():
            return QaOutcome(answerable=True, answer="yes")
        return QaOutcome(answerable=False, answer="")
    return QaOutcome(answerable=False, answer="")


_STOPWORDS = frozenset({
    "what", "which", "who", "whom", "whose", "where", "when", "why", "how",
    "is", "are", "am", "was", "were", "be", "been", "do", "does", "did",
    "a", "an", "the", "of", "to", "in", "on", "at", "it", "that", "this",
    "many", "much", "can", "could", "tell", "me", "you", "say", "exactly",
    "true",
})


def _first_content_word_upper(question: str) -> str:
    words = question.split(" ")
    target = next(
        (i for i, w in enumerate(words) if w.strip("?,.").lower() not in _STOPWORDS and w.strip("?,.")),
        0,
    )
    words[target] = words[target].upper()
    return " ".join(words)


def _mock_rewrites(question: str, k: int) -> list[str]:
    rules = [
        lambda q: "Tell me, " + q,
        lambda q: "Which thing" + q[4:] if q.startswith("What") else "Exactly " + q,
        lambda q: q[:-1] + " exactly?" if q.endswith("?") else q + " exactly?",
        lambda q: "Can you say " + q,
        _first_content_word_upper,
    ]
    return [rule(question) for rule in rules[:k]]


class HttpGateway(ModelGateway):
    """JSON-over-HTTP client with bounded concurrency, retries and backoff.

    Non-200 responses and malformed JSON are retried with exponential
    backoff (backoff_base * 2^attempt); 4xx responses are terminal for the
    record. An optional static bearer token is read from
    AQUALLM_GATEWAY_TOKEN.
    """

    boolean_capable = False

    def __init__(self, config: GatewayConfig) -> None:
        super().__init__(config)
        self._endpoint = config.endpoint.rstrip("/")
        self._session = requests.Session()
        token = os.environ.get("AQUALLM_GATEWAY_TOKEN")
        if token:
            self._session.headers["Authorization"] = f"Bearer {token}"
        self._in_flight = threading.BoundedSemaphore(config.max_in_flight)

    def health(self) -> dict:
        with self._in_flight:
            resp = self._session.get(f"{self._endpoint}/v1/health", timeout=self.config.timeout)
        if resp.status_code != 200:
            raise GatewayError(f"health check failed: HTTP {resp.status_code}")
        return resp.json()

    def _fetch(self, task: str, body: dict) -> str:
        url = f"{self._endpoint}/v1/{task}"
        attempts = self.config.max_retries + 1
        last_error = "no attempt made"
        for attempt in range(attempts):
            if attempt:
                time.sleep(self.config.backoff_base * (2 ** (attempt - 1)))
            try:
                with self._in_flight:
                    resp = self._session.post(url, json=body, timeout=self.config.timeout)
            except requests.RequestException as exc:
                last_error = f"transport error: {exc}"
                logger.warning("gateway %s attempt %d/%d failed: %s", task, attempt + 1, attempts, last_error)
                continue
            if 400 <= resp.status_code < 500:
                raise GatewayError(f"{task} rejected with HTTP {resp.status_code}: {resp.text[:200]}")
            if resp.status_code != 200:
                last_error = f"HTTP {resp.status_code}"
                logger.warning("gateway %s attempt %d/%d failed: %s", task, attempt + 1, attempts, last_error)
                continue
            try:
                json.loads(resp.text)
            except json.JSONDecodeError:
                last_error = "malformed JSON body"
                logger.warning("gateway %s attempt %d/%d failed: %s", task, attempt + 1, attempts, last_error)
                continue
            return resp.text
        raise GatewayError(f"{task} failed after {attempts} attempts: {last_error}")


def create_gateway(config: GatewayConfig) -> ModelGateway:
    if config.endpoint == "mock":
        return MockGateway(config)
    return HttpGateway(config)
