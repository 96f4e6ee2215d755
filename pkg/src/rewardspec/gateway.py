"""Chat-completion gateway with record/replay, plus the two judge calls.

In replay mode every call is answered from a transcript keyed by a request
fingerprint, so a recorded pipeline re-runs bit-for-bit without a network.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import re
import threading
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable

import httpx

from .model import RewardSpecError, RubricCriterion, TernaryLabel
from .prompts import PromptTemplateSet, default_templates, fill

logger = logging.getLogger(__name__)

RETRYABLE_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}


class GatewayError(RewardSpecError):
    pass


class TransportError(GatewayError):
    pass


class GatewayTimeout(GatewayError, TimeoutError):
    pass


class ReplayMiss(GatewayError, KeyError):
    pass


class ParseFailure(RewardSpecError, ValueError):
    pass


class GlobalScoreUnavailable(RewardSpecError):
    pass


@dataclass(frozen=True)
class SamplingPreset:
    temperature: float | None = None
    top_p: float | None = None
    top_k: int | None = None
    presence_penalty: float | None = None

    def to_json(self) -> dict:
        return {k: v for k, v in (("temperature", self.temperature), ("top_p", self.top_p),
                                  ("top_k", self.top_k), ("presence_penalty", self.presence_penalty))
                if v is not None}


# Inference presets per model family and mode.
PRESETS = {
    "qwen3-thinking": SamplingPreset(0.6, 0.95, 20),
    "qwen3-non-thinking": SamplingPreset(0.7, 0.95, 20),
    "qwen3.5-thinking": SamplingPreset(1.0, 0.95, 20, 1.5),
    "qwen3.5-non-thinking": SamplingPreset(0.8, 0.8, 20, 1.5),
    "gpt-5-default": SamplingPreset(1.0),
}


@dataclass(frozen=True)
class Message:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ("system", "user"):
            raise ValueError(f"unsupported role {self.role!r}")


@dataclass(frozen=True)
class ChatRequest:
    """One chat call. `attempt` distinguishes retries in the transcript and is not sent."""

    model: str
    messages: tuple[Message, ...]
    sampling: SamplingPreset = SamplingPreset()
    thinking: bool = False
    max_tokens: int | None = None
    attempt: int = 0

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple(self.messages))
        if not self.messages:
            raise ValueError("a chat request needs at least one message")

    def to_json(self) -> dict:
        doc = {
            "model": self.model,
            "messages": [{"role": m.role, "content": m.content} for m in self.messages],
            "sampling": self.sampling.to_json(),
            "thinking": self.thinking,
            "max_tokens": self.max_tokens,
        }
        if self.attempt:
            doc["attempt"] = self.attempt
        return doc

    def fingerprint(self) -> str:
        canonical = json.dumps(self.to_json(), sort_keys=True, ensure_ascii=False, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def wire_payload(self) -> dict:
        payload = {
            "model": self.model,
            "messages": [{"role": m.role, "content": m.content} for m in self.messages],
            **self.sampling.to_json(),
            "chat_template_kwargs": {"enable_thinking": self.thinking},
        }
        if self.max_tokens is not None:
            payload["max_tokens"] = self.max_tokens
        return payload

    def with_attempt(self, attempt: int) -> "ChatRequest":
        return replace(self, attempt=attempt)


def chat_request(model: str, system: str | None, user: str, sampling: SamplingPreset = SamplingPreset(),
                 thinking: bool = False, max_tokens: int | None = None) -> ChatRequest:
    messages = []
    if system is not None:
        messages.append(Message("system", system))
    messages.append(Message("user", user))
    return ChatRequest(model, tuple(messages), sampling, thinking, max_tokens)


class Transcript:
    """Append-only log of request/response records, optionally backed by a JSONL file."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._records: dict[str, dict] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            with self.path.open(encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        rec = json.loads(line)
                        self._records.setdefault(rec["fingerprint"], rec)

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, fingerprint: str) -> bool:
        return fingerprint in self._records

    def get(self, fingerprint: str) -> str | None:
        rec = self._records.get(fingerprint)
        return None if rec is None else rec["response"]

    def records(self) -> list[dict]:
        with self._lock:
            return list(self._records.values())

    def append(self, request: ChatRequest, response: str) -> None:
        record = {
            "fingerprint": request.fingerprint(),
            "request": request.to_json(),
            "response": response,
            "ts": datetime.now(timezone.utc).isoformat(),
        }
        self._add_record(record)

    def _add_record(self, record: dict) -> None:
        with self._lock:
            self._records.setdefault(record["fingerprint"], record)
            if self.path is not None:
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record, ensure_ascii=False) + "\n")

    def merge(self, other: "Transcript") -> None:
        """Add the other transcript's records; existing fingerprints win."""
        for rec in other.records():
            if rec["fingerprint"] not in self._records:
                self._add_record(rec)

    def export(self, path: str | Path) -> int:
        """Write every record as JSONL; returns the number of lines written."""
        records = self.records()
        with Path(path).open("w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
        return len(records)


class GatewayMode(str, enum.Enum):
    LIVE = "live"
    RECORD = "record"
    REPLAY = "replay"


class Gateway:
    """Thread-safe chat-completion client.

    `retry_limit` counts retries after the first attempt. Timeouts are not
    retried; they end the call with GatewayTimeout.
    """

    def __init__(self, mode: GatewayMode | str = GatewayMode.REPLAY, *, base_url: str | None = None,
                 api_key: str | None = None, transcript: Transcript | None = None,
                 timeout: float = 120.0, retry_limit: int = 3, backoff_base: float = 1.0,
                 max_inflight: int = 32, client: httpx.Client | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.mode = GatewayMode(mode)
        if self.mode is not GatewayMode.LIVE and transcript is None:
            transcript = Transcript()
        if self.mode is not GatewayMode.REPLAY and not base_url:
            raise ValueError(f"{self.mode.value} mode needs a base_url")
        self.base_url = (base_url or "").rstrip("/")
        self.api_key = api_key
        self.transcript = transcript
        self.timeout = timeout
        self.retry_limit = retry_limit
        self.backoff_base = backoff_base
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max_inflight)
        self._client = client
        self._client_lock = threading.Lock()
        self.network_calls = 0
        self.last_attempts = 0

    @property
    def client(self) -> httpx.Client:
        with self._client_lock:
            if self._client is None:
                self._client = httpx.Client(timeout=self.timeout)
            return self._client

    def chat(self, req: ChatRequest) -> str:
        if self.mode is GatewayMode.REPLAY:
            text = self.transcript.get(req.fingerprint())
            if text is None:
                raise ReplayMiss(f"no recorded response for request {req.fingerprint()[:16]}")
            return text
        with self._slots:
            text = self._post(req)
        if self.mode is GatewayMode.RECORD:
            self.transcript.append(req, text)
        return text

    generate = chat

    def _post(self, req: ChatRequest) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        url = f"{self.base_url}/chat/completions"
        last: Exception | None = None
        for attempt in range(self.retry_limit + 1):
            self.last_attempts = attempt + 1
            if attempt:
                self._sleep(self.backoff_base * 2 ** (attempt - 1))
            try:
                self.network_calls += 1
                resp = self.client.post(url, json=req.wire_payload(), headers=headers, timeout=self.timeout)
            except httpx.TimeoutException as exc:
                raise GatewayTimeout(f"request exceeded {self.timeout}s deadline") from exc
            except httpx.TransportError as exc:
                last = exc
                logger.warning("transport failure (attempt %d): %s", attempt + 1, exc)
                continue
            if resp.status_code in RETRYABLE_STATUS:
                last = TransportError(f"HTTP {resp.status_code}")
                logger.warning("retryable status %d (attempt %d)", resp.status_code, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise TransportError(f"malformed completion body: {exc}") from exc
        raise TransportError(f"gave up after {self.retry_limit + 1} attempts: {last}")


# --------------------------------------------------------------------------
# judge calls


@dataclass(frozen=True)
class JudgeConfig:
    judge_model: str = "judge"
    scorer_model: str = "judge"
    thinking_preset: SamplingPreset = PRESETS["qwen3-thinking"]
    non_thinking_preset: SamplingPreset = PRESETS["qwen3-non-thinking"]
    weight_conditional_thinking: bool = True
    judge_retry: int = 2
    max_tokens: int | None = None
    templates: PromptTemplateSet = field(default_factory=default_templates)


_THINK = re.compile(r"<think>.*?</think>", re.S)


def strip_thinking(text: str) -> str:
    text = _THINK.sub("", text)
    # an unterminated block means the answer never arrived
    return "" if "<think>" in text else text


def parse_ternary(text: str) -> TernaryLabel:
    norm = text.strip().lower().strip(" \t\r\n.,;:!?\"'`*()[]{}<>")
    try:
        return TernaryLabel(norm)
    except ValueError:
        raise ParseFailure(f"not a ternary label: {text[:40]!r}") from None


def judge_thinking(weight: int, cfg: JudgeConfig) -> bool:
    return not (cfg.weight_conditional_thinking and weight in (1, 2))


def rubric_judge_request(question: str, answer: str, criterion: RubricCriterion, cfg: JudgeConfig,
                         attempt: int = 0) -> ChatRequest:
    thinking = judge_thinking(criterion.weight, cfg)
    user = fill(cfg.templates.judge_rubric_user,
                {"question": question, "answer": answer, "rubric": criterion.criterion})
    req = chat_request(cfg.judge_model, cfg.templates.judge_rubric_system, user,
                       cfg.thinking_preset if thinking else cfg.non_thinking_preset, thinking, cfg.max_tokens)
    return req.with_attempt(attempt)


def judge_rubric_criterion(gateway: Gateway, question: str, answer: str, criterion: RubricCriterion,
                           cfg: JudgeConfig = JudgeConfig(), flags: list | None = None) -> TernaryLabel:
    """Ternary verdict for one criterion; unparseable replies fall back to `no` with a flag."""
    for attempt in range(cfg.judge_retry + 1):
        reply = gateway.chat(rubric_judge_request(question, answer, criterion, cfg, attempt))
        try:
            return parse_ternary(strip_thinking(reply))
        except ParseFailure:
            logger.info("unparseable judge reply (attempt %d): %r", attempt + 1, reply[:60])
    if flags is not None:
        flags.append("judge_parse_failure")
    return TernaryLabel.NO


_BRACKETED = re.compile(r"\[\[\s*(\d+(?:\.\d+)?)\s*\]\]")


def parse_global_score(text: str) -> float:
    matches = _BRACKETED.findall(strip_thinking(text))
    if not matches:
        raise ParseFailure("no [[N]] rating found")
    value = float(matches[-1])
    if not 0.0 <= value <= 10.0:
        raise ParseFailure(f"rating {value} outside [0, 10]")
    return value


def global_score_request(question: str, answer: str, cfg: JudgeConfig, attempt: int = 0) -> ChatRequest:
    user = fill(cfg.templates.global_user, {"question": question, "answer": answer})
    req = chat_request(cfg.scorer_model, cfg.templates.global_system, user, cfg.thinking_preset, True, cfg.max_tokens)
    return req.with_attempt(attempt)


def global_score(gateway: Gateway, question: str, answer: str, cfg: JudgeConfig = JudgeConfig()) -> float:
    for attempt in range(cfg.judge_retry + 1):
        reply = gateway.chat(global_score_request(question, answer, cfg, attempt))
        try:
            return parse_global_score(reply)
        except ParseFailure:
            logger.info("unparseable global score (attempt %d): %r", attempt + 1, reply[-60:])
    raise GlobalScoreUnavailable(f"no parseable rating after {cfg.judge_retry + 1} attempts")


def load_transcripts(paths: Iterable[str | Path]) -> Transcript:
    merged = Transcript()
    for p in paths:
        merged.merge(Transcript(p))
    return merged
