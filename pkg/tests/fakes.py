"""A scripted chat-completion server for building replay fixtures.

`FakeLLM` is an httpx transport handler: it recognises which pipeline stage
a request belongs to from its system prompt and answers from a script.
Recording through it and then replaying the transcript exercises the real
record/replay path end to end.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Callable

import httpx

from rewardspec.gateway import Gateway, Transcript
from rewardspec.prompts import default_templates

T = default_templates()
_RUBRIC_RE = re.compile(r"\[Evaluation RUBRIC\]\n\n(.*)\n\nOutput exactly one token", re.S)
_ANSWER_RE = re.compile(r"\[AI Assistant Response\]\n\n(.*)\n\n\[Evaluation RUBRIC\]", re.S)
_GLOBAL_ANSWER_RE = re.compile(r"\[Response\]\n\n(.*)\n\n\[Your judgement\]", re.S)


def reply_for(value) -> Callable:
    """Constant reply, or a per-attempt sequence (last element repeats)."""
    if callable(value):
        return value
    if isinstance(value, list):
        seq = value
        return lambda ctx: seq[min(ctx["attempt"], len(seq) - 1)]
    return lambda ctx: value


@dataclass
class FakeLLM:
    label: object = '{"task_type": "general", "reason": "plain request"}'
    rubric: object = '[{"criterion": "answers the question", "weight": 3}]'
    extraction: object = "[null]"
    code: object = "[null]"
    judge: Callable[[str, str], str] = lambda criterion, answer: "yes"
    global_score: Callable[[str], str] = lambda answer: "Reasonable. [[8]]"
    calls: list = field(default_factory=list)
    attempts: dict = field(default_factory=dict)

    def _reply(self, payload: dict) -> str:
        messages = payload["messages"]
        system = messages[0]["content"] if messages[0]["role"] == "system" else ""
        user = messages[-1]["content"]
        key = (system[:80], user)
        attempt = self.attempts.get(key, 0)
        self.attempts[key] = attempt + 1
        ctx = {"user": user, "attempt": attempt, "payload": payload}
        if system == T.task_label:
            stage, text = "label", reply_for(self.label)(ctx)
        elif "Current task type:" in system:
            stage, text = "rubric", reply_for(self.rubric)(ctx)
        elif system == T.constraint_extraction_system:
            stage, text = "extraction", reply_for(self.extraction)(ctx)
        elif system == T.constraint_to_code_system:
            stage, text = "code", reply_for(self.code)(ctx)
        elif system == T.judge_rubric_system:
            stage = "judge"
            text = self.judge(_RUBRIC_RE.search(user).group(1), _ANSWER_RE.search(user).group(1))
        elif system == T.global_system:
            stage, text = "global", self.global_score(_GLOBAL_ANSWER_RE.search(user).group(1))
        else:
            raise AssertionError(f"unrecognised request: {system[:60]!r}")
        self.calls.append((stage, payload))
        return text

    def __call__(self, request: httpx.Request) -> httpx.Response:
        payload = json.loads(request.content)
        text = self._reply(payload)
        return httpx.Response(200, json={"choices": [{"message": {"role": "assistant", "content": text}}]})


def recording_gateway(fake: FakeLLM, transcript: Transcript | None = None, **kw) -> Gateway:
    client = httpx.Client(transport=httpx.MockTransport(fake))
    return Gateway("record", base_url="http://fake.local/v1", transcript=transcript if transcript is not None else Transcript(),
                   client=client, sleep=lambda s: None, **kw)


def live_gateway(handler, **kw) -> Gateway:
    client = httpx.Client(transport=httpx.MockTransport(handler))
    kw.setdefault("sleep", lambda s: None)
    return Gateway("live", base_url="http://fake.local/v1", client=client, **kw)


def replay_gateway(transcript: Transcript) -> Gateway:
    return Gateway("replay", transcript=transcript)


def fixed_clock() -> str:
    return "2026-01-01T00:00:00+00:00"
