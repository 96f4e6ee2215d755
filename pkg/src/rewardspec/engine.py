"""Deterministic execution of compiled checkers.

`evaluate_native` is the total, pure semantics of a native checker.
`run_checker` wraps it (or an external executor) in the timeout / retry /
conservative-failure harness and never raises.
"""

from __future__ import annotations

import concurrent.futures
import json
import logging
import re
import subprocess
import sys
import time
from dataclasses import dataclass
from typing import Callable, Protocol

from .model import (
    CheckerOutcome,
    CheckerStatus,
    CompiledChecker,
    ExternalBody,
    NativeBody,
    OutcomeStatus,
    RewardSpecification,
)
from .textstats import (
    count_words,
    detect_language,
    keyword_occurrences,
    normalize_newlines,
    split_paragraphs,
    split_sentences,
)

logger = logging.getLogger(__name__)

_NUMBERED = re.compile(r"(?m)^\s*\d+\.\s+")
_DASH = re.compile(r"(?m)^\s*-\s+")
_STAR = re.compile(r"(?m)^\s*\*\s+")
_ANY_BULLET = re.compile(r"(?m)^\s*[-*]\s+")
_HRULE = re.compile(r"(?m)^\s*(?:-{3,}|_{3,}|\*{3,})\s*$")
_HEADING = re.compile(r"(?m)^\s{0,3}#{1,6}\s")
_BOLD = re.compile(r"\*\*[^*\n]+?\*\*")


class Executor(Protocol):
    """Plug-in that runs an external checker source. Returns the pass bit."""

    def __call__(self, source: str, instruction: str, response: str) -> bool: ...


class SubprocessExecutor:
    """Runs generated `check_following` source in a fresh isolated interpreter.

    Process isolation only; this is not a sandbox. Enable external checkers
    only for code you are prepared to run.
    """

    _DRIVER = "\nimport json as _j, sys as _s\n_d = _j.load(_s.stdin)\nprint(_j.dumps(bool(check_following(_d['i'], _d['r']))))\n"

    def __init__(self, python: str = sys.executable, timeout_s: float = 10.0):
        self.python = python
        self.timeout_s = timeout_s

    def __call__(self, source: str, instruction: str, response: str) -> bool:
        proc = subprocess.run([self.python, "-I", "-c", source + self._DRIVER],
                              input=json.dumps({"i": instruction, "r": response}),
                              capture_output=True, text=True, timeout=self.timeout_s)
        if proc.returncode != 0:
            raise RuntimeError(proc.stderr.strip().splitlines()[-1] if proc.stderr.strip() else "checker crashed")
        return bool(json.loads(proc.stdout.strip().splitlines()[-1]))


def compare(value: int, params) -> bool:
    op = params["op"]
    if op == ">=":
        return value >= params["n"]
    if op == "<=":
        return value <= params["n"]
    if op == "==":
        return value == params["n"]
    if op == "between":
        return params["lo"] <= value <= params["hi"]
    raise ValueError(f"unknown comparison operator {op!r}")


def _code_block(response: str, language: str | None) -> bool:
    tag = f"(?:{re.escape(language)})?" if language else r"(?:[\w+#.-]+)?"
    return re.search(rf"```{tag}\n[\s\S]+?\n```", response, re.IGNORECASE) is not None


def _list_format(params, response: str) -> bool:
    marker = params["marker"]
    if marker == "numbered":
        return _NUMBERED.search(response) is not None
    if marker == "dash":
        return _DASH.search(response) is not None
    if marker == "star":
        return _STAR.search(response) is not None
    if marker == "bullet":
        return _ANY_BULLET.search(response) is not None
    if marker == "separator":
        return params["separator"] in response
    if marker == "newline":
        return sum(1 for line in response.split("\n") if line.strip()) >= 2
    raise ValueError(f"unknown list marker {marker!r}")


def _output_format(params, response: str) -> bool:
    fmt = params["format"]
    if fmt == "code_block":
        return _code_block(response, params.get("language"))
    if fmt == "plain_text":
        return "```" not in response and "**" not in response and _HEADING.search(response) is None
    if fmt == "no_bullets":
        return _ANY_BULLET.search(response) is None
    if fmt == "no_horizontal_rules":
        return _HRULE.search(response) is None
    if fmt == "bold_required":
        return _BOLD.search(response) is not None
    raise ValueError(f"unknown output format {fmt!r}")


def evaluate_native(body: NativeBody, instruction: str, response: str) -> bool:
    """Pass bit of a native checker on `response`.

    `instruction` is accepted for signature parity with generated checkers;
    no native kind reads it.
    """
    p = body.params
    kind = body.kind
    response = normalize_newlines(response)
    if kind == "word_count":
        return compare(count_words(response), p)
    if kind == "paragraph_count":
        if p.get("no_horizontal_rules") and _HRULE.search(response):
            return False
        return compare(len(split_paragraphs(response)), p)
    if kind == "sentence_count":
        return compare(len(split_sentences(response)), p)
    if kind == "keyword_count":
        return compare(keyword_occurrences(response, p["keyword"]), p)
    if kind == "keyword_exclude":
        return keyword_occurrences(response, p["keyword"]) == 0
    if kind == "response_language":
        return detect_language(response, p["language"])
    if kind == "start_text":
        return response.strip().startswith(p["anchor"].strip())
    if kind == "end_text":
        return response.rstrip().endswith(p["anchor"].strip())
    if kind == "list_format":
        return _list_format(p, response)
    if kind == "output_format":
        return _output_format(p, response)
    if kind == "punct_exclude":
        return not any(ch in response for ch in p["chars"])
    if kind == "punct_include":
        return all(ch in response for ch in p["chars"])
    raise ValueError(f"unknown native checker kind {kind!r}")


@dataclass(frozen=True)
class CheckerLimits:
    timeout_ms: float = 2000.0
    max_attempts: int = 3


_POOL = concurrent.futures.ThreadPoolExecutor(max_workers=8, thread_name_prefix="checker")


def _attempt(checker: CompiledChecker, instruction: str, response: str, limits: CheckerLimits,
             executor: Executor | None, evaluate: Callable) -> bool:
    budget = limits.timeout_ms / 1000.0
    if isinstance(checker.body, NativeBody):
        start = time.perf_counter()
        passed = evaluate(checker.body, instruction, response)
        if time.perf_counter() - start > budget:
            raise TimeoutError(f"native checker exceeded {limits.timeout_ms} ms")
        return bool(passed)
    # external sources run on a worker thread; a timed-out worker is abandoned, not killed
    future = _POOL.submit(executor, checker.body.source, instruction, response)
    try:
        return bool(future.result(timeout=budget))
    except concurrent.futures.TimeoutError:
        raise TimeoutError(f"external checker exceeded {limits.timeout_ms} ms") from None


def run_checker(checker: CompiledChecker, instruction: str, response: str,
                limits: CheckerLimits = CheckerLimits(), executor: Executor | None = None,
                evaluate: Callable | None = None) -> CheckerOutcome:
    if evaluate is None:
        evaluate = evaluate_native
    if checker.status is CheckerStatus.UNAVAILABLE or checker.body is None:
        return CheckerOutcome(False, OutcomeStatus.SKIPPED_UNAVAILABLE)
    if isinstance(checker.body, ExternalBody) and executor is None:
        return CheckerOutcome(False, OutcomeStatus.SKIPPED_UNAVAILABLE, error="no executor configured")
    start = time.perf_counter()
    last_error = None
    for attempt in range(max(1, limits.max_attempts)):
        try:
            passed = _attempt(checker, instruction, response, limits, executor, evaluate)
        except Exception as exc:  # every failure mode maps to a status
            last_error = f"{type(exc).__name__}: {exc}"
            logger.debug("checker attempt %d failed: %s", attempt + 1, last_error)
            continue
        return CheckerOutcome(passed, OutcomeStatus.OK, (time.perf_counter() - start) * 1000.0)
    return CheckerOutcome(False, OutcomeStatus.FAILED_CONSERVATIVE,
                          (time.perf_counter() - start) * 1000.0, last_error)


def run_all(spec: RewardSpecification, response: str, limits: CheckerLimits = CheckerLimits(),
            executor: Executor | None = None) -> list[CheckerOutcome]:
    return [run_checker(ch, spec.prompt, response, limits, executor) for ch in spec.checkers]
