"""Offline construction of reward specifications from a prompt alone.

Pipeline: task label -> weighted rubric -> hard constraints -> checkers.
Every LLM call goes through the gateway, so a recorded transcript replays
the whole build deterministically.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Callable

from .engine import CheckerLimits, Executor, run_checker
from .gateway import PRESETS, Gateway, SamplingPreset, chat_request, strip_thinking
from .grammar import DEFAULT_APPROX_BAND, compile_native
from .model import (
    MAX_RUBRIC_CRITERIA,
    SINGLETON_TYPES,
    CheckerStatus,
    CompiledChecker,
    ConstraintType,
    ExternalBody,
    HardConstraint,
    OutcomeStatus,
    Prompt,
    RewardSpecError,
    RewardSpecification,
    Rubric,
    RubricCriterion,
    TaskLabel,
    prompt_id,
    validate_rubric_items,
    validate_specification,
)
from .prompts import PromptTemplateSet, default_templates, fill

logger = logging.getLogger(__name__)

_LOREM = ("lorem ipsum dolor sit amet consectetur adipiscing elit sed do eiusmod tempor "
          "incididunt ut labore et dolore magna aliqua").split()
LOREM_PROBE = " ".join((_LOREM * 6)[:100]) + "."
PROBES = ("", LOREM_PROBE)


class RubricGenerationFailed(RewardSpecError):
    pass


class ExtractionParseFailed(RewardSpecError):
    pass


@dataclass(frozen=True)
class ModelRole:
    model: str
    sampling: SamplingPreset = PRESETS["qwen3-thinking"]
    thinking: bool = True


@dataclass(frozen=True)
class BuilderConfig:
    labeler: ModelRole = ModelRole("builder")
    rubric_extractor: ModelRole = ModelRole("builder")
    constraint_extractor: ModelRole = ModelRole("builder")
    code_generator: ModelRole = ModelRole("builder")
    max_regeneration: int = 3
    enable_external_checkers: bool = False
    approx_band: float = DEFAULT_APPROX_BAND
    max_criteria: int = MAX_RUBRIC_CRITERIA
    max_tokens: int | None = None
    limits: CheckerLimits = CheckerLimits()
    templates: PromptTemplateSet = field(default_factory=default_templates)

    def __post_init__(self):
        if self.max_regeneration < 1:
            raise ValueError("max_regeneration must be at least 1")


def _call(gateway: Gateway, role: ModelRole, system: str, user: str, attempt: int, cfg: BuilderConfig) -> str:
    req = chat_request(role.model, system, user, role.sampling, role.thinking, cfg.max_tokens)
    return strip_thinking(gateway.generate(req.with_attempt(attempt)))


def _decode_first(text: str, opener: str) -> Any:
    """Decode the first JSON value starting with `opener`, ignoring fences and chatter."""
    decoder = json.JSONDecoder()
    pos = text.find(opener)
    while pos != -1:
        try:
            return decoder.raw_decode(text, pos)[0]
        except json.JSONDecodeError:
            pos = text.find(opener, pos + 1)
    raise ValueError(f"no JSON value starting with {opener!r}")


def _flag(flags: list | None, note: str) -> None:
    logger.info("build flag: %s", note)
    if flags is not None:
        flags.append(note)


def _text(prompt: Prompt | str) -> str:
    text = prompt.text if isinstance(prompt, Prompt) else prompt
    Prompt(text)  # rejects empty prompts
    return text


def classify_task(gateway: Gateway, prompt: Prompt | str, cfg: BuilderConfig = BuilderConfig(),
                  flags: list | None = None) -> TaskLabel:
    """Coarse task label. Total: every failure mode degrades to `general`."""
    text = _text(prompt)
    for attempt in range(cfg.max_regeneration):
        reply = _call(gateway, cfg.labeler, cfg.templates.task_label, text, attempt, cfg)
        try:
            obj = _decode_first(reply, "{")
        except ValueError:
            continue
        if not isinstance(obj, dict):
            continue
        label = obj.get("task_type")
        try:
            return TaskLabel(label)
        except ValueError:
            _flag(flags, f"task_label_unknown:{label}")
            return TaskLabel.GENERAL
    _flag(flags, "task_label_parse_failure")
    return TaskLabel.GENERAL


def parse_rubric_reply(reply: str, max_criteria: int = MAX_RUBRIC_CRITERIA) -> Rubric | None:
    try:
        items = _decode_first(reply, "[")
    except ValueError:
        return None
    if not isinstance(items, list) or validate_rubric_items(items, max_criteria):
        return None
    return Rubric(tuple(RubricCriterion(it["criterion"].strip(), it["weight"]) for it in items))


def generate_rubric(gateway: Gateway, prompt: Prompt | str, label: TaskLabel,
                    cfg: BuilderConfig = BuilderConfig()) -> Rubric:
    text = _text(prompt)
    system = cfg.templates.assemble_rubric_prompt(label)
    for attempt in range(cfg.max_regeneration):
        rubric = parse_rubric_reply(_call(gateway, cfg.rubric_extractor, system, text, attempt, cfg),
                                    cfg.max_criteria)
        if rubric is not None:
            return rubric
        logger.info("rubric reply rejected (attempt %d)", attempt + 1)
    raise RubricGenerationFailed(f"no valid rubric after {cfg.max_regeneration} attempts")


def parse_constraint_reply(reply: str, flags: list | None = None) -> list[HardConstraint]:
    """Parse an extractor reply; raises ValueError when the reply is not a usable array."""
    items = _decode_first(reply, "[")
    if not isinstance(items, list):
        raise ValueError("extractor reply is not an array")
    if items == [None]:
        return []
    out: list[HardConstraint] = []
    seen: set[ConstraintType] = set()
    for item in items:
        if item is None:
            continue
        if not isinstance(item, dict) or not isinstance(item.get("constraint"), str) \
                or not item["constraint"].strip():
            raise ValueError(f"malformed constraint item {item!r}")
        try:
            ctype = ConstraintType(item.get("type"))
        except ValueError:
            _flag(flags, f"constraint_type_dropped:{item.get('type')}")
            continue
        if ctype in SINGLETON_TYPES and ctype in seen:
            _flag(flags, f"cardinality_repaired:{ctype.value}")
            continue
        seen.add(ctype)
        out.append(HardConstraint(ctype, item["constraint"]))
    return out


def extract_constraints(gateway: Gateway, prompt: Prompt | str, cfg: BuilderConfig = BuilderConfig(),
                        flags: list | None = None) -> list[HardConstraint]:
    text = _text(prompt)
    user = fill(cfg.templates.constraint_extraction_user, {"question": text})
    try:
        for attempt in range(cfg.max_regeneration):
            reply = _call(gateway, cfg.constraint_extractor, cfg.templates.constraint_extraction_system,
                          user, attempt, cfg)
            attempt_flags: list = []
            try:
                found = parse_constraint_reply(reply, attempt_flags)
            except ValueError as exc:
                logger.info("extraction reply rejected (attempt %d): %s", attempt + 1, exc)
                continue
            if flags is not None:
                flags.extend(attempt_flags)
            return found
        raise ExtractionParseFailed(f"no parseable extraction after {cfg.max_regeneration} attempts")
    except ExtractionParseFailed:
        _flag(flags, "extraction_parse_failure")
        return []


def _external_source(gateway: Gateway, c: HardConstraint, cfg: BuilderConfig, attempt: int) -> str | None:
    item = json.dumps([{"type": c.type.value, "constraint": c.constraint}], ensure_ascii=False)
    user = fill(cfg.templates.constraint_to_code_user, {"checkers": item})
    reply = _call(gateway, cfg.code_generator, cfg.templates.constraint_to_code_system, user, attempt, cfg)
    try:
        codes = _decode_first(reply, "[")
    except ValueError:
        return None
    if not isinstance(codes, list) or len(codes) != 1 or not isinstance(codes[0], str):
        return None
    return codes[0] if "def check_following(" in codes[0] else None


def compile_checker(c: HardConstraint, cfg: BuilderConfig = BuilderConfig(), gateway: Gateway | None = None,
                    attempt: int = 0) -> CompiledChecker:
    """Native checker by default; generated code only when external checkers are enabled."""
    body = compile_native(c, cfg.approx_band)
    if body is not None:
        return CompiledChecker(c, body)
    if cfg.enable_external_checkers and gateway is not None:
        source = _external_source(gateway, c, cfg, attempt)
        if source is not None:
            return CompiledChecker(c, ExternalBody(source))
    return CompiledChecker(c, None, CheckerStatus.UNAVAILABLE)


def _executes(ch: CompiledChecker, cfg: BuilderConfig, executor: Executor | None, evaluate) -> bool:
    limits = CheckerLimits(cfg.limits.timeout_ms, 1)
    for probe in PROBES:
        outcome = run_checker(ch, "", probe, limits, executor, evaluate)
        if outcome.status is not OutcomeStatus.OK:
            return False
    return True


def validate_checker(ch: CompiledChecker, cfg: BuilderConfig = BuilderConfig(),
                     recompile: Callable[[int], CompiledChecker] | None = None,
                     executor: Executor | None = None, evaluate: Callable | None = None) -> CompiledChecker:
    """Execute the checker on fixed probes; recompile on crash or timeout.

    Only executability is tested, not the pass bit. External checkers with no
    executor configured cannot be probed and are marked unavailable.
    """
    if ch.status is CheckerStatus.UNAVAILABLE:
        return ch
    current = ch
    for attempt in range(cfg.max_regeneration):
        if attempt and recompile is not None:
            current = recompile(attempt)
            if current.status is CheckerStatus.UNAVAILABLE:
                return current
        if _executes(current, cfg, executor, evaluate):
            return current
        logger.info("checker failed probe execution (attempt %d)", attempt + 1)
    return CompiledChecker(ch.origin, None, CheckerStatus.UNAVAILABLE)


def _utc_now() -> str:
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()


def build_specification(gateway: Gateway, prompt: Prompt | str, cfg: BuilderConfig = BuilderConfig(),
                        flags: list | None = None, executor: Executor | None = None,
                        clock: Callable[[], str] = _utc_now) -> RewardSpecification:
    text = _text(prompt)
    label = classify_task(gateway, text, cfg, flags)
    rubric = generate_rubric(gateway, text, label, cfg)
    constraints = extract_constraints(gateway, text, cfg, flags)
    checkers = []
    for c in constraints:
        compiled = compile_checker(c, cfg, gateway)
        checked = validate_checker(compiled, cfg, lambda a, c=c: compile_checker(c, cfg, gateway, a), executor)
        if checked.status is CheckerStatus.UNAVAILABLE:
            _flag(flags, f"checker_unavailable:{c.type.value}")
        checkers.append(checked)
    provenance = {
        "models": {
            "labeler": cfg.labeler.model,
            "rubric_extractor": cfg.rubric_extractor.model,
            "constraint_extractor": cfg.constraint_extractor.model,
            "code_generator": cfg.code_generator.model,
        },
        "template_version": cfg.templates.version,
        "created_at": clock(),
    }
    spec = RewardSpecification(prompt_id(text), text, label, rubric, tuple(constraints), tuple(checkers), provenance)
    report = validate_specification(spec, cfg.max_criteria)
    if not report.ok:
        # cannot happen for builder output; kept as a hard stop
        raise RewardSpecError(f"builder produced an invalid artifact: {report.codes()}")
    return spec
