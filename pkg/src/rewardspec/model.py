"""Domain types and the artifact JSON format.

Everything here is an immutable value. The artifact file format is the
single source of truth for stored reward specifications; `serialize_specification`
emits it byte-stably and `parse_specification` is its strict inverse.
"""

from __future__ import annotations

import enum
import hashlib
import json
import re
import unicodedata
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence, Union

SCHEMA_VERSION = 1
MAX_RUBRIC_CRITERIA = 64


class RewardSpecError(Exception):
    """Base class for all errors raised by this package."""


class EmptyPrompt(RewardSpecError, ValueError):
    pass


class ParseError(RewardSpecError, ValueError):
    """Malformed artifact document.

    `offset` is a byte offset into the document when the failure is
    syntactic, None for schema violations; `path` names the offending field.
    """

    def __init__(self, message: str, *, path: str = "", offset: int | None = None):
        where = []
        if path:
            where.append(f"at {path}")
        if offset is not None:
            where.append(f"byte {offset}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.path = path
        self.offset = offset


class TaskLabel(str, enum.Enum):
    GENERAL = "general"
    EXACT_REASONING = "exact_reasoning"
    EXPLANATORY_REASONING = "explanatory_reasoning"
    GROUNDED_TRANSFORMATION = "grounded_transformation"
    DECISION_SUPPORT = "decision_support"
    CREATIVE_GENERATION = "creative_generation"


class ConstraintType(str, enum.Enum):
    WORD_COUNT = "word_count"
    PARAGRAPH_COUNT = "paragraph_count"
    SENTENCE_COUNT = "sentence_count"
    KEYWORD_COUNT = "keyword_count"
    KEYWORD_EXCLUDE = "keyword_exclude"
    RESPONSE_LANGUAGE = "response_language"
    START_TEXT = "start_text"
    END_TEXT = "end_text"
    LIST_FORMAT = "list_format"
    OUTPUT_FORMAT = "output_format"
    PUNCTUATION_RULE = "punctuation_rule"


# Types that may appear at most once per specification.
SINGLETON_TYPES = frozenset(
    {
        ConstraintType.WORD_COUNT,
        ConstraintType.PARAGRAPH_COUNT,
        ConstraintType.SENTENCE_COUNT,
        ConstraintType.RESPONSE_LANGUAGE,
        ConstraintType.START_TEXT,
        ConstraintType.END_TEXT,
    }
)


class TernaryLabel(str, enum.Enum):
    YES = "yes"
    PART = "part"
    NO = "no"

    @property
    def value_score(self) -> float:
        return _TERNARY_VALUES[self]


_TERNARY_VALUES = {TernaryLabel.YES: 1.0, TernaryLabel.PART: 0.5, TernaryLabel.NO: 0.0}


class CheckerStatus(str, enum.Enum):
    VALID = "valid"
    UNAVAILABLE = "unavailable"


class OutcomeStatus(str, enum.Enum):
    OK = "ok"
    FAILED_CONSERVATIVE = "failed_conservative"
    SKIPPED_UNAVAILABLE = "skipped_unavailable"


_WS_RUN = re.compile(r"\s+")


def normalize_prompt_text(text: str) -> str:
    """NFC, trim, and collapse whitespace runs to one space."""
    return _WS_RUN.sub(" ", unicodedata.normalize("NFC", text)).strip()


def prompt_id(text: str) -> str:
    normalized = normalize_prompt_text(text)
    if not normalized:
        raise EmptyPrompt("prompt text is empty after whitespace trim")
    return hashlib.sha256(normalized.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Prompt:
    text: str
    source: str | None = None

    def __post_init__(self):
        if not self.text.strip():
            raise EmptyPrompt("prompt text is empty after whitespace trim")

    @property
    def id(self) -> str:
        return prompt_id(self.text)


@dataclass(frozen=True)
class RubricCriterion:
    criterion: str
    weight: int

    def __post_init__(self):
        if not isinstance(self.criterion, str) or not self.criterion.strip():
            raise ValueError("criterion must be a non-empty string")
        if isinstance(self.weight, bool) or self.weight not in (1, 2, 3):
            raise ValueError(f"weight must be 1, 2 or 3, got {self.weight!r}")


@dataclass(frozen=True)
class Rubric:
    criteria: tuple[RubricCriterion, ...]

    def __post_init__(self):
        object.__setattr__(self, "criteria", tuple(self.criteria))

    def __len__(self) -> int:
        return len(self.criteria)

    def __iter__(self):
        return iter(self.criteria)

    @property
    def weights(self) -> list[int]:
        return [c.weight for c in self.criteria]


@dataclass(frozen=True)
class HardConstraint:
    type: ConstraintType
    constraint: str

    def __post_init__(self):
        object.__setattr__(self, "type", ConstraintType(self.type))
        if not self.constraint.strip():
            raise ValueError("constraint text must be non-empty")


@dataclass(frozen=True)
class NativeBody:
    """Structured checker parameters evaluated by the native engine.

    `kind` selects the semantics, `params` carries the operator, bounds,
    anchors, etc. Only JSON scalars and lists appear in `params`.
    """

    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"kind": self.kind, **{k: self.params[k] for k in sorted(self.params)}}


@dataclass(frozen=True)
class ExternalBody:
    source: str
    runtime: str = "python"

    def to_json(self) -> dict:
        return {"kind": "external", "runtime": self.runtime, "source": self.source}


CheckerBody = Union[NativeBody, ExternalBody]


@dataclass(frozen=True)
class CompiledChecker:
    origin: HardConstraint
    body: CheckerBody | None
    status: CheckerStatus = CheckerStatus.VALID

    def __post_init__(self):
        object.__setattr__(self, "status", CheckerStatus(self.status))
        if self.status is CheckerStatus.VALID and self.body is None:
            raise ValueError("a valid checker needs a body")


@dataclass(frozen=True)
class RewardSpecification:
    prompt_id: str
    prompt: str
    task_label: TaskLabel
    rubric: Rubric
    constraints: tuple[HardConstraint, ...] = ()
    checkers: tuple[CompiledChecker, ...] = ()
    provenance: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "task_label", TaskLabel(self.task_label))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        object.__setattr__(self, "checkers", tuple(self.checkers))

    @property
    def valid_checkers(self) -> list[CompiledChecker]:
        return [c for c in self.checkers if c.status is CheckerStatus.VALID]


@dataclass(frozen=True)
class CheckerOutcome:
    passed: bool
    status: OutcomeStatus
    # timing is reported but is not part of the outcome's identity
    duration_ms: float = field(default=0.0, compare=False)
    error: str | None = None


@dataclass(frozen=True)
class ScoreBreakdown:
    s_r: float | None
    s_g: float | None
    s_c: float | None
    n_valid_checkers: int
    alpha: float
    reward: float
    per_criterion: tuple[tuple[int, TernaryLabel], ...] = ()
    per_checker: tuple[tuple[int, CheckerOutcome], ...] = ()
    flags: tuple[str, ...] = ()
    raw_global: float | None = None

    def to_json(self) -> dict:
        return {
            "s_r": self.s_r,
            "s_g": self.s_g,
            "s_c": self.s_c,
            "n_valid_checkers": self.n_valid_checkers,
            "alpha": self.alpha,
            "reward": self.reward,
            "raw_global": self.raw_global,
            "per_criterion": [{"index": i, "label": lab.value} for i, lab in self.per_criterion],
            "per_checker": [
                {
                    "index": i,
                    "passed": o.passed,
                    "status": o.status.value,
                    "duration_ms": o.duration_ms,
                }
                for i, o in self.per_checker
            ],
            "flags": list(self.flags),
        }


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    code: str
    path: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def codes(self) -> list[str]:
        return [v.code for v in self.violations]


def validate_rubric_items(items: Sequence[Any], max_criteria: int = MAX_RUBRIC_CRITERIA) -> list[Violation]:
    """Rubric rules shared with the rubric generator (works on raw or typed items)."""
    out = []
    if not items:
        out.append(Violation("empty_rubric", "rubric", "rubric has no criteria"))
    if len(items) > max_criteria:
        out.append(Violation("rubric_too_long", "rubric", f"{len(items)} > {max_criteria} criteria"))
    for i, item in enumerate(items):
        if isinstance(item, RubricCriterion):
            crit, weight = item.criterion, item.weight
        elif isinstance(item, Mapping):
            crit, weight = item.get("criterion"), item.get("weight")
        else:
            out.append(Violation("malformed_criterion", f"rubric[{i}]", "not an object"))
            continue
        if not isinstance(crit, str) or not crit.strip():
            out.append(Violation("empty_criterion", f"rubric[{i}].criterion", "criterion is empty"))
        if isinstance(weight, bool) or weight not in (1, 2, 3):
            out.append(Violation("weight_out_of_range", f"rubric[{i}].weight", f"weight out of range: {weight!r}"))
    return out


def validate_specification(spec: RewardSpecification, max_criteria: int = MAX_RUBRIC_CRITERIA) -> ValidationReport:
    violations = validate_rubric_items(list(spec.rubric.criteria), max_criteria)
    seen = set()
    for i, c in enumerate(spec.constraints):
        if not c.constraint.strip():
            violations.append(Violation("empty_constraint", f"constraints[{i}]", "constraint text is empty"))
        if c.type in SINGLETON_TYPES:
            if c.type in seen:
                violations.append(
                    Violation("cardinality", f"constraints[{i}].type", f"more than one {c.type.value} constraint")
                )
            seen.add(c.type)
    if len(spec.checkers) != len(spec.constraints):
        violations.append(
            Violation(
                "misaligned_checkers",
                "checkers",
                f"{len(spec.checkers)} checkers for {len(spec.constraints)} constraints",
            )
        )
    else:
        for i, (ch, c) in enumerate(zip(spec.checkers, spec.constraints)):
            if ch.origin != c:
                violations.append(Violation("misaligned_checkers", f"checkers[{i}]", "checker origin differs"))
    return ValidationReport(tuple(violations))


# --------------------------------------------------------------------------
# serialization


def _body_to_json(body: CheckerBody | None) -> dict:
    if body is None:
        return {"kind": "none"}
    return body.to_json()


def specification_to_json(spec: RewardSpecification) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "prompt_id": spec.prompt_id,
        "prompt": spec.prompt,
        "task_label": spec.task_label.value,
        "rubric": [{"criterion": c.criterion, "weight": c.weight} for c in spec.rubric.criteria],
        "constraints": [{"type": c.type.value, "constraint": c.constraint} for c in spec.constraints],
        "checkers": [{"status": ch.status.value, "body": _body_to_json(ch.body)} for ch in spec.checkers],
        "provenance": dict(spec.provenance),
    }


def serialize_specification(spec: RewardSpecification) -> bytes:
    doc = specification_to_json(spec)
    # provenance and body params are free-form; sort their keys for byte stability
    doc["provenance"] = json.loads(json.dumps(doc["provenance"], sort_keys=True))
    return json.dumps(doc, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


_TOP_KEYS = ("schema_version", "prompt_id", "prompt", "task_label", "rubric", "constraints", "checkers", "provenance")


def _expect(cond: bool, message: str, path: str):
    if not cond:
        raise ParseError(message, path=path)


def _enum(enum_cls, value, path):
    try:
        return enum_cls(value)
    except ValueError:
        raise ParseError(f"unknown {enum_cls.__name__} value {value!r}", path=path) from None


def _parse_body(raw, path) -> CheckerBody | None:
    _expect(isinstance(raw, dict), "checker body must be an object", path)
    kind = raw.get("kind")
    _expect(isinstance(kind, str) and kind, "checker body needs a string kind", f"{path}.kind")
    if kind == "none":
        return None
    if kind == "external":
        src = raw.get("source")
        _expect(isinstance(src, str), "external body needs source text", f"{path}.source")
        return ExternalBody(source=src, runtime=str(raw.get("runtime", "python")))
    return NativeBody(kind=kind, params={k: v for k, v in raw.items() if k != "kind"})


def specification_from_json(doc: Any) -> RewardSpecification:
    _expect(isinstance(doc, dict), "artifact must be a JSON object", "$")
    unknown = set(doc) - set(_TOP_KEYS)
    _expect(not unknown, f"unknown top-level keys {sorted(unknown)}", "$")
    for key in _TOP_KEYS:
        _expect(key in doc, f"missing field {key!r}", key)
    _expect(doc["schema_version"] == SCHEMA_VERSION, f"unsupported schema_version {doc['schema_version']!r}", "schema_version")
    _expect(isinstance(doc["prompt_id"], str) and re.fullmatch(r"[0-9a-f]+", doc["prompt_id"] or "") is not None,
            "prompt_id must be lowercase hex", "prompt_id")
    _expect(isinstance(doc["prompt"], str), "prompt must be a string", "prompt")
    label = _enum(TaskLabel, doc["task_label"], "task_label")

    _expect(isinstance(doc["rubric"], list), "rubric must be an array", "rubric")
    criteria = []
    for i, item in enumerate(doc["rubric"]):
        path = f"rubric[{i}]"
        _expect(isinstance(item, dict) and set(item) == {"criterion", "weight"},
                "criterion must have exactly criterion and weight", path)
        try:
            criteria.append(RubricCriterion(item["criterion"], item["weight"]))
        except (ValueError, TypeError) as exc:
            raise ParseError(str(exc), path=path) from None

    _expect(isinstance(doc["constraints"], list), "constraints must be an array", "constraints")
    constraints = []
    for i, item in enumerate(doc["constraints"]):
        path = f"constraints[{i}]"
        _expect(isinstance(item, dict) and set(item) == {"type", "constraint"},
                "constraint must have exactly type and constraint", path)
        ctype = _enum(ConstraintType, item["type"], f"{path}.type")
        _expect(isinstance(item["constraint"], str) and item["constraint"].strip(),
                "constraint text must be a non-empty string", f"{path}.constraint")
        constraints.append(HardConstraint(ctype, item["constraint"]))

    _expect(isinstance(doc["checkers"], list), "checkers must be an array", "checkers")
    _expect(len(doc["checkers"]) == len(constraints), "checkers must align with constraints", "checkers")
    checkers = []
    for i, item in enumerate(doc["checkers"]):
        path = f"checkers[{i}]"
        _expect(isinstance(item, dict) and set(item) == {"status", "body"}, "checker must have status and body", path)
        status = _enum(CheckerStatus, item["status"], f"{path}.status")
        body = _parse_body(item["body"], f"{path}.body")
        _expect(not (status is CheckerStatus.VALID and body is None), "valid checker without body", path)
        checkers.append(CompiledChecker(constraints[i], body, status))

    _expect(isinstance(doc["provenance"], dict), "provenance must be an object", "provenance")
    return RewardSpecification(
        prompt_id=doc["prompt_id"],
        prompt=doc["prompt"],
        task_label=label,
        rubric=Rubric(tuple(criteria)),
        constraints=tuple(constraints),
        checkers=tuple(checkers),
        provenance=doc["provenance"],
    )


def parse_specification(data: bytes | str) -> RewardSpecification:
    raw = data.encode("utf-8") if isinstance(data, str) else bytes(data)
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError("document is not valid UTF-8", offset=exc.start) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise ParseError(f"invalid JSON: {exc.msg}", path="$", offset=offset) from None
    return specification_from_json(doc)
