"""Versioned prompt templates and their assembly.

Templates live as text files next to this module. Placeholders use the
`{NAME}` form and are substituted with plain string replacement, since the
templates themselves contain literal JSON braces.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Mapping

from .model import RewardSpecError, TaskLabel

TEMPLATE_VERSION = "1"

_USER_SPLIT = "\nUser message: "
_PLACEHOLDER = re.compile(r"\{(TASK_TYPE|TASK_SPECIFIC_MODULE|question|answer|rubric|checkers)\}")


class MissingPlugin(RewardSpecError, KeyError):
    pass


class UnresolvedPlaceholder(RewardSpecError, ValueError):
    pass


def _read(name: str) -> str:
    return resources.files("rewardspec.templates").joinpath(name).read_text(encoding="utf-8")


def fill(template: str, values: Mapping[str, str]) -> str:
    """Substitute placeholders in one pass; substituted text is never rescanned."""

    def sub(m):
        key = m.group(1)
        if key not in values:
            raise UnresolvedPlaceholder(f"no value for placeholder {{{key}}}")
        return values[key]

    return _PLACEHOLDER.sub(sub, template)


@dataclass(frozen=True)
class PromptTemplateSet:
    version: str
    task_label: str
    rubric_shared: str
    plugins: Mapping[TaskLabel, str]
    constraint_extraction_system: str
    constraint_extraction_user: str
    constraint_to_code_system: str
    constraint_to_code_user: str
    judge_rubric_system: str
    judge_rubric_user: str
    global_system: str
    global_user: str

    def __post_init__(self):
        if set(self.plugins) != set(TaskLabel):
            missing = sorted(lab.value for lab in set(TaskLabel) - set(self.plugins))
            raise MissingPlugin(f"plug-in set does not match task labels, missing {missing}")

    def assemble_rubric_prompt(self, label: TaskLabel) -> str:
        label = TaskLabel(label)
        if label not in self.plugins:
            raise MissingPlugin(label.value)
        return fill(self.rubric_shared, {"TASK_TYPE": label.value,
                                         "TASK_SPECIFIC_MODULE": self.plugins[label].strip()})


def _split_user(text: str) -> tuple[str, str]:
    system, _, user = text.partition(_USER_SPLIT)
    return system.rstrip() + "\n", user.strip()


@lru_cache(maxsize=1)
def default_templates() -> PromptTemplateSet:
    ce_sys, ce_user = _split_user(_read("constraint_extraction.txt"))
    cc_sys, cc_user = _split_user(_read("constraint_to_code.txt"))
    return PromptTemplateSet(
        version=TEMPLATE_VERSION,
        task_label=_read("task_label.txt"),
        rubric_shared=_read("rubric_shared.txt"),
        plugins={label: _read(f"plugin_{label.value}.txt") for label in TaskLabel},
        constraint_extraction_system=ce_sys,
        constraint_extraction_user=ce_user,
        constraint_to_code_system=cc_sys,
        constraint_to_code_user=cc_user,
        judge_rubric_system=_read("judge_rubric_system.txt"),
        judge_rubric_user=_read("judge_rubric_user.txt"),
        global_system=_read("global_system.txt"),
        global_user=_read("global_user.txt"),
    )


def assemble_rubric_prompt(label: TaskLabel, templates: PromptTemplateSet | None = None) -> str:
    return (templates or default_templates()).assemble_rubric_prompt(label)
