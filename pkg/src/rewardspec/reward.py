"""Reward aggregation, the holistic-weight schedule and group advantages."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .model import CheckerOutcome, OutcomeStatus, RewardSpecError, TernaryLabel

DEFAULT_T_DECAY = 800
ADVANTAGE_SCALE = 6.0


class LengthMismatch(RewardSpecError, ValueError):
    pass


class ZeroWeightSum(RewardSpecError, ValueError):
    pass


class MissingRubricScore(RewardSpecError, ValueError):
    pass


class EmptyComponentSet(RewardSpecError, ValueError):
    """No component survives with positive weight."""


def rubric_score(labels: Sequence[TernaryLabel], weights: Sequence[int]) -> float:
    if len(labels) != len(weights):
        raise LengthMismatch(f"{len(labels)} labels for {len(weights)} weights")
    if not labels:
        raise LengthMismatch("rubric score needs at least one criterion")
    total = sum(weights)
    if total <= 0:
        raise ZeroWeightSum("rubric weights sum to zero")
    return sum(w * TernaryLabel(lab).value_score for lab, w in zip(labels, weights)) / total


def normalize_global(g: float) -> float:
    return min(1.0, max(0.0, g / 10.0))


def checker_score(outcomes: Iterable[CheckerOutcome]) -> tuple[float | None, int]:
    """Pass rate over counted checkers and their number.

    Conservative failures count as failed checks; skipped (unavailable)
    checkers are not counted. Returns (None, 0) when nothing counts.
    """
    counted = [o for o in outcomes if o.status is not OutcomeStatus.SKIPPED_UNAVAILABLE]
    if not counted:
        return None, 0
    return sum(1 for o in counted if o.passed) / len(counted), len(counted)


def combine(s_r: float | None = None, s_c: float | None = None, s_g: float | None = None,
            alpha: float = 1.0) -> float:
    """Weighted mean of the present components: rubric and code weigh 1, global weighs alpha.

    This is the hybrid reward for the full component set and every ablation
    that drops components (absent ones leave numerator and denominator).
    """
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    num = den = 0.0
    if s_r is not None:
        num += s_r
        den += 1.0
    if s_c is not None:
        num += s_c
        den += 1.0
    if s_g is not None and alpha > 0:
        num += alpha * s_g
        den += alpha
    if den == 0:
        raise EmptyComponentSet("no reward component with positive weight")
    return num / den


def hybrid_reward(s_r: float | None, s_g: float | None = None, s_c: float | None = None,
                  n: int | None = None, alpha: float = 1.0) -> float:
    """R = (s_r + s_c + a*s_g) / (2 + a) when checkers count, else (s_r + a*s_g) / (1 + a).

    A missing global score drops that term (alpha treated as 0).
    """
    if s_r is None:
        raise MissingRubricScore("the rubric score is mandatory")
    if n is None:
        n = 0 if s_c is None else 1
    return combine(s_r=s_r, s_c=s_c if n > 0 else None, s_g=s_g, alpha=alpha)


@dataclass(frozen=True)
class AlphaSchedule:
    """Constant alpha, or linear decay from 1 to 0 over `t_decay` steps."""

    mode: str = "linear_decay"
    alpha: float = 1.0
    t_decay: int = DEFAULT_T_DECAY

    def __post_init__(self):
        if self.mode not in ("constant", "linear_decay"):
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        if self.mode == "constant" and self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.mode == "linear_decay" and self.t_decay <= 0:
            raise ValueError("t_decay must be positive")

    @classmethod
    def constant(cls, alpha: float) -> "AlphaSchedule":
        return cls("constant", alpha=alpha)

    @classmethod
    def linear(cls, t_decay: int = DEFAULT_T_DECAY) -> "AlphaSchedule":
        return cls("linear_decay", t_decay=t_decay)


def alpha_at(step: int, schedule: AlphaSchedule = AlphaSchedule()) -> float:
    if step < 0:
        raise ValueError("step must be non-negative")
    if schedule.mode == "constant":
        return schedule.alpha
    return max(0.0, 1.0 - step / schedule.t_decay)


def group_advantages(group_reward: Sequence[float], scale: float = ADVANTAGE_SCALE) -> list[float]:
    """Mean-centred, fixed-scale advantages. No division by the group std.

    Works on any numeric type; Fraction inputs give exact results.
    """
    rewards = list(group_reward)
    if not rewards:
        raise ValueError("a group needs at least one reward")
    if all(isinstance(r, (int, float)) for r in rewards):
        mean = math.fsum(rewards) / len(rewards)
    else:
        mean = sum(rewards) / len(rewards)
        if any(isinstance(r, Fraction) for r in rewards):
            scale = Fraction(scale)
    return [scale * (r - mean) for r in rewards]


# Component-ablation variants: R = rubric, G = global, C = code checkers.
VARIANTS = ("G", "G+C", "R", "R+C", "R+G", "R+G+C")


class VariantUnsupported(RewardSpecError, ValueError):
    pass


def parse_variant(variant: str) -> frozenset[str]:
    parts = [p.strip().upper() for p in variant.split("+")]
    key = "+".join(sorted(set(parts), key="RGC".index)) if set(parts) <= set("RGC") else variant
    if key not in VARIANTS:
        raise VariantUnsupported(f"unknown variant {variant!r}; expected one of {', '.join(VARIANTS)}")
    return frozenset(parts)


def variant_reward(variant: str, s_r: float | None = None, s_c: float | None = None,
                   s_g: float | None = None, alpha: float = 1.0) -> float:
    """Reward over the variant's surviving components (absent ones renormalize away)."""
    active = parse_variant(variant)
    try:
        return combine(
            s_r=s_r if "R" in active else None,
            s_c=s_c if "C" in active else None,
            s_g=s_g if "G" in active else None,
            alpha=alpha,
        )
    except EmptyComponentSet:
        raise VariantUnsupported(f"variant {variant} has no computable component") from None
