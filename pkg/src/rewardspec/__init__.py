"""Prompt-level reward artifacts (weighted rubric + executable checkers) and
the hybrid reward computed from them."""

from .builder import BuilderConfig, RubricGenerationFailed, build_specification
from .engine import CheckerLimits, evaluate_native, run_all, run_checker
from .gateway import Gateway, GatewayMode, JudgeConfig, Transcript
from .model import (
    CheckerOutcome,
    CompiledChecker,
    ConstraintType,
    HardConstraint,
    NativeBody,
    Prompt,
    RewardSpecification,
    Rubric,
    RubricCriterion,
    ScoreBreakdown,
    TaskLabel,
    TernaryLabel,
    parse_specification,
    prompt_id,
    serialize_specification,
    validate_specification,
)
from .reward import AlphaSchedule, alpha_at, checker_score, group_advantages, hybrid_reward, rubric_score
from .scoring import Scorer, ScoringConfig

__version__ = "0.1.0"

__all__ = [
    "AlphaSchedule", "BuilderConfig", "CheckerLimits", "CheckerOutcome", "CompiledChecker", "ConstraintType",
    "Gateway", "GatewayMode", "HardConstraint", "JudgeConfig", "NativeBody", "Prompt", "RewardSpecification",
    "Rubric", "RubricCriterion", "RubricGenerationFailed", "ScoreBreakdown", "Scorer", "ScoringConfig",
    "TaskLabel", "TernaryLabel", "Transcript", "alpha_at", "build_specification", "checker_score",
    "evaluate_native", "group_advantages", "hybrid_reward", "parse_specification", "prompt_id", "rubric_score",
    "run_all", "run_checker", "serialize_specification", "validate_specification",
]
