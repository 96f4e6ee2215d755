"""Online scoring of one response against a stored specification.

Judge calls (one per rubric criterion plus one global call) fan out on a
bounded thread pool; results are collected by index, so the breakdown does
not depend on completion order.
"""

from __future__ import annotations

import concurrent.futures
import logging
from dataclasses import dataclass

from .engine import CheckerLimits, Executor, run_checker
from .gateway import (
    Gateway,
    GatewayError,
    GlobalScoreUnavailable,
    JudgeConfig,
    global_score,
    judge_rubric_criterion,
)
from .model import OutcomeStatus, RewardSpecError, RewardSpecification, ScoreBreakdown
from .reward import (
    AlphaSchedule,
    alpha_at,
    checker_score,
    normalize_global,
    parse_variant,
    rubric_score,
    variant_reward,
)

logger = logging.getLogger(__name__)


class JudgeUnavailable(RewardSpecError):
    """The judge endpoint failed after retries; no partial score is returned."""


@dataclass(frozen=True)
class ScoringConfig:
    judge: JudgeConfig = JudgeConfig()
    limits: CheckerLimits = CheckerLimits()
    schedule: AlphaSchedule = AlphaSchedule()
    max_inflight_judge_calls: int = 32


class Scorer:
    """Scores responses. `global_gateway` routes the holistic call to its own endpoint."""

    def __init__(self, gateway: Gateway, cfg: ScoringConfig = ScoringConfig(), executor: Executor | None = None,
                 global_gateway: Gateway | None = None):
        self.gateway = gateway
        self.global_gateway = global_gateway if global_gateway is not None else gateway
        self.cfg = cfg
        self.executor = executor
        self._pool = concurrent.futures.ThreadPoolExecutor(cfg.max_inflight_judge_calls, thread_name_prefix="judge")

    def close(self) -> None:
        self._pool.shutdown(wait=True)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def alpha_for(self, step: int | None = None, alpha: float | None = None) -> float:
        if alpha is not None:
            return alpha
        return alpha_at(step or 0, self.cfg.schedule)

    def score(self, spec: RewardSpecification, response: str, step: int | None = None,
              alpha: float | None = None, variant: str = "R+G+C") -> ScoreBreakdown:
        active = parse_variant(variant)
        a = self.alpha_for(step, alpha)
        flags: list[str] = []
        judge = self.cfg.judge
        criteria = list(spec.rubric.criteria) if "R" in active else []
        crit_flags = [[] for _ in criteria]
        futures = [
            self._pool.submit(judge_rubric_criterion, self.gateway, spec.prompt, response, c, judge, crit_flags[i])
            for i, c in enumerate(criteria)
        ]
        want_global = "G" in active and a > 0
        global_future = (self._pool.submit(global_score, self.global_gateway, spec.prompt, response, judge)
                         if want_global else None)

        outcomes = []
        if "C" in active:
            outcomes = [run_checker(ch, spec.prompt, response, self.cfg.limits, self.executor)
                        for ch in spec.checkers]

        try:
            labels = [f.result() for f in futures]
            raw_global = None
            if global_future is not None:
                try:
                    raw_global = global_future.result()
                except GlobalScoreUnavailable:
                    flags.append("global_unavailable")
        except GatewayError as exc:
            for f in futures:
                f.cancel()
            raise JudgeUnavailable(str(exc)) from exc

        for i, cf in enumerate(crit_flags):
            flags.extend(f"{note}:{i}" for note in cf)
        if "G" in active and not want_global:
            flags.append("global_skipped")
        for i, o in enumerate(outcomes):
            if o.status is OutcomeStatus.FAILED_CONSERVATIVE:
                flags.append(f"checker_failed_conservative:{i}")

        s_r = rubric_score(labels, [c.weight for c in criteria]) if criteria else None
        s_g = normalize_global(raw_global) if raw_global is not None else None
        s_c, n = checker_score(outcomes)
        reward = variant_reward(variant, s_r=s_r, s_c=s_c, s_g=s_g, alpha=a)
        return ScoreBreakdown(
            s_r=s_r, s_g=s_g, s_c=s_c, n_valid_checkers=n, alpha=a, reward=reward,
            per_criterion=tuple(enumerate(labels)),
            per_checker=tuple(enumerate(outcomes)),
            flags=tuple(flags),
            raw_global=raw_global,
        )
