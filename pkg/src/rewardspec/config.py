"""Configuration: TOML or JSON file, then environment overrides.

Sections mirror the runtime objects: [gateway], [roles.<name>], [builder],
[judge], [schedule], [limits], [scheduler], [store].
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .builder import BuilderConfig, ModelRole
from .engine import CheckerLimits
from .gateway import PRESETS, Gateway, GatewayMode, JudgeConfig, SamplingPreset, Transcript
from .reward import AlphaSchedule
from .scoring import ScoringConfig


@dataclass
class GatewaySettings:
    mode: str = "replay"
    base_url: str | None = None
    api_key: str | None = None
    transcript: str | None = None
    timeout: float = 120.0
    retry_limit: int = 3
    backoff_base: float = 1.0
    max_inflight: int = 32


@dataclass
class RoleSettings:
    model: str = "builder"
    preset: str = "qwen3-thinking"
    thinking: bool = True
    base_url: str | None = None


@dataclass
class BuilderSettings:
    max_regeneration: int = 3
    enable_external_checkers: bool = False
    approx_band: float = 0.10
    max_criteria: int = 64


@dataclass
class JudgeSettings:
    weight_conditional_thinking: bool = True
    judge_retry: int = 2
    thinking_preset: str = "qwen3-thinking"
    non_thinking_preset: str = "qwen3-non-thinking"


@dataclass
class ScheduleSettings:
    mode: str = "linear_decay"
    alpha: float = 1.0
    t_decay: int = 800


@dataclass
class LimitSettings:
    timeout_ms: float = 2000.0
    max_attempts: int = 3


@dataclass
class SchedulerSettings:
    max_inflight_scores: int = 64
    max_inflight_judge_calls: int = 32
    queue_capacity: int = 256


@dataclass
class StoreSettings:
    root: str = "artifacts"
    cache_size: int = 10_000


ROLE_NAMES = ("labeler", "rubric_extractor", "constraint_extractor", "code_generator", "judge", "scorer")


def _default_roles() -> dict[str, RoleSettings]:
    return {name: RoleSettings(model="judge" if name in ("judge", "scorer") else "builder") for name in ROLE_NAMES}


@dataclass
class AppConfig:
    gateway: GatewaySettings = field(default_factory=GatewaySettings)
    roles: dict[str, RoleSettings] = field(default_factory=_default_roles)
    builder: BuilderSettings = field(default_factory=BuilderSettings)
    judge: JudgeSettings = field(default_factory=JudgeSettings)
    schedule: ScheduleSettings = field(default_factory=ScheduleSettings)
    limits: LimitSettings = field(default_factory=LimitSettings)
    scheduler: SchedulerSettings = field(default_factory=SchedulerSettings)
    store: StoreSettings = field(default_factory=StoreSettings)

    # ---- runtime objects

    def builder_config(self) -> BuilderConfig:
        roles = {name: _role(self.roles[name]) for name in ROLE_NAMES[:4]}
        return BuilderConfig(**roles, max_regeneration=self.builder.max_regeneration,
                             enable_external_checkers=self.builder.enable_external_checkers,
                             approx_band=self.builder.approx_band, max_criteria=self.builder.max_criteria,
                             limits=self.checker_limits())

    def judge_config(self) -> JudgeConfig:
        return JudgeConfig(
            judge_model=self.roles["judge"].model,
            scorer_model=self.roles["scorer"].model,
            thinking_preset=PRESETS[self.judge.thinking_preset],
            non_thinking_preset=PRESETS[self.judge.non_thinking_preset],
            weight_conditional_thinking=self.judge.weight_conditional_thinking,
            judge_retry=self.judge.judge_retry,
        )

    def checker_limits(self) -> CheckerLimits:
        return CheckerLimits(self.limits.timeout_ms, self.limits.max_attempts)

    def alpha_schedule(self) -> AlphaSchedule:
        return AlphaSchedule(self.schedule.mode, self.schedule.alpha, self.schedule.t_decay)

    def scoring_config(self) -> ScoringConfig:
        return ScoringConfig(self.judge_config(), self.checker_limits(), self.alpha_schedule(),
                             self.scheduler.max_inflight_judge_calls)

    def make_gateway(self, role: str | None = None, transcript: Transcript | None = None) -> Gateway:
        g = self.gateway
        base_url = (self.roles[role].base_url if role else None) or g.base_url
        if transcript is None and g.transcript:
            transcript = Transcript(g.transcript)
        return Gateway(GatewayMode(g.mode), base_url=base_url, api_key=g.api_key, transcript=transcript,
                       timeout=g.timeout, retry_limit=g.retry_limit, backoff_base=g.backoff_base,
                       max_inflight=g.max_inflight)


def _role(r: RoleSettings) -> ModelRole:
    preset: SamplingPreset = PRESETS[r.preset]
    return ModelRole(r.model, preset, r.thinking)


def _merge(obj, data: Mapping[str, Any], path: str = ""):
    names = {f.name: f for f in dataclasses.fields(obj)}
    for key, value in data.items():
        if key not in names:
            raise ValueError(f"unknown config key {path}{key}")
        current = getattr(obj, key)
        if key == "roles" and isinstance(value, Mapping):
            for role, spec in value.items():
                if role not in current:
                    raise ValueError(f"unknown role {role!r}")
                _merge(current[role], spec, f"{path}roles.{role}.")
        elif dataclasses.is_dataclass(current):
            _merge(current, value, f"{path}{key}.")
        else:
            setattr(obj, key, value)
    return obj


ENV_OVERRIDES = {
    "RF_GATEWAY_MODE": ("gateway", "mode"),
    "RF_BASE_URL": ("gateway", "base_url"),
    "RF_API_KEY": ("gateway", "api_key"),
    "RF_TRANSCRIPT": ("gateway", "transcript"),
    "RF_STORE_ROOT": ("store", "root"),
    "RF_JUDGE_BASE_URL": ("roles.judge", "base_url"),
    "RF_JUDGE_MODEL": ("roles.judge", "model"),
    "RF_SCORER_BASE_URL": ("roles.scorer", "base_url"),
    "RF_SCORER_MODEL": ("roles.scorer", "model"),
    "RF_EXTRACTOR_BASE_URL": ("roles.constraint_extractor", "base_url"),
    "RF_EXTRACTOR_MODEL": ("roles.constraint_extractor", "model"),
}


def apply_env(cfg: AppConfig, environ: Mapping[str, str] = os.environ) -> AppConfig:
    for var, (section, attr) in ENV_OVERRIDES.items():
        if var not in environ:
            continue
        if section.startswith("roles."):
            target = cfg.roles[section.split(".", 1)[1]]
        else:
            target = getattr(cfg, section)
        setattr(target, attr, environ[var])
    return cfg


def load_config(path: str | Path | None = None, environ: Mapping[str, str] = os.environ) -> AppConfig:
    cfg = AppConfig()
    if path is not None:
        p = Path(path)
        raw = p.read_bytes()
        data = json.loads(raw) if p.suffix == ".json" else tomllib.loads(raw.decode("utf-8"))
        _merge(cfg, data)
    return apply_env(cfg, environ)
