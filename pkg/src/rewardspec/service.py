"""Deployment surface: artifact store, bounded scheduler, and the HTTP API."""

from __future__ import annotations

import concurrent.futures
import logging
import os
import tempfile
import threading
import time
import uuid
from collections import OrderedDict
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

from pydantic import BaseModel, Field

from .builder import BuilderConfig, build_specification
from .gateway import Gateway
from .model import (
    ParseError,
    Prompt,
    RewardSpecError,
    RewardSpecification,
    ScoreBreakdown,
    parse_specification,
    prompt_id,
    serialize_specification,
    specification_from_json,
)
from .reward import ADVANTAGE_SCALE, VariantUnsupported, group_advantages
from .scoring import JudgeUnavailable, Scorer

logger = logging.getLogger(__name__)


class ArtifactNotFound(RewardSpecError, KeyError):
    pass


class CorruptArtifact(RewardSpecError):
    pass


class Busy(RewardSpecError):
    """The scoring queue is full; the request was not started."""


class ArtifactStore:
    """One JSON file per prompt id under `root`, fronted by an LRU cache."""

    def __init__(self, root: str | Path, cache_size: int = 10_000):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.cache_size = cache_size
        self._cache: OrderedDict[str, RewardSpecification] = OrderedDict()
        self._lock = threading.Lock()

    def path(self, pid: str) -> Path:
        if not pid or not all(c in "0123456789abcdef" for c in pid):
            raise ArtifactNotFound(pid)
        return self.root / f"{pid}.json"

    def __contains__(self, pid: str) -> bool:
        try:
            return self.path(pid).exists()
        except ArtifactNotFound:
            return False

    def ids(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.json"))

    def _remember(self, pid: str, spec: RewardSpecification) -> None:
        with self._lock:
            self._cache[pid] = spec
            self._cache.move_to_end(pid)
            while len(self._cache) > self.cache_size:
                self._cache.popitem(last=False)

    def put(self, spec: RewardSpecification) -> str:
        data = serialize_specification(spec)
        target = self.path(spec.prompt_id)
        fd, tmp = tempfile.mkstemp(dir=self.root, prefix=".tmp-", suffix=".json")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, target)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
        self._remember(spec.prompt_id, spec)
        return spec.prompt_id

    def get_bytes(self, pid: str) -> bytes:
        try:
            return self.path(pid).read_bytes()
        except FileNotFoundError:
            raise ArtifactNotFound(pid) from None

    def get(self, pid: str) -> RewardSpecification:
        with self._lock:
            spec = self._cache.get(pid)
            if spec is not None:
                self._cache.move_to_end(pid)
                return spec
        data = self.get_bytes(pid)
        try:
            spec = parse_specification(data)
        except ParseError as exc:
            raise CorruptArtifact(f"{pid}: {exc}") from exc
        if spec.prompt_id != pid:
            raise CorruptArtifact(f"{pid}: stored prompt_id is {spec.prompt_id}")
        self._remember(pid, spec)
        return spec


@dataclass(frozen=True)
class SchedulerConfig:
    max_inflight_scores: int = 64
    max_inflight_judge_calls: int = 32
    queue_capacity: int = 256

    def __post_init__(self):
        if min(self.max_inflight_scores, self.max_inflight_judge_calls) < 1 or self.queue_capacity < 0:
            raise ValueError("scheduler limits must be positive")


class Scheduler:
    """At most `max_inflight_scores` requests run; up to `queue_capacity` more wait; the rest get Busy."""

    def __init__(self, cfg: SchedulerConfig = SchedulerConfig()):
        self.cfg = cfg
        self._slots = threading.Semaphore(cfg.max_inflight_scores)
        self._lock = threading.Lock()
        self.admitted = 0
        self.running = 0
        self.peak_running = 0

    @contextmanager
    def slot(self):
        with self._lock:
            if self.admitted >= self.cfg.max_inflight_scores + self.cfg.queue_capacity:
                raise Busy("scoring queue is full")
            self.admitted += 1
        try:
            with self._slots:
                with self._lock:
                    self.running += 1
                    self.peak_running = max(self.peak_running, self.running)
                try:
                    yield
                finally:
                    with self._lock:
                        self.running -= 1
        finally:
            with self._lock:
                self.admitted -= 1


@dataclass(frozen=True)
class GroupResult:
    scores: tuple[ScoreBreakdown, ...]
    advantages: tuple[float, ...]


class RewardService:
    """Request-scoped scoring and idempotent construction over an artifact store."""

    def __init__(self, store: ArtifactStore, scorer: Scorer, scheduler: Scheduler | None = None,
                 builder_gateway: Gateway | None = None, builder_cfg: BuilderConfig | None = None,
                 clock=None):
        self.store = store
        self.scorer = scorer
        self.scheduler = scheduler or Scheduler()
        self.builder_gateway = builder_gateway
        self.builder_cfg = builder_cfg or BuilderConfig()
        self.clock = clock
        self._workers = concurrent.futures.ThreadPoolExecutor(
            self.scheduler.cfg.max_inflight_scores, thread_name_prefix="score")
        self._build_locks: dict[str, threading.Lock] = {}
        self._build_guard = threading.Lock()

    def close(self) -> None:
        self._workers.shutdown(wait=True)
        self.scorer.close()

    def resolve(self, pid: str | None = None, spec: Any = None) -> RewardSpecification:
        if spec is not None:
            return spec if isinstance(spec, RewardSpecification) else specification_from_json(spec)
        if pid is None:
            raise ArtifactNotFound("request names neither prompt_id nor spec")
        return self.store.get(pid)

    def score(self, response: str, pid: str | None = None, spec: Any = None, step: int | None = None,
              variant: str = "R+G+C") -> ScoreBreakdown:
        resolved = self.resolve(pid, spec)
        with self.scheduler.slot():
            return self.scorer.score(resolved, response, step=step, variant=variant)

    def score_group(self, responses: Sequence[str], pid: str | None = None, spec: Any = None,
                    step: int | None = None, variant: str = "R+G+C") -> GroupResult:
        if not responses:
            raise ValueError("score_group needs at least one response")
        resolved = self.resolve(pid, spec)
        with self.scheduler.slot():
            futures = [self._workers.submit(self.scorer.score, resolved, r, step, None, variant) for r in responses]
            scores = tuple(f.result() for f in futures)
        return GroupResult(scores, tuple(group_advantages([s.reward for s in scores], ADVANTAGE_SCALE)))

    def _lock_for(self, pid: str) -> threading.Lock:
        with self._build_guard:
            return self._build_locks.setdefault(pid, threading.Lock())

    def construct_one(self, prompt: str | Prompt, force: bool = False) -> dict:
        text = prompt.text if isinstance(prompt, Prompt) else prompt
        try:
            pid = prompt_id(text)
        except RewardSpecError as exc:
            return {"prompt_id": None, "status": "failed", "rebuilt": False, "flags": [], "error": str(exc)}
        with self._lock_for(pid):
            if not force and pid in self.store:
                return {"prompt_id": pid, "status": "existing", "rebuilt": False, "flags": []}
            if self.builder_gateway is None:
                return {"prompt_id": pid, "status": "failed", "rebuilt": False, "flags": [],
                        "error": "no builder gateway configured"}
            flags: list[str] = []
            try:
                kwargs = {"clock": self.clock} if self.clock else {}
                spec = build_specification(self.builder_gateway, text, self.builder_cfg, flags, **kwargs)
            except Exception as exc:  # one prompt never aborts the batch
                logger.warning("construction failed for %s: %s", pid[:12], exc)
                return {"prompt_id": pid, "status": "failed", "rebuilt": False, "flags": flags,
                        "error": f"{type(exc).__name__}: {exc}"}
            self.store.put(spec)
            return {"prompt_id": pid, "status": "built", "rebuilt": True, "flags": flags}

    def construct(self, prompts: Iterable[str | Prompt], force: bool = False) -> list[dict]:
        futures = [self._workers.submit(self.construct_one, p, force) for p in prompts]
        return [f.result() for f in futures]


def build_report(results: Sequence[dict]) -> dict:
    flags: dict[str, int] = {}
    for r in results:
        for f in r.get("flags", []):
            key = f.split(":", 1)[0]
            flags[key] = flags.get(key, 0) + 1
    statuses = [r["status"] for r in results]
    return {
        "total": len(results),
        "built": statuses.count("built"),
        "existing": statuses.count("existing"),
        "failed": statuses.count("failed"),
        "flag_counts": dict(sorted(flags.items())),
        "artifacts": list(results),
    }


# --------------------------------------------------------------------------
# HTTP API


class PromptItem(BaseModel):
    prompt: str
    source: str | None = None


class ConstructBody(BaseModel):
    prompts: list[PromptItem]
    force: bool = False


class ScoreBody(BaseModel):
    prompt_id: str | None = None
    spec: dict | None = None
    response: str
    step: int | None = Field(default=None, ge=0)
    variant: str = "R+G+C"
    request_id: str | None = None


class GroupBody(BaseModel):
    prompt_id: str | None = None
    spec: dict | None = None
    responses: list[str] = Field(min_length=1)
    step: int | None = Field(default=None, ge=0)
    variant: str = "R+G+C"
    request_id: str | None = None


def create_app(service: RewardService, token: str | None = None):
    """FastAPI application over `service`. With `token`, requests need a matching bearer header."""
    from fastapi import Depends, FastAPI, Header, HTTPException
    from fastapi.responses import JSONResponse, Response

    def auth(authorization: str | None = Header(default=None)):
        if token is not None and authorization != f"Bearer {token}":
            raise HTTPException(401, "missing or invalid token")

    app = FastAPI(title="rewardspec", dependencies=[Depends(auth)])

    @app.exception_handler(RewardSpecError)
    def _errors(request, exc: RewardSpecError):
        if isinstance(exc, Busy):
            return JSONResponse({"error": "busy", "detail": str(exc)}, status_code=503)
        if isinstance(exc, ArtifactNotFound):
            return JSONResponse({"error": "artifact_not_found", "detail": str(exc)}, status_code=404)
        if isinstance(exc, JudgeUnavailable):
            return JSONResponse({"error": "judge_unavailable", "detail": str(exc)}, status_code=502)
        if isinstance(exc, (ParseError, VariantUnsupported)):
            return JSONResponse({"error": type(exc).__name__, "detail": str(exc)}, status_code=422)
        return JSONResponse({"error": type(exc).__name__, "detail": str(exc)}, status_code=500)

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/v1/artifacts")
    def post_artifacts(body: ConstructBody):
        results = service.construct([p.prompt for p in body.prompts], body.force)
        return {"artifacts": results}

    @app.get("/v1/artifacts/{pid}")
    def get_artifact(pid: str):
        return Response(service.store.get_bytes(pid), media_type="application/json")

    @app.post("/v1/score")
    def post_score(body: ScoreBody):
        start = time.perf_counter()
        breakdown = service.score(body.response, body.prompt_id, body.spec, body.step, body.variant)
        return {**breakdown.to_json(), "request_id": body.request_id or uuid.uuid4().hex,
                "timing": {"elapsed_ms": (time.perf_counter() - start) * 1000.0}}

    @app.post("/v1/score_group")
    def post_score_group(body: GroupBody):
        start = time.perf_counter()
        result = service.score_group(body.responses, body.prompt_id, body.spec, body.step, body.variant)
        return {
            "scores": [s.to_json() for s in result.scores],
            "advantages": list(result.advantages),
            "request_id": body.request_id or uuid.uuid4().hex,
            "timing": {"elapsed_ms": (time.perf_counter() - start) * 1000.0},
        }

    return app
