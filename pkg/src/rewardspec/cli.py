"""Command-line entry point: `rewardspec <command> ...`.

Reports go to stdout as JSON; logs go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .config import AppConfig, load_config
from .engine import run_all
from .gateway import GatewayError, load_transcripts
from .harness import (
    DecontaminationRule,
    RankingInstance,
    ReliabilityGroup,
    advantage_sign_flip_rate,
    decontaminate,
    discordant_inversion_rate,
    rank_instance,
    selection_accuracy,
    top1_exact_pass,
)
from .model import RewardSpecError, parse_specification, prompt_id
from .reward import VARIANTS, checker_score, group_advantages
from .scoring import JudgeUnavailable, Scorer
from .service import ArtifactNotFound, ArtifactStore, RewardService, Scheduler, SchedulerConfig, build_report, create_app

logger = logging.getLogger("rewardspec")


def _read_jsonl(path: str | Path) -> list:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _read_records(path: str | Path) -> list:
    """JSON array or JSON Lines, by content."""
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("["):
        return json.loads(stripped)
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def _clean(value):
    if isinstance(value, float) and math.isnan(value):
        return None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def _emit(doc, out: str | None = None) -> None:
    text = json.dumps(_clean(doc), ensure_ascii=False, indent=2)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _config(args) -> AppConfig:
    cfg = load_config(getattr(args, "config", None))
    if getattr(args, "replay", None):
        cfg.gateway.mode = "replay"
        cfg.gateway.transcript = None
    if getattr(args, "artifacts", None):
        cfg.store.root = args.artifacts
    return cfg


def _gateway(cfg: AppConfig, args, role: str):
    replay = getattr(args, "replay", None)
    transcript = load_transcripts(replay) if replay else None
    return cfg.make_gateway(role, transcript)


def _scorer(cfg: AppConfig, args) -> Scorer:
    judge = _gateway(cfg, args, "judge")
    scorer_gw = judge if cfg.roles["scorer"].base_url in (None, cfg.roles["judge"].base_url) \
        else _gateway(cfg, args, "scorer")
    return Scorer(judge, cfg.scoring_config(), global_gateway=scorer_gw)


def _load_spec(args, store: ArtifactStore | None = None):
    if getattr(args, "artifact", None):
        return parse_specification(Path(args.artifact).read_bytes())
    if store is None:
        store = ArtifactStore(args.artifacts)
    return store.get(args.prompt_id)


def _response(args) -> str:
    if args.response_file:
        return Path(args.response_file).read_text(encoding="utf-8")
    if args.response is None:
        raise SystemExit("give --response or --response-file")
    return args.response


# ---- commands


def cmd_serve(args) -> int:
    import uvicorn

    cfg = _config(args)
    store = ArtifactStore(cfg.store.root, cfg.store.cache_size)
    sched = Scheduler(SchedulerConfig(cfg.scheduler.max_inflight_scores, cfg.scheduler.max_inflight_judge_calls,
                                      cfg.scheduler.queue_capacity))
    service = RewardService(store, _scorer(cfg, args), sched, _gateway(cfg, args, "constraint_extractor"),
                            cfg.builder_config())
    uvicorn.run(create_app(service, args.token), host=args.host, port=args.port)
    return 0


def cmd_construct(args) -> int:
    cfg = _config(args)
    cfg.store.root = args.out
    if args.max_regen is not None:
        cfg.builder.max_regeneration = args.max_regen
    store = ArtifactStore(args.out, cfg.store.cache_size)
    service = RewardService(store, _scorer(cfg, args), builder_gateway=_gateway(cfg, args, "constraint_extractor"),
                            builder_cfg=cfg.builder_config())
    try:
        prompts = [rec["prompt"] for rec in _read_jsonl(args.prompts)]
        report = build_report(service.construct(prompts, force=args.force))
    finally:
        service.close()
    _emit(report, str(Path(args.out) / "build_report.json"))
    _emit({k: report[k] for k in ("total", "built", "existing", "failed", "flag_counts")})
    return 0 if report["failed"] == 0 else 1


def cmd_score(args) -> int:
    cfg = _config(args)
    spec = _load_spec(args)
    with _scorer(cfg, args) as scorer:
        result = scorer.score(spec, _response(args), step=args.step, alpha=args.alpha, variant=args.variant)
    _emit(result.to_json())
    return 0


def cmd_score_group(args) -> int:
    cfg = _config(args)
    spec = _load_spec(args)
    responses = [r if isinstance(r, str) else r["response"] for r in _read_records(args.responses)]
    with _scorer(cfg, args) as scorer:
        scores = [scorer.score(spec, r, step=args.step, variant=args.variant) for r in responses]
    _emit({"scores": [s.to_json() for s in scores], "advantages": group_advantages([s.reward for s in scores])})
    return 0


def _instances(path) -> list[RankingInstance]:
    return [RankingInstance(rec["prompt_id"], tuple(rec["candidates"]), rec.get("chosen_index"))
            for rec in _read_records(path)]


def cmd_rank(args) -> int:
    cfg = _config(args)
    spec = _load_spec(args)
    candidates = [r if isinstance(r, str) else r["response"] for r in _read_records(args.candidates)]
    with _scorer(cfg, args) as scorer:
        result = rank_instance(scorer, spec, RankingInstance(spec.prompt_id, tuple(candidates), args.chosen),
                               args.variant, args.alpha)
    _emit({"order": result.order, "rewards": result.rewards, "success": result.success})
    return 0


def cmd_eval_rm(args) -> int:
    cfg = _config(args)
    store = ArtifactStore(args.artifacts)
    per_instance = []
    with _scorer(cfg, args) as scorer:
        for inst in _instances(args.instances):
            res = rank_instance(scorer, store.get(inst.prompt_id), inst, args.variant, args.alpha)
            per_instance.append({"prompt_id": inst.prompt_id, "order": res.order,
                                 "rewards": res.rewards, "success": res.success, "_res": res})
    acc = selection_accuracy([p.pop("_res") for p in per_instance])
    _emit({"variant": args.variant, "instances": len(per_instance), "accuracy": acc, "per_instance": per_instance})
    return 0


def cmd_reliability(args) -> int:
    groups = []
    for rec in _read_records(args.groups):
        runs = rec["runs"]
        if args.runs is not None:
            if len(runs) < args.runs:
                raise SystemExit(f"group {rec['prompt_id']} has {len(runs)} runs, fewer than --runs {args.runs}")
            runs = runs[: args.runs]
        groups.append(ReliabilityGroup(rec["prompt_id"], rec["passes"], runs))
    flags: list[str] = []
    _emit({
        "groups": len(groups),
        "top1_exact_pass": top1_exact_pass(groups, flags),
        "discordant_inversion_rate": discordant_inversion_rate(groups, flags),
        "advantage_sign_flip_rate": advantage_sign_flip_rate(groups),
        "flags": flags,
    })
    return 0


def cmd_check(args) -> int:
    spec = _load_spec(args)
    outcomes = run_all(spec, _response(args))
    s_c, n = checker_score(outcomes)
    _emit({
        "s_c": s_c,
        "n": n,
        "checkers": [
            {"type": c.origin.type.value, "constraint": c.origin.constraint, "passed": o.passed,
             "status": o.status.value, "error": o.error}
            for c, o in zip(spec.checkers, outcomes)
        ],
    })
    return 0


def cmd_decontaminate(args) -> int:
    train = _read_records(args.train)
    eval_sets = {}
    for path in args.eval:
        eval_sets[Path(path).stem] = [r if isinstance(r, str) else r["prompt"] for r in _read_records(path)]
    kept, report = decontaminate(train, eval_sets, DecontaminationRule(args.ngram, args.threshold))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            for rec in kept:
                fh.write(json.dumps({"prompt": rec.text, "source": rec.source}, ensure_ascii=False) + "\n")
    _emit(report)
    return 0


def cmd_replay_export(args) -> int:
    merged = load_transcripts(args.transcripts)
    n = merged.export(args.out)
    _emit({"entries": n, "out": args.out})
    return 0


def cmd_prompt_id(args) -> int:
    print(prompt_id(args.text))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rewardspec", description="Prompt-level reward artifacts and hybrid scoring.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, replay=True):
        sp.add_argument("--config", help="TOML or JSON config file")
        if replay:
            sp.add_argument("--replay", nargs="+", metavar="FILE", help="replay transcript(s); no network")

    def spec_source(sp):
        sp.add_argument("--artifact", help="artifact JSON file")
        sp.add_argument("--artifacts", help="artifact store directory")
        sp.add_argument("--prompt-id")

    sp = sub.add_parser("serve", help="run the HTTP scoring service")
    common(sp)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8080)
    sp.add_argument("--artifacts", help="artifact store directory")
    sp.add_argument("--token", help="shared bearer token required on every request")
    sp.set_defaults(func=cmd_serve)

    sp = sub.add_parser("construct", help="build artifacts from a JSONL prompt file")
    common(sp)
    sp.add_argument("--prompts", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--max-regen", type=int)
    sp.add_argument("--force", action="store_true")
    sp.set_defaults(func=cmd_construct)

    for name, func in (("score", cmd_score), ("score-group", cmd_score_group), ("rank", cmd_rank)):
        sp = sub.add_parser(name)
        common(sp)
        spec_source(sp)
        sp.add_argument("--variant", default="R+G+C", choices=VARIANTS)
        sp.add_argument("--step", type=int)
        sp.add_argument("--alpha", type=float)
        if name == "score":
            sp.add_argument("--response")
            sp.add_argument("--response-file")
        elif name == "score-group":
            sp.add_argument("--responses", required=True, help="JSON array or JSONL of responses")
        else:
            sp.add_argument("--candidates", required=True, help="JSON array or JSONL of candidates")
            sp.add_argument("--chosen", type=int)
        sp.set_defaults(func=func)

    sp = sub.add_parser("eval-rm", help="RM-style selection accuracy over ranking instances")
    common(sp)
    sp.add_argument("--instances", required=True)
    sp.add_argument("--artifacts", required=True)
    sp.add_argument("--variant", default="R+G+C", choices=VARIANTS)
    sp.add_argument("--alpha", type=float)
    sp.set_defaults(func=cmd_eval_rm)

    sp = sub.add_parser("reliability", help="top-1 exact pass, inversion and sign-flip rates")
    sp.add_argument("--groups", required=True)
    sp.add_argument("--runs", type=int)
    sp.set_defaults(func=cmd_reliability)

    sp = sub.add_parser("check", help="run an artifact's checkers on a response (no LLM)")
    spec_source(sp)
    sp.add_argument("--response")
    sp.add_argument("--response-file")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("decontaminate", help="remove training prompts overlapping eval sets")
    sp.add_argument("--train", required=True)
    sp.add_argument("--eval", nargs="+", required=True)
    sp.add_argument("--ngram", type=int, default=8)
    sp.add_argument("--threshold", type=float, default=0.6)
    sp.add_argument("--out", help="write surviving prompts as JSONL")
    sp.set_defaults(func=cmd_decontaminate)

    sp = sub.add_parser("replay-export", help="merge transcripts into one replay fixture")
    sp.add_argument("--transcripts", nargs="+", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_replay_export)

    sp = sub.add_parser("prompt-id", help="print the content id of a prompt")
    sp.add_argument("text")
    sp.set_defaults(func=cmd_prompt_id)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ArtifactNotFound as exc:
        code, err = 3, exc
    except (JudgeUnavailable, GatewayError) as exc:
        code, err = 4, exc
    except (RewardSpecError, ValueError, OSError) as exc:
        code, err = 2, exc
    print(json.dumps({"error": type(err).__name__, "detail": str(err)}), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
