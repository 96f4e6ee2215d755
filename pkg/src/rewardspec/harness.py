"""Offline evaluation: RM-style ranking, component ablations, reliability
diagnostics over repeated rescoring, and prompt dedup / decontamination.

Everything here is a pure function of stored scores, so the metrics rerun
bit-for-bit without any live model.
"""

from __future__ import annotations

import difflib
import math
import re
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .grammar import quoted_spans
from .model import RewardSpecification, ScoreBreakdown, normalize_prompt_text
from .reward import group_advantages
from .scoring import Scorer


def score_variant(scorer: Scorer, spec: RewardSpecification, response: str, variant: str = "R+G+C",
                  alpha: float | None = None, step: int | None = None) -> ScoreBreakdown:
    return scorer.score(spec, response, step=step, alpha=alpha, variant=variant)


# --------------------------------------------------------------------------
# RM-style ranking


@dataclass(frozen=True)
class RankingInstance:
    prompt_id: str
    candidates: tuple[str, ...]
    chosen_index: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        if len(self.candidates) < 2:
            raise ValueError("a ranking instance needs at least two candidates")
        if self.chosen_index is not None and not 0 <= self.chosen_index < len(self.candidates):
            raise ValueError(f"chosen_index {self.chosen_index} out of range")


@dataclass(frozen=True)
class RankResult:
    order: tuple[int, ...]
    rewards: tuple[float, ...]
    success: bool | None


def rank_candidates(rewards: Sequence[float], chosen_index: int | None = None) -> RankResult:
    """Descending order, ties kept in index order. Success iff chosen is the unique strict max."""
    order = tuple(sorted(range(len(rewards)), key=lambda i: -rewards[i]))
    success = None
    if chosen_index is not None:
        top = rewards[chosen_index]
        success = all(r < top for i, r in enumerate(rewards) if i != chosen_index)
    return RankResult(order, tuple(rewards), success)


def rank_instance(scorer: Scorer, spec: RewardSpecification, instance: RankingInstance,
                  variant: str = "R+G+C", alpha: float | None = None) -> RankResult:
    rewards = [score_variant(scorer, spec, c, variant, alpha).reward for c in instance.candidates]
    return rank_candidates(rewards, instance.chosen_index)


def selection_accuracy(results: Iterable[RankResult]) -> float:
    judged = [r.success for r in results if r.success is not None]
    if not judged:
        raise ValueError("no instance carries a chosen index")
    return sum(judged) / len(judged)


# --------------------------------------------------------------------------
# reliability diagnostics


@dataclass(frozen=True)
class ReliabilityGroup:
    """Candidates for one prompt, their checker pass bits, and K rescoring runs.

    `passes[i][j]` is whether candidate i passes valid checker j;
    `runs[k][i]` is candidate i's reward in run k.
    """

    prompt_id: str
    passes: tuple[tuple[bool, ...], ...]
    runs: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "passes", tuple(tuple(bool(b) for b in p) for p in self.passes))
        object.__setattr__(self, "runs", tuple(tuple(r) for r in self.runs))
        if not self.passes:
            raise ValueError("a reliability group needs candidates")
        if not self.runs:
            raise ValueError("a reliability group needs at least one rescoring run")
        if any(len(run) != len(self.passes) for run in self.runs):
            raise ValueError("every run must score every candidate")

    @property
    def pass_counts(self) -> list[int]:
        return [sum(p) for p in self.passes]

    def passes_all(self, i: int) -> bool:
        return all(self.passes[i])


def _argmax_lowest(values: Sequence[float]) -> tuple[int, bool]:
    best = max(values)
    winners = [i for i, v in enumerate(values) if v == best]
    return winners[0], len(winners) > 1


def top1_exact_pass(groups: Sequence[ReliabilityGroup], flags: list | None = None) -> float:
    """Share of (group, run) pairs whose top-reward candidate passes every valid checker."""
    hits = total = 0
    for g in groups:
        for k, run in enumerate(g.runs):
            top, tied = _argmax_lowest(run)
            if tied and flags is not None:
                flags.append(f"top1_tie:{g.prompt_id}:{k}")
            hits += g.passes_all(top)
            total += 1
    if total == 0:
        raise ValueError("no (group, run) pairs")
    return hits / total


def discordant_inversion_rate(groups: Sequence[ReliabilityGroup], flags: list | None = None) -> float:
    """Among pairs where i passes fewer checkers than j, the share with reward(i) > reward(j).

    Averaged over pairs, then runs, then groups. Groups without any such
    pair are excluded (and flagged); NaN if every group is excluded.
    """
    per_group = []
    for g in groups:
        counts = g.pass_counts
        pairs = [(i, j) for i in range(len(counts)) for j in range(len(counts)) if counts[i] < counts[j]]
        if not pairs:
            if flags is not None:
                flags.append(f"inversion_group_excluded:{g.prompt_id}")
            continue
        # exact rationals, so the nested averages do not accumulate rounding
        per_run = [Fraction(sum(run[i] > run[j] for i, j in pairs), len(pairs)) for run in g.runs]
        per_group.append(sum(per_run) / len(per_run))
    if not per_group:
        return math.nan
    return float(sum(per_group) / len(per_group))


def advantage_sign_flip_rate(groups: Sequence[ReliabilityGroup], scale: float = 6.0) -> float:
    """Share of candidates whose advantage is strictly positive in one run and strictly negative in another."""
    flipped = total = 0
    for g in groups:
        adv = [group_advantages(run, scale) for run in g.runs]
        for i in range(len(g.passes)):
            signs = {math.copysign(1, a[i]) for a in adv if a[i] != 0}
            flipped += len(signs) == 2
            total += 1
    if total == 0:
        raise ValueError("no candidates")
    return flipped / total


# --------------------------------------------------------------------------
# dedup and decontamination


@dataclass(frozen=True)
class PromptRecord:
    text: str
    source: str | None = None


def _records(prompts: Iterable) -> list[PromptRecord]:
    out = []
    for p in prompts:
        if isinstance(p, PromptRecord):
            out.append(p)
        elif isinstance(p, str):
            out.append(PromptRecord(p))
        elif isinstance(p, Mapping):
            out.append(PromptRecord(p["prompt"], p.get("source")))
        else:
            out.append(PromptRecord(p.text, getattr(p, "source", None)))
    return out


def dedup_prompts(prompts: Iterable) -> tuple[list[PromptRecord], dict]:
    """Normalized exact-match dedup; the first occurrence survives."""
    first: dict[str, int] = {}
    kept: list[PromptRecord] = []
    removed = []
    records = _records(prompts)
    for idx, rec in enumerate(records):
        key = normalize_prompt_text(rec.text)
        if key in first:
            removed.append({"index": idx, "source": rec.source, "duplicate_of": first[key]})
            continue
        first[key] = idx
        kept.append(rec)
    return kept, {"total": len(records), "kept": len(kept), "removed": len(removed), "duplicates": removed}


@dataclass(frozen=True)
class DecontaminationRule:
    ngram_size: int = 8
    containment_threshold: float = 0.6
    min_span_chars: int = 40
    anchor_kinds: frozenset = field(default_factory=lambda: frozenset({"quoted", "entity", "span"}))

    def __post_init__(self):
        if self.ngram_size < 1:
            raise ValueError("ngram_size must be positive")
        if not 0 < self.containment_threshold <= 1:
            raise ValueError("containment_threshold must be in (0, 1]")


_TOKEN = re.compile(r"\w+")
_ENTITY = re.compile(r"\b[A-Z][\w'-]*(?:\s+[A-Z][\w'-]*)+")


def _tokens(text: str) -> list[str]:
    return _TOKEN.findall(normalize_prompt_text(text).lower())


def ngrams(text: str, n: int) -> set[tuple[str, ...]]:
    toks = _tokens(text)
    return {tuple(toks[i:i + n]) for i in range(len(toks) - n + 1)}


def containment(train: str, evaluation: str, n: int = 8) -> float:
    """Fraction of the training prompt's n-grams that also occur in the eval prompt."""
    mine = ngrams(train, n)
    if not mine:
        return 0.0
    return len(mine & ngrams(evaluation, n)) / len(mine)


def shared_anchor(a: str, b: str, rule: DecontaminationRule = DecontaminationRule()) -> str | None:
    """Kind of the first substantive anchor both prompts share, or None."""
    if "quoted" in rule.anchor_kinds:
        qa = {normalize_prompt_text(s) for s in quoted_spans(a) if s.strip()}
        qb = {normalize_prompt_text(s) for s in quoted_spans(b) if s.strip()}
        if qa & qb:
            return "quoted"
    if "entity" in rule.anchor_kinds:
        ea = {normalize_prompt_text(m) for m in _ENTITY.findall(a)}
        if ea & {normalize_prompt_text(m) for m in _ENTITY.findall(b)}:
            return "entity"
    if "span" in rule.anchor_kinds:
        na, nb = normalize_prompt_text(a), normalize_prompt_text(b)
        m = difflib.SequenceMatcher(None, na, nb, autojunk=False).find_longest_match(0, len(na), 0, len(nb))
        if m.size >= rule.min_span_chars:
            return "span"
    return None


def decontaminate(train: Iterable, eval_sets: Mapping[str, Iterable[str]],
                  rule: DecontaminationRule = DecontaminationRule()) -> tuple[list[PromptRecord], dict]:
    """Drop training prompts that overlap an evaluation prompt at the instance level.

    A prompt goes if it matches an eval prompt exactly after normalization, or
    if its n-gram containment reaches the threshold AND the pair shares an
    anchor. Template-level similarity alone never removes a prompt.
    """
    train_recs = _records(train)
    exact: dict[str, str] = {}
    index: dict[tuple, set[tuple[str, int]]] = defaultdict(set)
    texts: dict[tuple[str, int], str] = {}
    for name, prompts in eval_sets.items():
        for j, text in enumerate(prompts):
            exact.setdefault(normalize_prompt_text(text), name)
            texts[(name, j)] = text
            for g in ngrams(text, rule.ngram_size):
                index[g].add((name, j))

    kept: list[PromptRecord] = []
    removed = []
    per_benchmark = {name: 0 for name in eval_sets}
    for idx, rec in enumerate(train_recs):
        hit = None
        bench = exact.get(normalize_prompt_text(rec.text))
        if bench is not None:
            hit = {"index": idx, "benchmark": bench, "rule": "exact"}
        else:
            mine = ngrams(rec.text, rule.ngram_size)
            overlap: dict[tuple[str, int], int] = defaultdict(int)
            for g in mine:
                for key in index.get(g, ()):
                    overlap[key] += 1
            for key in sorted(overlap, key=lambda k: (-overlap[k], k)):
                ratio = overlap[key] / len(mine)
                if ratio < rule.containment_threshold:
                    break
                anchor = shared_anchor(rec.text, texts[key], rule)
                if anchor is not None:
                    hit = {"index": idx, "benchmark": key[0], "rule": "ngram_anchor",
                           "containment": ratio, "anchor": anchor}
                    break
        if hit is None:
            kept.append(rec)
        else:
            per_benchmark[hit["benchmark"]] += 1
            removed.append(hit)
    report = {
        "total": len(train_recs),
        "clean": len(kept),
        "removed": len(removed),
        "per_benchmark": per_benchmark,
        "removed_items": removed,
    }
    return kept, report
