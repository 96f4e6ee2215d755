import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import reliability_oracle as ref
from fakes import FakeLLM, fixed_clock, recording_gateway
from fixtures import record_build
from rewardspec.harness import (
    DecontaminationRule,
    PromptRecord,
    RankingInstance,
    RankResult,
    ReliabilityGroup,
    advantage_sign_flip_rate,
    containment,
    decontaminate,
    dedup_prompts,
    discordant_inversion_rate,
    ngrams,
    rank_candidates,
    rank_instance,
    score_variant,
    selection_accuracy,
    shared_anchor,
    top1_exact_pass,
)
from rewardspec.scoring import Scorer


# -- ranking ---------------------------------------------------------------

def test_rank_candidates_strict_max():
    assert rank_candidates([0.7, 0.9, 0.8], chosen_index=1).success is True
    assert rank_candidates([0.8, 0.8, 0.1], chosen_index=0).success is False
    r = rank_candidates([0.5, 0.9, 0.5])
    assert r.order == (1, 0, 2) and r.success is None


def test_selection_accuracy_matches_hand_count():
    rng = random.Random(3)
    results, expected = [], 0
    for k in range(10):
        rewards = [rng.randint(0, 4) / 4 for _ in range(4)]
        chosen = k % 4
        results.append(rank_candidates(rewards, chosen))
        expected += sum(r >= rewards[chosen] for r in rewards) == 1
    assert selection_accuracy(results) == expected / 10
    with pytest.raises(ValueError):
        selection_accuracy([RankResult((0, 1), (0.1, 0.2), None)])


@given(st.lists(st.integers(0, 5), min_size=2, max_size=8), st.randoms())
def test_rank_stable_under_permutation(rewards, rnd):
    perm = list(range(len(rewards)))
    rnd.shuffle(perm)
    base = rank_candidates(rewards).order
    permuted = rank_candidates([rewards[p] for p in perm]).order
    # map back to original identities and compare reward sequences (ties may reorder)
    assert [rewards[perm[i]] for i in permuted] == [rewards[i] for i in base]


def test_ranking_instance_validation():
    with pytest.raises(ValueError):
        RankingInstance("p", ("only one",))
    with pytest.raises(ValueError):
        RankingInstance("p", ("a", "b"), chosen_index=2)


def test_rank_instance_end_to_end():
    spec, _ = record_build(3, clock=fixed_clock)
    good = ("Sure! Solar panels are devices that turn the light of the sun into energy for the home.\n\n"
            "P2\n\nP3\n\nP4\n\nThe end. Solar energy matters.")
    bad = "- bullet\n- list"
    fake = FakeLLM(judge=lambda c, a: "yes" if a.startswith("Sure") else "no",
                   global_score=lambda a: "[[9]]" if a.startswith("Sure") else "[[2]]")
    with Scorer(recording_gateway(fake)) as scorer:
        res = rank_instance(scorer, spec, RankingInstance(spec.prompt_id, (bad, good), chosen_index=1))
        assert res.success and res.order == (1, 0)
        assert score_variant(scorer, spec, good, "R").reward == 1.0


# -- reliability ------------------------------------------------------------

def _group(passes, runs, pid="g"):
    return ReliabilityGroup(pid, passes, runs)


def test_reliability_group_validation():
    with pytest.raises(ValueError):
        _group((), ((),))
    with pytest.raises(ValueError):
        _group(((True,),), ())
    with pytest.raises(ValueError):
        _group(((True,), (False,)), ((0.1,),))


def test_top1_examples_and_tie_flag():
    g = _group(((True, True), (True, False)), ((0.9, 0.1),))
    assert top1_exact_pass([g]) == 1.0
    flags = []
    tied = _group(((False,), (True,)), ((0.5, 0.5),), pid="t")
    assert top1_exact_pass([tied], flags) == 0.0
    assert flags == ["top1_tie:t:0"]


def test_top1_seven_of_ten():
    groups = [_group(((True,), (False,)), ((1.0, 0.0),) if i < 7 else ((0.0, 1.0),), f"g{i}") for i in range(10)]
    assert top1_exact_pass(groups) == 0.7


def test_inversion_examples():
    aligned = _group(((True, True), (True, False), (False, False)), ((0.9, 0.5, 0.1),))
    assert discordant_inversion_rate([aligned]) == 0.0
    # counts [0, 1, 1, 2] -> comparable pairs (0,1) (0,2) (0,3) (1,3) (2,3): 5. Build a 4-pair case instead.
    g = _group(((False,), (False,), (True,), (True,)), ((0.9, 0.1, 0.5, 0.5),))
    # pairs: (0,2) inverted, (0,3) inverted, (1,2) ok, (1,3) ok -> 2/4
    assert discordant_inversion_rate([g]) == 0.5
    g1 = _group(((False,), (False,), (True,), (True,)), ((0.6, 0.1, 0.5, 0.7),))
    assert discordant_inversion_rate([g1]) == 0.25


def test_inversion_excludes_flat_groups():
    flags = []
    flat = _group(((True,), (True,)), ((0.1, 0.9),), pid="flat")
    assert math.isnan(discordant_inversion_rate([flat], flags))
    assert flags == ["inversion_group_excluded:flat"]


def test_sign_flip_examples():
    steady = _group(((True,), (False,)), ((0.9, 0.1), (0.9, 0.1)))
    assert advantage_sign_flip_rate([steady]) == 0.0
    flip = _group(((True,), (False,)), ((0.6, 0.5), (0.5, 0.6)))
    assert advantage_sign_flip_rate([flip]) == 1.0
    passes = tuple((i % 2 == 0,) for i in range(16))
    run_a = tuple(i / 16 for i in range(16))
    run_b = tuple(15 / 16 - i / 16 if i < 3 else i / 16 for i in range(16))
    rate = advantage_sign_flip_rate([_group(passes, (run_a, run_b))])
    assert rate == float(ref.sign_flip([_group(passes, (run_a, run_b))]))


def test_brute_force_equivalence():
    groups = ref.synthetic_groups(50)
    assert top1_exact_pass(groups) == float(ref.top1(groups))
    assert discordant_inversion_rate(groups) == float(ref.inversion(groups))
    assert advantage_sign_flip_rate(groups) == float(ref.sign_flip(groups))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_brute_force_equivalence_random_seeds(seed):
    groups = ref.synthetic_groups(5, seed=seed)
    assert top1_exact_pass(groups) == float(ref.top1(groups))
    assert discordant_inversion_rate(groups) == float(ref.inversion(groups))
    assert advantage_sign_flip_rate(groups) == float(ref.sign_flip(groups))


def test_analytic_fixture():
    groups = ref.aligned_groups(ref.synthetic_groups(50))
    # a candidate passing all checkers exists only in some groups; restrict to those
    with_full = [g for g in groups if any(all(p) for p in g.passes)]
    assert top1_exact_pass(with_full) == 1.0
    assert discordant_inversion_rate(groups) == 0.0
    assert advantage_sign_flip_rate(groups) == 0.0


def test_metrics_are_pure():
    groups = ref.synthetic_groups(20, seed=5)
    assert discordant_inversion_rate(groups) == discordant_inversion_rate(groups)


# -- dedup / decontamination -------------------------------------------------------

def test_dedup():
    kept, report = dedup_prompts(["a", "a "])
    assert [r.text for r in kept] == ["a"] and report["removed"] == 1
    kept, _ = dedup_prompts(["x", "y", "z"])
    assert len(kept) == 3
    kept, report = dedup_prompts([{"prompt": "p1", "source": "s1"}, PromptRecord("p2", "s2"),
                                  {"prompt": "p1 ", "source": "s3"}])
    assert [r.source for r in kept] == ["s1", "s2"]
    assert report["duplicates"] == [{"index": 2, "source": "s3", "duplicate_of": 0}]


EVAL = ('Write a critical review of the novel "The Silent Orchard" focusing on how the narrator describes the '
        'flooded village and the final reunion between the two sisters')
# 17 tokens, the first 14 shared: 7 of 10 8-grams overlap
TRAIN_NEAR = 'Write a critical review of the novel "The Silent Orchard" focusing on how the mood shifts overall'


def test_containment_of_constructed_pair():
    c = containment(TRAIN_NEAR, EVAL, 8)
    assert abs(c - 0.7) < 1e-12


def test_decontaminate_rules():
    train = [EVAL, TRAIN_NEAR, "Write an essay about summer.", "Write an essay about summer holidays at the sea."]
    evals = {"bench_a": [EVAL], "bench_b": ["Write an essay about winter sports in the mountains."]}
    kept, report = decontaminate(train, evals)
    assert [r.text for r in kept] == train[2:]
    assert report["total"] == 4 and report["clean"] == 2 and report["removed"] == 2
    assert report["per_benchmark"] == {"bench_a": 2, "bench_b": 0}
    assert [r["rule"] for r in report["removed_items"]] == ["exact", "ngram_anchor"]
    assert report["removed_items"][1]["anchor"] == "quoted"


def test_template_similarity_alone_is_kept():
    a = "Write a short story about a dog who learns to fly over the city at night and finds a friend"
    b = "Write a short story about a dog who learns to fly over the city at night and loses his way"
    assert containment(a, b) >= 0.6
    assert shared_anchor(a, b, DecontaminationRule(anchor_kinds=frozenset({"quoted", "entity"}))) is None
    kept, _ = decontaminate([a], {"b": [b]}, DecontaminationRule(anchor_kinds=frozenset({"quoted", "entity"})))
    assert len(kept) == 1


def test_anchor_kinds():
    assert shared_anchor("about Marie Curie today", "the life of Marie Curie") == "entity"
    long_span = "the quick brown fox jumps over the lazy dog near the river bank"
    assert shared_anchor(f"x {long_span} y", f"a {long_span} b") == "span"
    assert shared_anchor("hello", "world") is None


def test_rule_validation():
    with pytest.raises(ValueError):
        DecontaminationRule(containment_threshold=0)
    with pytest.raises(ValueError):
        DecontaminationRule(ngram_size=0)
    assert ngrams("a b", 3) == set()


word = st.sampled_from("the a review novel \"Orchard\" Silent write village sisters river bank story".split())


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(word, min_size=3, max_size=20).map(" ".join), min_size=1, max_size=6),
       st.lists(st.lists(word, min_size=3, max_size=20).map(" ".join), min_size=1, max_size=3),
       st.floats(0.05, 1.0), st.floats(0.05, 1.0))
def test_decontamination_monotone_in_threshold(train, evals, t1, t2):
    lo, hi = sorted((t1, t2))
    removed = lambda t: {r["index"] for r in decontaminate(train, {"e": evals}, DecontaminationRule(3, t))[1]["removed_items"]}
    assert removed(hi) <= removed(lo)
