import math
import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rewardspec.model import CheckerOutcome, OutcomeStatus, TernaryLabel
from rewardspec.reward import (
    AlphaSchedule,
    EmptyComponentSet,
    LengthMismatch,
    MissingRubricScore,
    VariantUnsupported,
    ZeroWeightSum,
    alpha_at,
    checker_score,
    combine,
    group_advantages,
    hybrid_reward,
    normalize_global,
    parse_variant,
    rubric_score,
    variant_reward,
)

Y, P, N = TernaryLabel.YES, TernaryLabel.PART, TernaryLabel.NO
unit = st.floats(0, 1)
labels = st.sampled_from(list(TernaryLabel))


def ok(passed):
    return CheckerOutcome(passed, OutcomeStatus.OK)


def test_rubric_score_examples():
    assert rubric_score([Y, Y, Y], [3, 2, 1]) == 1.0
    assert abs(rubric_score([Y, P, N], [3, 2, 1]) - 2 / 3) < 1e-12
    assert rubric_score([N, N], [1, 3]) == 0.0


def test_rubric_score_errors():
    with pytest.raises(LengthMismatch):
        rubric_score([Y], [1, 2])
    with pytest.raises(LengthMismatch):
        rubric_score([], [])
    with pytest.raises(ZeroWeightSum):
        rubric_score([Y], [0])


@pytest.mark.parametrize("g,expected", [(7, 0.7), (12, 1.0), (-1, 0.0), (10, 1.0), (0, 0.0)])
def test_normalize_global(g, expected):
    assert abs(normalize_global(g) - expected) < 1e-12


def test_checker_score():
    assert checker_score([ok(True), ok(False), ok(True), ok(True)]) == (0.75, 4)
    assert checker_score([ok(True)] * 3) == (1.0, 3)
    skipped = CheckerOutcome(False, OutcomeStatus.SKIPPED_UNAVAILABLE)
    assert checker_score([skipped, skipped]) == (None, 0)
    failed = CheckerOutcome(False, OutcomeStatus.FAILED_CONSERVATIVE)
    assert checker_score([ok(True), failed, skipped]) == (0.5, 2)


def test_hybrid_reward_examples():
    assert abs(hybrid_reward(0.6, s_g=0.8, s_c=1.0, n=3, alpha=1) - 0.8) < 1e-12
    assert hybrid_reward(0.37, s_g=0.9, s_c=None, n=0, alpha=0) == 0.37
    assert abs(hybrid_reward(0.5, s_c=0.5, n=2, alpha=0) - 0.5) < 1e-12
    assert abs(hybrid_reward(0.4, s_g=0.7, n=0, alpha=0.5) - (0.4 + 0.35) / 1.5) < 1e-12
    # missing global drops the term entirely
    assert abs(hybrid_reward(0.4, s_g=None, s_c=1.0, n=1, alpha=1) - 0.7) < 1e-12
    with pytest.raises(MissingRubricScore):
        hybrid_reward(None, s_g=0.5)
    with pytest.raises(ValueError):
        combine(0.5, alpha=-1)


def test_alpha_schedule():
    sched = AlphaSchedule.linear(800)
    assert [alpha_at(t, sched) for t in (0, 400, 800, 1000)] == [1.0, 0.5, 0.0, 0.0]
    assert alpha_at(5000, AlphaSchedule.constant(0.3)) == 0.3
    with pytest.raises(ValueError):
        AlphaSchedule.linear(0)
    with pytest.raises(ValueError):
        AlphaSchedule.constant(-1)
    with pytest.raises(ValueError):
        alpha_at(-1)


@given(st.integers(0, 5000), st.integers(0, 5000))
def test_alpha_nonincreasing_and_bounded(t1, t2):
    a, b = alpha_at(min(t1, t2)), alpha_at(max(t1, t2))
    assert 0.0 <= b <= a <= 1.0
    if max(t1, t2) >= 800:
        assert b == 0.0


def test_group_advantages_examples():
    assert group_advantages([0, 0.5, 1]) == [-3.0, 0.0, 3.0]
    near = group_advantages([0.45, 0.5, 0.55])
    assert all(abs(a - e) < 1e-12 for a, e in zip(near, [-0.3, 0.0, 0.3]))
    assert group_advantages([0.2] * 4) == [0.0] * 4
    with pytest.raises(ValueError):
        group_advantages([])


def test_big_gap_vs_near_tie_ratio_is_exactly_ten():
    big = group_advantages([Fraction(0), Fraction(1, 2), Fraction(1)])
    tie = group_advantages([Fraction(45, 100), Fraction(1, 2), Fraction(55, 100)])
    assert max(map(abs, big)) / max(map(abs, tie)) == 10


def test_advantages_sum_to_zero_on_random_groups():
    rng = random.Random(7)
    for _ in range(1000):
        group = [rng.random() for _ in range(rng.randint(1, 16))]
        assert abs(math.fsum(group_advantages(group))) < 1e-9


groups = st.lists(unit, min_size=1, max_size=12)


@given(groups, st.floats(-5, 5), st.floats(0.01, 10))
def test_advantage_translation_and_scaling(group, shift, c):
    base = group_advantages(group)
    shifted = group_advantages([r + shift for r in group])
    scaled = group_advantages([r * c for r in group])
    assert all(abs(a - b) < 1e-9 for a, b in zip(base, shifted))
    assert all(abs(a * c - b) < 1e-9 for a, b in zip(base, scaled))


@given(groups)
def test_advantage_argmax_matches_reward_argmax(group):
    adv = group_advantages(group)
    assert group[adv.index(max(adv))] == max(group)


@given(unit, unit, unit, st.floats(0, 10), st.booleans())
def test_reward_in_unit_interval(s_r, s_c, s_g, alpha, has_checkers):
    r = hybrid_reward(s_r, s_g=s_g, s_c=s_c if has_checkers else None, alpha=alpha)
    assert -1e-12 <= r <= 1 + 1e-12


@given(unit, unit, unit, unit, st.floats(0.01, 10))
def test_reward_monotone_in_each_component(s_r, s_c, s_g, bump, alpha):
    base = hybrid_reward(s_r, s_g=s_g, s_c=s_c, alpha=alpha)
    hi = lambda x: min(1.0, x + bump)
    assert hybrid_reward(hi(s_r), s_g=s_g, s_c=s_c, alpha=alpha) >= base - 1e-12
    assert hybrid_reward(s_r, s_g=s_g, s_c=hi(s_c), alpha=alpha) >= base - 1e-12
    assert hybrid_reward(s_r, s_g=hi(s_g), s_c=s_c, alpha=alpha) >= base - 1e-12
    if bump > 1e-6 and s_g + bump <= 1:
        assert hybrid_reward(s_r, s_g=s_g + bump, s_c=s_c, alpha=alpha) > base


@given(unit, unit, unit)
def test_reward_flat_in_global_when_alpha_zero(s_r, s_g, s_g2):
    assert hybrid_reward(s_r, s_g=s_g, alpha=0) == hybrid_reward(s_r, s_g=s_g2, alpha=0)


@given(st.lists(st.tuples(labels, st.integers(1, 3)), min_size=1, max_size=20), st.integers(1, 50), st.randoms())
def test_rubric_scale_and_permutation_invariance(pairs, k, rnd):
    labs, ws = zip(*pairs)
    base = rubric_score(labs, ws)
    assert abs(rubric_score(labs, [w * k for w in ws]) - base) < 1e-12
    shuffled = list(pairs)
    rnd.shuffle(shuffled)
    assert abs(rubric_score(*zip(*shuffled)) - base) < 1e-12


@given(st.lists(st.sampled_from(list(OutcomeStatus)), max_size=10), st.lists(st.booleans(), min_size=10, max_size=10),
       st.randoms())
def test_checker_score_permutation_invariance(statuses, passes, rnd):
    outs = [CheckerOutcome(p and s is OutcomeStatus.OK, s) for s, p in zip(statuses, passes)]
    shuffled = list(outs)
    rnd.shuffle(shuffled)
    assert checker_score(outs) == checker_score(shuffled)


def test_variants():
    assert parse_variant("C+G") == parse_variant("G+C") == frozenset("GC")
    with pytest.raises(VariantUnsupported):
        parse_variant("R+X")
    with pytest.raises(VariantUnsupported):
        parse_variant("C")
    s = dict(s_r=0.6, s_c=1.0, s_g=0.8)
    assert abs(variant_reward("R+G+C", **s) - 0.8) < 1e-12
    assert variant_reward("R", **s) == 0.6
    assert abs(variant_reward("R+C", **s) - 0.8) < 1e-12
    assert abs(variant_reward("R+G", **s) - 0.7) < 1e-12
    assert abs(variant_reward("G", **s) - 0.8) < 1e-12
    assert abs(variant_reward("G+C", **s) - 0.9) < 1e-12
    with pytest.raises(VariantUnsupported):
        variant_reward("G", s_g=0.8, alpha=0)
    with pytest.raises(EmptyComponentSet):
        combine()
