"""Worked extraction examples used as replay fixtures.

Each entry pairs an instruction with the extractor reply recorded for it and
the native checker params derived by hand from the constraint micro-grammar.
"""

from __future__ import annotations

import json

from fakes import FakeLLM, recording_gateway
from rewardspec.builder import BuilderConfig, build_specification

INPUTS = {
    1: ("Write an article introducing the development of artificial intelligence. The article must be at least "
        "300 words, contain three paragraphs, no more than 30 sentences, must include the keyword Qwen, mention "
        "Kimi at least 3 times, and must not contain ChatGPT."),
    2: ("Write an article about environmental protection that is positive, well-structured, with at least 200 "
        "words in the main body and no more than 5 sentences in the conclusion."),
    3: ("Explain how solar panels work. The response should be written in English. The response should consist of "
        "five paragraphs, with a blank line separating each paragraph. The response should begin with 'Sure!'. "
        "Avoid using bullet points. The response should end with 'Solar energy matters.'."),
    4: ('Give the answer in plain text. Use numbered steps (1., 2., 3., etc.). Do not use colons. Include the '
        'keyword "Tierra".'),
    5: "Discuss the relationship between ABCDF and climate policy.",
}

CONSTRAINTS = {
    1: [
        ("word_count", "at least 300 words"),
        ("paragraph_count", "three paragraphs"),
        ("sentence_count", "no more than 30 sentences"),
        ("keyword_count", "include keyword Qwen"),
        ("keyword_count", "mention Kimi at least 3 times"),
        ("keyword_exclude", "must not contain ChatGPT"),
    ],
    2: [],
    3: [
        ("response_language", "written in English"),
        ("paragraph_count", "five paragraphs, with a blank line separating each paragraph"),
        ("start_text", "begin with 'Sure!'"),
        ("output_format", "Avoid using bullet points"),
        ("end_text", "end with 'Solar energy matters.'"),
    ],
    4: [
        ("output_format", "in plain text"),
        ("list_format", "Use numbered steps (1., 2., 3., etc.)"),
        ("punctuation_rule", "Do not use colons"),
        ("keyword_count", 'Include the keyword "Tierra"'),
    ],
    5: [],
}

NATIVE = {
    1: [
        ("word_count", {"op": ">=", "n": 300}),
        ("paragraph_count", {"op": "==", "n": 3}),
        ("sentence_count", {"op": "<=", "n": 30}),
        ("keyword_count", {"keyword": "Qwen", "op": ">=", "n": 1}),
        ("keyword_count", {"keyword": "Kimi", "op": ">=", "n": 3}),
        ("keyword_exclude", {"keyword": "ChatGPT"}),
    ],
    3: [
        ("response_language", {"language": "en"}),
        ("paragraph_count", {"op": "==", "n": 5}),
        ("start_text", {"anchor": "Sure!"}),
        ("output_format", {"format": "no_bullets"}),
        ("end_text", {"anchor": "Solar energy matters."}),
    ],
    4: [
        ("output_format", {"format": "plain_text"}),
        ("list_format", {"marker": "numbered"}),
        ("punct_exclude", {"chars": ":"}),
        ("keyword_count", {"keyword": "Tierra", "op": ">=", "n": 1}),
    ],
}

RUBRICS = {
    1: [{"criterion": "covers the history of artificial intelligence", "weight": 3},
        {"criterion": "mentions major recent models", "weight": 2},
        {"criterion": "prose is well organized", "weight": 1}],
    2: [{"criterion": "discusses concrete protection measures", "weight": 3},
        {"criterion": "conclusion is concise", "weight": 1}],
    3: [{"criterion": "explains the photovoltaic effect correctly", "weight": 3},
        {"criterion": "describes inverter role", "weight": 2}],
    4: [{"criterion": "steps are actionable", "weight": 3},
        {"criterion": "answer is relevant to the question", "weight": 2}],
    5: [{"criterion": "identifies the policy relationship", "weight": 3},
        {"criterion": "uses evidence", "weight": 2}],
}


def extractor_reply(i: int) -> str:
    items = [{"type": t, "constraint": c} for t, c in CONSTRAINTS[i]]
    return json.dumps(items or [None], indent=2)


def fake_for(i: int, **kw) -> FakeLLM:
    return FakeLLM(
        label='{"task_type": "creative_generation", "reason": "writing task"}',
        rubric=json.dumps(RUBRICS[i]),
        extraction=extractor_reply(i),
        **kw,
    )


def record_build(i: int, cfg: BuilderConfig = BuilderConfig(), clock=None, **kw):
    """Run a recording build of example `i`; returns (spec, gateway)."""
    gw = recording_gateway(fake_for(i, **kw))
    extra = {"clock": clock} if clock else {}
    return build_specification(gw, INPUTS[i], cfg, **extra), gw
