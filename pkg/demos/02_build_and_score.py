"""Build one reward artifact, then score responses against it, fully offline.

A scripted chat endpoint stands in for the models. The first pass records
every exchange; the second pass replays the transcript with no transport at
all, which is how the test suite and the CLI `--replay` flag work.

Run: python3 demos/02_build_and_score.py
"""

import json
import logging
import tempfile
from pathlib import Path

import httpx

from rewardspec.builder import build_specification
from rewardspec.engine import run_all
from rewardspec.gateway import Gateway, Transcript
from rewardspec.model import serialize_specification
from rewardspec.prompts import default_templates
from rewardspec.scoring import Scorer

logging.basicConfig(level=logging.WARNING)
T = default_templates()

PROMPT = ("Explain how solar panels work. The response should begin with 'Sure!'. Use at most 120 words. "
          "Do not use colons.")
RESPONSES = {
    "follows everything": "Sure! Panels hold silicon cells. Light frees electrons, which flow as current. "
                          "An inverter turns that into household power.",
    "breaks the format": "Here is how it works: light hits the cells and electricity comes out.",
}


def scripted(request: httpx.Request) -> httpx.Response:
    body = json.loads(request.content)
    system, user = body["messages"][0]["content"], body["messages"][-1]["content"]
    if system == T.task_label:
        text = '{"task_type": "general", "reason": "explanatory question"}'
    elif "Current task type:" in system:
        text = json.dumps([{"criterion": "explains the photovoltaic effect", "weight": 3},
                           {"criterion": "mentions the inverter", "weight": 2}])
    elif system == T.constraint_extraction_system:
        text = json.dumps([{"type": "start_text", "constraint": "begin with 'Sure!'"},
                           {"type": "word_count", "constraint": "at most 120 words"},
                           {"type": "punctuation_rule", "constraint": "Do not use colons"}])
    elif system == T.judge_rubric_system:
        text = "yes" if "inverter" in user.split("[Evaluation RUBRIC]")[0] else "part"
    elif system == T.global_system:
        text = "Accurate and concise. [[8]]"
    else:
        text = "[null]"
    return httpx.Response(200, json={"choices": [{"message": {"role": "assistant", "content": text}}]})


def main():
    workdir = Path(tempfile.mkdtemp(prefix="rewardspec-demo-"))
    live = Gateway("record", base_url="http://scripted.local/v1", transcript=Transcript(),
                   client=httpx.Client(transport=httpx.MockTransport(scripted)))
    spec = build_specification(live, PROMPT)
    print(f"artifact {spec.prompt_id[:12]}... label={spec.task_label.value}")
    for c, ch in zip(spec.constraints, spec.checkers):
        kind = ch.body.kind if ch.body is not None else "none"
        print(f"  {c.type.value:<17} {c.constraint!r:<28} -> {ch.status.value} ({kind})")

    with Scorer(live) as scorer:
        recorded = {name: scorer.score(spec, text, step=0) for name, text in RESPONSES.items()}
    path = workdir / "transcript.jsonl"
    print(f"\nrecorded {live.transcript.export(path)} exchanges to {path}")

    replay = Gateway("replay", transcript=Transcript(path))
    rebuilt = build_specification(replay, PROMPT, clock=lambda: spec.provenance["created_at"])
    print(f"replayed build is byte-identical: {serialize_specification(rebuilt) == serialize_specification(spec)}")

    with Scorer(replay) as scorer:
        for name, text in RESPONSES.items():
            b = scorer.score(spec, text, step=0)
            bits = [o.passed for o in run_all(spec, text)]
            print(f"\n{name}: reward={b.reward:.4f} s_r={b.s_r:.3f} s_c={b.s_c:.3f} s_g={b.s_g:.2f} "
                  f"checkers={bits}  same as recorded: {b == recorded[name]}")


if __name__ == "__main__":
    main()
