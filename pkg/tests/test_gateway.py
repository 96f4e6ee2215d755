import json
import threading

import httpx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fakes import FakeLLM, live_gateway, recording_gateway, replay_gateway
from rewardspec.gateway import (
    PRESETS,
    ChatRequest,
    Gateway,
    GatewayTimeout,
    GlobalScoreUnavailable,
    JudgeConfig,
    Message,
    ParseFailure,
    ReplayMiss,
    SamplingPreset,
    Transcript,
    TransportError,
    chat_request,
    global_score,
    judge_rubric_criterion,
    load_transcripts,
    parse_global_score,
    parse_ternary,
    strip_thinking,
)
from rewardspec.model import RubricCriterion, TernaryLabel


def _ok(text):
    return httpx.Response(200, json={"choices": [{"message": {"content": text}}]})


REQ = chat_request("m", "sys", "hello", PRESETS["qwen3-thinking"], True)


def test_request_validation():
    with pytest.raises(ValueError):
        ChatRequest("m", ())
    with pytest.raises(ValueError):
        Message("assistant", "x")


def test_fingerprint_covers_sampling_and_thinking():
    assert REQ.fingerprint() == chat_request("m", "sys", "hello", PRESETS["qwen3-thinking"], True).fingerprint()
    assert REQ.fingerprint() != chat_request("m", "sys", "hello", PRESETS["qwen3-non-thinking"], True).fingerprint()
    assert REQ.fingerprint() != chat_request("m", "sys", "hello", PRESETS["qwen3-thinking"], False).fingerprint()
    assert REQ.fingerprint() != REQ.with_attempt(1).fingerprint()
    assert "attempt" not in REQ.to_json()


@given(st.text(), st.text(), st.floats(0, 2))
def test_fingerprint_stability(system, user, temp):
    a = chat_request("m", system, user, SamplingPreset(temp))
    b = chat_request("m", system, user, SamplingPreset(temp))
    assert a.fingerprint() == b.fingerprint()


def test_wire_payload():
    p = REQ.wire_payload()
    assert p["temperature"] == 0.6 and p["top_p"] == 0.95 and p["top_k"] == 20
    assert p["chat_template_kwargs"] == {"enable_thinking": True}
    assert "attempt" not in p and "max_tokens" not in p


def test_replay_hit_and_miss_without_network():
    t = Transcript()
    t.append(REQ, "recorded text")
    gw = replay_gateway(t)
    assert gw.chat(REQ) == "recorded text"
    assert gw.network_calls == 0
    with pytest.raises(ReplayMiss):
        gw.chat(chat_request("m", "sys", "other"))


def test_live_retries_then_succeeds():
    calls = []

    def handler(request):
        calls.append(json.loads(request.content))
        return httpx.Response(503) if len(calls) < 3 else _ok("fine")

    slept = []
    gw = live_gateway(handler, sleep=slept.append)
    assert gw.chat(REQ) == "fine"
    assert gw.last_attempts == 3
    assert slept == [1.0, 2.0]
    assert calls[0]["model"] == "m"


def test_live_gives_up_after_retry_limit():
    gw = live_gateway(lambda r: httpx.Response(429), retry_limit=3)
    with pytest.raises(TransportError):
        gw.chat(REQ)
    assert gw.network_calls == 4


def test_transport_errors_are_retried():
    n = []

    def handler(request):
        n.append(1)
        if len(n) == 1:
            raise httpx.ConnectError("refused")
        return _ok("ok")

    assert live_gateway(handler).chat(REQ) == "ok"


def test_client_errors_and_bad_bodies_are_not_retried():
    gw = live_gateway(lambda r: httpx.Response(400, text="bad"))
    with pytest.raises(TransportError):
        gw.chat(REQ)
    assert gw.network_calls == 1
    with pytest.raises(TransportError):
        live_gateway(lambda r: httpx.Response(200, json={"nope": 1})).chat(REQ)


def test_timeout_raises():
    def handler(request):
        raise httpx.ReadTimeout("slow")

    gw = live_gateway(handler)
    with pytest.raises(GatewayTimeout):
        gw.chat(REQ)
    assert gw.network_calls == 1


def test_bearer_header():
    seen = {}

    def handler(request):
        seen.update(request.headers)
        return _ok("x")

    live_gateway(handler, api_key="sekret").chat(REQ)
    assert seen["authorization"] == "Bearer sekret"


def test_mode_requirements():
    with pytest.raises(ValueError):
        Gateway("live")
    assert Gateway("replay").transcript is not None


def test_record_appends_exactly_one_entry(tmp_path):
    path = tmp_path / "t.jsonl"
    t = Transcript(path)
    gw = recording_gateway(FakeLLM(), transcript=t)
    cfg = JudgeConfig()
    judge_rubric_criterion(gw, "q", "a", RubricCriterion("c", 3), cfg)
    assert len(t) == 1
    lines = path.read_text().splitlines()
    rec = json.loads(lines[0])
    assert set(rec) == {"fingerprint", "request", "response", "ts"}
    reloaded = Transcript(path)
    assert reloaded.get(rec["fingerprint"]) == "yes"


def test_transcript_merge_export(tmp_path):
    a, b = Transcript(), Transcript()
    a.append(REQ, "first")
    b.append(REQ, "second")
    b.append(REQ.with_attempt(1), "retry")
    a.merge(b)
    assert len(a) == 2 and a.get(REQ.fingerprint()) == "first"
    out = tmp_path / "x.jsonl"
    assert a.export(out) == 2
    p2 = tmp_path / "y.jsonl"
    b.export(p2)
    merged = load_transcripts([out, p2])
    assert len(merged) == 2 and merged.get(REQ.fingerprint()) == "first"


def test_concurrent_recording_is_safe():
    t = Transcript()
    gw = recording_gateway(FakeLLM(), transcript=t, max_inflight=4)
    threads = [threading.Thread(target=judge_rubric_criterion, args=(gw, "q", f"a{i}", RubricCriterion("c", 1)))
               for i in range(40)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    assert len(t) == 40


@pytest.mark.parametrize("text,label", [
    ("yes", TernaryLabel.YES), (" Part\n", TernaryLabel.PART), ("no", TernaryLabel.NO), ("YES.", TernaryLabel.YES),
])
def test_parse_ternary(text, label):
    assert parse_ternary(text) is label


@pytest.mark.parametrize("text", ["yes and no", "maybe", ""])
def test_parse_ternary_rejects(text):
    with pytest.raises(ParseFailure):
        parse_ternary(text)


def test_strip_thinking():
    assert strip_thinking("<think>hmm yes</think>no") == "no"
    assert strip_thinking("<think>never closed") == ""


def test_parse_global_score():
    assert parse_global_score("Solid answer. [[7]]") == 7
    assert parse_global_score("[[10]]") == 10
    assert parse_global_score("Rubric: [[1]] ... final [[6.5]]") == 6.5
    for bad in ("score: 7/10", "[[11]]"):
        with pytest.raises(ParseFailure):
            parse_global_score(bad)


def _weights_thinking(fake, cfg):
    gw = recording_gateway(fake)
    for w in (1, 2, 3):
        judge_rubric_criterion(gw, "q", "a", RubricCriterion(f"crit {w}", w), cfg)
    return [rec["request"]["thinking"] for rec in gw.transcript.records()]


def test_weight_conditional_thinking():
    assert _weights_thinking(FakeLLM(), JudgeConfig()) == [False, False, True]
    assert _weights_thinking(FakeLLM(), JudgeConfig(weight_conditional_thinking=False)) == [True, True, True]


def test_judge_parse_failure_falls_back_to_no():
    fake = FakeLLM(judge=lambda c, a: "maybe")
    flags = []
    gw = recording_gateway(fake)
    assert judge_rubric_criterion(gw, "q", "a", RubricCriterion("c", 2), flags=flags) is TernaryLabel.NO
    assert flags == ["judge_parse_failure"]
    assert len(fake.calls) == 3


def test_judge_retry_recovers_and_replays():
    replies = iter(["hmm", "part"])
    fake = FakeLLM(judge=lambda c, a: next(replies))
    gw = recording_gateway(fake)
    crit = RubricCriterion("c", 3)
    assert judge_rubric_criterion(gw, "q", "a", crit) is TernaryLabel.PART
    replay = replay_gateway(gw.transcript)
    assert judge_rubric_criterion(replay, "q", "a", crit) is TernaryLabel.PART


def test_global_score_and_unavailable():
    gw = recording_gateway(FakeLLM(global_score=lambda a: "<think>[[2]]</think>Good. [[8]]"))
    assert global_score(gw, "q", "a") == 8.0
    gw = recording_gateway(FakeLLM(global_score=lambda a: "score: 7/10"))
    with pytest.raises(GlobalScoreUnavailable):
        global_score(gw, "q", "a")
    assert gw.network_calls == 3


def test_judge_prompt_has_no_unfilled_placeholders():
    gw = recording_gateway(FakeLLM())
    judge_rubric_criterion(gw, "QUESTION", "ANSWER", RubricCriterion("CRIT", 3))
    user = gw.transcript.records()[0]["request"]["messages"][-1]["content"]
    assert "QUESTION" in user and "ANSWER" in user and "CRIT" in user
    assert "{question}" not in user and "{answer}" not in user and "{rubric}" not in user
