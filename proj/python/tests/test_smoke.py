import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import calagent
from conftest import CORPUS, NOW, TZ


def test_parse_temporal():
    r = calagent.parse_temporal("next Monday 2 PM", "2025-05-05T12:00:00Z", TZ)
    assert r["start"] == "2025-05-12T14:00:00-04:00"
    with pytest.raises(calagent.CalagentError) as err:
        calagent.parse_temporal("the twelfth of never", NOW, TZ)
    assert calagent.error_code(err.value) == "TemporalParseFailure"


def test_conversation_and_schemas(service, validator):
    created = service.create_session()
    sid = created["session_id"]
    turn = service.post_message(sid, "Schedule 'Demo' on 2025-05-01 at 10:00 AM")
    assert turn["next_route"] == "FINISH"
    assert [a["kind"] for a in turn["actions"]] == ["created"]
    validator("calendar_event").validate(turn["actions"][0]["event"])

    events = service.list_events("2025-05-01T00:00:00Z", "2025-05-02T00:00:00Z")
    assert [e["title"] for e in events] == ["Demo"]

    record = service.get_session(sid)
    validator("session_record").validate(record)
    assert len(record["state"]["transcript"]) == turn["transcript_length"]

    metrics = service.metrics()
    validator("metrics").validate(metrics)
    assert metrics["active_sessions_total"] == sum(metrics["per_supervisor_load"].values()) == 1

    assert service.delete_session(sid)
    with pytest.raises(calagent.CalagentError) as err:
        service.post_message(sid, "hello")
    assert calagent.error_code(err.value) == "UnknownSession"


def test_gating_asks_for_missing_slot():
    d = calagent.decide([{"role": "user", "content": "Schedule a meeting tomorrow"}], NOW, TZ)
    assert d["next"] == "user"
    assert d["messages"].count("?") == 1


def test_failover_keeps_transcript():
    svc = calagent.Service({"fixed_now": NOW, "time_zone": TZ, "supervisor_count": 2})
    s = svc.create_session()
    svc.post_message(s["session_id"], "Can you schedule 'Dentist' for me?")
    svc.kill_instance(s["supervisor_id"])
    t = svc.post_message(s["session_id"], "tomorrow")
    assert t["supervisor_id"] != s["supervisor_id"]
    assert t["reply"] == "What time should it start?"


def test_corpus_and_case_schema(validator):
    check = validator("corpus_case")
    for line in CORPUS.read_text().splitlines():
        if line.strip():
            check.validate(json.loads(line))
    report = calagent.run_eval(str(CORPUS))
    assert "| English | 5/5 | 5/5 | 5/5 | 5/5 | 20/20 | 100% |" in report["markdown"]


roles = st.sampled_from(["user", "supervisor", "tool", "agent:event_scheduler_agent"])
message = st.fixed_dictionaries(
    {
        "role": roles,
        "content": st.text(max_size=40),
        "ts": st.integers(0, 4_000_000_000).map(
            lambda s: __import__("datetime").datetime.fromtimestamp(s, __import__("datetime").timezone.utc)
            .strftime("%Y-%m-%dT%H:%M:%SZ")
        ),
    }
)
directive = st.none() | st.fixed_dictionaries(
    {
        "task_type": st.sampled_from(["schedule", "check_availability", "edit", "delete"]),
        "slots": st.dictionaries(st.text(min_size=1, max_size=10), st.text(max_size=20), max_size=4),
        "natural_instruction": st.text(max_size=40),
    }
)
state = st.fixed_dictionaries(
    {
        "session_id": st.text(max_size=20),
        "transcript": st.lists(message, max_size=6),
        "next_route": st.sampled_from(["user", "FINISH", "supervisor", "event_remover_agent"]),
        "pending_directive": directive,
        "turn_count": st.integers(0, 2**53),
    }
)


@settings(max_examples=200, deadline=None)
@given(state)
def test_graph_state_round_trip(validator, doc):
    validator("graph_state").validate(doc)
    once = calagent.normalize_state(json.dumps(doc))
    assert json.loads(once) == doc
    assert calagent.normalize_state(once) == once
