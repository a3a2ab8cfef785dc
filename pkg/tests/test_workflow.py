"""Session engine: six-step loop, stop conditions, transcripts, and
randomized property tests for bounds and consensus."""

import json

import pytest
from hypothesis import given, settings, strategies as st

import oracles
from dynamicare import (
    Gateway,
    ScriptedBackend,
    SessionAborted,
    SessionConfig,
    SessionResult,
    TranscriptWriter,
    run_many,
    run_session,
    validate_patient_record,
)
from dynamicare.doctors import AGREE, DISAGREE, Proposal, SpecialistIdentity
from dynamicare.workflow import STOP_DIAGNOSIS, STOP_ROUND_CAP, resolve_consensus

J = json.dumps


def make_record(pid="p1"):
    return validate_patient_record(
        {
            "Admission_info": {"patient_id": pid, "admission_id": f"h-{pid}",
                               "admission_diagnosis": "checkup"},
            "Demographics": {"gender": "F", "age": 50},
            "Diagnoses": [["4019", "HTN", "Essential hypertension"]],
            "History of Present Illness": "Feels unwell.",
        }
    )


def no_change(team):
    return J({"ADD": [], "REMOVE": [], "UPDATED_LIST": team, "RATIONALE": "keep"})


def solo_script(pid, questions, final=None, forced=None, max_rounds=3):
    """Script a solo session: `questions` probe rounds, then a diagnosis or
    a forced call at the cap."""
    table = {
        (pid, "triage", 0): J({"RATIONALE": "", "SUGGEST_SPECIALISTS": ["Internist"]})
    }
    for r in range(1, questions + 1):
        table[(pid, "confidence:Internist", r)] = "DECISION: Somewhat Unconfident"
        table[(pid, "response:Internist", r)] = J({
            "RESPONSE_TYPE": "question",
            "RESPONSE_CONTENT": f"Probe {r}?",
            "RATIONALE": "",
        })
        table[(pid, "patient_stage2", r)] = f"Answer {r}."
        table[(pid, "coordination", r)] = no_change(["Internist"])
    if final is not None:
        r = questions + 1
        table[(pid, "confidence:Internist", r)] = "DECISION: Very Confident"
        table[(pid, "response:Internist", r)] = J({
            "RESPONSE_TYPE": "diagnosis",
            "RESPONSE_CONTENT": final,
            "RATIONALE": "",
        })
    if forced is not None:
        table[(pid, "forced:Internist", max_rounds + 1)] = J({
            "RESPONSE_TYPE": "diagnosis",
            "RESPONSE_CONTENT": forced,
            "CONFIDENCE": "3",
            "RATIONALE": "",
        })
    return ScriptedBackend(table)


def test_solo_session_stops_on_confident_diagnosis():
    backend = solo_script("p1", questions=2, final=["CHF", "Asthma"])
    config = SessionConfig(protocol="solo", max_rounds=5)
    result = run_session(make_record(), config, backend)
    assert result.stop_reason == STOP_DIAGNOSIS
    assert result.final_diagnoses == ["CHF", "Asthma"]
    assert result.rounds_used == 3
    assert result.questions_asked == 2
    assert [t.question for t in result.visit_log.turns] == ["Probe 1?", "Probe 2?"]
    assert not result.violations


def test_round_cap_forces_final_diagnosis():
    backend = solo_script("p1", questions=3, forced=["CHF"], max_rounds=3)
    config = SessionConfig(protocol="solo", max_rounds=3)
    result = run_session(make_record(), config, backend)
    assert result.stop_reason == STOP_ROUND_CAP
    assert result.final_diagnoses == ["CHF"]
    assert result.rounds_used == 3
    assert result.questions_asked == 3


def test_forced_noncompliance_aborts_with_transcript_event(tmp_path):
    table = {
        ("p1", "triage", 0): J({"SUGGEST_SPECIALISTS": ["Internist"]}),
        ("p1", "confidence:Internist", 1): "DECISION: Somewhat Unconfident",
        ("p1", "response:Internist", 1): J({
            "RESPONSE_TYPE": "question", "RESPONSE_CONTENT": "Probe?", "RATIONALE": "",
        }),
        ("p1", "patient_stage2", 1): "Answer.",
        ("p1", "coordination", 1): no_change(["Internist"]),
        ("p1", "forced:Internist", 2): "refuses",
        ("p1", "forced:Internist#repair", 2): "still refuses",
    }
    config = SessionConfig(protocol="solo", max_rounds=1)
    path = tmp_path / "t.jsonl"
    with TranscriptWriter(path) as transcript:
        with pytest.raises(SessionAborted):
            run_session(make_record(), config, ScriptedBackend(table), transcript=transcript)
    events = [json.loads(line)["event"] for line in path.read_text().splitlines()]
    assert events[-1] == "abort"
    assert "result" not in events


def test_empty_patient_reply_aborts():
    table = {
        ("p1", "triage", 0): J({"SUGGEST_SPECIALISTS": ["Internist"]}),
        ("p1", "confidence:Internist", 1): "DECISION: Somewhat Unconfident",
        ("p1", "response:Internist", 1): J({
            "RESPONSE_TYPE": "question", "RESPONSE_CONTENT": "Probe?", "RATIONALE": "",
        }),
        ("p1", "patient_stage2", 1): "   ",
    }
    with pytest.raises(SessionAborted):
        run_session(make_record(), SessionConfig(protocol="solo"), ScriptedBackend(table))


def test_solo_truncates_multi_specialist_triage_to_first():
    table = {
        ("p1", "triage", 0): J({"SUGGEST_SPECIALISTS": ["Internist", "Cardiologist"]}),
        ("p1", "confidence:Internist", 1): "DECISION: Very Confident",
        ("p1", "response:Internist", 1): J({
            "RESPONSE_TYPE": "diagnosis", "RESPONSE_CONTENT": ["CHF"], "RATIONALE": "",
        }),
    }
    result = run_session(make_record(), SessionConfig(protocol="solo"), ScriptedBackend(table))
    assert result.team_history[0].names == ["Internist"]
    assert any(v.kind == "solo-roster" for v in result.violations)


def test_run_many_separates_completed_and_aborted(tmp_path):
    good = make_record("ok1")
    bad = make_record("bad1")
    table = {
        ("ok1", "triage", 0): J({"SUGGEST_SPECIALISTS": ["Internist"]}),
        ("ok1", "confidence:Internist", 1): "DECISION: Very Confident",
        ("ok1", "response:Internist", 1): J({
            "RESPONSE_TYPE": "diagnosis", "RESPONSE_CONTENT": ["CHF"], "RATIONALE": "",
        }),
        # "bad1" has no triage entry: the miss is a gateway failure
    }
    out = tmp_path / "runs"
    results, aborted = run_many(
        [good, bad], SessionConfig(protocol="solo"), ScriptedBackend(table), out_dir=out
    )
    assert [r.patient_id for r in results] == ["ok1"]
    assert [a["patient_id"] for a in aborted] == ["bad1"]
    assert (out / "ok1.jsonl").exists()
    assert (out / "bad1.jsonl").exists()  # partial transcript ends in abort
    last = json.loads((out / "bad1.jsonl").read_text().splitlines()[-1])
    assert last["event"] == "abort"


def test_run_many_parallel_matches_serial(tmp_path):
    records = [make_record(f"p{i}") for i in range(1, 5)]
    table = {}
    for i in range(1, 5):
        table[(f"p{i}", "triage", 0)] = J({"SUGGEST_SPECIALISTS": ["Internist"]})
        table[(f"p{i}", "confidence:Internist", 1)] = "DECISION: Very Confident"
        table[(f"p{i}", "response:Internist", 1)] = J({
            "RESPONSE_TYPE": "diagnosis", "RESPONSE_CONTENT": [f"Dx{i}"], "RATIONALE": "",
        })
    serial, _ = run_many(records, SessionConfig(protocol="solo"), ScriptedBackend(table))
    parallel, _ = run_many(
        records, SessionConfig(protocol="solo"), ScriptedBackend(table), jobs=3
    )
    key = lambda r: r.patient_id
    assert [r.summary_dict() for r in sorted(serial, key=key)] == [
        r.summary_dict() for r in sorted(parallel, key=key)
    ]


def test_session_config_round_trip_and_unknown_keys():
    config = SessionConfig(protocol="solo", max_rounds=7, agreement_threshold=0.8, seed=5)
    clone = SessionConfig.from_dict(json.loads(json.dumps(config.to_dict())))
    assert clone == config
    with pytest.raises(ValueError):
        SessionConfig.from_dict({"protocol": "solo", "surprise": 1})
    with pytest.raises(ValueError):
        SessionConfig(protocol="duet")
    with pytest.raises(ValueError):
        SessionConfig(agreement_threshold=1.5)


def test_session_result_invariants():
    with pytest.raises(ValueError):
        SessionResult(
            patient_id="p", final_diagnoses=[], rounds_used=1,
            questions_asked=0, stop_reason=STOP_DIAGNOSIS,
        )
    with pytest.raises(ValueError):
        SessionResult(
            patient_id="p", final_diagnoses=[f"D{i}" for i in range(11)],
            rounds_used=1, questions_asked=0, stop_reason=STOP_DIAGNOSIS,
        )
    # round-cap with an empty forced list never reaches SessionResult, but a
    # populated forced list is representable
    ok = SessionResult(
        patient_id="p", final_diagnoses=["D"], rounds_used=2,
        questions_asked=2, stop_reason=STOP_ROUND_CAP,
    )
    assert ok.summary_dict()["violation_count"] == 0


# --- property tests ----------------------------------------------------------

def multi_script(pid, questions, diagnose, forced_len, max_rounds):
    """Two-specialist script: the roster leader always wins the vote."""
    team = ["Alpha", "Beta"]
    table = {
        (pid, "triage", 0): J({"RATIONALE": "", "SUGGEST_SPECIALISTS": team})
    }
    for r in range(1, questions + 1):
        table[(pid, "propose:Alpha", r)] = J({
            "RESPONSE_TYPE": "question", "RESPONSE_CONTENT": f"Probe {r}?",
            "CONFIDENCE": "5", "RATIONALE": "",
        })
        table[(pid, "propose:Beta", r)] = J({
            "RESPONSE_TYPE": "question", "RESPONSE_CONTENT": f"Alt {r}?",
            "CONFIDENCE": "1", "RATIONALE": "",
        })
        table[(pid, "vote:Beta:Alpha", r)] = "AGREE"
        table[(pid, "patient_stage2", r)] = f"Answer {r}."
        table[(pid, "coordination", r)] = no_change(team)
    if diagnose:
        r = questions + 1
        table[(pid, "propose:Alpha", r)] = J({
            "RESPONSE_TYPE": "diagnosis", "RESPONSE_CONTENT": ["Dx1", "Dx2"],
            "CONFIDENCE": "5", "RATIONALE": "",
        })
        table[(pid, "propose:Beta", r)] = J({
            "RESPONSE_TYPE": "question", "RESPONSE_CONTENT": f"Alt {r}?",
            "CONFIDENCE": "1", "RATIONALE": "",
        })
        table[(pid, "vote:Beta:Alpha", r)] = "AGREE"
    else:
        r = max_rounds + 1
        table[(pid, "forced:Alpha", r)] = J({
            "RESPONSE_TYPE": "diagnosis",
            "RESPONSE_CONTENT": [f"Forced{i}" for i in range(1, forced_len + 1)],
            "CONFIDENCE": "5", "RATIONALE": "",
        })
        table[(pid, "forced:Beta", r)] = J({
            "RESPONSE_TYPE": "diagnosis", "RESPONSE_CONTENT": ["Other"],
            "CONFIDENCE": "1", "RATIONALE": "",
        })
        table[(pid, "vote:Beta:Alpha", r)] = "AGREE"
    return ScriptedBackend(table)


def check_workflow_bounds(protocol, max_rounds, data):
    """Invariant sweep body shared with the acceptance suite: questions never
    exceed the cap, the stop reason is round-cap exactly when no diagnosis was
    accepted in the loop, and a forced diagnosis list never exceeds ten names."""
    questions = data.draw(st.integers(min_value=0, max_value=max_rounds))
    diagnose = questions < max_rounds and data.draw(st.booleans())
    forced_len = data.draw(st.integers(min_value=1, max_value=14))

    if protocol == "solo":
        backend = solo_script(
            "pp",
            questions=questions if diagnose else max_rounds,
            final=["Dx1", "Dx2"] if diagnose else None,
            forced=[f"Forced{i}" for i in range(1, forced_len + 1)] if not diagnose else None,
            max_rounds=max_rounds,
        )
    else:
        backend = multi_script(
            "pp",
            questions=questions if diagnose else max_rounds,
            diagnose=diagnose,
            forced_len=forced_len,
            max_rounds=max_rounds,
        )
    config = SessionConfig(protocol=protocol, max_rounds=max_rounds)
    result = run_session(make_record("pp"), config, backend)

    assert result.questions_asked <= config.max_rounds
    assert result.rounds_used <= config.max_rounds
    assert (result.stop_reason == STOP_ROUND_CAP) == (not diagnose)
    assert 1 <= len(result.final_diagnoses) <= 10
    if diagnose:
        assert result.questions_asked == questions
        assert result.rounds_used == questions + 1
    else:
        assert result.questions_asked == max_rounds
        assert len(result.final_diagnoses) == min(forced_len, 10)


@settings(deadline=None, max_examples=60)
@given(
    protocol=st.sampled_from(["solo", "multi"]),
    max_rounds=st.integers(min_value=1, max_value=4),
    data=st.data(),
)
def test_session_bounds_random_property(protocol, max_rounds, data):
    check_workflow_bounds(protocol, max_rounds, data)


@settings(deadline=None, max_examples=120)
@given(data=st.data())
def test_consensus_matches_oracle_on_random_rounds(data):
    team_size = data.draw(st.integers(min_value=2, max_value=5))
    member_names = [f"M{i}" for i in range(team_size)]
    proposer_indices = data.draw(
        st.lists(
            st.integers(min_value=0, max_value=team_size - 1),
            min_size=1, max_size=team_size, unique=True,
        )
    )
    threshold = data.draw(st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0]))

    proposals = []
    oracle_proposals = []
    votes = {}
    for index in sorted(proposer_indices):
        name = member_names[index]
        confidence = data.draw(st.integers(min_value=1, max_value=5))
        proposals.append(
            Proposal(
                specialist=SpecialistIdentity(name),
                response_type="question",
                content=f"q from {name}",
                confidence=confidence,
                roster_index=index,
            )
        )
        oracle_proposals.append(
            {"name": name, "confidence": confidence, "roster_index": index}
        )
        ballots = {}
        for voter in member_names:
            if voter == name:
                continue
            decision = data.draw(st.sampled_from([AGREE, DISAGREE, None]))
            if decision is not None:
                ballots[voter] = decision
        votes[name] = ballots

    result = resolve_consensus(proposals, votes, threshold, team_size=team_size)
    expected_name, expected_accepted = oracles.oracle_consensus(
        oracle_proposals, votes, threshold, team_size
    )
    assert result.proposal.specialist.name == expected_name
    assert result.accepted_by_threshold == expected_accepted
