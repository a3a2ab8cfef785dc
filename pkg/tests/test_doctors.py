"""Doctor agents: triage, team adjustment, confidence, proposals, votes."""

import json

import pytest

from dynamicare import (
    ConfidenceRating,
    Gateway,
    ProtocolViolationError,
    Proposal,
    ScriptedBackend,
    SpecialistIdentity,
    TeamState,
    VisitLog,
    adjust_team,
    collect_proposals,
    rate_confidence,
    resolve_consensus,
    solo_respond,
    triage_specialists,
    vote,
)
from dynamicare.doctors import (
    AGREE,
    DIAGNOSIS,
    DISAGREE,
    MAX_TEAM_SIZE,
    QUESTION,
    parse_diagnosis_list,
)

J = json.dumps


@pytest.fixture()
def log():
    return VisitLog("63-year-old F.\nChief complaint: dyspnea")


def team_of(*names, round_formed=1):
    return TeamState(tuple(SpecialistIdentity(n) for n in names), round_formed=round_formed)


# --- confidence -----------------------------------------------------------

def test_confidence_labels_round_trip():
    for rating in ConfidenceRating:
        assert ConfidenceRating.from_label(rating.label) is rating
    assert ConfidenceRating.from_label(" somewhat  confident ") is ConfidenceRating.SOMEWHAT_CONFIDENT
    assert ConfidenceRating.from_label("confident") is None
    assert ConfidenceRating.NEUTRAL.label == "Neither Confident or Unconfident"


def test_rate_confidence_accepts_decision_prefix_and_bare_label(log):
    member = SpecialistIdentity("Internist")
    backend = ScriptedBackend(
        {
            ("s", "confidence:Internist", 1): "DECISION: Very Confident",
            ("s", "confidence:Internist", 2): "somewhat unconfident",
        }
    )
    gw = Gateway(backend)
    assert rate_confidence(member, log, gw, round_index=1, session_id="s") is ConfidenceRating.VERY_CONFIDENT
    assert rate_confidence(member, log, gw, round_index=2, session_id="s") is ConfidenceRating.SOMEWHAT_UNCONFIDENT


def test_rate_confidence_degrades_to_very_unconfident_after_repair(log):
    member = SpecialistIdentity("Internist")
    backend = ScriptedBackend(
        {
            ("s", "confidence:Internist", 1): "I feel pretty good about this",
            ("s", "confidence:Internist#repair", 1): "still chatty",
        }
    )
    violations = []
    rating = rate_confidence(
        member, log, Gateway(backend), round_index=1, session_id="s", violations=violations
    )
    assert rating is ConfidenceRating.VERY_UNCONFIDENT
    assert violations and violations[0].kind == "confidence-parse"


# --- triage and adjustment -------------------------------------------------

def test_triage_dedupes_and_truncates(log):
    reply = {"RATIONALE": "x", "SUGGEST_SPECIALISTS": [
        "Cardiologist", "cardiologist", "Pulmonologist", "Nephrologist",
        "Neurologist", "Dermatologist", "Psychiatrist",
    ]}
    backend = ScriptedBackend({("s", "triage", 0): J(reply)})
    violations = []
    team = triage_specialists(log, Gateway(backend), session_id="s", violations=violations)
    assert len(team.members) == MAX_TEAM_SIZE
    assert team.names[0] == "Cardiologist"
    assert team.round_formed == 1
    assert any(v.kind == "team-overflow" for v in violations)


def test_triage_with_no_names_is_fatal(log):
    backend = ScriptedBackend({("s", "triage", 0): J({"SUGGEST_SPECIALISTS": []})})
    with pytest.raises(ProtocolViolationError):
        triage_specialists(log, Gateway(backend), session_id="s")


def test_adjust_team_applies_update_and_stamps_next_round(log):
    team = team_of("Cardiologist", "Pulmonologist")
    backend = ScriptedBackend(
        {
            ("s", "coordination", 2): J({
                "ADD": ["Radiologist"],
                "REMOVE": ["Pulmonologist"],
                "UPDATED_LIST": ["Cardiologist", "Radiologist"],
                "RATIONALE": "imaging matters now",
            })
        }
    )
    updated = adjust_team(log, team, Gateway(backend), round_index=2, session_id="s")
    assert updated.names == ["Cardiologist", "Radiologist"]
    assert updated.round_formed == 3


def test_adjust_team_no_change_returns_same_object(log):
    team = team_of("Cardiologist")
    backend = ScriptedBackend(
        {
            ("s", "coordination", 1): J({
                "ADD": [], "REMOVE": [], "UPDATED_LIST": ["Cardiologist"], "RATIONALE": "fine",
            })
        }
    )
    assert adjust_team(log, team, Gateway(backend), round_index=1, session_id="s") is team


def test_adjust_team_keeps_roster_on_unparseable_update(log):
    team = team_of("Cardiologist")
    backend = ScriptedBackend(
        {
            ("s", "coordination", 1): "not json",
            ("s", "coordination#repair", 1): "still not json",
        }
    )
    violations = []
    updated = adjust_team(
        log, team, Gateway(backend), round_index=1, session_id="s", violations=violations
    )
    assert updated is team
    assert any(v.kind == "coordination-parse" for v in violations)


def test_adjust_team_flags_arithmetic_mismatch_but_obeys_updated_list(log):
    team = team_of("Cardiologist", "Pulmonologist")
    backend = ScriptedBackend(
        {
            ("s", "coordination", 1): J({
                "ADD": ["Radiologist"],
                "REMOVE": [],
                "UPDATED_LIST": ["Cardiologist"],  # disagrees with ADD/REMOVE
                "RATIONALE": "",
            })
        }
    )
    violations = []
    updated = adjust_team(
        log, team, Gateway(backend), round_index=1, session_id="s", violations=violations
    )
    assert updated.names == ["Cardiologist"]
    assert any(v.kind == "update-arithmetic" for v in violations)


# --- solo responses ---------------------------------------------------------

def test_solo_respond_diagnoses_at_threshold(log):
    member = SpecialistIdentity("Internist")
    backend = ScriptedBackend(
        {
            ("s", "response:Internist", 3): J({
                "RESPONSE_TYPE": "diagnosis",
                "RESPONSE_CONTENT": ["CHF", "Pneumonia"],
                "RATIONALE": "evidence fits",
            })
        }
    )
    proposal = solo_respond(
        member, log, ConfidenceRating.SOMEWHAT_CONFIDENT, Gateway(backend),
        round_index=3, session_id="s",
    )
    assert proposal.response_type == DIAGNOSIS
    assert proposal.content == ["CHF", "Pneumonia"]
    assert proposal.confidence == int(ConfidenceRating.SOMEWHAT_CONFIDENT)


def test_solo_respond_asks_below_threshold(log):
    member = SpecialistIdentity("Internist")
    backend = ScriptedBackend(
        {
            ("s", "response:Internist", 1): J({
                "RESPONSE_TYPE": "question",
                "RESPONSE_CONTENT": "Any fevers?",
                "RATIONALE": "screening",
            })
        }
    )
    proposal = solo_respond(
        member, log, ConfidenceRating.NEUTRAL, Gateway(backend),
        round_index=1, session_id="s",
    )
    assert proposal.response_type == QUESTION
    assert proposal.content == "Any fevers?"


def test_solo_respond_regenerates_duplicate_question(log):
    log.add_turn("Any fevers?", "No.", "fallback")
    member = SpecialistIdentity("Internist")
    backend = ScriptedBackend(
        {
            ("s", "response:Internist", 2): J({
                "RESPONSE_TYPE": "question",
                "RESPONSE_CONTENT": "Any fevers?",
                "RATIONALE": "",
            }),
            ("s", "response:Internist#2", 2): J({
                "RESPONSE_TYPE": "question",
                "RESPONSE_CONTENT": "Any night sweats?",
                "RATIONALE": "",
            }),
        }
    )
    proposal = solo_respond(
        member, log, ConfidenceRating.NEUTRAL, Gateway(backend),
        round_index=2, session_id="s",
    )
    assert proposal.content == "Any night sweats?"


def test_solo_respond_flags_persistent_duplicate(log):
    log.add_turn("Any fevers?", "No.", "fallback")
    member = SpecialistIdentity("Internist")
    dup = J({"RESPONSE_TYPE": "question", "RESPONSE_CONTENT": "Any fevers?", "RATIONALE": ""})
    backend = ScriptedBackend(
        {
            ("s", "response:Internist", 2): dup,
            ("s", "response:Internist#2", 2): dup,
        }
    )
    violations = []
    proposal = solo_respond(
        member, log, ConfidenceRating.NEUTRAL, Gateway(backend),
        round_index=2, session_id="s", violations=violations,
    )
    assert proposal.content == "Any fevers?"
    assert any(v.kind == "duplicate-question" for v in violations)


def test_solo_respond_wrong_type_when_diagnosing_is_fatal(log):
    member = SpecialistIdentity("Internist")
    backend = ScriptedBackend(
        {
            ("s", "response:Internist", 1): J({
                "RESPONSE_TYPE": "question",
                "RESPONSE_CONTENT": "But why?",
                "RATIONALE": "",
            })
        }
    )
    with pytest.raises(ProtocolViolationError):
        solo_respond(
            member, log, ConfidenceRating.VERY_CONFIDENT, Gateway(backend),
            round_index=1, session_id="s",
        )


def test_solo_diagnosis_truncated_to_ten(log):
    member = SpecialistIdentity("Internist")
    names = [f"Dx{i}" for i in range(1, 14)]
    backend = ScriptedBackend(
        {
            ("s", "response:Internist", 1): J({
                "RESPONSE_TYPE": "diagnosis",
                "RESPONSE_CONTENT": names,
                "RATIONALE": "",
            })
        }
    )
    violations = []
    proposal = solo_respond(
        member, log, ConfidenceRating.VERY_CONFIDENT, Gateway(backend),
        round_index=1, session_id="s", violations=violations,
    )
    assert proposal.content == names[:10]
    assert any(v.kind == "diagnosis-truncated" for v in violations)


# --- team proposals, voting, consensus --------------------------------------

def proposal_reply(response_type, content, confidence):
    return J({
        "RESPONSE_TYPE": response_type,
        "RESPONSE_CONTENT": content,
        "CONFIDENCE": str(confidence),
        "RATIONALE": "r",
    })


def test_collect_proposals_roster_indices_and_confidence(log):
    team = team_of("Cardiologist", "Pulmonologist")
    backend = ScriptedBackend(
        {
            ("s", "propose:Cardiologist", 1): proposal_reply("diagnosis", ["CHF"], 4),
            ("s", "propose:Pulmonologist", 1): proposal_reply("question", "Smoker?", 2),
        }
    )
    proposals = collect_proposals(team, log, Gateway(backend), round_index=1, session_id="s")
    assert [p.specialist.name for p in proposals] == ["Cardiologist", "Pulmonologist"]
    assert [p.roster_index for p in proposals] == [0, 1]
    assert proposals[0].confidence == 4


def test_collect_proposals_abstention_recorded_not_fatal(log):
    team = team_of("Cardiologist", "Pulmonologist")
    backend = ScriptedBackend(
        {
            ("s", "propose:Cardiologist", 1): "gibberish",
            ("s", "propose:Cardiologist#repair", 1): "more gibberish",
            ("s", "propose:Pulmonologist", 1): proposal_reply("question", "Smoker?", 3),
        }
    )
    violations = []
    proposals = collect_proposals(
        team, log, Gateway(backend), round_index=1, session_id="s", violations=violations
    )
    assert [p.specialist.name for p in proposals] == ["Pulmonologist"]
    assert any(v.kind == "abstention" for v in violations)


def test_collect_proposals_all_abstain_is_fatal(log):
    team = team_of("Cardiologist")
    backend = ScriptedBackend(
        {
            ("s", "propose:Cardiologist", 1): "nope",
            ("s", "propose:Cardiologist#repair", 1): "still nope",
        }
    )
    with pytest.raises(ProtocolViolationError):
        collect_proposals(team, log, Gateway(backend), round_index=1, session_id="s")


def test_forced_proposals_must_diagnose(log):
    team = team_of("Cardiologist", "Pulmonologist")
    backend = ScriptedBackend(
        {
            ("s", "forced:Cardiologist", 5): proposal_reply("question", "One more?", 4),
            ("s", "forced:Cardiologist#repair", 5): proposal_reply("question", "Please?", 4),
            ("s", "forced:Pulmonologist", 5): proposal_reply("diagnosis", ["COPD"], 2),
        }
    )
    violations = []
    proposals = collect_proposals(
        team, log, Gateway(backend), round_index=5, session_id="s",
        forced_diagnosis=True, violations=violations,
    )
    assert [p.specialist.name for p in proposals] == ["Pulmonologist"]
    assert all(p.response_type == DIAGNOSIS for p in proposals)


def test_vote_parses_strictly_and_defaults_to_disagree(log):
    voter = SpecialistIdentity("Pulmonologist")
    candidate = Proposal(
        specialist=SpecialistIdentity("Cardiologist"),
        response_type=DIAGNOSIS,
        content=["CHF"],
        confidence=4,
    )
    backend = ScriptedBackend(
        {
            ("s", "vote:Pulmonologist:Cardiologist", 1): "  agree ",
            ("s", "vote:Pulmonologist:Cardiologist", 2): "kind of",
            ("s", "vote:Pulmonologist:Cardiologist#repair", 2): "sure, fine",
        }
    )
    gw = Gateway(backend)
    assert vote(voter, candidate, log, gw, round_index=1, session_id="s") == AGREE
    violations = []
    assert (
        vote(voter, candidate, log, gw, round_index=2, session_id="s", violations=violations)
        == DISAGREE
    )
    assert any(v.kind == "vote-parse" for v in violations)


def test_vote_on_own_proposal_rejected(log):
    member = SpecialistIdentity("Cardiologist")
    candidate = Proposal(
        specialist=member, response_type=QUESTION, content="Hm?", confidence=3
    )
    with pytest.raises(ValueError):
        vote(member, candidate, log, Gateway(ScriptedBackend({})), round_index=1)


def make_proposal(name, confidence, roster_index, response_type=QUESTION):
    content = ["Dx"] if response_type == DIAGNOSIS else f"From {name}?"
    return Proposal(
        specialist=SpecialistIdentity(name),
        response_type=response_type,
        content=content,
        confidence=confidence,
        roster_index=roster_index,
    )


def test_consensus_prefers_confident_accepted_candidate():
    proposals = [
        make_proposal("A", 3, 0),
        make_proposal("B", 5, 1),
        make_proposal("C", 4, 2),
    ]
    votes = {
        "B": {"A": DISAGREE, "C": DISAGREE},
        "C": {"A": AGREE, "B": DISAGREE},
    }
    result = resolve_consensus(proposals, votes, 0.5, team_size=3)
    assert result.proposal.specialist.name == "C"
    assert result.accepted_by_threshold is True
    assert result.required_agreements == 1
    assert result.agree_counts == {"A": 0, "B": 0, "C": 1}


def test_consensus_falls_back_to_highest_confidence():
    proposals = [make_proposal("A", 2, 0), make_proposal("B", 4, 1)]
    votes = {"A": {"B": DISAGREE}, "B": {"A": DISAGREE}}
    result = resolve_consensus(proposals, votes, 1.0, team_size=2)
    assert result.proposal.specialist.name == "B"
    assert result.accepted_by_threshold is False


def test_consensus_breaks_confidence_ties_by_roster_order():
    proposals = [make_proposal("B", 4, 1), make_proposal("A", 4, 0)]
    votes = {"A": {"B": AGREE}, "B": {"A": AGREE}}
    result = resolve_consensus(proposals, votes, 0.5, team_size=2)
    assert result.proposal.specialist.name == "A"


def test_consensus_is_permutation_invariant():
    proposals = [
        make_proposal("A", 3, 0),
        make_proposal("B", 3, 1),
        make_proposal("C", 5, 2),
    ]
    votes = {"A": {"B": AGREE, "C": AGREE}, "B": {}, "C": {"A": DISAGREE, "B": DISAGREE}}
    winners = {
        resolve_consensus(list(order), votes, 0.5, team_size=3).proposal.specialist.name
        for order in (proposals, proposals[::-1], proposals[1:] + proposals[:1])
    }
    assert winners == {"A"}


def test_consensus_requires_proposals():
    with pytest.raises(ValueError):
        resolve_consensus([], {}, 0.5, team_size=2)


# --- diagnosis list parsing --------------------------------------------------

@pytest.mark.parametrize(
    "content,expected",
    [
        (["CHF", "Asthma"], ["CHF", "Asthma"]),
        ('["CHF", "Asthma"]', ["CHF", "Asthma"]),
        ("[CHF, Asthma]", ["CHF", "Asthma"]),
        ("1. CHF\n2. Asthma", ["CHF", "Asthma"]),
        ("CHF, Asthma", ["CHF", "Asthma"]),
        ("", []),
        (None, []),
    ],
)
def test_parse_diagnosis_list(content, expected):
    assert parse_diagnosis_list(content) == expected
