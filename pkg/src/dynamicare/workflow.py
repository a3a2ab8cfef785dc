"""Session engine: drives one diagnostic conversation end to end.

Each session repeats six steps: (1) initialize the visit log, (2) triage
the specialist team, then per round (3) produce the team's response,
(4) a diagnosis stops the session, a question goes to the patient system,
(5) the answered turn is appended to the log, (6) the central agent
re-composes the team.  When the round cap is hit without a diagnosis the
team is forced to commit to one.

Every prompt, reply, proposal, vote, consensus, turn, team change, and
violation is emitted to a JSONL transcript with no timestamps, so a
scripted run is byte-reproducible.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .doctors import (
    AGREE,
    DIAGNOSIS,
    DEFAULT_DIAGNOSE_THRESHOLD,
    MAX_DIAGNOSES,
    ConfidenceRating,
    ConsensusResult,
    Proposal,
    SpecialistIdentity,
    TeamState,
    Violation,
    adjust_team,
    collect_proposals,
    rate_confidence,
    resolve_consensus,
    solo_respond,
    triage_specialists,
    vote,
)
from .errors import GatewayError, ProtocolViolationError, SessionAborted
from .gateway import Gateway
from .patient import KeywordMapping, answer_question
from .prompts import PromptPack, default_pack
from .records import PatientRecord, VisitLog, render_initial_presentation

SOLO = "solo"
MULTI = "multi"

STOP_DIAGNOSIS = "diagnosis"
STOP_ROUND_CAP = "round-cap"


def _parse_rating(value) -> ConfidenceRating:
    if isinstance(value, ConfidenceRating):
        return value
    if isinstance(value, int) and not isinstance(value, bool):
        return ConfidenceRating(value)
    if isinstance(value, str):
        rating = ConfidenceRating.from_label(value)
        if rating is not None:
            return rating
        name = value.strip().upper().replace(" ", "_").replace("-", "_")
        if name in ConfidenceRating.__members__:
            return ConfidenceRating[name]
    raise ValueError(f"unknown confidence rating {value!r}")


@dataclass
class SessionConfig:
    """Run knobs, snapshotted verbatim into every transcript."""

    max_rounds: int = 15
    protocol: str = MULTI
    agreement_threshold: float = 0.5
    diagnose_threshold: ConfidenceRating = DEFAULT_DIAGNOSE_THRESHOLD
    seed: int = 0
    central_model: str = "gpt-4.1"
    specialist_model: str = "gpt-4.1"
    patient_model: str = "gpt-4.1"

    def __post_init__(self):
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if self.protocol not in (SOLO, MULTI):
            raise ValueError(f"protocol must be {SOLO!r} or {MULTI!r}")
        if not 0.0 <= self.agreement_threshold <= 1.0:
            raise ValueError("agreement_threshold must be within [0, 1]")
        self.diagnose_threshold = _parse_rating(self.diagnose_threshold)

    def to_dict(self) -> dict:
        return {
            "max_rounds": self.max_rounds,
            "protocol": self.protocol,
            "agreement_threshold": self.agreement_threshold,
            "diagnose_threshold": self.diagnose_threshold.label,
            "seed": self.seed,
            "central_model": self.central_model,
            "specialist_model": self.specialist_model,
            "patient_model": self.patient_model,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "SessionConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)


@dataclass
class SessionResult:
    patient_id: str
    final_diagnoses: list[str]
    rounds_used: int
    questions_asked: int
    stop_reason: str
    visit_log: VisitLog | None = None
    team_history: list[TeamState] = field(default_factory=list)
    violations: list[Violation] = field(default_factory=list)

    def __post_init__(self):
        if self.stop_reason not in (STOP_DIAGNOSIS, STOP_ROUND_CAP):
            raise ValueError(f"unknown stop reason {self.stop_reason!r}")
        if self.stop_reason == STOP_DIAGNOSIS and not self.final_diagnoses:
            raise ValueError("a diagnosis stop requires a non-empty diagnosis list")
        if len(self.final_diagnoses) > MAX_DIAGNOSES:
            raise ValueError(f"final diagnoses capped at {MAX_DIAGNOSES}")
        if self.visit_log is not None and self.questions_asked != len(self.visit_log.turns):
            raise ValueError("questions_asked must equal the number of visit-log turns")

    def summary_dict(self) -> dict:
        return {
            "patient_id": self.patient_id,
            "final_diagnoses": list(self.final_diagnoses),
            "rounds_used": self.rounds_used,
            "questions_asked": self.questions_asked,
            "stop_reason": self.stop_reason,
            "team_history": [t.to_dict() for t in self.team_history],
            "violation_count": len(self.violations),
        }

    def to_dict(self) -> dict:
        out = self.summary_dict()
        del out["violation_count"]
        out["violations"] = [v.to_dict() for v in self.violations]
        if self.visit_log is not None:
            out["visit_log"] = self.visit_log.to_dict()
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "SessionResult":
        """Rebuild the metric-relevant fields from a transcript result event."""
        return cls(
            patient_id=str(raw["patient_id"]),
            final_diagnoses=[str(d) for d in raw.get("final_diagnoses", [])],
            rounds_used=int(raw.get("rounds_used", 0)),
            questions_asked=int(raw.get("questions_asked", 0)),
            stop_reason=str(raw.get("stop_reason", STOP_ROUND_CAP)),
            team_history=[
                TeamState(
                    tuple(SpecialistIdentity(n) for n in t["members"]),
                    round_formed=int(t.get("round_formed", 1)),
                )
                for t in raw.get("team_history", [])
            ],
        )


class TranscriptWriter:
    """Ordered event sink; optionally streams each event to a JSONL file.

    Events are flushed line by line so an aborted session still leaves its
    partial transcript on disk.
    """

    def __init__(self, path: str | Path | None = None):
        self.events: list[dict] = []
        self.path = Path(path) if path else None
        self._fh = None
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "w", encoding="utf-8")

    def emit(self, event: dict) -> None:
        self.events.append(event)
        if self._fh is not None:
            self._fh.write(json.dumps(event, ensure_ascii=False) + "\n")
            self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self) -> "TranscriptWriter":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


class _EmittingViolations(list):
    """Violation list that mirrors every append into the transcript."""

    def __init__(self, transcript: TranscriptWriter):
        super().__init__()
        self._transcript = transcript

    def append(self, violation: Violation) -> None:
        super().append(violation)
        self._transcript.emit({"event": "violation", **violation.to_dict()})


def _wrap_gateway(gateway, transcript: TranscriptWriter) -> Gateway:
    """Gateway whose every exchange lands in the transcript.

    Accepts a Gateway (its own observer hook is preserved) or a bare
    backend.  The incoming object is never mutated, so one backend can be
    shared by concurrent sessions.
    """
    if isinstance(gateway, Gateway):
        backend, outer_hook = gateway.backend, gateway.on_exchange
    else:
        backend, outer_hook = gateway, None

    def on_exchange(request, reply: str) -> None:
        if outer_hook is not None:
            outer_hook(request, reply)
        transcript.emit(
            {
                "event": "prompt",
                "role": request.role,
                "round": request.round,
                "system": request.system_prompt,
                "user": request.user_context,
            }
        )
        transcript.emit(
            {"event": "reply", "role": request.role, "round": request.round, "text": reply}
        )

    return Gateway(backend, on_exchange=on_exchange)


def _team_event(team: TeamState, round_index: int, trigger: str) -> dict:
    return {
        "event": "team-change",
        "round": round_index,
        "members": team.names,
        "round_formed": team.round_formed,
        "trigger": trigger,
    }


def _cap_for_solo(team: TeamState, violations: list) -> TeamState:
    """The solo protocol keeps exactly one specialist on the roster."""
    if len(team.members) == 1:
        return team
    violations.append(
        Violation(
            kind="solo-roster",
            severity="warning",
            message=f"solo protocol keeps only {team.members[0].name} "
            f"out of {team.names}",
        )
    )
    return TeamState(team.members[:1], round_formed=team.round_formed)


def _vote_and_resolve(
    team: TeamState,
    proposals: list[Proposal],
    visit_log: VisitLog,
    gateway: Gateway,
    *,
    round_index: int,
    agreement_threshold: float,
    pack: PromptPack,
    model_name: str,
    session_id: str,
    violations: list,
    emit,
) -> ConsensusResult:
    """Collect votes candidate by candidate, stopping at the first accept.

    Candidates are visited in descending proposer confidence (roster order
    breaks ties); each teammate except the proposer votes.  The collected
    votes feed the pure resolver, which reproduces the same decision.
    """
    votes: dict[str, dict[str, str]] = {}
    team_size = len(team.members)
    required = math.ceil(agreement_threshold * (team_size - 1))
    for candidate in sorted(proposals, key=lambda p: (-p.confidence, p.roster_index)):
        ballots: dict[str, str] = {}
        for voter in team.members:
            if voter.name.lower() == candidate.specialist.name.lower():
                continue
            decision = vote(
                voter,
                candidate,
                visit_log,
                gateway,
                round_index=round_index,
                pack=pack,
                model_name=model_name,
                session_id=session_id,
                violations=violations,
            )
            ballots[voter.name] = decision
            emit(
                {
                    "event": "vote",
                    "round": round_index,
                    "voter": voter.name,
                    "candidate": candidate.specialist.name,
                    "vote": decision,
                }
            )
        votes[candidate.specialist.name] = ballots
        if sum(1 for d in ballots.values() if d == AGREE) >= required:
            break

    result = resolve_consensus(proposals, votes, agreement_threshold, team_size=team_size)
    emit(
        {
            "event": "consensus",
            "round": round_index,
            "winner": result.proposal.specialist.name,
            "response_type": result.proposal.response_type,
            "accepted_by_threshold": result.accepted_by_threshold,
            "required_agreements": result.required_agreements,
            "agree_counts": result.agree_counts,
        }
    )
    return result


def force_final_diagnosis(
    team: TeamState,
    visit_log: VisitLog,
    gateway,
    *,
    agreement_threshold: float = 0.5,
    round_index: int = 0,
    pack: PromptPack | None = None,
    model_name: str = "gpt-4.1",
    session_id: str = "",
    violations: list | None = None,
    transcript: TranscriptWriter | None = None,
) -> list[str]:
    """Best-effort diagnosis once the round cap is exhausted.

    Every member answers the forced-diagnosis prompt; with teammates the
    usual vote/consensus picks the winner.  Total noncompliance yields an
    empty list for the caller to treat as an abort.
    """
    pack = pack or default_pack()
    if violations is None:
        violations = []
    emit = transcript.emit if transcript is not None else (lambda event: None)
    if not isinstance(gateway, Gateway):
        gateway = Gateway(gateway)
    try:
        proposals = collect_proposals(
            team,
            visit_log,
            gateway,
            round_index=round_index,
            forced_diagnosis=True,
            pack=pack,
            model_name=model_name,
            session_id=session_id,
            violations=violations,
        )
    except ProtocolViolationError as exc:
        violations.append(
            Violation(
                kind="forced-diagnosis-failed",
                message=str(exc),
                round=round_index,
                raw_reply=exc.raw_reply,
            )
        )
        return []
    for proposal in proposals:
        emit({"event": "proposal", "round": round_index, **proposal.to_dict()})
    result = _vote_and_resolve(
        team,
        proposals,
        visit_log,
        gateway,
        round_index=round_index,
        agreement_threshold=agreement_threshold,
        pack=pack,
        model_name=model_name,
        session_id=session_id,
        violations=violations,
        emit=emit,
    )
    return list(result.proposal.content)


def run_session(
    record: PatientRecord,
    config: SessionConfig,
    gateway,
    *,
    transcript: TranscriptWriter | None = None,
    pack: PromptPack | None = None,
    mapping: KeywordMapping | None = None,
) -> SessionResult:
    """Run one patient case to a diagnosis, a forced diagnosis, or an abort.

    Unrecoverable gateway or protocol errors raise SessionAborted after the
    partial transcript (ending in an abort event) has been persisted; such
    sessions carry no result and are counted separately from completed ones.
    """
    pack = pack or default_pack()
    transcript = transcript or TranscriptWriter()
    gw = _wrap_gateway(gateway, transcript)
    session_id = record.patient_id
    violations = _EmittingViolations(transcript)
    visit_log = VisitLog(render_initial_presentation(record))
    team_history: list[TeamState] = []
    visit_log.team_history = team_history
    transcript.emit(
        {"event": "session_start", "patient_id": session_id, "config": config.to_dict()}
    )

    final: list[str] = []
    stop_reason = STOP_ROUND_CAP
    rounds_used = 0
    try:
        team = triage_specialists(
            visit_log,
            gw,
            pack=pack,
            model_name=config.central_model,
            session_id=session_id,
            violations=violations,
        )
        if config.protocol == SOLO:
            team = _cap_for_solo(team, violations)
        team_history.append(team)
        transcript.emit(_team_event(team, 0, "triage"))

        for round_index in range(1, config.max_rounds + 1):
            rounds_used = round_index
            proposal = _decide(
                team, visit_log, gw, config, pack, session_id, round_index, violations, transcript
            )
            if proposal.response_type == DIAGNOSIS:
                final = list(proposal.content)
                stop_reason = STOP_DIAGNOSIS
                break

            answer = answer_question(
                proposal.content,
                record,
                gw,
                mapping=mapping,
                pack=pack,
                model_name=config.patient_model,
                session_id=session_id,
                round_index=round_index,
            )
            if not answer.text.strip():
                raise ProtocolViolationError(f"patient reply empty in round {round_index}")
            turn = visit_log.add_turn(proposal.content, answer.text, answer.stage)
            transcript.emit({"event": "turn", **turn.to_dict()})

            new_team = adjust_team(
                visit_log,
                team,
                gw,
                round_index=round_index,
                pack=pack,
                model_name=config.central_model,
                session_id=session_id,
                violations=violations,
            )
            if config.protocol == SOLO:
                new_team = _cap_for_solo(new_team, violations)
            if new_team.names != team.names:
                team = new_team
                team_history.append(team)
                transcript.emit(_team_event(team, round_index, "adjustment"))

        if stop_reason != STOP_DIAGNOSIS:
            final = force_final_diagnosis(
                team,
                visit_log,
                gw,
                agreement_threshold=config.agreement_threshold,
                round_index=config.max_rounds + 1,
                pack=pack,
                model_name=config.specialist_model,
                session_id=session_id,
                violations=violations,
                transcript=transcript,
            )
            if not final:
                raise ProtocolViolationError("no usable forced final diagnosis")
    except (GatewayError, ProtocolViolationError) as exc:
        transcript.emit({"event": "abort", "patient_id": session_id, "reason": str(exc)})
        raise SessionAborted(session_id, str(exc)) from exc

    result = SessionResult(
        patient_id=session_id,
        final_diagnoses=final,
        rounds_used=rounds_used,
        questions_asked=len(visit_log.turns),
        stop_reason=stop_reason,
        visit_log=visit_log,
        team_history=team_history,
        violations=list(violations),
    )
    transcript.emit({"event": "result", **result.summary_dict()})
    return result


def _decide(
    team: TeamState,
    visit_log: VisitLog,
    gw: Gateway,
    config: SessionConfig,
    pack: PromptPack,
    session_id: str,
    round_index: int,
    violations: list,
    transcript: TranscriptWriter,
) -> Proposal:
    """Step 3: the round's accepted proposal under the configured protocol."""
    if config.protocol == SOLO:
        member = team.members[0]
        rating = rate_confidence(
            member,
            visit_log,
            gw,
            round_index=round_index,
            pack=pack,
            model_name=config.specialist_model,
            session_id=session_id,
            violations=violations,
        )
        proposal = solo_respond(
            member,
            visit_log,
            rating,
            gw,
            round_index=round_index,
            diagnose_threshold=config.diagnose_threshold,
            pack=pack,
            model_name=config.specialist_model,
            session_id=session_id,
            violations=violations,
        )
        transcript.emit({"event": "proposal", "round": round_index, **proposal.to_dict()})
        return proposal

    proposals = collect_proposals(
        team,
        visit_log,
        gw,
        round_index=round_index,
        pack=pack,
        model_name=config.specialist_model,
        session_id=session_id,
        violations=violations,
    )
    for proposal in proposals:
        transcript.emit({"event": "proposal", "round": round_index, **proposal.to_dict()})
    result = _vote_and_resolve(
        team,
        proposals,
        visit_log,
        gw,
        round_index=round_index,
        agreement_threshold=config.agreement_threshold,
        pack=pack,
        model_name=config.specialist_model,
        session_id=session_id,
        violations=violations,
        emit=transcript.emit,
    )
    return result.proposal


def run_many(
    records: list[PatientRecord],
    config: SessionConfig,
    gateway,
    out_dir: str | Path | None = None,
    jobs: int = 1,
) -> tuple[list[SessionResult], list[dict]]:
    """Run a corpus of records, one transcript per patient.

    Returns completed results (input order) and abort markers; sessions are
    independent, so ``jobs`` simply bounds the worker threads sharing the
    backend.
    """
    out = Path(out_dir) if out_dir else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    def run_one(record: PatientRecord):
        path = out / f"{record.patient_id}.jsonl" if out else None
        with TranscriptWriter(path) as transcript:
            return run_session(record, config, gateway, transcript=transcript)

    results: list[SessionResult] = []
    aborted: list[dict] = []

    def settle(record, outcome):
        if isinstance(outcome, SessionAborted):
            aborted.append({"patient_id": outcome.patient_id, "reason": outcome.reason})
        else:
            results.append(outcome)

    if jobs <= 1:
        for record in records:
            try:
                settle(record, run_one(record))
            except SessionAborted as exc:
                settle(record, exc)
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [(record, pool.submit(run_one, record)) for record in records]
            for record, future in futures:
                try:
                    settle(record, future.result())
                except SessionAborted as exc:
                    settle(record, exc)
    return results, aborted
