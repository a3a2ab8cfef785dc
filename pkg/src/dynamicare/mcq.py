"""Multiple-choice benchmark: the diagnosis workflow with the final response
constrained to one option letter.

Each case runs the same loop as an open diagnosis session (triage, propose,
vote, team adjustment, round cap), except the patient is replaced by a case
responder that answers follow-ups from the written case, and an "answer" is
a single option letter instead of a diagnosis list.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from pathlib import Path

from . import prompts as prompt_names
from .doctors import (
    DIAGNOSIS,
    QUESTION,
    Proposal,
    TeamState,
    Violation,
    _parse_confidence_value,
    adjust_team,
    rate_confidence,
    triage_specialists,
)
from .errors import ProtocolViolationError, SessionAborted
from .gateway import (
    TEMPERATURE_GENERATIVE,
    ChatRequest,
    Gateway,
    GatewayError,
)
from .prompts import PromptPack, default_pack
from .records import VisitLog
from .workflow import (
    SOLO,
    STOP_DIAGNOSIS,
    STOP_ROUND_CAP,
    SessionConfig,
    TranscriptWriter,
    _cap_for_solo,
    _EmittingViolations,
    _team_event,
    _vote_and_resolve,
    _wrap_gateway,
)

ANSWER = "answer"
CASE_NO_ANSWER = "The case does not say."


@dataclass(frozen=True)
class MCQCase:
    """One benchmark item: a written case, a question, lettered options, and
    the correct letter."""

    case_id: str
    context: str
    question: str
    options: tuple[str, ...]
    answer_key: str

    def __post_init__(self):
        if not self.case_id.strip():
            raise ValueError("case_id must be non-empty")
        if not self.context.strip() or not self.question.strip():
            raise ValueError(f"{self.case_id}: context and question must be non-empty")
        if not 2 <= len(self.options) <= 26:
            raise ValueError(f"{self.case_id}: need 2-26 options, got {len(self.options)}")
        if self.answer_key not in self.letters:
            raise ValueError(
                f"{self.case_id}: answer key {self.answer_key!r} not among {self.letters}"
            )

    @property
    def letters(self) -> tuple[str, ...]:
        return tuple(string.ascii_uppercase[: len(self.options)])

    def presentation(self) -> str:
        lines = [self.context.strip(), "", f"Question: {self.question.strip()}", "", "Options:"]
        lines += [f"{letter}. {opt}" for letter, opt in zip(self.letters, self.options)]
        return "\n".join(lines)


def coerce_case(raw, index: int) -> MCQCase:
    """Build an MCQCase from a mapping, normalising the answer key.

    The key may be the option letter (any case) or the exact option text.
    """
    if isinstance(raw, MCQCase):
        return raw
    case_id = str(raw.get("case_id") or f"case{index + 1:03d}")
    options = tuple(str(opt).strip() for opt in raw.get("options", ()))
    key = str(raw.get("answer_key", "")).strip()
    letters = string.ascii_uppercase[: len(options)]
    if key.upper() in letters:
        key = key.upper()
    else:
        matches = [letters[i] for i, opt in enumerate(options) if opt.lower() == key.lower()]
        if len(matches) != 1:
            raise ValueError(f"{case_id}: answer key {key!r} does not name one option")
        key = matches[0]
    return MCQCase(
        case_id=case_id,
        context=str(raw.get("context", "")),
        question=str(raw.get("question", "")),
        options=options,
        answer_key=key,
    )


def parse_option_letter(content, case: MCQCase) -> str | None:
    """Canonical option letter from a reply, or None.

    Accepts the bare letter with optional trailing punctuation, or the
    exact text of one option.
    """
    text = str(content).strip().strip("\"'").strip()
    stripped = text.rstrip(".):").strip()
    if stripped.upper() in case.letters:
        return stripped.upper()
    for letter, option in zip(case.letters, case.options):
        if text.lower() == option.strip().lower():
            return letter
    return None


@dataclass
class MCQCaseResult:
    case_id: str
    selected: str
    correct: bool
    rounds_used: int
    questions_asked: int
    stop_reason: str
    violations: list[Violation] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "selected": self.selected,
            "correct": self.correct,
            "rounds_used": self.rounds_used,
            "questions_asked": self.questions_asked,
            "stop_reason": self.stop_reason,
            "violation_count": len(self.violations),
        }


@dataclass
class MCQReport:
    accuracy: float
    per_case: list[MCQCaseResult] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"accuracy": self.accuracy, "per_case": [c.to_dict() for c in self.per_case]}


def answer_case_question(
    question: str,
    case: MCQCase,
    gateway: Gateway,
    *,
    pack: PromptPack | None = None,
    model_name: str = "gpt-4.1",
    round_index: int = 0,
) -> str:
    """Answer a specialist's follow-up strictly from the written case."""
    pack = pack or default_pack()
    request = ChatRequest(
        system_prompt=pack.load(prompt_names.MCQ_CASE),
        user_context=f"Case description:\n{case.context.strip()}\n\nDoctor's question: {question}",
        model_name=model_name,
        temperature=TEMPERATURE_GENERATIVE,
        session_id=case.case_id,
        role="case",
        round=round_index,
    )
    return gateway.complete(request).strip()


def _collect_mcq_proposals(
    team: TeamState,
    visit_log: VisitLog,
    case: MCQCase,
    gateway: Gateway,
    *,
    round_index: int,
    forced: bool,
    pack: PromptPack,
    model_name: str,
    violations: list,
) -> list[Proposal]:
    """Per-member answer-or-question proposals for one round.

    An "answer" becomes a diagnosis-shaped proposal holding one letter, so
    voting and consensus run unchanged.  Unrecognised letters are kept
    verbatim; only the final selected answer is scored against the options.
    """
    template = prompt_names.MCQ_FORCED if forced else prompt_names.MCQ_COLLABORATIVE
    role_prefix = "forced" if forced else "propose"
    proposals: list[Proposal] = []

    for index, member in enumerate(team.members):
        role = f"{role_prefix}:{member.name}"

        def abstain(message: str, raw: str = "") -> None:
            violations.append(
                Violation(
                    kind="abstention",
                    message=f"{member.name} abstains: {message}",
                    role=role,
                    round=round_index,
                    raw_reply=raw,
                )
            )

        request = ChatRequest(
            system_prompt=pack.fill(template, specialty=member.name),
            user_context=visit_log.render_text(),
            model_name=model_name,
            temperature=TEMPERATURE_GENERATIVE,
            expects_structured=True,
            session_id=case.case_id,
            role=role,
            round=round_index,
        )
        try:
            parsed = gateway.complete_structured(
                request, ["RESPONSE_TYPE", "RESPONSE_CONTENT", "CONFIDENCE"]
            )
        except ProtocolViolationError as exc:
            abstain(str(exc), raw=exc.raw_reply)
            continue

        response_type = str(parsed.get("RESPONSE_TYPE", "")).strip().lower()
        if forced and response_type != ANSWER:
            abstain(f"forced round requires an answer, got {response_type!r}")
            continue
        if response_type not in (ANSWER, QUESTION):
            abstain(f"unknown response type {response_type!r}")
            continue
        confidence = _parse_confidence_value(parsed.get("CONFIDENCE"))
        if confidence is None:
            abstain(f"confidence {parsed.get('CONFIDENCE')!r} is not an integer 1-5")
            continue

        raw_content = str(parsed.get("RESPONSE_CONTENT", "")).strip()
        if not raw_content:
            abstain("empty response content")
            continue
        if response_type == ANSWER:
            letter = parse_option_letter(raw_content, case)
            content: list[str] | str = [letter or raw_content]
            response_type = DIAGNOSIS
        else:
            content = raw_content

        proposals.append(
            Proposal(
                specialist=member,
                response_type=response_type,
                content=content,
                confidence=confidence,
                rationale=str(parsed.get("RATIONALE", "")),
                roster_index=index,
            )
        )

    if not proposals:
        raise ProtocolViolationError(
            f"every member of {team.names} abstained in round {round_index}"
        )
    return proposals


def _solo_mcq_respond(
    team: TeamState,
    visit_log: VisitLog,
    case: MCQCase,
    gateway: Gateway,
    config: SessionConfig,
    *,
    round_index: int,
    pack: PromptPack,
    violations: list,
) -> Proposal:
    """Single-specialist round: answer when confident enough, else ask."""
    member = team.members[0]
    rating = rate_confidence(
        member,
        visit_log,
        gateway,
        round_index=round_index,
        pack=pack,
        model_name=config.specialist_model,
        session_id=case.case_id,
        violations=violations,
    )
    answering = rating >= config.diagnose_threshold
    template = prompt_names.MCQ_SOLO_ANSWER if answering else prompt_names.MCQ_SOLO_QUESTION
    request = ChatRequest(
        system_prompt=pack.fill(template, specialty=member.name),
        user_context=visit_log.render_text(),
        model_name=config.specialist_model,
        temperature=TEMPERATURE_GENERATIVE,
        expects_structured=True,
        session_id=case.case_id,
        role=f"response:{member.name}",
        round=round_index,
    )
    parsed = gateway.complete_structured(request, ["RESPONSE_TYPE", "RESPONSE_CONTENT"])
    response_type = str(parsed.get("RESPONSE_TYPE", "")).strip().lower()
    expected = ANSWER if answering else QUESTION
    if response_type != expected:
        raise ProtocolViolationError(
            f"{member.name} replied with {response_type!r} when {expected!r} was required"
        )
    raw_content = str(parsed.get("RESPONSE_CONTENT", "")).strip()
    if not raw_content:
        raise ProtocolViolationError(f"{member.name} returned empty response content")
    if answering:
        letter = parse_option_letter(raw_content, case)
        content: list[str] | str = [letter or raw_content]
    else:
        content = raw_content
    return Proposal(
        specialist=member,
        response_type=DIAGNOSIS if answering else QUESTION,
        content=content,
        confidence=int(rating),
        rationale=str(parsed.get("RATIONALE", "")),
        roster_index=0,
    )


def run_mcq_case(
    case: MCQCase,
    config: SessionConfig,
    gateway,
    *,
    transcript: TranscriptWriter | None = None,
    pack: PromptPack | None = None,
) -> MCQCaseResult:
    """Run one case end to end and score the selected letter.

    Protocol breakdowns (unparseable replies after repair, a non-option
    final answer) count the case incorrect with a violation rather than
    failing the benchmark; gateway errors still propagate.
    """
    pack = pack or default_pack()
    transcript = transcript or TranscriptWriter()
    gw = _wrap_gateway(gateway, transcript)
    violations = _EmittingViolations(transcript)
    visit_log = VisitLog(case.presentation())
    transcript.emit(
        {"event": "session_start", "patient_id": case.case_id, "config": config.to_dict()}
    )

    def settle(selected: str, rounds_used: int, stop_reason: str) -> MCQCaseResult:
        letter = parse_option_letter(selected, case) if selected else None
        if letter is None and selected:
            violations.append(
                Violation(
                    kind="non-option-answer",
                    message=f"final answer {selected!r} is not one of {case.letters}",
                    round=rounds_used,
                )
            )
        result = MCQCaseResult(
            case_id=case.case_id,
            selected=letter or selected,
            correct=letter == case.answer_key,
            rounds_used=rounds_used,
            questions_asked=len(visit_log.turns),
            stop_reason=stop_reason,
            violations=list(violations),
        )
        transcript.emit({"event": "result", **result.to_dict()})
        return result

    rounds_used = 0
    try:
        team = triage_specialists(
            visit_log,
            gw,
            pack=pack,
            model_name=config.central_model,
            session_id=case.case_id,
            violations=violations,
        )
        if config.protocol == SOLO:
            team = _cap_for_solo(team, violations)
        transcript.emit(_team_event(team, 0, "triage"))

        for round_index in range(1, config.max_rounds + 1):
            rounds_used = round_index
            if config.protocol == SOLO:
                winner = _solo_mcq_respond(
                    team,
                    visit_log,
                    case,
                    gw,
                    config,
                    round_index=round_index,
                    pack=pack,
                    violations=violations,
                )
                transcript.emit({"event": "proposal", "round": round_index, **winner.to_dict()})
            else:
                proposals = _collect_mcq_proposals(
                    team,
                    visit_log,
                    case,
                    gw,
                    round_index=round_index,
                    forced=False,
                    pack=pack,
                    model_name=config.specialist_model,
                    violations=violations,
                )
                for proposal in proposals:
                    transcript.emit(
                        {"event": "proposal", "round": round_index, **proposal.to_dict()}
                    )
                winner = _vote_and_resolve(
                    team,
                    proposals,
                    visit_log,
                    gw,
                    round_index=round_index,
                    agreement_threshold=config.agreement_threshold,
                    pack=pack,
                    model_name=config.specialist_model,
                    session_id=case.case_id,
                    violations=violations,
                    emit=transcript.emit,
                ).proposal

            if winner.response_type == DIAGNOSIS:
                return settle(winner.content[0], round_index, STOP_DIAGNOSIS)

            answer = answer_case_question(
                winner.content,
                case,
                gw,
                pack=pack,
                model_name=config.patient_model,
                round_index=round_index,
            )
            if not answer:
                raise ProtocolViolationError(f"case responder reply empty in round {round_index}")
            turn = visit_log.add_turn(winner.content, answer, "case")
            transcript.emit({"event": "turn", **turn.to_dict()})

            new_team = adjust_team(
                visit_log,
                team,
                gw,
                round_index=round_index,
                pack=pack,
                model_name=config.central_model,
                session_id=case.case_id,
                violations=violations,
            )
            if config.protocol == SOLO:
                new_team = _cap_for_solo(new_team, violations)
            if new_team.names != team.names:
                team = new_team
                transcript.emit(_team_event(team, round_index, "adjustment"))

        forced = _collect_mcq_proposals(
            team,
            visit_log,
            case,
            gw,
            round_index=config.max_rounds + 1,
            forced=True,
            pack=pack,
            model_name=config.specialist_model,
            violations=violations,
        )
        for proposal in forced:
            transcript.emit(
                {"event": "proposal", "round": config.max_rounds + 1, **proposal.to_dict()}
            )
        if len(forced) > 1:
            winner = _vote_and_resolve(
                team,
                forced,
                visit_log,
                gw,
                round_index=config.max_rounds + 1,
                agreement_threshold=config.agreement_threshold,
                pack=pack,
                model_name=config.specialist_model,
                session_id=case.case_id,
                violations=violations,
                emit=transcript.emit,
            ).proposal
        else:
            winner = forced[0]
        return settle(winner.content[0], rounds_used, STOP_ROUND_CAP)
    except ProtocolViolationError as exc:
        violations.append(
            Violation(kind="case-failed", message=str(exc), raw_reply=exc.raw_reply)
        )
        return settle("", rounds_used, STOP_ROUND_CAP)
    except GatewayError:
        transcript.emit({"event": "abort", "patient_id": case.case_id, "reason": "gateway error"})
        raise


def run_mcq_benchmark(
    cases,
    config: SessionConfig,
    gateway,
    *,
    out_dir: str | Path | None = None,
    pack: PromptPack | None = None,
) -> MCQReport:
    """Run every case and report the fraction answered correctly."""
    out = Path(out_dir) if out_dir else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    results: list[MCQCaseResult] = []
    for index, raw in enumerate(cases):
        case = coerce_case(raw, index)
        path = out / f"{case.case_id}.jsonl" if out else None
        with TranscriptWriter(path) as transcript:
            results.append(
                run_mcq_case(case, config, gateway, transcript=transcript, pack=pack)
            )
    if not results:
        raise ValueError("no cases to run")
    accuracy = sum(1 for r in results if r.correct) / len(results)
    return MCQReport(accuracy=accuracy, per_case=results)


def render_accuracy_table(rows: list[tuple[str, str, float]]) -> str:
    """Accuracy comparison table: one row per (agent, dataset, accuracy).

    Accuracies are fractions; the rendering multiplies by 100 with one
    decimal place.
    """
    header = ("Agent", "Dataset", "Accuracy")
    cells = [header] + [
        (agent, dataset, f"{accuracy * 100.0:.1f}") for agent, dataset, accuracy in rows
    ]
    widths = [max(len(row[i]) for row in cells) for i in range(3)]
    lines = []
    for index, row in enumerate(cells):
        lines.append(" | ".join(value.ljust(widths[i]) for i, value in enumerate(row)).rstrip())
        if index == 0:
            lines.append("-+-".join("-" * w for w in widths))
    return "\n".join(lines)
