"""Doctor agents: central-agent triage and team adjustment, plus the solo
confidence-gated protocol and the multi-specialist propose/vote/consensus
protocol.

Every operation is a thin deterministic shell around one or two gateway
calls: parse strictly, repair once, then fall back conservatively (ask
rather than diagnose, keep the team rather than break the loop) while
recording a violation for the transcript.
"""

from __future__ import annotations

import enum
import json
import math
import re
from dataclasses import dataclass, field

from . import prompts as prompt_names
from .errors import ProtocolViolationError
from .gateway import (
    TEMPERATURE_CATEGORICAL,
    TEMPERATURE_GENERATIVE,
    ChatRequest,
    Gateway,
)
from .prompts import PromptPack, default_pack
from .records import VisitLog

MAX_TEAM_SIZE = 5
MAX_DIAGNOSES = 10

DIAGNOSIS = "diagnosis"
QUESTION = "question"

AGREE = "AGREE"
DISAGREE = "DISAGREE"


class ConfidenceRating(enum.IntEnum):
    """Five-point self-assessed confidence; order supports threshold checks."""

    VERY_UNCONFIDENT = 1
    SOMEWHAT_UNCONFIDENT = 2
    NEUTRAL = 3
    SOMEWHAT_CONFIDENT = 4
    VERY_CONFIDENT = 5

    @property
    def label(self) -> str:
        return _RATING_LABELS[self]

    @classmethod
    def from_label(cls, text: str) -> "ConfidenceRating | None":
        """Match one of the five exact labels, tolerating only case and
        whitespace differences (plus surrounding quotes)."""
        normalized = " ".join(text.split()).strip("\"' ").lower()
        return _LABELS_NORMALIZED.get(normalized)


_RATING_LABELS = {
    ConfidenceRating.VERY_CONFIDENT: "Very Confident",
    ConfidenceRating.SOMEWHAT_CONFIDENT: "Somewhat Confident",
    ConfidenceRating.NEUTRAL: "Neither Confident or Unconfident",
    ConfidenceRating.SOMEWHAT_UNCONFIDENT: "Somewhat Unconfident",
    ConfidenceRating.VERY_UNCONFIDENT: "Very Unconfident",
}
_LABELS_NORMALIZED = {label.lower(): rating for rating, label in _RATING_LABELS.items()}

#: Solo protocol: diagnose at this rating or above, otherwise ask.
DEFAULT_DIAGNOSE_THRESHOLD = ConfidenceRating.SOMEWHAT_CONFIDENT


@dataclass(frozen=True)
class SpecialistIdentity:
    name: str

    def __post_init__(self):
        if not self.name or not self.name.strip():
            raise ValueError("specialist name must be non-empty")

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class TeamState:
    """Roster in effect from ``round_formed`` onward."""

    members: tuple[SpecialistIdentity, ...]
    round_formed: int

    def __post_init__(self):
        if not 1 <= len(self.members) <= MAX_TEAM_SIZE:
            raise ValueError(f"team size must be 1..{MAX_TEAM_SIZE}, got {len(self.members)}")
        lowered = [m.name.lower() for m in self.members]
        if len(set(lowered)) != len(lowered):
            raise ValueError(f"duplicate specialists in team: {lowered}")

    @property
    def names(self) -> list[str]:
        return [m.name for m in self.members]

    def to_dict(self) -> dict:
        return {"members": self.names, "round_formed": self.round_formed}


@dataclass
class Proposal:
    """One specialist's move for the round: a ranked diagnosis list or a
    follow-up question, with a 1-5 confidence."""

    specialist: SpecialistIdentity
    response_type: str  # DIAGNOSIS | QUESTION
    content: list[str] | str
    confidence: int
    rationale: str = ""
    roster_index: int = 0  # position in the roster; consensus tie-break key

    def __post_init__(self):
        if self.response_type not in (DIAGNOSIS, QUESTION):
            raise ValueError(f"unknown response type {self.response_type!r}")
        if self.response_type == DIAGNOSIS:
            if (
                not isinstance(self.content, list)
                or not 1 <= len(self.content) <= MAX_DIAGNOSES
                or any(not str(n).strip() for n in self.content)
            ):
                raise ValueError("diagnosis content must be 1-10 non-empty names")
        elif not isinstance(self.content, str) or not self.content.strip():
            raise ValueError("question content must be non-empty text")
        if not 1 <= self.confidence <= 5:
            raise ValueError(f"confidence must be 1-5, got {self.confidence}")

    def content_text(self) -> str:
        if isinstance(self.content, list):
            return ", ".join(self.content)
        return self.content

    def to_dict(self) -> dict:
        return {
            "specialist": self.specialist.name,
            "response_type": self.response_type,
            "content": self.content,
            "confidence": self.confidence,
            "rationale": self.rationale,
        }


@dataclass
class TeamUpdate:
    add: list[str]
    remove: list[str]
    updated_list: list[str]
    rationale: str = ""


@dataclass
class Violation:
    """Noncompliant model behaviour, kept in the transcript, never fatal."""

    kind: str
    message: str
    severity: str = "violation"  # "violation" | "warning"
    role: str = ""
    round: int = 0
    raw_reply: str = ""

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "severity": self.severity,
            "message": self.message,
            "role": self.role,
            "round": self.round,
        }
        if self.raw_reply:
            out["raw_reply"] = self.raw_reply
        return out


@dataclass
class ConsensusResult:
    proposal: Proposal
    accepted_by_threshold: bool
    required_agreements: int
    agree_counts: dict[str, int] = field(default_factory=dict)


def _as_name_list(value) -> list[str]:
    """Coerce a reply field to a list of non-empty strings."""
    if value is None:
        return []
    if isinstance(value, str):
        value = [value]
    if not isinstance(value, list):
        return []
    return [str(v).strip() for v in value if str(v).strip()]


def _dedupe_names(names: list[str]) -> list[str]:
    """Case-insensitive dedup keeping first occurrence (and its casing)."""
    seen: set[str] = set()
    out: list[str] = []
    for name in names:
        if name.lower() not in seen:
            seen.add(name.lower())
            out.append(name)
    return out


_ENUMERATION_RE = re.compile(r"^\s*(?:\d+[.)]\s*|[-*]\s+)")


def parse_diagnosis_list(content) -> list[str]:
    """Diagnosis names from a reply's RESPONSE_CONTENT.

    Accepts a JSON list, a string holding a bracketed list, or a plain
    comma/newline separated enumeration.  Names keep internal punctuation.
    """
    if isinstance(content, list):
        return _as_name_list(content)
    if not isinstance(content, str):
        return []
    text = content.strip()
    if text.startswith("[") and text.endswith("]"):
        try:
            parsed = json.loads(text)
        except json.JSONDecodeError:
            parsed = None
        if isinstance(parsed, list):
            return _as_name_list(parsed)
        text = text[1:-1]
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) > 1:
        parts = lines
    else:
        parts = text.split(",")
    names = []
    for part in parts:
        name = _ENUMERATION_RE.sub("", part).strip().strip("\"'")
        if name:
            names.append(name)
    return names


def triage_specialists(
    visit_log: VisitLog,
    gateway: Gateway,
    *,
    pack: PromptPack | None = None,
    model_name: str = "gpt-4.1",
    session_id: str = "",
    violations: list[Violation] | None = None,
) -> TeamState:
    """Central agent picks the initial specialist team from the presentation.

    Duplicates (case-insensitive) merge; more than five specialists are
    truncated in reply order with a warning.  A reply that cannot be parsed
    even after repair, or that names nobody, is fatal for the session.
    """
    pack = pack or default_pack()
    request = ChatRequest(
        system_prompt=pack.load(prompt_names.TRIAGE),
        user_context=visit_log.render_text(),
        model_name=model_name,
        temperature=TEMPERATURE_GENERATIVE,
        expects_structured=True,
        session_id=session_id,
        role="triage",
        round=0,
    )
    parsed = gateway.complete_structured(request, ["SUGGEST_SPECIALISTS"])
    names = _dedupe_names(_as_name_list(parsed.get("SUGGEST_SPECIALISTS")))
    if not names:
        raise ProtocolViolationError("triage suggested no specialists", raw_reply=str(parsed))
    if len(names) > MAX_TEAM_SIZE:
        if violations is not None:
            violations.append(
                Violation(
                    kind="team-overflow",
                    severity="warning",
                    message=f"triage suggested {len(names)} specialists; keeping the first {MAX_TEAM_SIZE}",
                    role="triage",
                )
            )
        names = names[:MAX_TEAM_SIZE]
    return TeamState(tuple(SpecialistIdentity(n) for n in names), round_formed=1)


def _roster_context(visit_log: VisitLog, team: TeamState) -> str:
    return (
        visit_log.render_text()
        + "\n\nCurrent specialist team: "
        + ", ".join(team.names)
    )


def adjust_team(
    visit_log: VisitLog,
    team: TeamState,
    gateway: Gateway,
    *,
    round_index: int,
    pack: PromptPack | None = None,
    model_name: str = "gpt-4.1",
    session_id: str = "",
    violations: list[Violation] | None = None,
) -> TeamState:
    """Central agent re-composes the team after an answered question.

    The model's UPDATED_LIST is authoritative: when it contradicts the
    ADD/REMOVE arithmetic a warning is logged and the list wins.  Parse
    failure or an empty list keeps the previous team; this step must never
    kill a session.
    """
    pack = pack or default_pack()

    def log(kind: str, message: str, severity: str = "warning", raw: str = "") -> None:
        if violations is not None:
            violations.append(
                Violation(
                    kind=kind,
                    severity=severity,
                    message=message,
                    role="coordination",
                    round=round_index,
                    raw_reply=raw,
                )
            )

    request = ChatRequest(
        system_prompt=pack.load(prompt_names.COORDINATION),
        user_context=_roster_context(visit_log, team),
        model_name=model_name,
        temperature=TEMPERATURE_GENERATIVE,
        expects_structured=True,
        session_id=session_id,
        role="coordination",
        round=round_index,
    )
    try:
        parsed = gateway.complete_structured(request, ["UPDATED_LIST"])
    except ProtocolViolationError as exc:
        log("coordination-parse", f"team update unparseable, team kept: {exc}",
            severity="violation", raw=exc.raw_reply)
        return team

    update = TeamUpdate(
        add=_as_name_list(parsed.get("ADD")),
        remove=_as_name_list(parsed.get("REMOVE")),
        updated_list=_dedupe_names(_as_name_list(parsed.get("UPDATED_LIST"))),
        rationale=str(parsed.get("RATIONALE", "")),
    )

    previous_lower = {n.lower() for n in team.names}
    for name in update.remove:
        if name.lower() not in previous_lower:
            log("remove-nonmember", f"cannot remove {name!r}: not on the team")

    # Arithmetic check: (previous + ADD) - REMOVE, case-insensitive.
    removed = {n.lower() for n in update.remove}
    expected = [n for n in team.names if n.lower() not in removed]
    for name in update.add:
        if name.lower() not in removed and name.lower() not in {e.lower() for e in expected}:
            expected.append(name)
    if [n.lower() for n in update.updated_list] != [n.lower() for n in expected]:
        log(
            "update-arithmetic",
            "UPDATED_LIST does not equal (team + ADD) - REMOVE; using UPDATED_LIST",
        )

    names = update.updated_list
    if not names:
        log("empty-update", "UPDATED_LIST empty; previous team retained")
        return team
    if len(names) > MAX_TEAM_SIZE:
        log("team-overflow", f"update lists {len(names)} specialists; keeping the first {MAX_TEAM_SIZE}")
        names = names[:MAX_TEAM_SIZE]

    if names == team.names:
        return team
    return TeamState(tuple(SpecialistIdentity(n) for n in names), round_formed=round_index + 1)


_DECISION_RE = re.compile(r"decision\s*:\s*(.+)", re.IGNORECASE)


def _parse_decision(reply: str) -> ConfidenceRating | None:
    text = reply.strip()
    match = _DECISION_RE.search(text)
    if match:
        text = match.group(1)
    return ConfidenceRating.from_label(text)


def rate_confidence(
    specialist: SpecialistIdentity,
    visit_log: VisitLog,
    gateway: Gateway,
    *,
    round_index: int,
    pack: PromptPack | None = None,
    model_name: str = "gpt-4.1",
    session_id: str = "",
    violations: list[Violation] | None = None,
) -> ConfidenceRating:
    """Solo protocol step 1: the specialist rates diagnostic confidence.

    Unparseable after repair degrades to VeryUnconfident (ask, don't
    diagnose) with a violation record.
    """
    pack = pack or default_pack()
    request = ChatRequest(
        system_prompt=pack.fill(prompt_names.CONFIDENCE, specialty=specialist.name),
        user_context=visit_log.render_text(),
        model_name=model_name,
        temperature=TEMPERATURE_CATEGORICAL,
        session_id=session_id,
        role=f"confidence:{specialist.name}",
        round=round_index,
    )
    rating, raw = gateway.complete_with_repair(
        request,
        _parse_decision,
        "Respond with exactly one line in the form 'DECISION: <rating>' using one "
        "of the five ratings verbatim.",
    )
    if rating is None:
        if violations is not None:
            violations.append(
                Violation(
                    kind="confidence-parse",
                    message="confidence rating unparseable; treated as Very Unconfident",
                    role=f"confidence:{specialist.name}",
                    round=round_index,
                    raw_reply=raw,
                )
            )
        return ConfidenceRating.VERY_UNCONFIDENT
    return rating


def _truncate_diagnoses(
    names: list[str],
    *,
    role: str,
    round_index: int,
    violations: list[Violation] | None,
) -> list[str]:
    if len(names) > MAX_DIAGNOSES:
        if violations is not None:
            violations.append(
                Violation(
                    kind="diagnosis-truncated",
                    message=f"{len(names)} diagnoses returned; keeping the first {MAX_DIAGNOSES}",
                    role=role,
                    round=round_index,
                )
            )
        return names[:MAX_DIAGNOSES]
    return names


def solo_respond(
    specialist: SpecialistIdentity,
    visit_log: VisitLog,
    rating: ConfidenceRating,
    gateway: Gateway,
    *,
    round_index: int,
    diagnose_threshold: ConfidenceRating = DEFAULT_DIAGNOSE_THRESHOLD,
    pack: PromptPack | None = None,
    model_name: str = "gpt-4.1",
    session_id: str = "",
    violations: list[Violation] | None = None,
) -> Proposal:
    """Solo protocol step 2: diagnose when confident enough, else ask.

    A question that verbatim-repeats a prior visit-log question triggers one
    regeneration attempt; parse failures after repair are fatal here (the
    solo doctor has no teammates to fall back on).
    """
    pack = pack or default_pack()
    role = f"response:{specialist.name}"

    if rating >= diagnose_threshold:
        request = ChatRequest(
            system_prompt=pack.fill(prompt_names.SOLO_DIAGNOSIS, specialty=specialist.name),
            user_context=visit_log.render_text(),
            model_name=model_name,
            temperature=TEMPERATURE_GENERATIVE,
            expects_structured=True,
            session_id=session_id,
            role=role,
            round=round_index,
        )
        parsed = gateway.complete_structured(request, ["RESPONSE_TYPE", "RESPONSE_CONTENT"])
        if str(parsed.get("RESPONSE_TYPE", "")).strip().lower() != DIAGNOSIS:
            raise ProtocolViolationError(
                f"expected a diagnosis from {specialist.name}, got "
                f"{parsed.get('RESPONSE_TYPE')!r}",
                raw_reply=str(parsed),
            )
        names = parse_diagnosis_list(parsed.get("RESPONSE_CONTENT"))
        if not names:
            raise ProtocolViolationError(
                f"diagnosis list from {specialist.name} is empty", raw_reply=str(parsed)
            )
        names = _truncate_diagnoses(names, role=role, round_index=round_index, violations=violations)
        return Proposal(
            specialist=specialist,
            response_type=DIAGNOSIS,
            content=names,
            confidence=int(rating),
            rationale=str(parsed.get("RATIONALE", "")),
        )

    def ask(role_key: str, extra: str = "") -> dict:
        request = ChatRequest(
            system_prompt=pack.fill(prompt_names.SOLO_QUESTION, specialty=specialist.name),
            user_context=visit_log.render_text() + extra,
            model_name=model_name,
            temperature=TEMPERATURE_GENERATIVE,
            expects_structured=True,
            session_id=session_id,
            role=role_key,
            round=round_index,
        )
        return gateway.complete_structured(request, ["RESPONSE_TYPE", "RESPONSE_CONTENT"])

    parsed = ask(role)
    question = str(parsed.get("RESPONSE_CONTENT", "")).strip()
    prior = {q.strip() for q in visit_log.questions()}
    if question in prior:
        parsed = ask(
            role + "#2",
            "\n\nYou already asked that exact question. Ask a different one.",
        )
        question = str(parsed.get("RESPONSE_CONTENT", "")).strip()
        if question in prior and violations is not None:
            violations.append(
                Violation(
                    kind="duplicate-question",
                    message="question repeated after regeneration",
                    role=role,
                    round=round_index,
                )
            )
    if not question:
        raise ProtocolViolationError(
            f"empty follow-up question from {specialist.name}", raw_reply=str(parsed)
        )
    return Proposal(
        specialist=specialist,
        response_type=QUESTION,
        content=question,
        confidence=int(rating),
        rationale=str(parsed.get("RATIONALE", "")),
    )


def _parse_confidence_value(value) -> int | None:
    """1-5 integer from an int, numeric string, or integral float."""
    if isinstance(value, bool):
        return None
    if isinstance(value, int):
        number = value
    elif isinstance(value, float) and value.is_integer():
        number = int(value)
    elif isinstance(value, str):
        try:
            number = int(value.strip().strip("\"'"))
        except ValueError:
            return None
    else:
        return None
    return number if 1 <= number <= 5 else None


def collect_proposals(
    team: TeamState,
    visit_log: VisitLog,
    gateway: Gateway,
    *,
    round_index: int,
    forced_diagnosis: bool = False,
    pack: PromptPack | None = None,
    model_name: str = "gpt-4.1",
    session_id: str = "",
    violations: list[Violation] | None = None,
) -> list[Proposal]:
    """One independent proposal per team member, in roster order.

    No member sees another's proposal.  A member whose reply stays
    unparseable after repair abstains for the round; everyone abstaining is
    fatal.  With ``forced_diagnosis`` the round-cap prompt is used and only
    diagnosis replies are accepted.
    """
    pack = pack or default_pack()
    template = prompt_names.COLLABORATIVE_FORCED if forced_diagnosis else prompt_names.COLLABORATIVE
    role_prefix = "forced" if forced_diagnosis else "propose"
    proposals: list[Proposal] = []

    for index, member in enumerate(team.members):
        role = f"{role_prefix}:{member.name}"

        def abstain(message: str, raw: str = "") -> None:
            if violations is not None:
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
            session_id=session_id,
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
        if forced_diagnosis and response_type != DIAGNOSIS:
            abstain(f"forced round requires a diagnosis, got {response_type!r}")
            continue
        if response_type not in (DIAGNOSIS, QUESTION):
            abstain(f"unknown response type {response_type!r}")
            continue
        confidence = _parse_confidence_value(parsed.get("CONFIDENCE"))
        if confidence is None:
            abstain(f"confidence {parsed.get('CONFIDENCE')!r} is not an integer 1-5")
            continue

        if response_type == DIAGNOSIS:
            names = parse_diagnosis_list(parsed.get("RESPONSE_CONTENT"))
            if not names:
                abstain("empty diagnosis list")
                continue
            content: list[str] | str = _truncate_diagnoses(
                names, role=role, round_index=round_index, violations=violations
            )
        else:
            content = str(parsed.get("RESPONSE_CONTENT", "")).strip()
            if not content:
                abstain("empty question")
                continue

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


def _parse_vote(reply: str) -> str | None:
    text = reply.strip().strip("\"'").upper()
    if text in (AGREE, DISAGREE):
        return text
    return None


def vote(
    voter: SpecialistIdentity,
    candidate: Proposal,
    visit_log: VisitLog,
    gateway: Gateway,
    *,
    round_index: int,
    pack: PromptPack | None = None,
    model_name: str = "gpt-4.1",
    session_id: str = "",
    violations: list[Violation] | None = None,
) -> str:
    """AGREE/DISAGREE on a teammate's proposal; never on one's own.

    Anything besides the two literals (case-insensitive, trimmed) is
    repaired once, then counted as DISAGREE with a violation record.
    """
    if voter.name.lower() == candidate.specialist.name.lower():
        raise ValueError(f"{voter.name} cannot vote on their own proposal")
    pack = pack or default_pack()
    role = f"vote:{voter.name}:{candidate.specialist.name}"
    request = ChatRequest(
        system_prompt=pack.fill(
            prompt_names.VOTING,
            voter=voter.name,
            candidate_specialist=candidate.specialist.name,
            candidate_response_type=candidate.response_type,
            candidate_content=candidate.content_text(),
            candidate_rationale=candidate.rationale,
        ),
        user_context=visit_log.render_text(),
        model_name=model_name,
        temperature=TEMPERATURE_CATEGORICAL,
        session_id=session_id,
        role=role,
        round=round_index,
    )
    decision, raw = gateway.complete_with_repair(
        request, _parse_vote, "Respond with exactly one word: AGREE or DISAGREE."
    )
    if decision is None:
        if violations is not None:
            violations.append(
                Violation(
                    kind="vote-parse",
                    message="vote unparseable; counted as DISAGREE",
                    role=role,
                    round=round_index,
                    raw_reply=raw,
                )
            )
        return DISAGREE
    return decision


def resolve_consensus(
    proposals: list[Proposal],
    votes: dict[str, dict[str, str]],
    threshold_fraction: float,
    team_size: int | None = None,
) -> ConsensusResult:
    """Pick the round's winning proposal.

    Proposals are evaluated in descending proposer confidence (ties by
    roster order); the first whose AGREE count from the other members
    reaches ceil(threshold_fraction * (team_size - 1)) wins.  If none
    qualifies the highest-confidence proposal wins outright.

    Pure function of its arguments: votes are keyed by proposer name, so
    permuting the proposal list does not change the outcome.
    """
    if not proposals:
        raise ValueError("no proposals to resolve")
    if team_size is None:
        team_size = len(proposals)
    required = math.ceil(threshold_fraction * (team_size - 1))

    order = sorted(proposals, key=lambda p: (-p.confidence, p.roster_index))
    agree_counts = {
        p.specialist.name: sum(
            1 for v in votes.get(p.specialist.name, {}).values() if v == AGREE
        )
        for p in proposals
    }
    for proposal in order:
        if agree_counts[proposal.specialist.name] >= required:
            return ConsensusResult(proposal, True, required, agree_counts)
    return ConsensusResult(order[0], False, required, agree_counts)
