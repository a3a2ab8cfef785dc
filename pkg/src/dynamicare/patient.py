"""Patient answering system: two-stage question answering over the record.

Stage 1 routes the question through a keyword dictionary to specific record
sections and answers from those sections only.  When nothing routes, nothing
was retrieved, or the model signals the snippet is insufficient, stage 2
falls back to the whole record with identity sections (and the ground-truth
diagnoses) removed.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import prompts as prompt_names
from .gateway import ChatRequest, Gateway
from .prompts import PromptPack, default_pack
from .records import FALLBACK, MATCHED_SECTION, PatientRecord, redact_for_fallback

#: Exact token the stage-1 prompt demands when the snippet cannot answer.
NO_ANSWER_SENTINEL = "[NO_ANSWER]"

_TOKEN_RE = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class KeywordEntry:
    keywords: tuple[str, ...]
    targets: tuple[tuple[str, str | None], ...]
    extension: bool = False


@dataclass
class KeywordMapping:
    """Ordered keyword-tuple to section-target table (editable config file)."""

    entries: list[KeywordEntry] = field(default_factory=list)

    def __post_init__(self):
        for entry in self.entries:
            for kw in entry.keywords:
                if kw != kw.lower():
                    raise ValueError(f"keywords must be lower-case: {kw!r}")

    @classmethod
    def from_file(cls, path: str | Path) -> "KeywordMapping":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    @classmethod
    def from_dict(cls, raw: dict) -> "KeywordMapping":
        entries = [
            KeywordEntry(
                keywords=tuple(e["keywords"]),
                targets=tuple((t[0], t[1]) for t in e["targets"]),
                extension=bool(e.get("extension", False)),
            )
            for e in raw["entries"]
        ]
        return cls(entries)

    def phrase_keywords(self) -> list[str]:
        """Keywords needing span matching (anything beyond one plain token)."""
        phrases = [
            kw
            for entry in self.entries
            for kw in entry.keywords
            if not _TOKEN_RE.fullmatch(kw)
        ]
        # Longest first so e.g. "past medical history" wins over "past medical".
        return sorted(set(phrases), key=lambda kw: (-len(kw), kw))


_shipped_mapping: KeywordMapping | None = None


def shipped_mapping() -> KeywordMapping:
    global _shipped_mapping
    if _shipped_mapping is None:
        raw = json.loads(
            (resources.files("dynamicare") / "data" / "keywords.json").read_text("utf-8")
        )
        _shipped_mapping = KeywordMapping.from_dict(raw)
    return _shipped_mapping


def extract_keywords(question: str, mapping: KeywordMapping | None = None) -> list[str]:
    """Lower-cased tokens plus dictionary phrases found in the question.

    Multi-word (or hyphenated) dictionary phrases are matched longest-first
    and consume their span, so "admission medications" never also yields the
    bare "medications" token.
    """
    mapping = mapping or shipped_mapping()
    text = question.lower()
    found: list[str] = []
    for phrase in mapping.phrase_keywords():
        pattern = re.compile(r"(?<![a-z0-9])" + re.escape(phrase) + r"(?![a-z0-9])")
        if pattern.search(text):
            found.append(phrase)
            text = pattern.sub(" ", text)
    tokens = _TOKEN_RE.findall(text)
    seen = set(found)
    for token in tokens:
        if token not in seen:
            seen.add(token)
            found.append(token)
    return found


def route_question(
    keywords: list[str], mapping: KeywordMapping | None = None
) -> list[tuple[str, str | None]]:
    """Union of targets for every matched keyword tuple, in dictionary order."""
    mapping = mapping or shipped_mapping()
    keyword_set = set(keywords)
    targets: list[tuple[str, str | None]] = []
    for entry in mapping.entries:
        if keyword_set.intersection(entry.keywords):
            for target in entry.targets:
                if target not in targets:
                    targets.append(target)
    return targets


def _is_empty(value) -> bool:
    return value is None or value == "" or value == [] or value == {}


def retrieve_sections(
    record: PatientRecord, targets: list[tuple[str, str | None]]
) -> dict[str, object]:
    """Resolve routing targets against the record, keeping non-empty hits."""
    retrieved: dict[str, object] = {}
    for section, subfield in targets:
        value = record.section(section)
        label = section
        if subfield is not None:
            value = value.get(subfield) if isinstance(value, dict) else None
            label = f"{section}.{subfield}"
        if not _is_empty(value):
            retrieved[label] = value
    return retrieved


@dataclass
class PatientAnswer:
    text: str
    stage: str  # MATCHED_SECTION | FALLBACK
    matched_sections: list[str] = field(default_factory=list)
    retrieved_snippet: str = ""

    def __post_init__(self):
        if self.stage == MATCHED_SECTION and not self.matched_sections:
            raise ValueError("matched-section answers must name their sections")


def answer_question(
    question: str,
    record: PatientRecord,
    gateway: Gateway,
    *,
    mapping: KeywordMapping | None = None,
    pack: PromptPack | None = None,
    model_name: str = "gpt-4.1",
    temperature: float = 0.7,
    session_id: str = "",
    round_index: int = 0,
) -> PatientAnswer:
    """Answer a doctor's question in the patient's voice.

    The stage-1 context holds only the matched sections; the stage-2 context
    is the redacted record.  Ground-truth diagnoses are never readable from
    either context.
    """
    if not question:
        raise ValueError("question must be non-empty")
    mapping = mapping or shipped_mapping()
    pack = pack or default_pack()

    targets = route_question(extract_keywords(question, mapping), mapping)
    retrieved = retrieve_sections(record, targets)
    if retrieved:
        snippet = json.dumps(retrieved, ensure_ascii=False, indent=2)
        request = ChatRequest(
            system_prompt=pack.load(prompt_names.PATIENT_STAGE1),
            user_context=f"Doctor's question: {question}\n\nRecord excerpt:\n{snippet}",
            model_name=model_name,
            temperature=temperature,
            session_id=session_id,
            role="patient_stage1",
            round=round_index,
        )
        reply = gateway.complete(request).strip()
        if reply and NO_ANSWER_SENTINEL not in reply:
            return PatientAnswer(
                text=reply,
                stage=MATCHED_SECTION,
                matched_sections=list(retrieved.keys()),
                retrieved_snippet=snippet,
            )

    redacted = redact_for_fallback(record)
    request = ChatRequest(
        system_prompt=pack.load(prompt_names.PATIENT_FALLBACK),
        user_context=(
            f"Doctor's question: {question}\n\nMedical record:\n"
            + json.dumps(redacted.data, ensure_ascii=False, indent=2)
        ),
        model_name=model_name,
        temperature=temperature,
        session_id=session_id,
        role="patient_stage2",
        round=round_index,
    )
    reply = gateway.complete(request).strip()
    return PatientAnswer(text=reply, stage=FALLBACK)
