"""Loader for the versioned prompt template pack.

Templates live as plain-text files under ``dynamicare/prompts/`` and use
``{name}`` placeholders.  Only known placeholders are substituted; every
other brace (the JSON format examples) is left untouched.  An alternate
directory can be supplied to swap the whole pack per run.
"""

from __future__ import annotations

import re
from importlib import resources
from pathlib import Path

TRIAGE = "triage"
COORDINATION = "coordination"
CONFIDENCE = "confidence"
SOLO_DIAGNOSIS = "solo_diagnosis"
SOLO_QUESTION = "solo_question"
COLLABORATIVE = "collaborative"
COLLABORATIVE_FORCED = "collaborative_forced"
VOTING = "voting"
PATIENT_STAGE1 = "patient_stage1"
PATIENT_FALLBACK = "patient_fallback"
DISCHARGE_STRUCTURING = "discharge_structuring"
MCQ_COLLABORATIVE = "mcq_collaborative"
MCQ_SOLO_ANSWER = "mcq_solo_answer"
MCQ_SOLO_QUESTION = "mcq_solo_question"
MCQ_FORCED = "mcq_forced"
MCQ_CASE = "mcq_case"

_PLACEHOLDER_RE = re.compile(r"\{([a-z_]+)\}")


class PromptPack:
    def __init__(self, directory: str | Path | None = None):
        self._directory = Path(directory) if directory else None
        self._cache: dict[str, str] = {}

    def _read(self, filename: str) -> str:
        if self._directory is not None:
            return (self._directory / filename).read_text(encoding="utf-8")
        return (resources.files("dynamicare") / "prompts" / filename).read_text(encoding="utf-8")

    @property
    def version(self) -> str:
        return self._read("version.txt").strip()

    def load(self, name: str) -> str:
        if name not in self._cache:
            self._cache[name] = self._read(name + ".txt").rstrip("\n")
        return self._cache[name]

    def fill(self, name: str, **values: str) -> str:
        template = self.load(name)

        def substitute(match: re.Match) -> str:
            key = match.group(1)
            return str(values[key]) if key in values else match.group(0)

        return _PLACEHOLDER_RE.sub(substitute, template)


_default_pack: PromptPack | None = None


def default_pack() -> PromptPack:
    global _default_pack
    if _default_pack is None:
        _default_pack = PromptPack()
    return _default_pack
