"""Patient record, visit log, and diagnosis types shared by every module.

A patient record is one JSON document per patient (``<patient_id>.json``).
Section names follow the canonical schema below; unknown sections are kept
verbatim (and routable) so the schema can grow with new extractors.
"""

from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import RecordValidationError

ICD9_PATTERN = re.compile(r"^(\d{3,5}|V\d{2,4}|E\d{3,4})$")

ADMISSION_INFO = "Admission_info"
DEMOGRAPHICS = "Demographics"
DIAGNOSES = "Diagnoses"

#: The seven structured-data sections plus the semi-structured and narrative
#: sections a record may carry.
STRUCTURED_SECTIONS = (
    ADMISSION_INFO,
    DEMOGRAPHICS,
    DIAGNOSES,
    "Prescription",
    "Procedure",
    "Chart Data",
    "Lab Data",
)
SERIES_SECTIONS = ("Chart Data", "Lab Data", "Respiratory")
REPORT_SECTIONS = ("ECG", "Echo")
NARRATIVE_SECTIONS = (
    "Introduction",
    "Allergies",
    "Chief Complaint",
    "History of Present Illness",
    "Past Medical History",
    "Social History",
    "Family History",
    "Physical Exam",
    "Major Surgical or Invasive Procedure",
    "Medications on Admission",
)
KNOWN_SECTIONS = (
    STRUCTURED_SECTIONS + SERIES_SECTIONS + REPORT_SECTIONS + ("Radiology",) + NARRATIVE_SECTIONS
)

MATCHED_SECTION = "matched-section"
FALLBACK = "fallback"

NOT_RECORDED = "not recorded"


@dataclass(frozen=True)
class GroundTruthDiagnosis:
    """One ground-truth label: ICD-9 code plus its short and long titles."""

    icd9_code: str
    short_title: str
    long_title: str

    def as_list(self) -> list[str]:
        return [self.icd9_code, self.short_title, self.long_title]


@dataclass
class ValidationIssue:
    path: str
    message: str
    severity: str = "error"  # "error" | "warning"

    def __str__(self) -> str:
        return f"{self.severity}: {self.path}: {self.message}"


@dataclass
class ValidationReport:
    issues: list[ValidationIssue] = field(default_factory=list)

    def add_error(self, path: str, message: str) -> None:
        self.issues.append(ValidationIssue(path, message, "error"))

    def add_warning(self, path: str, message: str) -> None:
        self.issues.append(ValidationIssue(path, message, "warning"))

    @property
    def errors(self) -> list[ValidationIssue]:
        return [i for i in self.issues if i.severity == "error"]

    @property
    def warnings(self) -> list[ValidationIssue]:
        return [i for i in self.issues if i.severity == "warning"]

    @property
    def ok(self) -> bool:
        return not self.errors

    def __str__(self) -> str:
        return "; ".join(str(i) for i in self.issues) or "ok"


class PatientRecord:
    """Validated, effectively immutable view over one patient's record.

    Holds the canonical JSON form in ``data`` (deep-copied at construction)
    plus typed accessors for the fields the rest of the pipeline needs.
    """

    def __init__(self, data: dict, warnings: list[ValidationIssue] | None = None):
        self._data = copy.deepcopy(data)
        self.warnings = warnings or []

    @property
    def data(self) -> dict:
        return self._data

    @property
    def admission_info(self) -> dict:
        return self._data[ADMISSION_INFO]

    @property
    def patient_id(self) -> str:
        return str(self.admission_info["patient_id"])

    @property
    def admission_id(self) -> str:
        return str(self.admission_info["admission_id"])

    @property
    def admission_diagnosis(self) -> str:
        return str(self.admission_info.get("admission_diagnosis", ""))

    @property
    def demographics(self) -> dict:
        return self._data[DEMOGRAPHICS]

    @property
    def diagnoses(self) -> tuple[GroundTruthDiagnosis, ...]:
        return tuple(_coerce_diagnosis(d) for d in self._data[DIAGNOSES])

    def section(self, path: str):
        """Fetch a section by name, with dotted paths for nested maps.

        Returns None when any path component is absent.
        """
        node = self._data
        for part in path.split("."):
            if not isinstance(node, dict) or part not in node:
                return None
            node = node[part]
        return node

    def section_names(self) -> list[str]:
        return list(self._data.keys())

    def to_dict(self) -> dict:
        return copy.deepcopy(self._data)

    def to_json(self, **kwargs) -> str:
        kwargs.setdefault("ensure_ascii", False)
        kwargs.setdefault("indent", 2)
        return json.dumps(self._data, **kwargs)

    def __eq__(self, other) -> bool:
        return isinstance(other, PatientRecord) and self._data == other._data

    def __repr__(self) -> str:
        return f"PatientRecord(patient_id={self.patient_id!r}, sections={len(self._data)})"


def _coerce_diagnosis(entry) -> GroundTruthDiagnosis:
    if isinstance(entry, GroundTruthDiagnosis):
        return entry
    if isinstance(entry, (list, tuple)) and len(entry) == 3:
        return GroundTruthDiagnosis(str(entry[0]), str(entry[1]), str(entry[2]))
    if isinstance(entry, dict):
        return GroundTruthDiagnosis(
            str(entry.get("icd9_code", "")),
            str(entry.get("short_title", "")),
            str(entry.get("long_title", "")),
        )
    raise ValueError(f"malformed diagnosis entry: {entry!r}")


def _sort_series(series):
    """Sort a [timestamp, value] list non-decreasing by timestamp (stable)."""
    if isinstance(series, list) and all(
        isinstance(e, (list, tuple)) and len(e) >= 1 for e in series
    ):
        return sorted(series, key=lambda e: str(e[0]))
    return series


def validate_patient_record(raw: dict) -> PatientRecord | ValidationReport:
    """Validate a parsed record document.

    Returns a normalized PatientRecord (timestamped lists sorted) when every
    invariant holds, otherwise a ValidationReport naming each violation with
    a field path.  Unknown sections only warn and are preserved verbatim.
    """
    report = ValidationReport()
    if not isinstance(raw, dict):
        report.add_error("$", "record must be a JSON object")
        return report
    data = copy.deepcopy(raw)
    if set(data.keys()) == {"Patient"} and isinstance(data["Patient"], dict):
        data = data["Patient"]  # accept documents wrapped in a Patient envelope

    for section in (ADMISSION_INFO, DEMOGRAPHICS, DIAGNOSES):
        if not data.get(section):
            report.add_error(section, "required section missing or empty")

    admission = data.get(ADMISSION_INFO)
    if isinstance(admission, dict) and admission:
        for key in ("patient_id", "admission_id"):
            if not admission.get(key):
                report.add_error(f"{ADMISSION_INFO}.{key}", "missing identifier")
    elif admission:
        report.add_error(ADMISSION_INFO, "must be an object")

    demographics = data.get(DEMOGRAPHICS)
    if isinstance(demographics, dict) and demographics:
        age = demographics.get("age")
        if age is not None:
            if not isinstance(age, int) or isinstance(age, bool):
                report.add_error(f"{DEMOGRAPHICS}.age", "age must be an integer")
            elif age < 0:
                report.add_error(f"{DEMOGRAPHICS}.age", "age must be >= 0")
    elif demographics:
        report.add_error(DEMOGRAPHICS, "must be an object")

    diagnoses = data.get(DIAGNOSES)
    if isinstance(diagnoses, list) and diagnoses:
        if len(diagnoses) >= 5:
            report.add_error(DIAGNOSES, f"must have fewer than 5 entries, got {len(diagnoses)}")
        for i, entry in enumerate(diagnoses):
            try:
                dx = _coerce_diagnosis(entry)
            except ValueError:
                report.add_error(f"{DIAGNOSES}[{i}]", "entry must be [code, short_title, long_title]")
                continue
            if not ICD9_PATTERN.match(dx.icd9_code):
                report.add_error(
                    f"{DIAGNOSES}[{i}].icd9_code",
                    f"{dx.icd9_code!r} does not match the ICD-9 code grammar",
                )
    elif diagnoses:
        report.add_error(DIAGNOSES, "must be a list")

    for name in data:
        if name not in KNOWN_SECTIONS:
            report.add_warning(name, "unknown section, preserved verbatim")

    if not report.ok:
        return report

    # Normalize: every timestamped list sorted non-decreasing by timestamp.
    for name in SERIES_SECTIONS:
        section = data.get(name)
        if isinstance(section, dict):
            for measurement, series in section.items():
                section[measurement] = _sort_series(series)
    for name in REPORT_SECTIONS:
        if name in data:
            data[name] = _sort_series(data[name])
    if isinstance(data.get("Procedure"), list):
        data["Procedure"] = sorted(
            data["Procedure"],
            key=lambda e: str(e[2]) if isinstance(e, (list, tuple)) and len(e) >= 3 else "",
        )
    if isinstance(data.get("Radiology"), list) and all(
        isinstance(e, dict) for e in data["Radiology"]
    ):
        data["Radiology"] = sorted(data["Radiology"], key=lambda e: str(e.get("time", "")))

    return PatientRecord(data, warnings=report.warnings)


def load_patient_record(path: str | Path) -> PatientRecord:
    """Load and validate ``<patient_id>.json``; raises on validation errors."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    result = validate_patient_record(raw)
    if isinstance(result, ValidationReport):
        raise RecordValidationError(result)
    return result


def _demographic_summary(record: PatientRecord) -> str:
    demo = record.demographics
    age = demo.get("age", NOT_RECORDED)
    gender = demo.get("gender", NOT_RECORDED)
    parts = [f"{age}-year-old {gender}."]
    for label, key in (
        ("Insurance", "insurance"),
        ("Language", "language"),
        ("Marital status", "marital_status"),
        ("Ethnicity", "ethnicity"),
    ):
        parts.append(f"{label}: {demo.get(key) or NOT_RECORDED}.")
    return " ".join(str(p) for p in parts)


def render_initial_presentation(record: PatientRecord) -> str:
    """Deterministic opening statement for the visit log.

    Contains the demographics summary, the chief complaint (introduction when
    absent), and the admission diagnosis as the reason for the visit.  The
    Diagnoses section is never read here.
    """
    complaint = record.section("Chief Complaint") or record.section("Introduction") or NOT_RECORDED
    reason = record.admission_diagnosis or NOT_RECORDED
    return (
        f"{_demographic_summary(record)}\n"
        f"Chief complaint: {complaint}\n"
        f"Reason for visit: {reason}"
    )


def redact_for_fallback(record: PatientRecord) -> PatientRecord:
    """Copy of the record without Admission_info, Demographics, or Diagnoses.

    Diagnoses are stripped in addition to the identity sections because they
    are the evaluation labels.  Idempotent; never mutates its input.
    """
    data = record.to_dict()
    for section in (ADMISSION_INFO, DEMOGRAPHICS, DIAGNOSES):
        data.pop(section, None)
    return PatientRecord(data)


@dataclass
class TurnEntry:
    """One answered question: round index, question, answer, answering path."""

    round: int
    question: str
    answer: str
    answer_stage: str  # MATCHED_SECTION | FALLBACK

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "question": self.question,
            "answer": self.answer,
            "answer_stage": self.answer_stage,
        }


class VisitLog:
    """Ordered transcript of a case: initial presentation plus Q&A turns.

    Turns are append-only with consecutive round indices starting at 1.
    This is the sole case context doctor agents ever see.
    """

    def __init__(self, initial_presentation: str):
        self.initial_presentation = initial_presentation
        self.turns: list[TurnEntry] = []
        self.team_history: list = []  # TeamState snapshots, in effect order

    def add_turn(self, question: str, answer: str, answer_stage: str) -> TurnEntry:
        if not question or not answer:
            raise ValueError("question and answer must be non-empty")
        entry = TurnEntry(len(self.turns) + 1, question, answer, answer_stage)
        self.turns.append(entry)
        return entry

    def questions(self) -> list[str]:
        return [t.question for t in self.turns]

    def render_text(self) -> str:
        lines = ["Initial presentation:", self.initial_presentation]
        for turn in self.turns:
            lines.append(f"\nRound {turn.round}")
            lines.append(f"Doctor: {turn.question}")
            lines.append(f"Patient: {turn.answer}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "initial_presentation": self.initial_presentation,
            "turns": [t.to_dict() for t in self.turns],
            "team_history": [t.to_dict() for t in self.team_history],
        }
