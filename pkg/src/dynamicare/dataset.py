"""Dataset pipeline: relational admission/note CSV tables to patient records.

Two stages.  Selection: keep admissions with fewer than five diagnoses,
neither newborn nor deceased, and complete clinical data; one admission per
patient (the earliest); a seeded random sample.  Merging: join the
structured tables into one document per patient, split semi-structured
reports on a fixed header lexicon, and have the model structure the
discharge summary.

Tables are plain CSVs with a header row, named after the source database
tables (ADMISSIONS.csv, DIAGNOSES_ICD.csv, ...).  Code columns are read as
strings so codes keep their leading zeros.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import random
import re
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

from . import prompts as prompt_names
from .errors import PipelineError, ProtocolViolationError, RecordValidationError
from .gateway import ChatRequest, Gateway, TEMPERATURE_CATEGORICAL
from .prompts import PromptPack, default_pack
from .records import (
    NARRATIVE_SECTIONS,
    PatientRecord,
    ValidationReport,
    validate_patient_record,
)

logger = logging.getLogger(__name__)

#: Completeness vocabulary used by FilterCriteria.required_sections.
SECTION_ADMISSION = "Admission Info"
SECTION_DEMOGRAPHICS = "Demographics"
SECTION_DIAGNOSES = "Diagnoses"
SECTION_PRESCRIPTION = "Prescription"
SECTION_PROCEDURE = "Procedure"
SECTION_CHART = "Chart Data"
SECTION_LAB = "Lab Data"
SECTION_DISCHARGE = "Discharge Summary"

DEFAULT_REQUIRED_SECTIONS = (
    SECTION_ADMISSION,
    SECTION_DEMOGRAPHICS,
    SECTION_DIAGNOSES,
    SECTION_PRESCRIPTION,
    SECTION_PROCEDURE,
    SECTION_CHART,
    SECTION_LAB,
    SECTION_DISCHARGE,
)

#: Section headers recognized in semi-structured reports, longest first so
#: the alternation never truncates a multi-word header.
HEADER_LEXICON = (
    "REASON FOR THIS EXAMINATION",
    "MEDICAL CONDITION",
    "FINAL REPORT",
    "COMPARISON",
    "INDICATION",
    "IMPRESSION",
    "FINDINGS",
    "HISTORY",
)

REPORT_KINDS = ("ecg", "echo", "radiology")

_TABLE_FILES = {
    "admissions": "ADMISSIONS.csv",
    "patients": "PATIENTS.csv",
    "diagnoses": "DIAGNOSES_ICD.csv",
    "diagnosis_titles": "D_ICD_DIAGNOSES.csv",
    "prescriptions": "PRESCRIPTIONS.csv",
    "procedures": "PROCEDURES_ICD.csv",
    "procedure_titles": "D_ICD_PROCEDURES.csv",
    "chart": "CHARTEVENTS.csv",
    "chart_items": "D_ITEMS.csv",
    "lab": "LABEVENTS.csv",
    "lab_items": "D_LABITEMS.csv",
    "notes": "NOTEEVENTS.csv",
}
_OPTIONAL_TABLES = {"patients", "diagnosis_titles", "procedure_titles", "chart_items", "lab_items"}


@dataclass(frozen=True)
class AdmissionRow:
    patient_id: str
    admission_id: str
    admission_type: str
    deceased_flag: bool
    admission_diagnosis: str
    admit_time: str = ""
    demographics: dict = field(default_factory=dict)


@dataclass
class FilterCriteria:
    max_diagnoses_exclusive: int = 5
    exclude_newborn: bool = True
    exclude_deceased: bool = True
    required_sections: tuple = DEFAULT_REQUIRED_SECTIONS

    def __post_init__(self):
        if self.max_diagnoses_exclusive < 1:
            raise ValueError("max_diagnoses_exclusive must be >= 1")

    def to_dict(self) -> dict:
        return {
            "max_diagnoses_exclusive": self.max_diagnoses_exclusive,
            "exclude_newborn": self.exclude_newborn,
            "exclude_deceased": self.exclude_deceased,
            "required_sections": list(self.required_sections),
        }


def _read_csv(path: Path) -> list[dict]:
    """Rows as dicts with lower-cased column names; all values are strings."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise PipelineError(f"{path.name}: missing header row")
        return [
            {(k or "").strip().lower(): (v or "").strip() for k, v in row.items()}
            for row in reader
        ]


def _find_table(directory: Path, filename: str) -> Path | None:
    exact = directory / filename
    if exact.exists():
        return exact
    lowered = filename.lower()
    for candidate in directory.iterdir():
        if candidate.name.lower() == lowered:
            return candidate
    return None


def _is_deceased(row: dict) -> bool:
    if row.get("deathtime"):
        return True
    flag = row.get("hospital_expire_flag", "")
    return flag not in ("", "0")


def _group_by(rows: list[dict], key: str) -> dict[str, list[dict]]:
    grouped: dict[str, list[dict]] = {}
    for row in rows:
        grouped.setdefault(row.get(key, ""), []).append(row)
    return grouped


class TableBundle:
    """All source tables loaded and indexed by admission id."""

    def __init__(self, tables: dict[str, list[dict] | None]):
        raw = tables
        self.admissions: list[AdmissionRow] = []
        seen: set[tuple[str, str]] = set()
        for row in raw["admissions"] or []:
            key = (row.get("subject_id", ""), row.get("hadm_id", ""))
            if key in seen:
                raise PipelineError(f"duplicate admission {key}")
            seen.add(key)
            self.admissions.append(
                AdmissionRow(
                    patient_id=row.get("subject_id", ""),
                    admission_id=row.get("hadm_id", ""),
                    admission_type=row.get("admission_type", ""),
                    deceased_flag=_is_deceased(row),
                    admission_diagnosis=row.get("diagnosis", ""),
                    admit_time=row.get("admittime", ""),
                    demographics={
                        k: row.get(k, "")
                        for k in ("insurance", "language", "religion", "marital_status", "ethnicity")
                    },
                )
            )
        self.patients = (
            {row["subject_id"]: row for row in raw["patients"]} if raw.get("patients") else None
        )
        self.diagnoses = _group_by(raw["diagnoses"] or [], "hadm_id")
        for rows in self.diagnoses.values():
            rows.sort(key=lambda r: int(r.get("seq_num") or 0))
        self.diagnosis_titles = {
            row["icd9_code"]: (row.get("short_title", ""), row.get("long_title", ""))
            for row in raw.get("diagnosis_titles") or []
        }
        self.prescriptions = _group_by(raw["prescriptions"] or [], "hadm_id")
        self.procedures = _group_by(raw["procedures"] or [], "hadm_id")
        for rows in self.procedures.values():
            rows.sort(key=lambda r: int(r.get("seq_num") or 0))
        self.procedure_titles = {
            row["icd9_code"]: row.get("short_title") or row.get("long_title", "")
            for row in raw.get("procedure_titles") or []
        }
        self.chart = _group_by(raw["chart"] or [], "hadm_id")
        self.chart_items = {row["itemid"]: row for row in raw.get("chart_items") or []}
        self.lab = _group_by(raw["lab"] or [], "hadm_id")
        self.lab_items = {row["itemid"]: row for row in raw.get("lab_items") or []}
        self.notes = _group_by(raw["notes"] or [], "hadm_id")

    def notes_of(self, admission_id: str, category: str) -> list[dict]:
        wanted = category.lower()
        rows = [
            row
            for row in self.notes.get(admission_id, [])
            if row.get("category", "").lower() == wanted
        ]
        rows.sort(key=lambda r: r.get("charttime") or r.get("chartdate") or "")
        return rows

    def discharge_summary(self, admission_id: str) -> str:
        notes = self.notes_of(admission_id, "discharge summary")
        return notes[0].get("text", "") if notes else ""

    def sections_present(self, admission: AdmissionRow) -> set[str]:
        present = {SECTION_ADMISSION}
        if self.patients is None or admission.patient_id in self.patients:
            present.add(SECTION_DEMOGRAPHICS)
        checks = (
            (SECTION_DIAGNOSES, self.diagnoses),
            (SECTION_PRESCRIPTION, self.prescriptions),
            (SECTION_PROCEDURE, self.procedures),
            (SECTION_CHART, self.chart),
            (SECTION_LAB, self.lab),
        )
        for name, table in checks:
            if table.get(admission.admission_id):
                present.add(name)
        if self.discharge_summary(admission.admission_id):
            present.add(SECTION_DISCHARGE)
        return present


def load_tables(directory: str | Path) -> TableBundle:
    directory = Path(directory)
    if not directory.is_dir():
        raise PipelineError(f"table directory not found: {directory}")
    tables: dict[str, list[dict] | None] = {}
    for name, filename in _TABLE_FILES.items():
        path = _find_table(directory, filename)
        if path is None:
            if name in _OPTIONAL_TABLES:
                tables[name] = None
                continue
            raise PipelineError(f"required table missing: {filename}")
        tables[name] = _read_csv(path)
    return TableBundle(tables)


def filter_admissions(
    admissions: list[AdmissionRow],
    diagnoses_by_admission: dict[str, list] | None,
    notes_index: dict[str, set[str]],
    criteria: FilterCriteria | None = None,
) -> list[str]:
    """Admission ids passing every selection criterion, in input order.

    ``diagnoses_by_admission`` must be the whole table (an absent table is a
    hard error); an admission missing from it simply has zero diagnoses.
    ``notes_index`` maps admission id to the completeness-section names it
    satisfies.
    """
    if diagnoses_by_admission is None:
        raise PipelineError("diagnoses table is required for filtering")
    criteria = criteria or FilterCriteria()
    required = set(criteria.required_sections)
    kept: list[str] = []
    for admission in admissions:
        if criteria.exclude_newborn and admission.admission_type.upper() == "NEWBORN":
            continue
        if criteria.exclude_deceased and admission.deceased_flag:
            continue
        count = len(diagnoses_by_admission.get(admission.admission_id, []))
        if count >= criteria.max_diagnoses_exclusive:
            continue
        if not required <= notes_index.get(admission.admission_id, set()):
            continue
        kept.append(admission.admission_id)
    return kept


def dedupe_and_sample(admissions: list[AdmissionRow], n: int, seed: int) -> list[str]:
    """One admission per patient, then a seed-reproducible sample of n ids.

    For multi-admission patients the earliest admission time wins (ties by
    admission id).  Candidate ids are canonically sorted before the seeded
    shuffle, so the outcome is independent of input row order.
    """
    earliest: dict[str, AdmissionRow] = {}
    for admission in admissions:
        incumbent = earliest.get(admission.patient_id)
        if incumbent is None or (admission.admit_time, admission.admission_id) < (
            incumbent.admit_time,
            incumbent.admission_id,
        ):
            earliest[admission.patient_id] = admission
    candidates = sorted(a.admission_id for a in earliest.values())
    if n > len(candidates):
        raise PipelineError(
            f"requested {n} patients but only {len(candidates)} unique patients remain"
        )
    rng = random.Random(seed)
    rng.shuffle(candidates)
    return candidates[:n]


_HEADER_RE = re.compile(
    r"^[ \t]*(" + "|".join(re.escape(h) for h in HEADER_LEXICON) + r")[ \t]*:?",
    re.IGNORECASE | re.MULTILINE,
)


def extract_report_sections(report_text: str, report_kind: str) -> dict[str, str]:
    """Split a semi-structured report on the known header lexicon.

    Header names become lower-case keys; text before any header goes under
    "body".  A header with no body of its own (a banner line directly above
    another header) merges into the next header's key, which is how
    "FINAL REPORT" + "HISTORY" becomes the "final report history" field.
    """
    if report_kind not in REPORT_KINDS:
        raise ValueError(f"unknown report kind {report_kind!r}")
    if not report_text or not report_text.strip():
        return {}
    matches = list(_HEADER_RE.finditer(report_text))
    sections: dict[str, str] = {}

    def put(key: str, value: str) -> None:
        value = value.strip()
        if not value:
            return
        sections[key] = (sections[key] + "\n" + value) if key in sections else value

    preamble = report_text[: matches[0].start()] if matches else report_text
    put("body", preamble)

    pending_banner = ""
    for index, match in enumerate(matches):
        name = " ".join(match.group(1).lower().split())
        end = matches[index + 1].start() if index + 1 < len(matches) else len(report_text)
        body = report_text[match.end() : end].strip()
        key = (pending_banner + " " + name).strip()
        if not body and index + 1 < len(matches):
            pending_banner = key
            continue
        pending_banner = ""
        put(key, body)
    return sections


def parse_discharge_summary(
    text: str,
    gateway,
    *,
    admission_id: str = "",
    pack: PromptPack | None = None,
    model_name: str = "gpt-4.1",
) -> dict:
    """Model-structured map of the discharge summary's narrative sections.

    Keys outside the record's narrative vocabulary are preserved under an
    "extra" sub-map with a warning.  One repair retry; persistent failure is
    a hard error carrying the admission id.
    """
    if not text or not text.strip():
        raise PipelineError(f"admission {admission_id or '?'}: discharge summary is empty")
    pack = pack or default_pack()
    if not isinstance(gateway, Gateway):
        gateway = Gateway(gateway)
    request = ChatRequest(
        system_prompt=pack.load(prompt_names.DISCHARGE_STRUCTURING),
        user_context=text,
        model_name=model_name,
        temperature=TEMPERATURE_CATEGORICAL,
        expects_structured=True,
        session_id=admission_id,
        role="discharge_structuring",
        round=0,
    )
    try:
        parsed = gateway.complete_structured(request, [])
    except ProtocolViolationError as exc:
        raise PipelineError(
            f"admission {admission_id or '?'}: discharge summary structuring failed: {exc}"
        ) from exc

    allowed = set(NARRATIVE_SECTIONS)
    structured: dict = {}
    extra: dict = {}
    for key, value in parsed.items():
        if key in allowed:
            structured[key] = value
        else:
            extra[key] = value
            logger.warning(
                "admission %s: discharge section %r outside the vocabulary, kept under 'extra'",
                admission_id or "?",
                key,
            )
    if extra:
        structured["extra"] = extra
    return structured


def _value_with_units(row: dict) -> str:
    value = row.get("value", "")
    unit = row.get("valueuom", "")
    return f"{value} {unit}".strip()


def _event_series(rows: list[dict], labels: dict[str, dict], label_field: str = "label"):
    """Group chart/lab event rows into {measurement: [[time, value], ...]}."""
    series: dict[str, list[list[str]]] = {}
    for row in rows:
        item = labels.get(row.get("itemid", ""), {})
        name = item.get(label_field) or row.get("itemid", "")
        series.setdefault(name, []).append(
            [row.get("charttime", ""), _value_with_units(row)]
        )
    for entries in series.values():
        entries.sort(key=lambda e: e[0])
    return series


def assemble_patient_record(
    admission_id: str,
    bundle: TableBundle,
    discharge_sections: dict | None = None,
) -> PatientRecord:
    """Merge every table's rows for one admission into a validated record."""
    admission = next(
        (a for a in bundle.admissions if a.admission_id == admission_id), None
    )
    if admission is None:
        raise PipelineError(f"admission {admission_id} not in the admissions table")

    data: dict = {
        "Admission_info": {
            "patient_id": admission.patient_id,
            "admission_id": admission.admission_id,
            "admission_diagnosis": admission.admission_diagnosis.lower(),
        }
    }

    demographics: dict = {
        key: value.lower() for key, value in admission.demographics.items() if value
    }
    patient_row = (bundle.patients or {}).get(admission.patient_id, {})
    if patient_row.get("gender"):
        demographics["gender"] = patient_row["gender"]
    age = _age_at(patient_row.get("dob", ""), admission.admit_time)
    if age is not None:
        demographics["age"] = age
    data["Demographics"] = demographics

    data["Diagnoses"] = [
        [
            row.get("icd9_code", ""),
            *bundle.diagnosis_titles.get(row.get("icd9_code", ""), ("", "")),
        ]
        for row in bundle.diagnoses.get(admission_id, [])
    ]

    prescriptions = sorted(
        bundle.prescriptions.get(admission_id, []), key=lambda r: r.get("startdate", "")
    )
    seen_drugs: set[str] = set()
    drug_names: list[str] = []
    for row in prescriptions:
        drug = row.get("drug", "")
        if drug and drug not in seen_drugs:
            seen_drugs.add(drug)
            drug_names.append(drug)
    data["Prescription"] = drug_names

    data["Procedure"] = [
        [
            row.get("icd9_code", ""),
            bundle.procedure_titles.get(row.get("icd9_code", ""), ""),
            row.get("charttime") or admission.admit_time,
        ]
        for row in bundle.procedures.get(admission_id, [])
    ]

    respiratory_rows: list[dict] = []
    other_rows: list[dict] = []
    for row in bundle.chart.get(admission_id, []):
        item = bundle.chart_items.get(row.get("itemid", ""), {})
        bucket = respiratory_rows if item.get("category", "").lower() == "respiratory" else other_rows
        bucket.append(row)
    data["Chart Data"] = _event_series(other_rows, bundle.chart_items)
    respiratory = _event_series(respiratory_rows, bundle.chart_items)
    if respiratory:
        data["Respiratory"] = respiratory
    data["Lab Data"] = _event_series(bundle.lab.get(admission_id, []), bundle.lab_items)

    for category, section in (("ecg", "ECG"), ("echo", "Echo")):
        notes = bundle.notes_of(admission_id, category)
        if notes:
            data[section] = [
                [row.get("charttime") or row.get("chartdate", ""), row.get("text", "").strip()]
                for row in notes
            ]

    radiology_notes = bundle.notes_of(admission_id, "radiology")
    if radiology_notes:
        entries = []
        for row in radiology_notes:
            entry = {
                "time": row.get("charttime") or row.get("chartdate", ""),
                "part": row.get("description", ""),
            }
            entry.update(extract_report_sections(row.get("text", ""), "radiology"))
            entries.append(entry)
        data["Radiology"] = entries

    for key, value in (discharge_sections or {}).items():
        data[key] = value

    result = validate_patient_record(data)
    if isinstance(result, ValidationReport):
        raise PipelineError(
            f"admission {admission_id}: assembled record invalid: {result}"
        )
    return result


def _age_at(dob: str, admit_time: str) -> int | None:
    try:
        born = date.fromisoformat(dob.split()[0])
        admitted = date.fromisoformat(admit_time.split()[0])
    except (ValueError, IndexError):
        return None
    years = admitted.year - born.year
    if (admitted.month, admitted.day) < (born.month, born.day):
        years -= 1
    return max(years, 0)


def _atomic_write_json(path: Path, payload) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=2)
        fh.write("\n")
    os.replace(tmp, path)


def build_dataset(
    tables_dir: str | Path,
    out_dir: str | Path,
    n: int,
    seed: int,
    gateway,
    *,
    criteria: FilterCriteria | None = None,
    pack: PromptPack | None = None,
    model_name: str = "gpt-4.1",
    force: bool = False,
) -> dict:
    """Run the whole pipeline and write one record file per patient.

    Returns the manifest (also written to ``out_dir/manifest.json``) with
    the seed, the criteria, and the count at every stage.  Refuses to write
    over an existing build unless ``force`` is set.
    """
    criteria = criteria or FilterCriteria()
    out = Path(out_dir)
    manifest_path = out / "manifest.json"
    if manifest_path.exists() and not force:
        raise PipelineError(f"{out} already holds a build; pass force to overwrite")
    out.mkdir(parents=True, exist_ok=True)

    bundle = load_tables(tables_dir)
    notes_index = {a.admission_id: bundle.sections_present(a) for a in bundle.admissions}
    kept_ids = filter_admissions(bundle.admissions, bundle.diagnoses, notes_index, criteria)
    kept_rows = [a for a in bundle.admissions if a.admission_id in set(kept_ids)]
    sampled = dedupe_and_sample(kept_rows, n, seed)

    by_admission = {a.admission_id: a for a in bundle.admissions}
    written = 0
    for admission_id in sampled:
        admission = by_admission[admission_id]
        sections = parse_discharge_summary(
            bundle.discharge_summary(admission_id),
            gateway,
            admission_id=admission_id,
            pack=pack,
            model_name=model_name,
        )
        record = assemble_patient_record(admission_id, bundle, sections)
        _atomic_write_json(out / f"{admission.patient_id}.json", record.to_dict())
        written += 1

    unique_patients = len({a.patient_id for a in kept_rows})
    manifest = {
        "seed": seed,
        "criteria": criteria.to_dict(),
        "counts": {
            "admissions": len(bundle.admissions),
            "filtered": len(kept_ids),
            "unique_patients": unique_patients,
            "sampled": len(sampled),
            "written": written,
        },
    }
    _atomic_write_json(manifest_path, manifest)
    return manifest


def load_record_dir(directory: str | Path) -> list[PatientRecord]:
    """Load every record file in a dataset directory (manifest excluded)."""
    directory = Path(directory)
    records = []
    for path in sorted(directory.glob("*.json")):
        if path.name == "manifest.json":
            continue
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        result = validate_patient_record(raw)
        if isinstance(result, ValidationReport):
            raise RecordValidationError(result)
        records.append(result)
    return records
