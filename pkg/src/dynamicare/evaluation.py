"""Diagnosis scoring: ICD-9 category matching, Hit@K / Rec@K / Ave-Q,
per-chapter breakdowns, and the human annotation sheets.

Predicted diagnosis names are mapped to ICD-9 codes, reduced to high-level
categories (3-digit numeric, V+2, E+3 prefixes), and compared against the
ground-truth categories.  Unmapped names keep their rank and count as
misses.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .errors import EvaluationError
from .records import ICD9_PATTERN, _coerce_diagnosis

#: High-level ICD-9 chapters: (range label, definition, low, high); E and V
#: codes form their own bucket.
CHAPTERS: tuple[tuple[str, str, int | None, int | None], ...] = (
    ("001-139", "infectious and parasitic diseases", 1, 139),
    ("140-239", "neoplasms", 140, 239),
    ("240-279", "endocrine, nutritional and metabolic diseases, and immunity disorders", 240, 279),
    ("280-289", "diseases of the blood and blood-forming organs", 280, 289),
    ("290-319", "mental disorders", 290, 319),
    ("320-389", "diseases of the nervous system and sense organs", 320, 389),
    ("390-459", "diseases of the circulatory system", 390, 459),
    ("460-519", "diseases of the respiratory system", 460, 519),
    ("520-579", "diseases of the digestive system", 520, 579),
    ("580-629", "diseases of the genitourinary system", 580, 629),
    ("630-679", "complications of pregnancy, childbirth, and the puerperium", 630, 679),
    ("680-709", "diseases of the skin and subcutaneous tissue", 680, 709),
    ("710-739", "diseases of the musculoskeletal system and connective tissue", 710, 739),
    ("740-759", "congenital anomalies", 740, 759),
    ("760-779", "certain conditions originating in the perinatal period", 760, 779),
    ("780-799", "symptoms, signs, and ill-defined conditions", 780, 799),
    ("800-999", "injury and poisoning", 800, 999),
    ("E and V codes", "external causes of injury and supplemental classification", None, None),
)

UNMAPPED = None


def normalize_to_icd9(diagnosis_name: str, mapper) -> str | None:
    """Map a free-text diagnosis name to an ICD-9 code, or None if unmappable.

    The mapper is anything with a ``lookup(name)`` method (the cached
    service client) or a plain name-to-code mapping (offline fixture
    table).  Unmapped names still occupy their prediction rank.
    """
    name = " ".join(str(diagnosis_name or "").split())
    if not name:
        return UNMAPPED
    if hasattr(mapper, "lookup"):
        return mapper.lookup(name)
    return mapper.get(name.lower())


def category_of(raw_code: str) -> str:
    """High-level category of an ICD-9 code.

    Numeric codes keep their first three digits, V codes two digits, E
    codes three digits; dots are ignored.
    """
    code = str(raw_code).strip().upper().replace(".", "")
    if not ICD9_PATTERN.match(code):
        raise EvaluationError(f"malformed ICD-9 code {raw_code!r}")
    if code.startswith("V"):
        return code[:3]
    if code.startswith("E"):
        return code[:4]
    return code[:3]


def chapter_of(category: str) -> str:
    """Range label of the chapter containing an ICD-9 category."""
    if category.startswith(("E", "V")):
        return CHAPTERS[-1][0]
    number = int(category)
    for label, _definition, low, high in CHAPTERS[:-1]:
        if low <= number <= high:
            return label
    raise EvaluationError(f"category {category!r} outside every chapter range")


def hit_at_k(predicted_categories, truth_categories, k: int) -> int:
    """1 iff any of the first k predictions is a ground-truth category."""
    truth = set(truth_categories)
    return int(any(c is not None and c in truth for c in list(predicted_categories)[:k]))


def recall_at_k(predicted_categories, truth_categories, k: int) -> float:
    """Fraction of distinct truth categories present in the top k."""
    truth = set(truth_categories)
    if not truth:
        raise EvaluationError("truth categories must be non-empty")
    found = {c for c in list(predicted_categories)[:k] if c in truth}
    return len(found) / len(truth)


@dataclass
class MetricReport:
    per_patient: list[dict] = field(default_factory=list)
    aggregate: dict = field(default_factory=dict)
    per_chapter: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "per_patient": self.per_patient,
            "aggregate": self.aggregate,
            "per_chapter": self.per_chapter,
        }


def _result_field(result, name: str):
    if isinstance(result, dict):
        return result[name]
    return getattr(result, name)


def aggregate(results, truths: dict, mapper) -> MetricReport:
    """Score completed sessions against their ground-truth diagnoses.

    ``results`` holds session results (objects or result-event dicts);
    ``truths`` maps patient id to that record's diagnosis entries.  Every
    result must have a truth entry.  Hit/Rec aggregates are fractions;
    chapter rows count one instance per (patient, truth diagnosis).
    """
    per_patient: list[dict] = []
    buckets: dict[str, dict] = {
        label: {"hits5": 0, "hits10": 0, "n": 0} for label, *_ in CHAPTERS
    }

    for result in results:
        patient_id = str(_result_field(result, "patient_id"))
        if patient_id not in truths:
            raise EvaluationError(f"no ground truth for patient {patient_id!r}")
        truth_categories = [
            category_of(_coerce_diagnosis(d).icd9_code) for d in truths[patient_id]
        ]
        if not truth_categories:
            raise EvaluationError(f"patient {patient_id!r} has no truth diagnoses")

        predicted: list[str | None] = []
        for name in _result_field(result, "final_diagnoses"):
            code = normalize_to_icd9(name, mapper)
            predicted.append(category_of(code) if code is not None else UNMAPPED)

        questions = int(_result_field(result, "questions_asked"))
        per_patient.append(
            {
                "patient_id": patient_id,
                "hit@5": hit_at_k(predicted, truth_categories, 5),
                "hit@10": hit_at_k(predicted, truth_categories, 10),
                "rec@5": recall_at_k(predicted, truth_categories, 5),
                "rec@10": recall_at_k(predicted, truth_categories, 10),
                "questions": questions,
            }
        )

        top5 = set(c for c in predicted[:5] if c is not None)
        top10 = set(c for c in predicted[:10] if c is not None)
        for category in truth_categories:
            bucket = buckets[chapter_of(category)]
            bucket["n"] += 1
            bucket["hits5"] += int(category in top5)
            bucket["hits10"] += int(category in top10)

    n = len(per_patient)
    means = {
        "Hit@5": sum(r["hit@5"] for r in per_patient) / n if n else 0.0,
        "Hit@10": sum(r["hit@10"] for r in per_patient) / n if n else 0.0,
        "Rec@5": sum(r["rec@5"] for r in per_patient) / n if n else 0.0,
        "Rec@10": sum(r["rec@10"] for r in per_patient) / n if n else 0.0,
        "Ave-Q": sum(r["questions"] for r in per_patient) / n if n else 0.0,
        "n": n,
    }

    per_chapter = []
    for label, definition, *_ in CHAPTERS:
        bucket = buckets[label]
        size = bucket["n"]
        per_chapter.append(
            {
                "range": label,
                "definition": definition,
                "hit@5": bucket["hits5"] / size if size else None,
                "hit@10": bucket["hits10"] / size if size else None,
                "sample_size": size,
            }
        )
    return MetricReport(per_patient=per_patient, aggregate=means, per_chapter=per_chapter)


def render_summary(report: MetricReport, aborted: int = 0) -> str:
    """Plain-text overall table: Hit@5, Hit@10, Rec@5, Rec@10, Ave-Q."""
    agg = report.aggregate
    headers = ("Hit@5", "Hit@10", "Rec@5", "Rec@10", "Ave-Q", "n")
    values = (
        f"{agg['Hit@5'] * 100:.1f}",
        f"{agg['Hit@10'] * 100:.1f}",
        f"{agg['Rec@5'] * 100:.1f}",
        f"{agg['Rec@10'] * 100:.1f}",
        f"{agg['Ave-Q']:.2f}",
        str(agg["n"]),
    )
    widths = [max(len(h), len(v)) for h, v in zip(headers, values)]
    lines = [
        "  ".join(h.rjust(w) for h, w in zip(headers, widths)),
        "  ".join(v.rjust(w) for v, w in zip(values, widths)),
    ]
    if aborted:
        lines.append(f"(aborted sessions excluded: {aborted})")
    return "\n".join(lines)


def render_chapter_table(report: MetricReport) -> str:
    """Plain-text per-chapter table: ICD-9 codes, Definition, Hit@5, Hit@10,
    Sample Size; empty chapters show dashes."""
    rows = [("ICD-9 codes", "Definition", "Hit@5", "Hit@10", "Sample Size")]
    for entry in report.per_chapter:
        rows.append(
            (
                entry["range"],
                entry["definition"],
                "-" if entry["hit@5"] is None else f"{entry['hit@5'] * 100:.2f}",
                "-" if entry["hit@10"] is None else f"{entry['hit@10'] * 100:.2f}",
                str(entry["sample_size"]),
            )
        )
    widths = [max(len(row[i]) for row in rows) for i in range(5)]
    lines = []
    for row in rows:
        cells = [row[0].ljust(widths[0]), row[1].ljust(widths[1])]
        cells += [row[i].rjust(widths[i]) for i in (2, 3, 4)]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines)


ANNOTATION_HEADER = (
    "# Rate each turn on a 0-2 scale. Truthfulness: 0=incorrect, 1=partially "
    "correct, 2=fully correct. Relevance: 0=irrelevant, 1=somewhat related, "
    "2=highly relevant."
)
ANNOTATION_COLUMNS = ("patient_id", "round", "question", "answer", "truthfulness", "relevance")
DEFAULT_ANNOTATORS = ("A", "B", "C")


def _turns_from_transcript(path: Path) -> list[dict]:
    turns = []
    patient_id = path.stem
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            event = json.loads(line)
            if event.get("event") == "session_start":
                patient_id = event.get("patient_id", patient_id)
            elif event.get("event") == "turn":
                turns.append(
                    {
                        "patient_id": patient_id,
                        "round": event["round"],
                        "question": event["question"],
                        "answer": event["answer"],
                    }
                )
    return turns


def export_annotation_sheets(
    transcripts: list[str | Path],
    n: int,
    seed: int,
    out_dir: str | Path,
    annotators: tuple[str, ...] = DEFAULT_ANNOTATORS,
) -> list[Path]:
    """Sample n transcripts and write one blank scoring sheet per annotator.

    Each sheet holds every Q&A turn of the sampled sessions with empty
    Truthfulness/Relevance columns; the sample is reproducible from the
    seed.
    """
    paths = sorted(Path(p) for p in transcripts)
    if n > len(paths):
        raise EvaluationError(f"asked for {n} transcripts but only {len(paths)} exist")
    rng = random.Random(seed)
    rng.shuffle(paths)
    sampled = sorted(paths[:n])

    rows: list[dict] = []
    for path in sampled:
        rows.extend(_turns_from_transcript(path))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for annotator in annotators:
        sheet = out / f"annotation_{annotator}.csv"
        with open(sheet, "w", newline="", encoding="utf-8") as fh:
            fh.write(ANNOTATION_HEADER + "\n")
            writer = csv.DictWriter(fh, fieldnames=ANNOTATION_COLUMNS)
            writer.writeheader()
            for row in rows:
                writer.writerow({**row, "truthfulness": "", "relevance": ""})
        written.append(sheet)
    return written


def _read_scores(path: Path) -> tuple[list[int], list[int]]:
    truthfulness: list[int] = []
    relevance: list[int] = []
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    for row in csv.DictReader(lines):
        for column, scores in (("truthfulness", truthfulness), ("relevance", relevance)):
            value = (row.get(column) or "").strip()
            if not value:
                continue
            score = int(value)
            if score not in (0, 1, 2):
                raise EvaluationError(f"{path}: {column} score {score} outside 0-2")
            scores.append(score)
    return truthfulness, relevance


def score_annotation_sheets(sheets: dict[str, str | Path]) -> dict:
    """Per-annotator means plus the overall average (mean of the means).

    Returns {"Truthfulness": {annotator: mean..., "Average": ...},
    "Relevance": {...}}.
    """
    result: dict[str, dict[str, float]] = {"Truthfulness": {}, "Relevance": {}}
    for annotator, path in sheets.items():
        truthfulness, relevance = _read_scores(Path(path))
        if not truthfulness or not relevance:
            raise EvaluationError(f"{path}: no filled scores to average")
        result["Truthfulness"][annotator] = sum(truthfulness) / len(truthfulness)
        result["Relevance"][annotator] = sum(relevance) / len(relevance)
    for metric in ("Truthfulness", "Relevance"):
        means = list(result[metric].values())
        result[metric]["Average"] = sum(means) / len(means)
    return result


def render_annotation_table(scores: dict) -> str:
    """Plain-text table: one row per metric, annotator columns plus Average."""
    annotators = [a for a in scores["Truthfulness"] if a != "Average"] + ["Average"]
    rows = [("", *annotators)]
    for metric in ("Truthfulness", "Relevance"):
        rows.append(
            (metric, *(f"{scores[metric][a]:.2f}" for a in annotators))
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = []
    for row in rows:
        cells = [row[0].ljust(widths[0])] + [
            row[i].rjust(widths[i]) for i in range(1, len(row))
        ]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines)
