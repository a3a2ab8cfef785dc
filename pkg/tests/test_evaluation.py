"""Scoring: category reduction, chapter buckets, Hit/Rec/Ave-Q aggregation,
and the annotation-sheet round trip."""

import csv
import json

import pytest
from hypothesis import given, strategies as st

import oracles
from dynamicare import (
    EvaluationError,
    aggregate,
    category_of,
    chapter_of,
    export_annotation_sheets,
    hit_at_k,
    recall_at_k,
    render_annotation_table,
    render_chapter_table,
    render_summary,
    score_annotation_sheets,
)
from dynamicare.evaluation import CHAPTERS, normalize_to_icd9


@pytest.mark.parametrize(
    "code, category",
    [
        ("4280", "428"),
        ("42822", "428"),
        ("428.22", "428"),
        ("038", "038"),
        ("0389", "038"),
        ("V4501", "V45"),
        ("v45.01", "V45"),
        ("V09", "V09"),
        ("E8782", "E878"),
        ("e878.2", "E878"),
        ("E9999", "E999"),
        (" 5990 ", "599"),
    ],
)
def test_category_reduction(code, category):
    assert category_of(code) == category


@pytest.mark.parametrize("bad", ["", "12", "123456", "V1", "V45678", "E12", "E98765", "4280X", "ICD"])
def test_malformed_codes_rejected(bad):
    with pytest.raises(EvaluationError):
        category_of(bad)


def test_same_category_codes_match_each_other():
    assert category_of("4280") == category_of("42822")
    assert category_of("V45.01") == category_of("V4502")
    assert category_of("E850.0") == category_of("E8501")


@pytest.mark.parametrize(
    "category, label",
    [
        ("001", "001-139"),
        ("139", "001-139"),
        ("428", "390-459"),
        ("585", "580-629"),
        ("780", "780-799"),
        ("800", "800-999"),
        ("999", "800-999"),
        ("V45", "E and V codes"),
        ("E878", "E and V codes"),
    ],
)
def test_chapter_ranges(category, label):
    assert chapter_of(category) == label


def test_chapter_table_is_exhaustive_and_ordered():
    assert len(CHAPTERS) == 18
    with pytest.raises(EvaluationError):
        chapter_of("000")
    lows = [low for _, _, low, _high in CHAPTERS[:-1]]
    assert lows == sorted(lows)


def test_hit_counts_rank_slots_including_unmapped():
    truth = ["428"]
    assert hit_at_k(["428"], truth, 5) == 1
    assert hit_at_k([None, None, None, None, "428"], truth, 5) == 1
    assert hit_at_k([None, None, None, None, None, "428"], truth, 5) == 0
    assert hit_at_k([None, None, None, None, None, "428"], truth, 10) == 1
    assert hit_at_k([], truth, 5) == 0


def test_recall_counts_distinct_truths():
    truth = ["428", "599", "250"]
    assert recall_at_k(["428", "428", "428"], truth, 5) == pytest.approx(1 / 3)
    assert recall_at_k(["428", "599"], truth, 5) == pytest.approx(2 / 3)
    assert recall_at_k(["250", None, "599", "428"], truth, 10) == 1.0
    with pytest.raises(EvaluationError):
        recall_at_k(["428"], [], 5)


category = st.one_of(st.none(), st.sampled_from(["001", "250", "428", "599", "V45", "E878"]))


@given(
    predicted=st.lists(category, max_size=12),
    truth=st.lists(st.sampled_from(["001", "250", "428", "599"]), min_size=1, max_size=4),
    k=st.sampled_from([1, 5, 10]),
)
def test_rank_metrics_match_oracle_property(predicted, truth, k):
    assert hit_at_k(predicted, truth, k) == oracles.oracle_hit(predicted, truth, k)
    assert recall_at_k(predicted, truth, k) == pytest.approx(
        oracles.oracle_recall(predicted, truth, k)
    )


MAPPER = {
    "heart failure": "42822",
    "urinary tract infection": "5990",
    "diabetes mellitus": "25000",
}


def test_normalize_uses_dict_or_lookup_client():
    assert normalize_to_icd9("Heart  Failure", MAPPER) == "42822"
    assert normalize_to_icd9("unknown thing", MAPPER) is None
    assert normalize_to_icd9("", MAPPER) is None

    class Client:
        def lookup(self, name):
            return "4019" if name == "hypertension" else None

    assert normalize_to_icd9("hypertension", Client()) == "4019"
    assert normalize_to_icd9("other", Client()) is None


def hand_report():
    results = [
        {
            "patient_id": "u1",
            "final_diagnoses": ["no such dx", "Heart Failure", "x", "x", "x",
                                "urinary tract infection"],
            "questions_asked": 2,
        },
        {
            "patient_id": "u2",
            "final_diagnoses": ["diabetes mellitus"],
            "questions_asked": 0,
        },
    ]
    truths = {
        "u1": [["4280", "CHF NOS", "Congestive heart failure"],
               ["5990", "UTI NOS", "Urinary tract infection"]],
        "u2": [["25000", "DMII", "Diabetes mellitus type II"]],
    }
    return aggregate(results, truths, MAPPER)


def test_aggregate_hand_computed_case():
    report = hand_report()
    assert report.aggregate == {
        "Hit@5": 1.0, "Hit@10": 1.0,
        "Rec@5": 0.75, "Rec@10": 1.0,
        "Ave-Q": 1.0, "n": 2,
    }
    u1 = report.per_patient[0]
    # the unmapped first prediction still consumed rank 1, pushing the UTI
    # match to rank 6 and out of the top five
    assert u1["rec@5"] == 0.5 and u1["rec@10"] == 1.0

    by_range = {row["range"]: row for row in report.per_chapter}
    assert by_range["390-459"]["sample_size"] == 1
    assert by_range["390-459"]["hit@5"] == 1.0
    assert by_range["580-629"]["hit@5"] == 0.0
    assert by_range["580-629"]["hit@10"] == 1.0
    assert by_range["240-279"]["hit@5"] == 1.0
    assert sum(row["sample_size"] for row in report.per_chapter) == 3
    assert by_range["140-239"]["hit@5"] is None


def test_aggregate_requires_truth_for_every_result():
    with pytest.raises(EvaluationError, match="no ground truth"):
        aggregate([{"patient_id": "ghost", "final_diagnoses": [], "questions_asked": 0}],
                  {}, MAPPER)
    with pytest.raises(EvaluationError, match="no truth diagnoses"):
        aggregate([{"patient_id": "u", "final_diagnoses": [], "questions_asked": 0}],
                  {"u": []}, MAPPER)


def test_summary_rendering_is_percent_scaled():
    text = render_summary(hand_report())
    lines = text.splitlines()
    assert lines[0].split() == ["Hit@5", "Hit@10", "Rec@5", "Rec@10", "Ave-Q", "n"]
    assert lines[1].split() == ["100.0", "100.0", "75.0", "100.0", "1.00", "2"]
    assert len(lines) == 2

    with_aborts = render_summary(hand_report(), aborted=3)
    assert with_aborts.splitlines()[-1] == "(aborted sessions excluded: 3)"


def test_chapter_rendering_covers_all_rows_with_dashes():
    lines = render_chapter_table(hand_report()).splitlines()
    assert len(lines) == 1 + len(CHAPTERS)
    assert lines[0].split("  ")[0].strip() == "ICD-9 codes"
    circulatory = next(l for l in lines if l.startswith("390-459"))
    assert "100.00" in circulatory
    empty = next(l for l in lines if l.startswith("140-239"))
    assert empty.split()[-1] == "0" and "-" in empty.split()


# --- annotation sheets --------------------------------------------------------


def write_transcript(path, patient_id, turns):
    events = [{"event": "session_start", "patient_id": patient_id}]
    for round_index, (question, answer) in enumerate(turns, 1):
        events.append({
            "event": "turn", "round": round_index,
            "question": question, "answer": answer, "stage": "matched-section",
        })
    events.append({"event": "result", "patient_id": patient_id})
    path.write_text("".join(json.dumps(e) + "\n" for e in events), encoding="utf-8")


@pytest.fixture()
def transcript_dir(tmp_path):
    directory = tmp_path / "transcripts"
    directory.mkdir()
    write_transcript(directory / "t1.jsonl", "t1", [("Q1?", "A1."), ("Q2?", "A2.")])
    write_transcript(directory / "t2.jsonl", "t2", [("Q3?", "A3.")])
    write_transcript(directory / "t3.jsonl", "t3", [("Q4?", "A4.")])
    return directory


def test_export_writes_one_identical_sheet_per_annotator(transcript_dir, tmp_path):
    sheets = export_annotation_sheets(
        sorted(transcript_dir.glob("*.jsonl")), n=3, seed=1, out_dir=tmp_path / "sheets"
    )
    assert [p.name for p in sheets] == [
        "annotation_A.csv", "annotation_B.csv", "annotation_C.csv"
    ]
    texts = [p.read_text(encoding="utf-8") for p in sheets]
    assert texts[0] == texts[1] == texts[2]
    assert texts[0].startswith("#")
    rows = list(csv.DictReader(texts[0].splitlines()[1:]))
    assert [r["question"] for r in rows] == ["Q1?", "Q2?", "Q3?", "Q4?"]
    assert all(r["truthfulness"] == "" and r["relevance"] == "" for r in rows)


def test_export_sampling_is_seeded(transcript_dir, tmp_path):
    paths = sorted(transcript_dir.glob("*.jsonl"))
    first = export_annotation_sheets(paths, n=2, seed=9, out_dir=tmp_path / "s1")
    second = export_annotation_sheets(paths, n=2, seed=9, out_dir=tmp_path / "s2")
    assert first[0].read_text(encoding="utf-8") == second[0].read_text(encoding="utf-8")
    with pytest.raises(EvaluationError):
        export_annotation_sheets(paths, n=4, seed=9, out_dir=tmp_path / "s3")


def fill_scores(sheet, truthfulness, relevance):
    lines = sheet.read_text(encoding="utf-8").splitlines()
    rows = list(csv.DictReader(lines[1:]))
    for row, t, r in zip(rows, truthfulness, relevance):
        row["truthfulness"], row["relevance"] = str(t), str(r)
    with open(sheet, "w", newline="", encoding="utf-8") as fh:
        fh.write(lines[0] + "\n")
        writer = csv.DictWriter(fh, fieldnames=rows[0].keys())
        writer.writeheader()
        writer.writerows(rows)


def test_scoring_averages_annotator_means(transcript_dir, tmp_path):
    sheets = export_annotation_sheets(
        sorted(transcript_dir.glob("*.jsonl")), n=3, seed=1, out_dir=tmp_path / "sheets"
    )
    fill_scores(sheets[0], [2, 2, 2, 2], [2, 2, 2, 2])
    fill_scores(sheets[1], [1, 1, 1, 1], [2, 1, 2, 1])
    fill_scores(sheets[2], [0, 2, 0, 2], [1, 1, 1, 1])
    scores = score_annotation_sheets({"A": sheets[0], "B": sheets[1], "C": sheets[2]})
    assert scores["Truthfulness"]["A"] == 2.0
    assert scores["Truthfulness"]["B"] == 1.0
    assert scores["Truthfulness"]["C"] == 1.0
    assert scores["Truthfulness"]["Average"] == pytest.approx(4 / 3)
    assert scores["Relevance"]["Average"] == pytest.approx((2.0 + 1.5 + 1.0) / 3)

    table = render_annotation_table(scores)
    lines = table.splitlines()
    assert lines[0].split() == ["A", "B", "C", "Average"]
    assert lines[1].split() == ["Truthfulness", "2.00", "1.00", "1.00", "1.33"]
    assert lines[2].split()[0] == "Relevance"


def test_scoring_rejects_out_of_range_and_empty(transcript_dir, tmp_path):
    sheets = export_annotation_sheets(
        sorted(transcript_dir.glob("*.jsonl")), n=3, seed=1, out_dir=tmp_path / "sheets"
    )
    with pytest.raises(EvaluationError, match="no filled scores"):
        score_annotation_sheets({"A": sheets[0]})
    fill_scores(sheets[1], [3, 0, 0, 0], [0, 0, 0, 0])
    with pytest.raises(EvaluationError, match="outside 0-2"):
        score_annotation_sheets({"B": sheets[1]})
