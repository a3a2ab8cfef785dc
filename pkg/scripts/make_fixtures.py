#!/usr/bin/env python3
"""Regenerates every deterministic fixture under tests/fixtures/.

Run from the repository root after changing prompt templates, transcript
fields, or fixture plans:

    python3 scripts/make_fixtures.py

Scripted replies are authored here; golden transcripts and golden assembled
records are frozen engine output.  Expected metric values come from the
independent reference implementations in tests/oracles.py, never from the
package.
"""

from __future__ import annotations

import csv
import json
import shutil
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "tests" / "fixtures"
sys.path.insert(0, str(ROOT / "tests"))

import oracles  # noqa: E402

from dynamicare import (  # noqa: E402
    Gateway,
    ScriptedBackend,
    SessionConfig,
    TranscriptWriter,
    load_patient_record,
    run_many,
    run_session,
)
from dynamicare.dataset import (  # noqa: E402
    assemble_patient_record,
    load_tables,
    parse_discharge_summary,
)

J = json.dumps


def script_line(session: str, role: str, round_index: int, reply) -> str:
    if not isinstance(reply, str):
        reply = J(reply, ensure_ascii=False)
    return J(
        {"session": session, "role": role, "round": round_index, "reply": reply},
        ensure_ascii=False,
    )


def write_lines(path: Path, lines: list[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(J(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


def write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# Scenario replay: head-injury case, radiologist recruited in round 3
# ---------------------------------------------------------------------------

P001 = {
    "Admission_info": {
        "patient_id": "p001",
        "admission_id": "h001",
        "admission_diagnosis": "head injury",
    },
    "Demographics": {
        "insurance": "private",
        "language": "engl",
        "marital_status": "married",
        "ethnicity": "white",
        "gender": "M",
        "age": 34,
    },
    "Diagnoses": [
        ["85220", "Subdural hem w/o coma", "Subdural hemorrhage following injury without mention of open intracranial wound, without loss of consciousness"],
        ["8020", "Nasal bone fx-closed", "Closed fracture of nasal bones"],
    ],
    "Prescription": ["Sodium Chloride 0.9% Flush", "Levetiracetam", "Acetaminophen", "Ondansetron"],
    "Procedure": [["0131", "Incise cerebral meninges", "2120-02-02 09:10:00"]],
    "Chart Data": {
        "Heart Rate": [["2120-02-01 22:30:00", "88 bpm"], ["2120-02-02 06:00:00", "76 bpm"]],
        "Non Invasive Blood Pressure systolic": [["2120-02-01 22:30:00", "142 mmHg"]],
        "GCS Total": [["2120-02-01 22:35:00", "14 points"]],
    },
    "Lab Data": {
        "Hematocrit": [["2120-02-01 23:00:00", "41.2 %"]],
        "Sodium": [["2120-02-01 23:00:00", "139 mEq/L"]],
    },
    "Respiratory": {
        "O2 saturation pulseoxymetry": [["2120-02-01 22:30:00", "97 %"]],
    },
    "ECG": [["2120-02-01 23:15:00", "Sinus rhythm. Normal tracing for age."]],
    "Radiology": [
        {
            "time": "2120-02-01 23:40:00",
            "part": "CT HEAD W/O CONTRAST",
            "medical condition": "34 year old man s/p mechanical fall with head strike",
            "reason for this examination": "evaluate for acute intracranial hemorrhage",
            "final report history": "Fall from standing with head strike, brief loss of consciousness.",
            "findings": "There is a 6 mm left frontal subdural hematoma without midline shift. No skull fracture identified on bone windows.",
            "impression": "Small left frontal subdural hematoma. No mass effect.",
        }
    ],
    "Introduction": "Hi, I'm a 34-year-old man. I slipped on ice last night and hit my head, and since then I've had a bad headache and felt briefly confused.",
    "Allergies": "No Known Allergies / Adverse Drug Reactions",
    "Chief Complaint": "Headache and brief loss of consciousness after a fall",
    "History of Present Illness": "34M slipped on ice the evening prior to admission, striking the left side of his head on the pavement. Witnessed loss of consciousness for under a minute. Since the fall he reports persistent left-sided headache, one episode of vomiting, and mild photophobia. No seizure activity. No anticoagulant use.",
    "Past Medical History": "Seasonal allergic rhinitis. No prior head trauma, no bleeding disorders.",
    "Social History": "Works as an accountant. Drinks socially, one to two drinks per week. Never smoker. No recreational drug use.",
    "Family History": "Father with hypertension. No family history of bleeding or clotting disorders.",
    "Physical Exam": {
        "Admission": {
            "VS": "T=98.2 BP=142/84 HR=88 RR=16 O2 sat=97% RA",
            "General": "Alert, uncomfortable-appearing man lying still in a dim room.",
            "HEENT": "Left parietal scalp hematoma, tender to palpation. Pupils equal, round, reactive. No hemotympanum. No rhinorrhea.",
            "Neuro": "GCS 14 (eyes open to voice). Oriented x3 after prompting. Cranial nerves II-XII intact. Strength 5/5 throughout.",
        }
    },
    "Major Surgical or Invasive Procedure": "None during this admission",
    "Medications on Admission": "Loratadine 10mg daily PRN",
}

P001_Q1 = "Can you walk me through the history of present illness that brought you in?"
P001_Q2 = "Was a CT scan performed, and what did the imaging show?"
P001_Q3 = "On the radiology report, were any prior studies available for comparison?"

P001_DIAGNOSES = ["Acute subdural hematoma", "Cerebral concussion", "Scalp contusion"]


def proposal_reply(response_type: str, content, confidence: int, rationale: str) -> dict:
    return {
        "RESPONSE_TYPE": response_type,
        "RESPONSE_CONTENT": content,
        "CONFIDENCE": str(confidence),
        "RATIONALE": rationale,
    }


def no_change_update(team: list[str], rationale: str) -> dict:
    return {"ADD": [], "REMOVE": [], "UPDATED_LIST": team, "RATIONALE": rationale}


def build_p001_scenario() -> None:
    write_json(FIXTURES / "records" / "p001.json", P001)

    s = "p001"
    two = ["Neurologist", "Neurosurgeon"]
    three = two + ["Radiologist"]
    lines = [
        script_line(s, "triage", 0, {
            "RATIONALE": "Head trauma with transient loss of consciousness needs neurology and neurosurgery review.",
            "SUGGEST_SPECIALISTS": two,
        }),
        # Round 1: both ask; the neurologist's question wins the vote.
        script_line(s, "propose:Neurologist", 1, proposal_reply(
            "question", P001_Q1, 3,
            "The mechanism and symptom course guide everything downstream.")),
        script_line(s, "propose:Neurosurgeon", 1, proposal_reply(
            "question", "Have you noticed any weakness or numbness on either side?", 2,
            "Screening for focal deficits.")),
        script_line(s, "vote:Neurosurgeon:Neurologist", 1, "AGREE"),
        script_line(s, "patient_stage1", 1,
            "I slipped on ice last night and hit the left side of my head. I blacked out for "
            "maybe a minute, and since then I've had a bad left-sided headache, threw up once, "
            "and bright light bothers me."),
        script_line(s, "coordination", 1, no_change_update(
            two, "Current team covers the neurological workup.")),
        # Round 2: the CT question wins.
        script_line(s, "propose:Neurologist", 2, proposal_reply(
            "question", P001_Q2, 4,
            "Imaging findings will confirm or exclude an intracranial bleed.")),
        script_line(s, "propose:Neurosurgeon", 2, proposal_reply(
            "question", "Are you taking any blood thinners or aspirin?", 2,
            "Anticoagulation changes operative risk.")),
        script_line(s, "vote:Neurosurgeon:Neurologist", 2, "AGREE"),
        script_line(s, "patient_stage1", 2,
            "Yes, they did a CT of my head without contrast. I was told it showed a small "
            "bleed over the left front of my brain, about six millimeters, with no skull fracture."),
        script_line(s, "coordination", 2, {
            "ADD": ["Radiologist"],
            "REMOVE": [],
            "UPDATED_LIST": three,
            "RATIONALE": "CT findings need dedicated imaging interpretation.",
        }),
        # Round 3: the newly added radiologist leads with an imaging question.
        script_line(s, "propose:Neurologist", 3, proposal_reply(
            "question", "Has the headache improved, worsened, or stayed the same since admission?", 2,
            "Symptom trajectory informs observation versus intervention.")),
        script_line(s, "propose:Neurosurgeon", 3, proposal_reply(
            "question", "Any repeat vomiting or new confusion overnight?", 2,
            "Watching for signs of expansion.")),
        script_line(s, "propose:Radiologist", 3, proposal_reply(
            "question", P001_Q3, 4,
            "Comparison studies establish whether the collection is acute.")),
        script_line(s, "vote:Neurologist:Radiologist", 3, "AGREE"),
        script_line(s, "vote:Neurosurgeon:Radiologist", 3, "AGREE"),
        script_line(s, "patient_stage1", 3,
            "No, the report said there was nothing to compare against; this was my first head scan."),
        script_line(s, "coordination", 3, no_change_update(
            three, "Team composition remains appropriate.")),
        # Round 4: the neurologist commits, teammates agree.
        script_line(s, "propose:Neurologist", 4, proposal_reply(
            "diagnosis", P001_DIAGNOSES, 5,
            "CT-proven small subdural collection after witnessed head strike with transient LOC.")),
        script_line(s, "propose:Neurosurgeon", 4, proposal_reply(
            "question", "Would you consent to a repeat CT in six hours?", 3,
            "Surveillance imaging before final disposition.")),
        script_line(s, "propose:Radiologist", 4, proposal_reply(
            "question", "Do you have the exact slice thickness of the study?", 2,
            "Technical detail for re-read.")),
        script_line(s, "vote:Neurosurgeon:Neurologist", 4, "AGREE"),
        script_line(s, "vote:Radiologist:Neurologist", 4, "AGREE"),
    ]
    write_lines(FIXTURES / "scripts" / "p001.jsonl", lines)

    # Freeze the golden transcript from a real engine run.
    record = load_patient_record(FIXTURES / "records" / "p001.json")
    backend = ScriptedBackend.from_jsonl(FIXTURES / "scripts" / "p001.jsonl")
    golden = FIXTURES / "golden" / "p001_transcript.jsonl"
    golden.parent.mkdir(parents=True, exist_ok=True)
    with TranscriptWriter(golden) as transcript:
        result = run_session(record, SessionConfig(), backend, transcript=transcript)
    assert result.rounds_used == 4, result.rounds_used
    assert result.questions_asked == 3, result.questions_asked
    assert result.stop_reason == "diagnosis"
    assert [t.names for t in result.team_history] == [
        ["Neurologist", "Neurosurgeon"],
        ["Neurologist", "Neurosurgeon", "Radiologist"],
    ]
    assert result.team_history[1].round_formed == 3
    assert not result.violations, [v.to_dict() for v in result.violations]
    print(f"p001 scenario: {len(lines)} script lines, golden transcript frozen")


# ---------------------------------------------------------------------------
# Synthetic admission tables (20 admissions, 10 survivors, 9 unique patients)
# ---------------------------------------------------------------------------

DX_TITLES = {
    "4019": ("Hypertension NOS", "Unspecified essential hypertension"),
    "42731": ("Atrial fibrillation", "Atrial fibrillation"),
    "4280": ("CHF NOS", "Congestive heart failure, unspecified"),
    "5849": ("Acute kidney failure NOS", "Acute kidney failure, unspecified"),
    "25000": ("DMII wo cmp nt st uncntr", "Diabetes mellitus without mention of complication, type II"),
    "2724": ("Hyperlipidemia NEC/NOS", "Other and unspecified hyperlipidemia"),
    "53081": ("Esophageal reflux", "Esophageal reflux"),
    "486": ("Pneumonia, organism NOS", "Pneumonia, organism unspecified"),
    "5990": ("Urin tract infection NOS", "Urinary tract infection, site not specified"),
    "41401": ("Crnry athrscl natve vssl", "Coronary atherosclerosis of native coronary artery"),
    "2859": ("Anemia NOS", "Anemia, unspecified"),
    "311": ("Depressive disorder NEC", "Depressive disorder, not elsewhere classified"),
    "V4501": ("Status cardiac pacemaker", "Cardiac pacemaker in situ"),
    "E8782": ("Abn react-anastom/graft", "Surgical operation with anastomosis, bypass, or graft"),
    "80502": ("Fx c2 vertebra-closed", "Closed fracture of second cervical vertebra"),
    "4589": ("Hypotension NOS", "Hypotension, unspecified"),
    "2767": ("Hyperpotassemia", "Hyperpotassemia"),
    "70703": ("Pressure ulcer, low back", "Pressure ulcer, lower back"),
    "3051": ("Tobacco use disorder", "Tobacco use disorder"),
    "78650": ("Chest pain NOS", "Chest pain, unspecified"),
}

PROC_TITLES = {
    "3961": ("Extracorporeal circulat", "Extracorporeal circulation auxiliary to open heart surgery"),
    "9904": ("Packed cell transfusion", "Transfusion of packed cells"),
    "8856": ("Coronar arteriogr-2 cath", "Coronary arteriography using two catheters"),
    "9671": ("Cont inv mec ven <96 hrs", "Continuous invasive mechanical ventilation for less than 96 consecutive hours"),
}

ADMISSION_DX = {
    "A01": ["V4501", "4019"],
    "A02": ["486", "5990"],
    "A03": ["4280", "5849"],
    "A04": ["41401", "4280", "4019"],
    "A05": ["4019", "42731", "4280", "5849", "25000"],            # exactly 5: excluded
    "A06": ["4019", "2724", "53081", "486", "5990", "2859"],      # 6
    "A07": ["41401", "4280", "4019", "42731", "25000", "2724", "311"],  # 7
    "A08": ["5849", "2767", "4589", "2859", "486"],               # 5
    "A09": ["4019", "2724"],
    "A10": ["486", "3051"],
    "A11": ["42731", "4280", "4019"],
    "A12": ["42731", "2859"],
    "A13": ["41401", "2724", "25000", "3051"],                    # exactly 4: included
    "A14": ["5990", "2859"],
    "A15": ["486", "53081"],
    "A16": ["80502", "70703"],
    "A17": ["V4501", "4019"],
    "A18": ["E8782", "2859"],
    "A19": ["78650", "41401"],
    "A20": ["311", "3051"],
}

SURVIVORS = [f"A{i}" for i in range(11, 21)]  # filter survivors, input order
DEDUPE_SURVIVORS = ["A11"] + [f"A{i}" for i in range(13, 21)]  # A12 loses to A11

A11_RADIOLOGY_TEXT = """[**2120-2-2**] 10:15 AM
 CHEST (PORTABLE AP)                                             Clip # [**Clip Number 1**]
 Reason: eval for pulmonary edema
 ______________________________________________________________________________
 MEDICAL CONDITION:
  61 year old man with new atrial fibrillation and dyspnea
 REASON FOR THIS EXAMINATION:
  eval for pulmonary edema
 ______________________________________________________________________________
 FINAL REPORT
 HISTORY:  New atrial fibrillation with dyspnea.

 COMPARISON:  None available.

 FINDINGS:  The cardiac silhouette is mildly enlarged.  There is mild
 vascular congestion without frank pulmonary edema.  No pleural effusion or
 pneumothorax.

 IMPRESSION:  Mild vascular congestion.  No acute consolidation.
"""

A11_ECG_TEXT = "Atrial fibrillation with rapid ventricular response. Nonspecific ST changes compared to prior tracing."
A11_ECHO_TEXT = "Left atrium is moderately dilated. Overall left ventricular systolic function is mildly depressed, LVEF 45%."

A11_DISCHARGE_TEXT = """Admission Date:  [**2120-2-1**]              Discharge Date:   [**2120-2-6**]

Service: MEDICINE

Allergies:
Penicillins

Chief Complaint:
Palpitations and shortness of breath

History of Present Illness:
61M with hypertension presenting with two days of palpitations and exertional
dyspnea. Found to be in atrial fibrillation with rapid ventricular response in
the emergency department.

Past Medical History:
Hypertension. Hyperlipidemia.

Social History:
Retired schoolteacher. Former smoker, quit 20 years ago. Rare alcohol.

Family History:
Mother with stroke at age 78.

Physical Exam:
VS: T 98.4 BP 138/82 HR 118 irregular RR 18 O2 96% RA
General: comfortable, speaking in full sentences
Cardiac: irregularly irregular, no murmurs

Medications on Admission:
Lisinopril 20mg daily
"""

A11_DISCHARGE_REPLY = {
    "Allergies": "Penicillins",
    "Chief Complaint": "Palpitations and shortness of breath",
    "History of Present Illness": "61M with hypertension presenting with two days of palpitations and exertional dyspnea. Found to be in atrial fibrillation with rapid ventricular response in the emergency department.",
    "Past Medical History": "Hypertension. Hyperlipidemia.",
    "Social History": "Retired schoolteacher. Former smoker, quit 20 years ago. Rare alcohol.",
    "Family History": "Mother with stroke at age 78.",
    "Physical Exam": {
        "Admission": {
            "VS": "T 98.4 BP 138/82 HR 118 irregular RR 18 O2 96% RA",
            "General": "comfortable, speaking in full sentences",
            "Cardiac": "irregularly irregular, no murmurs",
        }
    },
    "Medications on Admission": "Lisinopril 20mg daily",
}


def generic_discharge_text(aid: str) -> str:
    return (
        f"Admission Date: [**2120-{(int(aid[1:]) % 12) + 1}-1**]\n\n"
        f"Chief Complaint:\nAdmission {aid} presenting complaint\n\n"
        f"History of Present Illness:\nNarrative history for admission {aid}.\n\n"
        f"Past Medical History:\nChronic conditions for admission {aid}.\n"
    )


def generic_discharge_reply(aid: str) -> dict:
    reply = {
        "Chief Complaint": f"Admission {aid} presenting complaint",
        "History of Present Illness": f"Narrative history for admission {aid}.",
        "Past Medical History": f"Chronic conditions for admission {aid}.",
    }
    if aid == "A14":
        # One out-of-vocabulary key lands under "extra".
        reply["Discharge Disposition"] = "Home with services"
    return reply


def build_tables() -> None:
    tables = FIXTURES / "tables"
    if tables.exists():
        shutil.rmtree(tables)

    patient_of = {aid: ("P11" if aid in ("A11", "A12") else f"P{aid[1:]}") for aid in ADMISSION_DX}

    def adm_row(aid, admittime, deathtime, adm_type, expire, diagnosis):
        return [
            patient_of[aid], aid, admittime, deathtime, adm_type, expire, diagnosis,
            "Medicare", "ENGL", "CATHOLIC", "MARRIED", "WHITE",
        ]

    rows = [
        adm_row("A01", "2120-01-01 00:10:00", "", "NEWBORN", "0", "NEWBORN"),
        adm_row("A02", "2120-01-02 00:10:00", "", "NEWBORN", "0", "NEWBORN"),
        adm_row("A03", "2120-01-03 00:10:00", "2120-01-05 04:00:00", "NEWBORN", "1", "NEWBORN"),
        adm_row("A04", "2120-01-04 12:00:00", "", "EMERGENCY", "1", "CORONARY ARTERY DISEASE"),
        adm_row("A05", "2120-01-05 12:00:00", "", "EMERGENCY", "0", "CONGESTIVE HEART FAILURE"),
        adm_row("A06", "2120-01-06 12:00:00", "", "EMERGENCY", "0", "PNEUMONIA"),
        adm_row("A07", "2120-01-07 12:00:00", "", "ELECTIVE", "0", "CHEST PAIN"),
        adm_row("A08", "2120-01-08 12:00:00", "", "EMERGENCY", "0", "ACUTE RENAL FAILURE"),
        adm_row("A09", "2120-01-09 12:00:00", "", "EMERGENCY", "0", "HYPERTENSIVE URGENCY"),
        adm_row("A10", "2120-01-10 12:00:00", "", "EMERGENCY", "0", "PNEUMONIA"),
        adm_row("A11", "2120-02-01 08:30:00", "", "EMERGENCY", "0", "ATRIAL FIBRILLATION"),
        adm_row("A12", "2121-07-15 09:00:00", "", "EMERGENCY", "0", "ANEMIA"),
        adm_row("A13", "2120-01-13 12:00:00", "", "ELECTIVE", "0", "CORONARY ARTERY DISEASE"),
        adm_row("A14", "2120-01-14 12:00:00", "", "EMERGENCY", "0", "URINARY TRACT INFECTION"),
        adm_row("A15", "2120-01-15 12:00:00", "", "EMERGENCY", "0", "PNEUMONIA"),
        adm_row("A16", "2120-01-16 12:00:00", "", "EMERGENCY", "0", "CERVICAL FRACTURE"),
        adm_row("A17", "2120-01-17 12:00:00", "", "ELECTIVE", "0", "PACEMAKER EVALUATION"),
        adm_row("A18", "2120-01-18 12:00:00", "", "EMERGENCY", "0", "GRAFT COMPLICATION"),
        adm_row("A19", "2120-01-19 12:00:00", "", "EMERGENCY", "0", "CHEST PAIN"),
        adm_row("A20", "2120-01-20 12:00:00", "", "ELECTIVE", "0", "DEPRESSION"),
    ]
    write_csv(
        tables / "ADMISSIONS.csv",
        ["SUBJECT_ID", "HADM_ID", "ADMITTIME", "DEATHTIME", "ADMISSION_TYPE",
         "HOSPITAL_EXPIRE_FLAG", "DIAGNOSIS", "INSURANCE", "LANGUAGE", "RELIGION",
         "MARITAL_STATUS", "ETHNICITY"],
        rows,
    )

    patients = sorted({patient_of[aid] for aid in ADMISSION_DX})
    write_csv(
        tables / "PATIENTS.csv",
        ["SUBJECT_ID", "GENDER", "DOB"],
        [[pid, "M" if int(pid[1:]) % 2 else "F", f"20{int(pid[1:]):02d}-06-15 00:00:00"]
         for pid in patients],
    )

    write_csv(
        tables / "DIAGNOSES_ICD.csv",
        ["SUBJECT_ID", "HADM_ID", "SEQ_NUM", "ICD9_CODE"],
        [[patient_of[aid], aid, str(seq), code]
         for aid, codes in sorted(ADMISSION_DX.items())
         for seq, code in enumerate(codes, 1)],
    )
    write_csv(
        tables / "D_ICD_DIAGNOSES.csv",
        ["ICD9_CODE", "SHORT_TITLE", "LONG_TITLE"],
        [[code, short, long_] for code, (short, long_) in sorted(DX_TITLES.items())],
    )

    prescription_rows = []
    for aid in sorted(ADMISSION_DX):
        prescription_rows.append([aid, "2120-01-02", f"Drug {aid} Alpha"])
    # A11 carries extras: out-of-order start dates and a duplicate drug name.
    prescription_rows += [
        ["A11", "2120-02-03", "Heparin"],
        ["A11", "2120-02-01", "Metoprolol Tartrate"],
        ["A11", "2120-02-02", "Heparin"],
        ["A11", "2120-02-04", "Warfarin"],
    ]
    write_csv(tables / "PRESCRIPTIONS.csv", ["HADM_ID", "STARTDATE", "DRUG"], prescription_rows)

    procedure_rows = [[aid, "1", "9904", ""] for aid in sorted(ADMISSION_DX) if aid != "A11"]
    procedure_rows += [
        ["A11", "2", "8856", "2120-02-03 11:00:00"],
        ["A11", "1", "9671", ""],  # no charttime: falls back to the admit time
    ]
    write_csv(tables / "PROCEDURES_ICD.csv", ["HADM_ID", "SEQ_NUM", "ICD9_CODE", "CHARTTIME"], procedure_rows)
    write_csv(
        tables / "D_ICD_PROCEDURES.csv",
        ["ICD9_CODE", "SHORT_TITLE", "LONG_TITLE"],
        [[code, short, long_] for code, (short, long_) in sorted(PROC_TITLES.items())],
    )

    chart_rows = [[aid, "220045", "2120-01-02 08:00:00", "80", "bpm"] for aid in sorted(ADMISSION_DX) if aid != "A11"]
    chart_rows += [
        ["A11", "220045", "2120-02-02 06:00:00", "104", "bpm"],
        ["A11", "220045", "2120-02-01 09:00:00", "118", "bpm"],  # out of order on purpose
        ["A11", "220179", "2120-02-01 09:00:00", "138", "mmHg"],
        ["A11", "220277", "2120-02-01 09:00:00", "96", "%"],     # respiratory category
    ]
    write_csv(tables / "CHARTEVENTS.csv", ["HADM_ID", "ITEMID", "CHARTTIME", "VALUE", "VALUEUOM"], chart_rows)
    write_csv(
        tables / "D_ITEMS.csv",
        ["ITEMID", "LABEL", "CATEGORY"],
        [
            ["220045", "Heart Rate", "Routine Vital Signs"],
            ["220179", "Non Invasive Blood Pressure systolic", "Routine Vital Signs"],
            ["220277", "O2 saturation pulseoxymetry", "Respiratory"],
        ],
    )

    lab_rows = [[aid, "50912", "2120-01-02 06:00:00", "1.0", "mg/dL"] for aid in sorted(ADMISSION_DX) if aid != "A11"]
    lab_rows += [
        ["A11", "50912", "2120-02-01 10:00:00", "1.1", "mg/dL"],
        ["A11", "50983", "2120-02-01 10:00:00", "140", "mEq/L"],
    ]
    write_csv(tables / "LABEVENTS.csv", ["HADM_ID", "ITEMID", "CHARTTIME", "VALUE", "VALUEUOM"], lab_rows)
    write_csv(
        tables / "D_LABITEMS.csv",
        ["ITEMID", "LABEL"],
        [["50912", "Creatinine"], ["50983", "Sodium"]],
    )

    note_rows = []
    for aid in sorted(ADMISSION_DX):
        if aid in ("A09", "A10"):
            continue  # these two lack a discharge summary and fail the filter
        text = A11_DISCHARGE_TEXT if aid == "A11" else generic_discharge_text(aid)
        note_rows.append([aid, "Discharge summary", "2120-01-30 00:00:00", "Report", text])
    note_rows += [
        ["A11", "ECG", "2120-02-01 09:30:00", "Report", A11_ECG_TEXT],
        ["A11", "Echo", "2120-02-02 14:00:00", "Report", A11_ECHO_TEXT],
        ["A11", "Radiology", "2120-02-02 10:15:00", "CHEST (PORTABLE AP)", A11_RADIOLOGY_TEXT],
    ]
    write_csv(tables / "NOTEEVENTS.csv", ["HADM_ID", "CATEGORY", "CHARTTIME", "DESCRIPTION", "TEXT"], note_rows)

    # Discharge structuring replies for every admission that can be sampled.
    lines = [
        script_line(aid, "discharge_structuring", 0,
                    A11_DISCHARGE_REPLY if aid == "A11" else generic_discharge_reply(aid))
        for aid in DEDUPE_SURVIVORS
    ]
    write_lines(FIXTURES / "scripts" / "tables_structuring.jsonl", lines)

    # Hand-enumerated pipeline expectations (stdlib only, no package imports).
    import random as _random

    candidates = sorted(DEDUPE_SURVIVORS)
    rng = _random.Random(7)
    rng.shuffle(candidates)
    expected = {
        "survivors": SURVIVORS,
        "dedupe_survivors": sorted(DEDUPE_SURVIVORS),
        "unique_patients": 9,
        "sample_n3_seed7": candidates[:3],
        "patient_of": {aid: patient_of[aid] for aid in sorted(ADMISSION_DX)},
    }
    write_json(FIXTURES / "tables_expected.json", expected)

    # Golden assembled record for A11, frozen from the real pipeline.
    bundle = load_tables(tables)
    backend = ScriptedBackend.from_jsonl(FIXTURES / "scripts" / "tables_structuring.jsonl")
    sections = parse_discharge_summary(
        bundle.discharge_summary("A11"), Gateway(backend), admission_id="A11"
    )
    record = assemble_patient_record("A11", bundle, sections)
    assert record.data["Demographics"]["gender"] == "M"
    assert record.data["Demographics"]["age"] == 108  # dob 2011-06-15, admitted 2120-02-01
    assert record.data["Prescription"] == ["Drug A11 Alpha", "Metoprolol Tartrate", "Heparin", "Warfarin"]
    assert "final report history" in record.data["Radiology"][0]
    assert "Respiratory" in record.data
    write_json(FIXTURES / "golden" / "assembled_A11.json", record.to_dict())
    print(f"tables: 20 admissions, survivors={expected['survivors']}, sample={expected['sample_n3_seed7']}")


# ---------------------------------------------------------------------------
# Metric corpus: 20 solo sessions with oracle-computed expected metrics
# ---------------------------------------------------------------------------

# Diagnosis-name vocabulary mapped by the offline cache.  Names not listed
# here stay unmapped and burn a rank slot.
CACHE_CODES = {
    "congestive heart failure": "4280",
    "atrial fibrillation": "42731",
    "essential hypertension": "4019",
    "community acquired pneumonia": "486",
    "acute kidney injury": "5849",
    "type 2 diabetes mellitus": "25000",
    "urinary tract infection": "5990",
    "coronary artery disease": "41401",
    "iron deficiency anemia": "2800",
    "major depressive disorder": "311",
    "gastroesophageal reflux": "53081",
    "cardiac pacemaker in situ": "V4501",
    "anastomosis complication": "E8782",
    "cervical vertebra fracture": "80502",
    "hyperkalemia": "2767",
    "chest pain": "78650",
    "pressure ulcer of lower back": "70703",
    "hypotension": "4589",
    "tobacco use disorder": "3051",
    "bacterial meningitis": "3209",
    "acute pancreatitis": "5770",
    "cellulitis of leg": "68261",
    "osteoarthritis of knee": "71516",
    "migraine": "34690",
    "asthma exacerbation": "49392",
    "deep venous thrombosis": "45340",
    "hypothyroidism": "2449",
    "epilepsy": "34590",
    "psoriasis": "6961",
    "cholelithiasis": "5740",
}

UNMAPPED = [
    "idiopathic fatigue syndrome",
    "nonspecific malaise",
    "undifferentiated syndrome",
]

# (patient, questions asked, predicted names, truth codes)
METRIC_PLAN = [
    ("p201", 2, ["congestive heart failure", "atrial fibrillation", "essential hypertension",
                 "community acquired pneumonia", "acute kidney injury"], ["4280"]),
    ("p202", 0, ["essential hypertension", "chest pain", "hypotension", "migraine",
                 "asthma exacerbation", "cholelithiasis", "type 2 diabetes mellitus"], ["25000"]),
    ("p203", 3, ["community acquired pneumonia", "asthma exacerbation", "migraine",
                 "chest pain", "hypotension", "epilepsy"], ["486", "5849"]),
    ("p204", 1, ["cardiac pacemaker in situ", "chest pain", "hypotension", "migraine",
                 "essential hypertension", "psoriasis", "cholelithiasis", "anastomosis complication"],
     ["V4501", "E8782"]),
    ("p205", 2, [UNMAPPED[0], UNMAPPED[1], UNMAPPED[2], "migraine", "hypotension",
                 "cervical vertebra fracture"], ["80502"]),
    ("p206", 1, ["iron deficiency anemia", "hyperkalemia", "acute kidney injury",
                 "hypotension", "essential hypertension"], ["2800", "2767"]),
    ("p207", 0, ["bacterial meningitis", "migraine", "epilepsy", "chest pain",
                 "hypotension"], ["3209", "34590"]),
    ("p208", 2, ["acute pancreatitis", "cholelithiasis", "gastroesophageal reflux",
                 "chest pain", "urinary tract infection"], ["5740", "5770"]),
    ("p209", 1, ["cellulitis of leg", "pressure ulcer of lower back", "deep venous thrombosis",
                 "osteoarthritis of knee", "psoriasis"], ["68261", "70703"]),
    ("p210", 3, ["osteoarthritis of knee", "migraine", "chest pain", "hypotension",
                 "cellulitis of leg", "psoriasis", "epilepsy", "asthma exacerbation",
                 "cholelithiasis", "deep venous thrombosis"], ["71516", "7245"]),
    ("p211", 2, ["major depressive disorder", "tobacco use disorder", "migraine",
                 "chest pain", "essential hypertension"], ["311", "3051"]),
    ("p212", 1, ["hypothyroidism", "type 2 diabetes mellitus", "iron deficiency anemia",
                 "hyperkalemia", "essential hypertension"], ["2449"]),
    ("p213", 0, ["migraine", "chest pain", "hypotension", "epilepsy", "asthma exacerbation",
                 "urinary tract infection"], ["5990", "59080"]),
    ("p214", 2, ["chest pain", "coronary artery disease", "congestive heart failure",
                 "essential hypertension", "atrial fibrillation"], ["78650", "41401"]),
    ("p215", 1, [UNMAPPED[0], "hypotension", "migraine", "chest pain", "epilepsy",
                 "community acquired pneumonia", "asthma exacerbation"], ["49392"]),
    ("p216", 3, ["deep venous thrombosis", "cellulitis of leg", "hypotension",
                 "chest pain", "migraine"], ["45340"]),
    ("p217", 2, ["epilepsy", "migraine", "bacterial meningitis", "chest pain",
                 "hypotension"], ["34690", "3209"]),
    ("p218", 1, ["psoriasis", "cellulitis of leg", "pressure ulcer of lower back",
                 "osteoarthritis of knee", "migraine"], ["6961"]),
    ("p219", 0, ["gastroesophageal reflux", "acute pancreatitis", "cholelithiasis",
                 "chest pain", "urinary tract infection", "migraine", "hypotension",
                 "epilepsy", "asthma exacerbation"], ["53081", "5770", "5740"]),
    ("p220", 2, ["atrial fibrillation", "congestive heart failure", "chest pain",
                 "essential hypertension", "coronary artery disease"], ["42731", "4280", "78650", "41401"]),
]

METRIC_QUESTIONS = {
    1: ("What medications are you currently taking?",
        "I take the pills listed on my chart every morning."),
    2: ("What did your recent lab tests show?",
        "The labs from this admission are in my record; nothing was flagged to me as urgent."),
    3: ("Do you have any allergies?",
        "No allergies that I know of."),
}


def metric_record(pid: str, truth_codes: list[str]) -> dict:
    return {
        "Admission_info": {
            "patient_id": pid,
            "admission_id": f"h{pid[1:]}",
            "admission_diagnosis": "evaluation of ongoing symptoms",
        },
        "Demographics": {
            "insurance": "medicare",
            "language": "engl",
            "marital_status": "single",
            "ethnicity": "white",
            "gender": "F" if int(pid[1:]) % 2 else "M",
            "age": 40 + int(pid[1:]) % 40,
        },
        "Diagnoses": [[code, f"Truth {code}", f"Ground truth condition {code}"] for code in truth_codes],
        "Prescription": ["Multivitamin", "Lisinopril"],
        "Lab Data": {"Creatinine": [["2120-03-01 08:00:00", "0.9 mg/dL"]]},
        "Allergies": "No Known Allergies",
        "Chief Complaint": f"Ongoing symptoms, case {pid}",
        "History of Present Illness": f"Patient {pid} reports several weeks of nonspecific symptoms.",
    }


def solo_session_script(pid: str, questions: int, diagnosis_names: list[str]) -> list[str]:
    lines = [
        script_line(pid, "triage", 0, {
            "RATIONALE": "General internal medicine can begin the workup.",
            "SUGGEST_SPECIALISTS": ["Internist"],
        })
    ]
    for r in range(1, questions + 1):
        question, answer = METRIC_QUESTIONS[r]
        lines += [
            script_line(pid, "confidence:Internist", r, "DECISION: Somewhat Unconfident"),
            script_line(pid, "response:Internist", r, {
                "RESPONSE_TYPE": "question",
                "RESPONSE_CONTENT": question,
                "RATIONALE": "Need more information.",
            }),
            script_line(pid, "patient_stage1", r, answer),
            script_line(pid, "coordination", r,
                        no_change_update(["Internist"], "Single generalist remains sufficient.")),
        ]
    final_round = questions + 1
    # Alternate the two accepted diagnosis list encodings.
    content = (
        J(diagnosis_names, ensure_ascii=False)
        if int(pid[1:]) % 2 == 0
        else diagnosis_names
    )
    lines += [
        script_line(pid, "confidence:Internist", final_round, "DECISION: Very Confident"),
        script_line(pid, "response:Internist", final_round, {
            "RESPONSE_TYPE": "diagnosis",
            "RESPONSE_CONTENT": content,
            "RATIONALE": "Committing to the ranked list.",
        }),
    ]
    return lines


def build_metric_corpus() -> None:
    base = FIXTURES / "metric_corpus"
    if base.exists():
        shutil.rmtree(base)
    records_dir = base / "records"
    transcripts_dir = base / "transcripts"
    records_dir.mkdir(parents=True)

    cache_lines = [f"{name}\t{code}" for name, code in sorted(CACHE_CODES.items())]
    (base / "icd9_cache.tsv").parent.mkdir(parents=True, exist_ok=True)
    (base / "icd9_cache.tsv").write_text("\n".join(cache_lines) + "\n", encoding="utf-8")

    script: list[str] = []
    for pid, questions, preds, truths in METRIC_PLAN:
        write_json(records_dir / f"{pid}.json", metric_record(pid, truths))
        script += solo_session_script(pid, questions, preds)
    write_lines(base / "script.jsonl", script)

    # Run the corpus through the engine to freeze the transcripts.
    backend = ScriptedBackend.from_jsonl(base / "script.jsonl")
    config = SessionConfig(protocol="solo", max_rounds=6)
    records = [load_patient_record(records_dir / f"{pid}.json") for pid, *_ in METRIC_PLAN]
    results, aborted = run_many(records, config, backend, out_dir=transcripts_dir)
    assert not aborted, aborted
    assert len(results) == 20
    for (pid, questions, preds, _), result in zip(METRIC_PLAN, results):
        assert result.patient_id == pid
        assert result.questions_asked == questions, (pid, result.questions_asked)
        assert result.final_diagnoses == preds, (pid, result.final_diagnoses)
        assert not result.violations, (pid, [v.to_dict() for v in result.violations])

    # Expected metrics via the independent oracle implementations.
    rows = []
    instances = []
    for pid, questions, preds, truths in METRIC_PLAN:
        pred_categories = [
            oracles.oracle_category(CACHE_CODES[name]) if name in CACHE_CODES else None
            for name in preds
        ]
        truth_categories = [oracles.oracle_category(code) for code in truths]
        rows.append(oracles.oracle_session_metrics(pred_categories, truth_categories, questions))
        top5 = {c for c in pred_categories[:5] if c is not None}
        top10 = {c for c in pred_categories[:10] if c is not None}
        for category in truth_categories:
            instances.append((category, category in top5, category in top10))

    aggregate = oracles.oracle_aggregate(rows)
    buckets = oracles.oracle_chapter_rows(instances)
    write_json(base / "expected_metrics.json", {
        "aggregate": aggregate,
        "per_chapter_sample_sizes": {label: bucket["n"] for label, bucket in sorted(buckets.items())},
        "per_chapter_hits": {
            label: {"hits5": bucket["hits5"], "hits10": bucket["hits10"]}
            for label, bucket in sorted(buckets.items())
        },
        "total_truth_instances": len(instances),
    })
    print(f"metric corpus: 20 sessions, aggregate={ {k: round(v, 4) for k, v in aggregate.items()} }")


# ---------------------------------------------------------------------------
# Leakage corpus: 50 records with collision-free diagnosis markers
# ---------------------------------------------------------------------------

def leakage_record(i: int) -> dict:
    pid = f"p{300 + i}"
    code = str(90300 + i)
    return {
        "Admission_info": {
            "patient_id": pid,
            "admission_id": f"h{300 + i}",
            "admission_diagnosis": "abdominal discomfort",
        },
        "Demographics": {
            "insurance": "private",
            "language": "engl",
            "marital_status": "married",
            "ethnicity": "other",
            "gender": "F" if i % 2 else "M",
            "age": 30 + i % 50,
        },
        "Diagnoses": [[code, f"ZQLEAK{i:03d}S short title", f"ZQLEAK{i:03d}L long title"]],
        "Prescription": ["Omeprazole", "Simethicone"],
        "Lab Data": {"Lipase": [["2120-04-01 07:00:00", "30 U/L"]]},
        "Chief Complaint": "Intermittent abdominal discomfort after meals",
        "History of Present Illness": "Several weeks of postprandial discomfort without red-flag features.",
    }


def build_leakage() -> None:
    base = FIXTURES / "leakage"
    if base.exists():
        shutil.rmtree(base)
    records_dir = base / "records"
    records_dir.mkdir(parents=True)

    routed_q = ("What medications are you currently taking?",
                "I take omeprazole and simethicone.")
    fallback_q = ("Is there anything else that has been bothering you lately?",
                  "Mostly just the stomach discomfort after eating.")

    script: list[str] = []
    for i in range(1, 51):
        pid = f"p{300 + i}"
        write_json(records_dir / f"{pid}.json", leakage_record(i))
        question, answer = routed_q if i % 2 == 0 else fallback_q
        stage_role = "patient_stage1" if i % 2 == 0 else "patient_stage2"
        script += [
            script_line(pid, "triage", 0, {
                "RATIONALE": "Start with general medicine.",
                "SUGGEST_SPECIALISTS": ["Internist"],
            }),
            script_line(pid, "confidence:Internist", 1, "DECISION: Very Unconfident"),
            script_line(pid, "response:Internist", 1, {
                "RESPONSE_TYPE": "question",
                "RESPONSE_CONTENT": question,
                "RATIONALE": "Gathering background.",
            }),
            script_line(pid, stage_role, 1, answer),
            script_line(pid, "coordination", 1,
                        no_change_update(["Internist"], "No change needed.")),
            script_line(pid, "confidence:Internist", 2, "DECISION: Very Confident"),
            script_line(pid, "response:Internist", 2, {
                "RESPONSE_TYPE": "diagnosis",
                "RESPONSE_CONTENT": ["Functional dyspepsia", "Gastritis", "Peptic ulcer disease"],
                "RATIONALE": "Most consistent with the story.",
            }),
        ]
    write_lines(base / "script.jsonl", script)
    print("leakage corpus: 50 records + script")


# ---------------------------------------------------------------------------
# Demo corpus for the command-line workflow
# ---------------------------------------------------------------------------

DEMO_PLAN = [
    # (pid, truth codes, predicted names, question round?)
    ("p101", ["4280", "42731"], ["congestive heart failure", "atrial fibrillation",
                                 "essential hypertension", "chest pain", "hypotension"], None),
    ("p102", ["486"], ["community acquired pneumonia", "asthma exacerbation",
                       "chest pain", "migraine", "hypotension"],
     ("What medications are you currently taking?", "patient_stage1",
      "Just a daily multivitamin and lisinopril.")),
    ("p103", ["5990"], ["urinary tract infection", "hypotension", "chest pain",
                        "migraine", "epilepsy"],
     ("How have you been sleeping over the past week?", "patient_stage2",
      "Not great, I wake up a few times a night.")),
]


def demo_record(pid: str, truth_codes: list[str]) -> dict:
    record = metric_record(pid, truth_codes)
    record["Admission_info"]["admission_diagnosis"] = "demo admission"
    record["Chief Complaint"] = f"Demo complaint for {pid}"
    return record


def build_demo() -> None:
    base = FIXTURES / "demo"
    if base.exists():
        shutil.rmtree(base)
    records_dir = base / "records"
    records_dir.mkdir(parents=True)

    team = ["Cardiologist", "Internist"]
    script: list[str] = []
    for pid, truths, preds, question in DEMO_PLAN:
        write_json(records_dir / f"{pid}.json", demo_record(pid, truths))
        script.append(script_line(pid, "triage", 0, {
            "RATIONALE": "Two complementary perspectives.",
            "SUGGEST_SPECIALISTS": team,
        }))
        round_index = 1
        if question is not None:
            text, stage_role, answer = question
            script += [
                script_line(pid, "propose:Cardiologist", 1, proposal_reply(
                    "question", text, 4, "Background first.")),
                script_line(pid, "propose:Internist", 1, proposal_reply(
                    "question", "Any fevers or chills?", 2, "Screening question.")),
                script_line(pid, "vote:Internist:Cardiologist", 1, "AGREE"),
                script_line(pid, stage_role, 1, answer),
                script_line(pid, "coordination", 1,
                            no_change_update(team, "Coverage is adequate.")),
            ]
            round_index = 2
        script += [
            script_line(pid, "propose:Cardiologist", round_index, proposal_reply(
                "diagnosis", preds, 5, "Evidence converges.")),
            script_line(pid, "propose:Internist", round_index, proposal_reply(
                "question", "Could we order one more confirmatory test?", 2, "Cautious.")),
            script_line(pid, "vote:Internist:Cardiologist", round_index, "AGREE"),
        ]
    write_lines(base / "script.jsonl", script)
    write_json(base / "config.json", {
        "protocol": "multi",
        "max_rounds": 4,
        "agreement_threshold": 0.5,
        "seed": 3,
    })
    cache = {name: CACHE_CODES[name] for _, _, preds, _ in DEMO_PLAN for name in preds
             if name in CACHE_CODES}
    (base / "icd9_cache.tsv").write_text(
        "\n".join(f"{name}\t{code}" for name, code in sorted(cache.items())) + "\n",
        encoding="utf-8",
    )
    print("demo corpus: 3 records + script + config")


# ---------------------------------------------------------------------------
# Multiple-choice benchmark fixture: 10 cases, 7 answered correctly
# ---------------------------------------------------------------------------

MCQ_OPTIONS = [
    ("Acute myocardial infarction", "Pulmonary embolism", "Aortic dissection", "Pericarditis"),
    ("Community acquired pneumonia", "Pulmonary edema", "Lung abscess", "Tuberculosis"),
    ("Diabetic ketoacidosis", "Hyperosmolar state", "Lactic acidosis", "Starvation ketosis"),
    ("Ischemic stroke", "Hemorrhagic stroke", "Seizure", "Migraine with aura"),
    ("Appendicitis", "Cholecystitis", "Pancreatitis", "Diverticulitis"),
    ("Pyelonephritis", "Cystitis", "Renal colic", "Prostatitis"),
    ("Gout", "Septic arthritis", "Pseudogout", "Reactive arthritis"),
    ("Hypothyroidism", "Hyperthyroidism", "Adrenal insufficiency", "Cushing syndrome"),
    ("Iron deficiency anemia", "B12 deficiency", "Folate deficiency", "Anemia of chronic disease"),
    ("Asthma exacerbation", "COPD exacerbation", "Bronchiectasis", "Vocal cord dysfunction"),
]

# (correct key, reply the team settles on); case009 asks a question first.
MCQ_OUTCOMES = [
    ("A", "A"), ("B", "B"), ("B", "B."), ("A", "Ischemic stroke"), ("C", "C"),
    ("A", "A"), ("D", "B"), ("B", "C"), ("A", "A"), ("A", "Z"),
]


def build_mcq() -> None:
    base = FIXTURES / "mcq"
    if base.exists():
        shutil.rmtree(base)
    base.mkdir(parents=True)

    cases = []
    script: list[str] = []
    team = ["Cardiologist", "Pulmonologist"]
    for index, (options, (key, reply_letter)) in enumerate(zip(MCQ_OPTIONS, MCQ_OUTCOMES), 1):
        cid = f"case{index:03d}"
        cases.append({
            "case_id": cid,
            "context": f"A patient presents with findings typical of scenario {index}. "
                       "Vitals and focused history are summarised in the stem.",
            "question": "Which diagnosis best explains this presentation?",
            # case002 states the key as option text instead of a letter
            "options": list(options),
            "answer_key": options[ord(key) - 65] if index == 2 else key,
        })
        script.append(script_line(cid, "triage", 0, {
            "RATIONALE": "Core case disciplines.",
            "SUGGEST_SPECIALISTS": team,
        }))
        final_round = 1
        if index == 9:
            script += [
                script_line(cid, "propose:Cardiologist", 1, proposal_reply(
                    "question", "Were any imaging studies obtained?", 4, "Need the workup.")),
                script_line(cid, "propose:Pulmonologist", 1, proposal_reply(
                    "answer", "B", 3, "Leaning toward option B.")),
                script_line(cid, "vote:Pulmonologist:Cardiologist", 1, "AGREE"),
                script_line(cid, "case", 1, "The case does not say."),
                script_line(cid, "coordination", 1,
                            no_change_update(team, "No additional expertise needed.")),
            ]
            final_round = 2
        script += [
            script_line(cid, "propose:Cardiologist", final_round, proposal_reply(
                "answer", reply_letter, 4, "Best supported option.")),
            script_line(cid, "propose:Pulmonologist", final_round, proposal_reply(
                "answer", "B" if index == 7 else reply_letter, 3, "Concur with the leader.")),
            script_line(cid, "vote:Pulmonologist:Cardiologist", final_round, "AGREE"),
        ]
    write_json(base / "cases.json", cases)
    write_lines(base / "script.jsonl", script)
    print("mcq: 10 cases written (7 expected correct)")


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    build_p001_scenario()
    build_tables()
    build_metric_corpus()
    build_leakage()
    build_demo()
    build_mcq()
    print("fixtures complete")


if __name__ == "__main__":
    main()
