"""Shared test fixtures and the acceptance-criteria summary hook."""

import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).resolve().parent
FIXTURES_DIR = TESTS_DIR / "fixtures"

# oracles.py lives next to the tests, not inside the package
if str(TESTS_DIR) not in sys.path:
    sys.path.insert(0, str(TESTS_DIR))


@pytest.fixture(scope="session")
def fixtures() -> Path:
    return FIXTURES_DIR


@pytest.fixture()
def scripted():
    """Factory for an in-memory scripted backend from a {key: reply} dict."""
    from dynamicare import ScriptedBackend

    def make(table: dict) -> ScriptedBackend:
        return ScriptedBackend(table)

    return make


# One line per acceptance criterion in the terminal summary, so a full run
# ends with an explicit pass/fail verdict for each.
ACCEPTANCE_LINES = {
    "test_criterion_01_scenario_replay": "scripted team-session replay is byte-identical to the golden transcript",
    "test_criterion_02_rank_metrics_match_oracle": "hit/recall metrics equal a brute-force oracle on 1,000 random instances",
    "test_criterion_03_category_matching": "ICD-9 category matching agrees with the oracle on 200 pairs",
    "test_criterion_04_consensus_properties": "consensus resolution matches a brute-force oracle on 500 random rounds",
    "test_criterion_05_dataset_filtering": "dataset filter/dedupe/sample keeps exactly the hand-enumerated admissions",
    "test_criterion_06_keyword_routing": "every shipped keyword routes to its sections and unmatched questions fall back",
    "test_criterion_07_no_diagnosis_leakage": "no doctor-visible text contains ground-truth diagnosis content",
    "test_criterion_08_workflow_bounds": "session invariants hold across randomized scripted workflows",
    "test_criterion_09_report_fidelity": "metric report reproduces oracle-computed values to 1e-9",
    "test_criterion_10_report_shapes": "summary, accuracy, annotation, and chapter tables render with the documented shapes",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    verdicts = {}
    for outcome, flag in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL")):
        for report in terminalreporter.stats.get(outcome, []):
            name = report.nodeid.split("::")[-1].split("[")[0]
            if name in ACCEPTANCE_LINES:
                # a FAIL verdict must never be overwritten by a PASS
                if verdicts.get(name) != "FAIL":
                    verdicts[name] = flag
    if not verdicts:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for index, (name, description) in enumerate(ACCEPTANCE_LINES.items(), 1):
        flag = verdicts.get(name)
        if flag is None:
            continue
        terminalreporter.write_line(f"criterion {index:02d} {flag}: {description}")
