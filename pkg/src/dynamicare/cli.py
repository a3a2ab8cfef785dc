"""Command-line entry points: build a record corpus from raw tables, run
diagnosis sessions over it, score the results, and print reports.

Subcommands: build-dataset, run, evaluate, report, export-annotations.
Exit codes: 0 success, 1 hard error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import subprocess
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .dataset import build_dataset, load_record_dir
from .errors import DynamiCareError
from .evaluation import (
    aggregate,
    export_annotation_sheets,
    render_chapter_table,
    render_summary,
)
from .gateway import ENV_LLM_URL, Gateway, LiveBackend, ScriptedBackend
from .terminology import CachedMapper, TerminologyClient, TsvCache
from .workflow import SessionConfig, run_many

TRANSCRIPT_DIR = "transcripts"
MANIFEST_NAME = "manifest.json"


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _source_revision() -> str:
    try:
        proc = subprocess.run(
            ["git", "rev-parse", "HEAD"],
            capture_output=True,
            text=True,
            timeout=5,
        )
        if proc.returncode == 0:
            return proc.stdout.strip()
    except OSError:
        pass
    return "unknown"


@dataclass
class RunManifest:
    """Run-level bookkeeping, written before the first session and finalized
    after the last so a crash leaves a visibly unfinished manifest."""

    run_id: str
    config: dict
    source_revision: str = field(default_factory=_source_revision)
    started_at: str = field(default_factory=_utc_now)
    ended_at: str | None = None
    status: str = "running"
    counts: dict = field(default_factory=lambda: {"completed": 0, "aborted": 0})

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "config": self.config,
            "source_revision": self.source_revision,
            "started_at": self.started_at,
            "ended_at": self.ended_at,
            "status": self.status,
            "counts": self.counts,
        }

    def write(self, run_dir: Path) -> None:
        path = run_dir / MANIFEST_NAME
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    def finalize(self, completed: int, aborted: int) -> None:
        self.ended_at = _utc_now()
        self.status = "complete"
        self.counts = {"completed": completed, "aborted": aborted}


def _make_backend(args) -> object:
    if args.backend == "scripted":
        if not args.script:
            raise DynamiCareError("--script is required with the scripted backend")
        return ScriptedBackend.from_jsonl(args.script)
    audit = getattr(args, "audit_log", None)
    return LiveBackend(audit_path=audit)


def _load_config(args) -> SessionConfig:
    values: dict = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            values = json.load(fh)
    for flag in (
        "protocol",
        "max_rounds",
        "agreement_threshold",
        "diagnose_threshold",
        "seed",
        "central_model",
        "specialist_model",
        "patient_model",
    ):
        override = getattr(args, flag, None)
        if override is not None:
            values[flag] = override
    return SessionConfig.from_dict(values)


def _claim_run_dir(run_dir: Path, force: bool) -> None:
    if (run_dir / MANIFEST_NAME).exists() and not force:
        raise DynamiCareError(
            f"{run_dir} already holds a run; pick a new --out or pass --force"
        )
    run_dir.mkdir(parents=True, exist_ok=True)


def cmd_build_dataset(args) -> int:
    gateway = Gateway(_make_backend(args))
    manifest = build_dataset(
        args.tables,
        args.out,
        args.n,
        args.seed,
        gateway,
        model_name=args.structuring_model,
        force=args.force,
    )
    print(json.dumps(manifest["counts"], indent=2))
    return 0


def cmd_run(args) -> int:
    config = _load_config(args)
    records = load_record_dir(args.patients)
    if not records:
        raise DynamiCareError(f"no patient records found in {args.patients}")
    backend = _make_backend(args)

    run_dir = Path(args.out)
    _claim_run_dir(run_dir, args.force)
    (run_dir / "config.json").write_text(
        json.dumps(config.to_dict(), indent=2) + "\n", encoding="utf-8"
    )
    manifest = RunManifest(run_id=run_dir.name, config=config.to_dict())
    manifest.write(run_dir)

    results, aborted = run_many(
        records, config, backend, out_dir=run_dir / TRANSCRIPT_DIR, jobs=args.jobs
    )

    manifest.finalize(completed=len(results), aborted=len(aborted))
    manifest.write(run_dir)
    (run_dir / "results.json").write_text(
        json.dumps(
            {
                "results": [r.summary_dict() for r in results],
                "aborted": aborted,
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    print(f"completed {len(results)} session(s), aborted {len(aborted)}, wrote {run_dir}")
    return 0


def _collect_run_outputs(run_dir: Path) -> tuple[list[dict], int]:
    """Result events and abort count from a run's transcripts."""
    transcripts = sorted((run_dir / TRANSCRIPT_DIR).glob("*.jsonl"))
    results: list[dict] = []
    aborted = 0
    for path in transcripts:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                event = json.loads(line)
                if event.get("event") == "result":
                    results.append(event)
                elif event.get("event") == "abort":
                    aborted += 1
    return results, aborted


def cmd_evaluate(args) -> int:
    run_dir = Path(args.run)
    results, aborted = _collect_run_outputs(run_dir)
    if not results:
        raise DynamiCareError(f"no completed sessions under {run_dir}")

    truth_records = load_record_dir(args.truth)
    truths = {r.patient_id: list(r.diagnoses) for r in truth_records}

    client = TerminologyClient(args.terminology_url) if args.terminology_url else None
    mapper = CachedMapper(TsvCache(args.cache), client)
    report = aggregate(results, truths, mapper)

    out_path = run_dir / "evaluation.json"
    out_path.write_text(
        json.dumps({**report.to_dict(), "aborted": aborted}, indent=2) + "\n",
        encoding="utf-8",
    )
    print(render_summary(report, aborted=aborted))
    return 0


def cmd_report(args) -> int:
    run_dir = Path(args.run)
    path = run_dir / "evaluation.json"
    if not path.exists():
        raise DynamiCareError(f"{path} not found; run `evaluate` first")
    data = json.loads(path.read_text(encoding="utf-8"))

    from .evaluation import MetricReport

    report = MetricReport(
        per_patient=data["per_patient"],
        aggregate=data["aggregate"],
        per_chapter=data["per_chapter"],
    )
    print(render_summary(report, aborted=data.get("aborted", 0)))
    print()
    print(render_chapter_table(report))
    return 0


def cmd_export_annotations(args) -> int:
    run_dir = Path(args.run)
    transcripts = sorted((run_dir / TRANSCRIPT_DIR).glob("*.jsonl"))
    if not transcripts:
        raise DynamiCareError(f"no transcripts under {run_dir}")
    out_dir = Path(args.out) if args.out else run_dir / "annotations"
    sheets = export_annotation_sheets(transcripts, args.n, args.seed, out_dir)
    for sheet in sheets:
        print(sheet)
    return 0


def _add_backend_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--backend", choices=("live", "scripted"), default="scripted")
    sub.add_argument("--script", help="scripted backend exchange file (JSONL)")
    sub.add_argument(
        "--audit-log",
        help=f"live backend audit JSONL (live endpoint comes from ${ENV_LLM_URL})",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dynamicare",
        description="Multi-agent clinical diagnosis simulation toolkit.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    build = subparsers.add_parser(
        "build-dataset", help="assemble patient records from raw admission tables"
    )
    build.add_argument("--tables", required=True, help="directory of source CSV tables")
    build.add_argument("--out", required=True, help="output record directory")
    build.add_argument("--n", required=True, type=int, help="number of patients to sample")
    build.add_argument("--seed", type=int, default=0)
    build.add_argument("--structuring-model", default="gpt-4.1")
    build.add_argument("--force", action="store_true", help="overwrite an existing dataset")
    _add_backend_flags(build)
    build.set_defaults(func=cmd_build_dataset)

    run = subparsers.add_parser("run", help="run diagnosis sessions over a record corpus")
    run.add_argument("--patients", required=True, help="patient record directory")
    run.add_argument("--config", help="session config file (JSON)")
    run.add_argument("--out", required=True, help="run directory, e.g. runs/exp1")
    run.add_argument("--jobs", type=int, default=1, help="concurrent sessions")
    run.add_argument("--force", action="store_true", help="overwrite an existing run")
    run.add_argument("--protocol", choices=("solo", "multi"))
    run.add_argument("--max-rounds", dest="max_rounds", type=int)
    run.add_argument("--agreement-threshold", dest="agreement_threshold", type=float)
    run.add_argument("--diagnose-threshold", dest="diagnose_threshold")
    run.add_argument("--seed", type=int)
    run.add_argument("--central-model", dest="central_model")
    run.add_argument("--specialist-model", dest="specialist_model")
    run.add_argument("--patient-model", dest="patient_model")
    _add_backend_flags(run)
    run.set_defaults(func=cmd_run)

    evaluate = subparsers.add_parser("evaluate", help="score a finished run")
    evaluate.add_argument("--run", required=True, help="run directory")
    evaluate.add_argument("--truth", required=True, help="record directory with diagnoses")
    evaluate.add_argument("--cache", help="diagnosis-name to ICD-9 cache file (TSV)")
    evaluate.add_argument("--terminology-url", help="terminology search endpoint")
    evaluate.set_defaults(func=cmd_evaluate)

    report = subparsers.add_parser("report", help="print summary tables for a scored run")
    report.add_argument("--run", required=True, help="run directory")
    report.set_defaults(func=cmd_report)

    annotations = subparsers.add_parser(
        "export-annotations", help="sample transcripts into blank annotation sheets"
    )
    annotations.add_argument("--run", required=True, help="run directory")
    annotations.add_argument("--n", required=True, type=int, help="transcripts to sample")
    annotations.add_argument("--seed", type=int, default=0)
    annotations.add_argument("--out", help="sheet directory (default <run>/annotations)")
    annotations.set_defaults(func=cmd_export_annotations)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except DynamiCareError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
