"""causal-audit command line."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from .accountability import MismatchedDomains, NormMap, accountability_json, check_necessity
from .cause import CauseError, CauseReport, analyze
from .dsl import parse_document
from .kernel import DEFAULT_BUDGET, ExplosionBudgetExceeded, KernelError
from .lang import LangError
from .logs import LogError, load_log

EXIT_CLEAN = 0
EXIT_ERROR = 1
EXIT_VIOLATION = 2


@dataclass(frozen=True)
class AnalysisConfig:
    protocol: Path
    norms: Path | None = None
    log: Path | None = None
    mode: str = "exact"
    por: bool = True
    budget: int = DEFAULT_BUDGET
    jobs: int = 1
    out: Path | None = None

    def __post_init__(self):
        if self.budget <= 0:
            raise ValueError("budget must be positive")
        if self.jobs <= 0:
            raise ValueError("jobs must be positive")
        if self.mode not in ("exact", "greedy"):
            raise ValueError(f"unknown mode {self.mode!r}")


def _read(path: Path) -> str:
    return Path(path).read_text(encoding="utf-8")


def run_analysis(ac: AnalysisConfig) -> tuple[CauseReport, int]:
    doc = parse_document(_read(ac.protocol))
    if doc.prop is None:
        raise LangError(f"{ac.protocol}: no property block")
    from .properties import property_from_block

    prop = property_from_block(doc.prop)
    log = load_log(ac.log) if ac.log is not None else None
    report = analyze(doc.config, prop, log, mode=ac.mode, budget=ac.budget, jobs=ac.jobs, por=ac.por)
    if ac.norms is not None:
        norm_doc = parse_document(_read(ac.norms))
        norms = NormMap.from_config(norm_doc.config)
        norms.check_domain(doc.config)
        try:
            necessity = check_necessity(norm_doc.config.threads, norms, norm_doc.config.stores, prop, ac.budget, por=ac.por)
            acc = accountability_json(report, doc.config, norms, necessity)
        except ExplosionBudgetExceeded:
            acc = accountability_json(report, doc.config, norms)
            acc["necessity"] = "unknown"
        report = CauseReport(
            report.violation,
            report.witness,
            report.lamport_causes,
            report.actual_causes,
            report.thread_order,
            report.diagnostics,
            acc,
        )
    return report, EXIT_VIOLATION if report.violation else EXIT_CLEAN


def render(report: CauseReport) -> str:
    return json.dumps(report.to_json(), sort_keys=True, indent=2) + "\n"


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="causal-audit", description="Actual-cause analysis of protocol violations.")
    sub = ap.add_subparsers(dest="command", required=True)
    an = sub.add_parser("analyze", help="find a violation (or replay a log) and report its causes")
    an.add_argument("protocol", type=Path, help="protocol file (actual programs + property)")
    an.add_argument("--norms", type=Path, help="protocol file with the norms")
    an.add_argument("--log", type=Path, help="recorded log (JSON) to analyze instead of searching")
    an.add_argument("--mode", choices=("exact", "greedy"), default="exact")
    an.add_argument("--por", choices=("on", "off"), default="on")
    an.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="state budget")
    an.add_argument("--jobs", type=int, default=1, help="worker processes for the exact search")
    an.add_argument("--out", type=Path, help="write the JSON report here instead of stdout")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        ac = AnalysisConfig(
            protocol=args.protocol,
            norms=args.norms,
            log=args.log,
            mode=args.mode,
            por=args.por == "on",
            budget=args.budget,
            jobs=args.jobs,
            out=args.out,
        )
        report, status = run_analysis(ac)
        text = render(report)
        if ac.out is not None:
            ac.out.write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
        return status
    except (LangError, LogError, KernelError, CauseError, MismatchedDomains, OSError, ValueError) as e:
        print(f"causal-audit: error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
