"""Command-line interface.

Commands: ``check-compile`` (compiler sanity check on the unpatched
project), ``generate`` (one finding end to end), ``evaluate`` (manifest
batch with metrics). Long flags use dashes; the underscore spellings
(``--report_path`` ...) are accepted aliases.

Exit codes: 0 success (including a pending-manual result), 1 input error,
2 irreparable finding, 3 compiler missing.
"""
from __future__ import annotations

import argparse
import sys

from .compiler import CompilerConfig, compile_check
from .errors import (CompilerMissing, EmptyCorpus, FindingNotFound,
                     ProjectError, ReportError, SolRepairError)
from .evaluation import evaluate_manifest
from .gateway import BackendConfig
from .pipeline import PatchClass, PipelineConfig, run_pipeline

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_IRREPARABLE = 2
EXIT_COMPILER_MISSING = 3


def _add_backend_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--mode", choices=["live", "record", "replay",
                                           "stub"], default="replay",
                        help="LLM backend mode (default: replay)")
    parser.add_argument("--model", default="gpt-4")
    parser.add_argument("--endpoint",
                        default="https://api.openai.com/v1/chat/completions")
    parser.add_argument("--credentials-env", "--credentials_env",
                        default="OPENAI_API_KEY",
                        help="environment variable holding the API key")
    parser.add_argument("--transcript", default=None,
                        help="transcript file for record/replay modes")
    parser.add_argument("--temperature", type=float, default=0.0)
    parser.add_argument("--template-dir", "--template_dir", default=None,
                        help="directory of *.tmpl prompt templates")


def _backend_from_args(args) -> BackendConfig:
    return BackendConfig(mode=args.mode, model=args.model,
                         endpoint=args.endpoint,
                         credentials_env=args.credentials_env,
                         temperature=args.temperature,
                         transcript_path=args.transcript)


def _pipeline_config(args) -> PipelineConfig:
    return PipelineConfig(
        backend=_backend_from_args(args),
        compiler=CompilerConfig(solc_path=args.solc,
                                remaps=args.solc_remaps),
        radius=args.radius,
        slice_budget=args.slice_budget,
        max_refine_rounds=args.max_refine_rounds,
        always_recognize=args.always_recognize,
        template_dir=args.template_dir,
        manual_verdicts_path=args.manual_verdicts,
        solc_remaps=args.solc_remaps,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="solrepair",
        description="Repair audited Solidity vulnerabilities with "
                    "dependency-graph localization and a staged LLM "
                    "pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check-compile",
                           help="compile the unpatched project")
    check.add_argument("--project-path", "--project_path", required=True)
    check.add_argument("--solc-remaps", "--solc_remaps", action="append",
                       default=[], help="prefix=path remapping, repeatable")
    check.add_argument("--solc", default=None,
                       help="Solidity compiler executable")

    gen = sub.add_parser("generate", help="generate a patch for one finding")
    gen.add_argument("--report-path", "--report_path", required=True)
    gen.add_argument("--project-path", "--project_path", required=True)
    gen.add_argument("--vul-name", "--vul_name", required=True,
                     help="substring of the finding title to repair")
    gen.add_argument("--output-path", "--output_path", required=True)
    gen.add_argument("--solc-remaps", "--solc_remaps", action="append",
                     default=[])
    gen.add_argument("--solc", default=None)
    gen.add_argument("--radius", type=int, default=2,
                     help="context hops around the seeds (default 2)")
    gen.add_argument("--slice-budget", "--slice_budget", type=int,
                     default=24000)
    gen.add_argument("--max-refine-rounds", "--max_refine_rounds", type=int,
                     default=2)
    gen.add_argument("--always-recognize", "--always_recognize",
                     action="store_true",
                     help="run entity recognition even when the report "
                          "names functions outright")
    gen.add_argument("--manual-verdicts", "--manual_verdicts", default=None,
                     help="JSON file with human verdicts keyed by "
                          "vulnerability name")
    _add_backend_flags(gen)

    ev = sub.add_parser("evaluate", help="run a labeled corpus manifest")
    ev.add_argument("--manifest", required=True)
    ev.add_argument("--output-path", "--output_path", required=True)
    ev.add_argument("--judge", choices=["manual", "llm"], default="manual")
    ev.add_argument("--workers", type=int, default=1)
    ev.add_argument("--solc", default=None)
    ev.add_argument("--solc-remaps", "--solc_remaps", action="append",
                    default=[])
    ev.add_argument("--radius", type=int, default=2)
    ev.add_argument("--slice-budget", "--slice_budget", type=int,
                    default=24000)
    ev.add_argument("--max-refine-rounds", "--max_refine_rounds", type=int,
                    default=2)
    ev.add_argument("--always-recognize", "--always_recognize",
                    action="store_true")
    ev.add_argument("--manual-verdicts", "--manual_verdicts", default=None)
    _add_backend_flags(ev)
    return parser


def cmd_check_compile(args) -> int:
    config = CompilerConfig(solc_path=args.solc, remaps=args.solc_remaps)
    try:
        result = compile_check(args.project_path, config)
    except CompilerMissing as exc:
        print(f"compiler missing: {exc}", file=sys.stderr)
        return EXIT_COMPILER_MISSING
    if result.status == "skipped":
        print(f"compiler missing: {result.diagnostics}", file=sys.stderr)
        return EXIT_COMPILER_MISSING
    print(result.diagnostics)
    if result.status == "ok":
        print("compile check: ok")
        return EXIT_OK
    for line in result.diagnostics.splitlines():
        if "not found" in line or "File import callback" in line:
            print(f"hint: a dependency may be missing -> {line.strip()}")
    print("compile check: failed", file=sys.stderr)
    return EXIT_INPUT_ERROR


def cmd_generate(args) -> int:
    try:
        config = _pipeline_config(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    try:
        result = run_pipeline(args.project_path, args.report_path,
                              args.vul_name, config,
                              output_dir=args.output_path)
    except (FindingNotFound, ReportError, ProjectError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except SolRepairError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    added = sum(1 for line in result.diff.splitlines()
                if line.startswith("+") and not line.startswith("+++"))
    removed = sum(1 for line in result.diff.splitlines()
                  if line.startswith("-") and not line.startswith("---"))
    print(f"finding:  {result.finding_title}")
    print(f"class:    {result.classification.label.value}"
          + (" (pending manual verdict)"
             if result.classification.pending_manual else ""))
    print(f"compile:  {result.compile_status}")
    if result.diff:
        print(f"diff:     +{added} -{removed} lines "
              f"-> {args.output_path}/patch.diff")
    for note in result.diagnostics:
        print(f"note:     {note}")
    if result.patch_class is PatchClass.IRREPARABLE:
        return EXIT_IRREPARABLE
    return EXIT_OK


def cmd_evaluate(args) -> int:
    config = _pipeline_config(args)
    try:
        run = evaluate_manifest(args.manifest, config,
                                judge_mode=args.judge,
                                output_dir=args.output_path,
                                workers=args.workers)
    except EmptyCorpus as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: bad manifest: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    print(run.metrics.render_table())
    for warning in run.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "check-compile":
        return cmd_check_compile(args)
    if args.command == "generate":
        return cmd_generate(args)
    return cmd_evaluate(args)


if __name__ == "__main__":
    sys.exit(main())
