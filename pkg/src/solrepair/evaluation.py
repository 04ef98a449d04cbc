"""Corpus-level metrics: strategy success rates and the four-class tally.

Success Rate is the fraction of cases whose rank-1 strategy matches the
report's fix recommendation; the top-3 variant counts a hit anywhere in
the ranked list. Patch classes are tallied with fractions rounded to the
nearest percent (half up). Strategy/recommendation matching is judged
either by an LLM or by a per-case judgments list in the manifest; reports
record which judge was used.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import EmptyCorpus, FormatError
from .gateway import LlmGateway
from .pipeline import (MitigationStrategy, PatchClass, PipelineConfig,
                       PipelineResult, run_pipeline)
from .prompts import parse_structured_reply, render


@dataclass
class LabeledCase:
    finding_id: str
    recommendation: str
    strategies: list[MitigationStrategy]
    judgments: list[bool]  # parallel to strategies
    patch_class: PatchClass

    def __post_init__(self):
        if len(self.judgments) != len(self.strategies):
            raise ValueError(
                f"{self.finding_id}: {len(self.judgments)} judgments for "
                f"{len(self.strategies)} strategies")


@dataclass
class MetricsReport:
    n_cases: int
    success_rate: float
    top3_success_rate: float
    class_counts: dict[PatchClass, int]
    class_fractions: dict[PatchClass, float]
    judge: str = "manual"

    def to_json(self) -> str:
        return json.dumps({
            "n_cases": self.n_cases,
            "judge": self.judge,
            "success_rate": self.success_rate,
            "top3_success_rate": self.top3_success_rate,
            "class_counts": {c.value: self.class_counts[c]
                             for c in PatchClass},
            "class_percent": {c.value: round_percent(self.class_fractions[c])
                              for c in PatchClass},
        }, indent=2, sort_keys=True) + "\n"

    def render_table(self) -> str:
        lines = [
            f"cases: {self.n_cases}   judge: {self.judge}",
            f"success rate:       {self.success_rate:.3f}",
            f"top-3 success rate: {self.top3_success_rate:.3f}",
            "patch classes:",
        ]
        for cls in PatchClass:
            count = self.class_counts[cls]
            pct = round_percent(self.class_fractions[cls])
            lines.append(f"  {cls.value:<24} {count:>3}  ({pct}%)")
        return "\n".join(lines) + "\n"


def round_percent(fraction: float) -> int:
    """Nearest percent, half rounds up (48%, 21% style reporting)."""
    return int(math.floor(fraction * 100 + 0.5))


def success_rate(cases: list[LabeledCase]) -> float:
    """Fraction of cases whose rank-1 strategy matches."""
    if not cases:
        raise EmptyCorpus("no cases to score")
    hits = sum(1 for case in cases if case.judgments
               and case.judgments[0])
    return hits / len(cases)


def top3_success_rate(cases: list[LabeledCase]) -> float:
    """Fraction of cases with any match among ranks 1..3."""
    if not cases:
        raise EmptyCorpus("no cases to score")
    hits = sum(1 for case in cases if any(case.judgments[:3]))
    return hits / len(cases)


def class_tally(cases: list[LabeledCase]
                ) -> tuple[dict[PatchClass, int], dict[PatchClass, float]]:
    counts = {cls: 0 for cls in PatchClass}
    for case in cases:
        counts[case.patch_class] += 1
    n = len(cases)
    fractions = {cls: (counts[cls] / n if n else 0.0) for cls in PatchClass}
    return counts, fractions


def judge_strategy_match(strategy: MitigationStrategy, recommendation: str,
                         gateway: LlmGateway, templates=None) -> bool | None:
    """LLM judgment whether a strategy matches the recommendation.

    Returns None (undetermined) on a malformed reply; callers exclude such
    strategies with a warning.
    """
    if not strategy.title.strip() or not recommendation.strip():
        raise ValueError("strategy and recommendation must be non-empty")
    prompt = render("VALIDATOR", {
        "description": ("Fix recommendation from the audit report:\n"
                        + recommendation),
        "patch": (f"Candidate mitigation strategy:\n{strategy.title}: "
                  f"{strategy.rationale}"),
    }, templates=templates)
    try:
        verdict = parse_structured_reply(gateway.complete(prompt),
                                         "validator_verdict")
    except FormatError:
        return None
    return verdict["fixed"]


def compute_metrics(cases: list[LabeledCase],
                    judge: str = "manual") -> MetricsReport:
    if not cases:
        raise EmptyCorpus("empty corpus")
    counts, fractions = class_tally(cases)
    return MetricsReport(
        n_cases=len(cases),
        success_rate=success_rate(cases),
        top3_success_rate=top3_success_rate(cases),
        class_counts=counts,
        class_fractions=fractions,
        judge=judge,
    )


# --- manifest-driven batch evaluation ---

@dataclass
class ManifestCase:
    case_id: str
    report_path: str
    project_path: str
    vul_name: str
    judgments: list[bool] | None = None
    manual_ok: bool | None = None
    recommendation: str | None = None


def load_manifest(path: str | Path) -> list[ManifestCase]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    records = data["cases"] if isinstance(data, dict) else data
    if not records:
        raise EmptyCorpus(f"manifest has no cases: {path}")
    cases = []
    for i, record in enumerate(records):
        cases.append(ManifestCase(
            case_id=record.get("id", f"case{i}"),
            report_path=record["report_path"],
            project_path=record["project_path"],
            vul_name=record["vul_name"],
            judgments=record.get("judgments"),
            manual_ok=record.get("manual_ok"),
            recommendation=record.get("recommendation"),
        ))
    return cases


@dataclass
class EvaluationRun:
    metrics: MetricsReport
    cases: list[LabeledCase]
    warnings: list[str] = field(default_factory=list)


def evaluate_manifest(manifest_path: str | Path, config: PipelineConfig,
                      judge_mode: str = "manual",
                      gateway_factory=None,
                      output_dir: str | Path | None = None,
                      workers: int = 1) -> EvaluationRun:
    """Run the pipeline per manifest case, judge strategies, tally classes.

    Per-case failures classify as Irreparable and never abort the batch.
    ``gateway_factory`` builds one gateway per case (so stub/replay tables
    can differ); defaults to the config backend.
    """
    if judge_mode not in ("manual", "llm"):
        raise ValueError(f"unknown judge mode {judge_mode!r}")
    manifest = load_manifest(manifest_path)
    out_root = Path(output_dir) if output_dir else None
    warnings: list[str] = []
    labeled: list[LabeledCase] = []

    def run_case(case: ManifestCase) -> tuple[ManifestCase,
                                              PipelineResult | None, str]:
        gateway = gateway_factory(case) if gateway_factory else None
        case_out = str(out_root / case.case_id) if out_root else None
        case_config = config
        if case.manual_ok is not None:
            # manifest-supplied manual verdicts skip the verdict file
            case_config = _with_manual(config, None)
        try:
            result = run_pipeline(case.project_path, case.report_path,
                                  case.vul_name, case_config,
                                  gateway=gateway, output_dir=case_out)
            return case, result, ""
        except Exception as exc:  # per-case isolation, never abort batch
            return case, None, f"{type(exc).__name__}: {exc}"

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_case, manifest))
    else:
        outcomes = [run_case(case) for case in manifest]

    llm_gateway = None
    if judge_mode == "llm":
        llm_gateway = (gateway_factory(None) if gateway_factory
                       else LlmGateway(config.backend))

    for case, result, error in outcomes:
        if result is None:
            warnings.append(f"{case.case_id}: {error}")
            labeled.append(LabeledCase(case.case_id,
                                       case.recommendation or "",
                                       [], [], PatchClass.IRREPARABLE))
            continue
        patch_class = result.patch_class
        if case.manual_ok is not None and result.verdict.pair_anchored:
            verdict = result.verdict
            verdict.manual_ok = case.manual_ok
            from .pipeline import classify_patch
            patch_class = classify_patch(verdict).label

        recommendation = case.recommendation or ""
        if not recommendation:
            recommendation = _recommendation_from_report(case)
        strategies = result.strategies
        judgments = _judge_case(case, strategies, recommendation,
                                judge_mode, llm_gateway, config, warnings)
        labeled.append(LabeledCase(case.case_id, recommendation,
                                   strategies, judgments, patch_class))

    scoreable = [case for case in labeled if case.strategies]
    if not scoreable:
        raise EmptyCorpus("no case produced strategies to score")
    metrics = compute_metrics(scoreable, judge=judge_mode)
    counts, fractions = class_tally(labeled)
    metrics = MetricsReport(len(labeled), metrics.success_rate,
                            metrics.top3_success_rate, counts, fractions,
                            judge=judge_mode)
    run = EvaluationRun(metrics, labeled, warnings)
    if out_root:
        out_root.mkdir(parents=True, exist_ok=True)
        (out_root / "metrics.json").write_text(metrics.to_json(),
                                               encoding="utf-8")
        (out_root / "metrics.txt").write_text(metrics.render_table(),
                                              encoding="utf-8")
    return run


def _with_manual(config: PipelineConfig, path: str | None) -> PipelineConfig:
    from dataclasses import replace
    return replace(config, manual_verdicts_path=path)


def _recommendation_from_report(case: ManifestCase) -> str:
    from .report import parse_report, select_finding
    try:
        report = parse_report(case.report_path)
        finding, _ = select_finding(report, case.vul_name)
        return finding.recommendation or ""
    except Exception:
        return ""


def _judge_case(case: ManifestCase, strategies, recommendation: str,
                judge_mode: str, llm_gateway, config,
                warnings: list[str]) -> list[bool]:
    if not strategies:
        return []
    if judge_mode == "manual":
        if case.judgments is None:
            warnings.append(f"{case.case_id}: no judgments in manifest; "
                            "treating all strategies as non-matching")
            return [False] * len(strategies)
        judgments = list(case.judgments)[:len(strategies)]
        judgments += [False] * (len(strategies) - len(judgments))
        return judgments
    judgments = []
    for strategy in strategies:
        if not recommendation:
            warnings.append(f"{case.case_id}: no recommendation text; "
                            "strategy treated as non-matching")
            judgments.append(False)
            continue
        verdict = judge_strategy_match(strategy, recommendation,
                                       llm_gateway,
                                       templates=config.templates())
        if verdict is None:
            warnings.append(f"{case.case_id}: judge reply malformed for "
                            f"rank {strategy.rank}; excluded as "
                            "non-matching")
            judgments.append(False)
        else:
            judgments.append(verdict)
    return judgments
