"""Staged patch generation: localization context, attack analysis,
mitigation strategies, context supplementation, patch generation, then a
validate/refine loop, compile check, and four-class classification.

Stage order is fixed; every stage's prompt, reply, and intermediate
artifact is persisted to a trace directory so a run can be audited and,
under replay mode, reproduced byte for byte. The input project tree is
never modified; all writes land under the output directory.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from . import localization
from .analyzer import analyze_project
from .anchoring import AnchoredPatch, anchor_and_apply
from .compiler import CompilerConfig, CompileResult, compile_check
from .errors import (AnchorError, CompilerMissing, EmptySeedSet, FormatError,
                     SolRepairError)
from .gateway import BackendConfig, LlmGateway
from .localization import (ContextualDependencyGraph, ProgramSlice, SeedSet,
                           build_cdg, extract_slices, resolve_seeds,
                           supplement_seeds)
from .prompts import (default_templates, format_reply, load_templates,
                      parse_numbered_steps, parse_structured_reply, render)
from .report import (EntityMention, Finding, extract_explicit_functions,
                     parse_report, recognize_entities, select_finding)
from .solidity.project import parse_project


# --- domain records ---

@dataclass
class AttackProcedure:
    steps: list[str]
    implicated_entities: list[EntityMention] = field(default_factory=list)

    def render(self) -> str:
        return "\n".join(f"{i}. {step}"
                         for i, step in enumerate(self.steps, start=1))


@dataclass
class MitigationStrategy:
    rank: int  # 1-based, contiguous
    title: str
    rationale: str


def render_strategies(strategies: list[MitigationStrategy]) -> str:
    return "\n".join(f"{s.rank}. {s.title}: {s.rationale}"
                     for s in strategies)


@dataclass
class VulFixPair:
    file: str
    original_snippet: str
    fixed_snippet: str
    explanation: str
    anchor: str | None = None  # stringified span once anchored

    def to_json(self) -> str:
        return json.dumps({
            "file": self.file,
            "original_snippet": self.original_snippet,
            "fixed_snippet": self.fixed_snippet,
            "explanation": self.explanation,
            "anchor": self.anchor,
        }, indent=2, sort_keys=True) + "\n"


@dataclass
class PatchVerdict:
    validator_fixed: bool | None = None  # None: undetermined
    recommendations: list[str] = field(default_factory=list)
    compile_ok: bool | None = None  # None: check skipped
    manual_ok: bool | None = None   # None: verdict not supplied
    refinement_rounds_used: int = 0
    pair_anchored: bool = False


class PatchClass(Enum):
    VALID_COMPILES = "ValidCompiles"
    VALID_MINOR_MODIFICATION = "ValidMinorModification"
    NEEDS_LOGIC_MODIFICATION = "NeedsLogicModification"
    IRREPARABLE = "Irreparable"


@dataclass(frozen=True)
class PatchClassification:
    label: PatchClass
    pending_manual: bool = False  # provisional: no manual verdict yet


def classify_patch(verdict: PatchVerdict) -> PatchClassification:
    """Total classification over every verdict combination.

    Both the validator and the manual check must pass for a valid class;
    the compile check then splits ValidCompiles from
    ValidMinorModification. Without a manual verdict the validator's word
    stands in and the result is flagged as pending.
    """
    if not verdict.pair_anchored:
        return PatchClassification(PatchClass.IRREPARABLE)
    fixed = verdict.validator_fixed is True
    pending = verdict.manual_ok is None
    manual = fixed if pending else verdict.manual_ok
    if fixed and manual:
        if verdict.compile_ok is True:
            return PatchClassification(PatchClass.VALID_COMPILES, pending)
        return PatchClassification(PatchClass.VALID_MINOR_MODIFICATION,
                                   pending)
    return PatchClassification(PatchClass.NEEDS_LOGIC_MODIFICATION, pending)


# --- configuration ---

@dataclass
class PipelineConfig:
    backend: BackendConfig = field(default_factory=BackendConfig)
    compiler: CompilerConfig = field(default_factory=CompilerConfig)
    radius: int = localization.DEFAULT_RADIUS
    slice_budget: int = localization.DEFAULT_SLICE_BUDGET
    max_refine_rounds: int = 2
    anchor_threshold: float = 0.9
    always_recognize: bool = False  # run entity recognition even when the
    # report names functions outright
    template_dir: str | None = None
    manual_verdicts_path: str | None = None
    solc_remaps: list[str] = field(default_factory=list)

    def templates(self):
        if self.template_dir:
            return load_templates(self.template_dir)
        return default_templates()


class StageError(SolRepairError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


# --- staged operations ---

def _ask(gateway: LlmGateway, prompt, parse, stage: str, trace=None,
         retries: int = 1):
    """One prompt round-trip with bounded re-asks on malformed replies."""
    last: FormatError | None = None
    for attempt in range(retries + 1):
        reply = gateway.complete(prompt)
        if trace is not None:
            suffix = f"_retry{attempt}" if attempt else ""
            trace.add(f"{stage}{suffix}_reply.txt", reply)
        try:
            return parse(reply)
        except FormatError as exc:
            last = exc
    raise StageError(stage, f"malformed reply after retry: {last}")


def run_q2_attack_analysis(finding: Finding,
                           cdg: ContextualDependencyGraph,
                           slices: ProgramSlice, gateway: LlmGateway,
                           templates=None, slice_budget: int | None = None,
                           trace=None) -> AttackProcedure:
    cdg_text = cdg.serialize()
    bindings = {"description": finding.description, "cdg": cdg_text}
    budget = slice_budget if slice_budget is not None \
        else localization.DEFAULT_SLICE_BUDGET
    if len(cdg_text) + slices.total_size <= budget:
        bindings["slices"] = slices.render()
    prompt = render("Q2", bindings, templates=templates)
    if trace is not None:
        trace.add("q2_prompt.txt", prompt.text)

    def parse(reply: str) -> AttackProcedure:
        steps = parse_numbered_steps(reply)
        pseudo = Finding(title="", severity="Unknown",
                         description="\n".join(steps))
        entities = [EntityMention(m.kind, m.name, "recognized")
                    for m in extract_explicit_functions(pseudo)]
        return AttackProcedure(steps, entities)

    return _ask(gateway, prompt, parse, "q2", trace)


def run_q3_strategies(attack: AttackProcedure,
                      cdg: ContextualDependencyGraph, gateway: LlmGateway,
                      templates=None, trace=None
                      ) -> tuple[list[MitigationStrategy], list[str]]:
    prompt = render("Q3", {"attack": attack.render(),
                           "cdg": cdg.serialize()}, templates=templates)
    if trace is not None:
        trace.add("q3_prompt.txt", prompt.text)
    raw = _ask(gateway, prompt,
               lambda reply: parse_structured_reply(reply, "q3_strategies"),
               "q3", trace)
    warnings = []
    if len(raw) > 3:
        warnings.append(f"backend returned {len(raw)} strategies; "
                        "keeping the top 3")
        raw = raw[:3]
    if not raw:
        raise StageError("q3", "backend returned an empty strategy list")
    strategies = [MitigationStrategy(i, item["title"], item["rationale"])
                  for i, item in enumerate(raw, start=1)]
    return strategies, warnings


def run_q4_supplement(attack: AttackProcedure,
                      cdg: ContextualDependencyGraph,
                      strategies: list[MitigationStrategy],
                      gateway: LlmGateway, graph, seed_set: SeedSet,
                      project, radius: int, slice_budget: int,
                      templates=None, trace=None):
    """Best-effort context supplementation; never aborts the pipeline.

    Returns (seed set, cdg, slices, warnings); unchanged context on a
    malformed reply or when nothing new resolves.
    """
    prompt = render("Q4", {"attack": attack.render(),
                           "cdg": cdg.serialize(),
                           "strategies": render_strategies(strategies)},
                    templates=templates)
    if trace is not None:
        trace.add("q4_prompt.txt", prompt.text)
    reply = gateway.complete(prompt)
    if trace is not None:
        trace.add("q4_reply.txt", reply)
    try:
        parsed = parse_structured_reply(reply, "q1_entities")
    except FormatError as exc:
        return seed_set, cdg, None, [f"q4 reply ignored: {exc}"]

    mentions = []
    for kind, key in (("Contract", "contracts"), ("Function", "functions"),
                      ("StateVariable", "state_variables")):
        mentions.extend(EntityMention(kind, name, "recognized")
                        for name in parsed[key] if name.strip())
    merged = supplement_seeds(seed_set, mentions, graph)
    if {n.key for n in merged.resolved} == {n.key for n in seed_set.resolved}:
        return merged, cdg, None, []
    new_cdg = build_cdg(graph, merged, radius)
    new_slices = extract_slices(new_cdg, project, max_chars=slice_budget)
    return merged, new_cdg, new_slices, []


def _parse_pair(reply: str, schema: str) -> VulFixPair:
    parsed = parse_structured_reply(reply, schema)
    pair = VulFixPair(parsed["file"], parsed["original_snippet"],
                      parsed["fixed_snippet"], parsed["explanation"])
    if not pair.original_snippet.strip():
        raise FormatError("original_snippet is empty")
    if pair.original_snippet == pair.fixed_snippet:
        raise FormatError("fixed_snippet equals original_snippet")
    return pair


def run_q5_patch(cdg: ContextualDependencyGraph, slices: ProgramSlice,
                 strategies: list[MitigationStrategy], gateway: LlmGateway,
                 templates=None, trace=None) -> VulFixPair:
    prompt = render("Q5", {"cdg": cdg.serialize(),
                           "slices": slices.render(),
                           "strategies": render_strategies(strategies)},
                    templates=templates)
    if trace is not None:
        trace.add("q5_prompt.txt", prompt.text)
    return _ask(gateway, prompt,
                lambda reply: _parse_pair(reply, "q5_pair"), "q5", trace)


def validate_patch(pair: VulFixPair, finding: Finding,
                   gateway: LlmGateway, templates=None, trace=None,
                   round_tag: str = "") -> tuple[bool | None, list[str]]:
    """Ask the validator backend whether the pair fixes the finding.

    Returns (fixed, recommendations); fixed is None when the reply was
    malformed (treated as not-fixed by the loop).
    """
    patch_text = format_reply({
        "file": pair.file,
        "original_snippet": pair.original_snippet,
        "fixed_snippet": pair.fixed_snippet,
        "explanation": pair.explanation,
    }, "q5_pair")
    prompt = render("VALIDATOR",
                    {"description":
                     f"{finding.title}\n\n{finding.description}",
                     "patch": patch_text}, templates=templates)
    if trace is not None:
        trace.add(f"validator{round_tag}_prompt.txt", prompt.text)
    reply = gateway.complete(prompt)
    if trace is not None:
        trace.add(f"validator{round_tag}_reply.txt", reply)
    try:
        verdict = parse_structured_reply(reply, "validator_verdict")
    except FormatError:
        return None, []
    return verdict["fixed"], verdict["recommendations"]


def refine_patch(pair: VulFixPair, recommendations: list[str],
                 cdg: ContextualDependencyGraph,
                 slices: ProgramSlice | None, gateway: LlmGateway,
                 templates=None, trace=None,
                 round_tag: str = "") -> VulFixPair:
    """One refinement round; raises FormatError when the reply stays
    malformed so the caller keeps the prior pair."""
    bindings = {
        "patch": format_reply({
            "file": pair.file,
            "original_snippet": pair.original_snippet,
            "fixed_snippet": pair.fixed_snippet,
            "explanation": pair.explanation,
        }, "q5_pair"),
        "recommendations": "\n".join(f"- {r}" for r in recommendations)
        or "- none given",
        "cdg": cdg.serialize(),
    }
    if slices is not None:
        bindings["slices"] = slices.render()
    prompt = render("Q6", bindings, templates=templates)
    if trace is not None:
        trace.add(f"q6{round_tag}_prompt.txt", prompt.text)
    last: FormatError | None = None
    for attempt in range(2):
        reply = gateway.complete(prompt)
        if trace is not None:
            suffix = f"_retry{attempt}" if attempt else ""
            trace.add(f"q6{round_tag}{suffix}_reply.txt", reply)
        try:
            return _parse_pair(reply, "q6_pair")
        except FormatError as exc:
            last = exc
    raise last


# --- trace and outputs ---

class StageTrace:
    """Ordered stage artifacts, written as NN_name files."""

    def __init__(self):
        self.items: list[tuple[str, str]] = []

    def add(self, name: str, content: str):
        self.items.append((name, content))

    def write(self, directory: Path):
        directory.mkdir(parents=True, exist_ok=True)
        for i, (name, content) in enumerate(self.items, start=1):
            if not content.endswith("\n"):
                content += "\n"
            (directory / f"{i:02d}_{name}").write_text(content,
                                                       encoding="utf-8")


@dataclass
class PipelineResult:
    finding_title: str
    pair: VulFixPair | None
    verdict: PatchVerdict
    classification: PatchClassification
    strategies: list[MitigationStrategy] = field(default_factory=list)
    diff: str = ""
    diagnostics: list[str] = field(default_factory=list)
    compile_status: str = "skipped"
    output_dir: str | None = None

    @property
    def patch_class(self) -> PatchClass:
        return self.classification.label


def load_manual_verdict(path: str | None, vul_name: str,
                        title: str) -> bool | None:
    """Optional human verdict: a JSON object keyed by vulnerability name
    or finding title, or a flat {"manual_ok": bool}."""
    if not path:
        return None
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict):
        if "manual_ok" in data and isinstance(data["manual_ok"], bool):
            return data["manual_ok"]
        for key in (vul_name, title):
            value = data.get(key)
            if isinstance(value, bool):
                return value
    return None


def run_pipeline(project_path: str, report_path: str, vul_name: str,
                 config: PipelineConfig,
                 gateway: LlmGateway | None = None,
                 output_dir: str | None = None) -> PipelineResult:
    """Execute the whole staged run for one finding.

    Input errors (unreadable project or report, unknown finding name)
    raise; stage failures classify the finding as Irreparable with the
    stage diagnostic recorded.
    """
    templates = config.templates()
    gateway = gateway or LlmGateway(config.backend)
    trace = StageTrace()
    diagnostics: list[str] = []
    out = Path(output_dir) if output_dir else None

    # input stages: errors here propagate to the caller
    report = parse_report(report_path)
    finding, warnings = select_finding(report, vul_name)
    diagnostics.extend(warnings)
    project = parse_project(project_path, config.solc_remaps)
    if project.parse_failures:
        diagnostics.extend(f"unparsed file {path}: {error}"
                           for path, error in project.parse_failures)
    analysis = analyze_project(project)
    graph = analysis.graph

    trace.add("project.txt", "\n".join(
        [f"file {f.file_id} {f.path}" for f in project.files]
        + [f"unparsed {path}" for path, _ in project.parse_failures]))
    trace.add("graph.txt", graph.serialize())
    if analysis.unresolved_calls:
        trace.add("unresolved_calls.txt", "\n".join(
            f"{u.caller} -> {u.callee_text} @ {u.site}"
            for u in analysis.unresolved_calls))
    trace.add("finding.txt",
              f"title: {finding.title}\nseverity: {finding.severity}\n\n"
              + finding.description)

    def abort(stage: str, message: str) -> PipelineResult:
        diagnostics.append(f"{stage}: {message}")
        verdict = PatchVerdict(pair_anchored=False)
        result = PipelineResult(
            finding.title, None, verdict, classify_patch(verdict),
            diagnostics=diagnostics, output_dir=str(out) if out else None)
        _write_outputs(result, trace, out)
        return result

    # entity extraction and seeds
    mentions = extract_explicit_functions(finding)
    if not mentions or config.always_recognize:
        try:
            mentions = mentions + recognize_entities(finding, gateway,
                                                     templates=templates)
        except FormatError as exc:
            diagnostics.append(f"entity recognition failed ({exc}); "
                               "using explicit mentions only")
    trace.add("entities.txt", "\n".join(
        f"{m.confidence} {m.kind} {m.name}" for m in mentions) or "(none)")

    try:
        seeds = resolve_seeds(mentions, graph)
    except EmptySeedSet as exc:
        return abort("seeds", str(exc))
    trace.add("seeds.txt", "\n".join(
        [f"{seeds.provenance[node.key]} {node.kind.value} "
         f"{node.qualified_name}" for node in seeds.resolved]
        + [f"unresolved {m.kind} {m.name}" for m in seeds.unresolved]))

    cdg = build_cdg(graph, seeds, config.radius)
    slices = extract_slices(cdg, project, max_chars=config.slice_budget)
    trace.add("cdg.txt", cdg.serialize())
    trace.add("slices.txt", slices.render())

    # staged generation
    try:
        attack = run_q2_attack_analysis(
            finding, cdg, slices, gateway, templates=templates,
            slice_budget=config.slice_budget, trace=trace)
        trace.add("attack.txt", attack.render())

        strategies, q3_warnings = run_q3_strategies(
            attack, cdg, gateway, templates=templates, trace=trace)
        diagnostics.extend(q3_warnings)
        trace.add("strategies.txt", render_strategies(strategies))

        seeds, cdg, new_slices, q4_warnings = run_q4_supplement(
            attack, cdg, strategies, gateway, graph, seeds, project,
            config.radius, config.slice_budget, templates=templates,
            trace=trace)
        diagnostics.extend(q4_warnings)
        if new_slices is not None:
            slices = new_slices
            trace.add("cdg_supplemented.txt", cdg.serialize())
            trace.add("slices_supplemented.txt", slices.render())

        pair = run_q5_patch(cdg, slices, strategies, gateway,
                            templates=templates, trace=trace)
    except StageError as exc:
        return abort(exc.stage, str(exc))

    verdict = PatchVerdict()
    anchored: AnchoredPatch | None = None

    def try_anchor(candidate: VulFixPair, tag: str):
        nonlocal anchored, pair
        try:
            result = anchor_and_apply(candidate, project, output_dir=out,
                                      threshold=config.anchor_threshold)
            candidate.anchor = str(result.anchor)
            anchored = result
            pair = candidate
            trace.add(f"anchor{tag}.txt",
                      f"file: {result.rel_path}\nmethod: {result.method}\n"
                      f"anchor: {result.anchor}\n\n{result.diff}")
        except AnchorError as exc:
            diagnostics.append(f"anchor{tag}: {exc.reason} ({exc})")
            trace.add(f"anchor{tag}.txt", f"failed: {exc.reason} {exc}")

    try_anchor(pair, "")

    fixed, recommendations = validate_patch(
        pair, finding, gateway, templates=templates, trace=trace)
    rounds = 0
    while fixed is not True and rounds < config.max_refine_rounds:
        rounds += 1
        tag = f"_round{rounds}"
        try:
            refined = refine_patch(pair, recommendations, cdg, slices,
                                   gateway, templates=templates,
                                   trace=trace, round_tag=tag)
        except FormatError as exc:
            diagnostics.append(f"q6{tag}: malformed reply kept prior pair "
                               f"({exc})")
            rounds -= 1
            break
        try_anchor(refined, tag)
        # judge the pair we would actually ship: the refined one when it
        # anchored, otherwise the last anchorable pair
        fixed, recommendations = validate_patch(
            pair, finding, gateway, templates=templates, trace=trace,
            round_tag=tag)

    verdict.validator_fixed = fixed
    verdict.recommendations = recommendations
    verdict.refinement_rounds_used = rounds
    verdict.pair_anchored = anchored is not None

    compile_result = CompileResult("skipped", "no patched tree to compile")
    if anchored is not None and out is not None:
        patched_dir = out / "patched"
        _mirror_unpatched_files(project, patched_dir)
        try:
            compile_result = compile_check(patched_dir, config.compiler)
        except CompilerMissing as exc:
            compile_result = CompileResult("skipped", str(exc))
    verdict.compile_ok = compile_result.ok
    trace.add("compile.txt",
              f"status: {compile_result.status}\n"
              + compile_result.diagnostics)

    verdict.manual_ok = load_manual_verdict(config.manual_verdicts_path,
                                            vul_name, finding.title)

    classification = classify_patch(verdict)
    result = PipelineResult(
        finding.title, pair, verdict, classification,
        strategies=strategies, diff=anchored.diff if anchored else "",
        diagnostics=diagnostics, compile_status=compile_result.status,
        output_dir=str(out) if out else None)
    _write_outputs(result, trace, out)
    return result


def _mirror_unpatched_files(project, patched_dir: Path):
    """Copy untouched sources next to the patched file so the compiler
    sees a complete tree."""
    for source in project.files:
        target = patched_dir / source.path
        if not target.exists():
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(source.text, encoding="utf-8")


def _write_outputs(result: PipelineResult, trace: StageTrace,
                   out: Path | None):
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    trace.write(out / "trace")
    if result.diff:
        (out / "patch.diff").write_text(result.diff, encoding="utf-8")
    if result.pair is not None:
        (out / "pair.json").write_text(result.pair.to_json(),
                                       encoding="utf-8")
    verdict = result.verdict
    (out / "verdict.json").write_text(json.dumps({
        "finding": result.finding_title,
        "validator_fixed": verdict.validator_fixed,
        "recommendations": verdict.recommendations,
        "compile_status": result.compile_status,
        "compile_ok": verdict.compile_ok,
        "manual_ok": verdict.manual_ok,
        "refinement_rounds_used": verdict.refinement_rounds_used,
        "pair_anchored": verdict.pair_anchored,
        "patch_class": result.classification.label.value,
        "pending_manual": result.classification.pending_manual,
        "diagnostics": result.diagnostics,
    }, indent=2, sort_keys=True) + "\n", encoding="utf-8")
