"""Bottleneck detection rules, impact ranking and the analysis report."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .behavior import CallGraph, roots_by_node
from .components import DEFAULT_SERVICE
from .config import PatternCatalog, RuleSpec
from .frontend.model import SourceSpan
from .jsonio import from_jsonable, read_json, write_json
from .summary import SystemSummary

CONFIDENCE_ORDER = {"high": 2, "medium": 1, "low": 0}
PATCHABLE_RULES = ("R1", "R2", "R3")


@dataclass
class Finding:
    id: str
    rule_id: str
    title: str
    interpretation: str
    suggestion: str
    evidence: List[SourceSpan]
    owner_method_id: str
    reachable_root_count: int
    loop_depth: int
    impact_score: float = 0.0
    confidence: str = "high"
    rank: int = 0
    base_severity: float = 0.0
    owner_class: str = ""
    matched_type: str = ""
    # set when reachability leaned on an ambiguous call edge or the default service
    ambiguous_support: bool = False
    default_service: bool = False

    @property
    def primary(self) -> SourceSpan:
        return self.evidence[0]


@dataclass
class AnalysisReport:
    findings: List[Finding]
    candidate_files: List[str]
    risks: List[str]
    gaps: List[str]
    summary_fingerprint: str
    schema_version: int = 1


def finding_id(rule_id: str, span: SourceSpan) -> str:
    key = f"{rule_id}|{span.path}|{span.start_line}|{span.start_col}|{span.end_line}|{span.end_col}"
    return hashlib.sha256(key.encode("utf-8")).hexdigest()[:16]


def owner_class_of(mid: str) -> str:
    """``method:a.b.C#m(int)`` -> ``a.b.C``."""
    return mid.split(":", 1)[1].split("#", 1)[0]


def is_constructor_id(mid: str) -> bool:
    owner, rest = mid.split(":", 1)[1].split("#", 1)
    return rest.split("(", 1)[0] == owner.rsplit(".", 1)[-1]


def shared_field_name(rule_id: str, type_name: str, variant: str = "") -> str:
    if rule_id == "R1":
        return "SHARED_CLIENT" + (f"_{variant}" if variant else "")
    return f"SHARED_{type_name.upper()}"


class _Reachability:
    """Roots per method, with constructors inheriting their class's reachability."""

    def __init__(self, graph: CallGraph):
        self.graph = graph
        self.by_node = roots_by_node(graph)
        self.class_nodes: Dict[str, List[str]] = {}
        for n in graph.nodes:
            self.class_nodes.setdefault(owner_class_of(n), []).append(n)
        self.pred: Dict[str, List[Tuple[str, bool]]] = {}
        for e in graph.edges:
            self.pred.setdefault(e.callee_id, []).append((e.caller_id, e.ambiguous))

    def support(self, mid: str) -> List[str]:
        """Call-graph nodes whose reachability stands in for ``mid``."""
        if mid in self.by_node:
            nodes = [mid]
        else:
            nodes = []
        if is_constructor_id(mid):
            nodes = sorted(set(nodes) | set(self.class_nodes.get(owner_class_of(mid), ())))
        return nodes

    def roots(self, mid: str) -> Set[str]:
        out: Set[str] = set()
        for n in self.support(mid):
            out |= self.by_node[n]
        return out

    def ambiguous(self, mid: str) -> bool:
        """True if any edge on a path from a root into ``mid``'s support is ambiguous."""
        stack = list(self.support(mid))
        seen = set(stack)
        while stack:
            node = stack.pop()
            for caller, amb in self.pred.get(node, ()):
                if amb:
                    return True
                if caller not in seen:
                    seen.add(caller)
                    stack.append(caller)
        return False


def _service_of(summary: SystemSummary, mid: str) -> str:
    graph = summary.component.graph
    current: Optional[str] = mid
    while current is not None:
        comp = graph.components.get(current)
        if comp is None:
            return DEFAULT_SERVICE
        if comp.level == "service":
            return comp.id
        current = comp.parent_id
    return DEFAULT_SERVICE


def _fmt(template: str, **values) -> str:
    try:
        return template.format(**values)
    except (KeyError, IndexError, ValueError):
        return template


def detect_findings(summary: SystemSummary, catalog: PatternCatalog) -> List[Finding]:
    """Unranked findings of the enabled built-in rules R1-R4."""
    behavior = summary.behavior.behavior
    reach = _Reachability(behavior.call_graph)
    rules: Dict[str, RuleSpec] = {k: v for k, v in catalog.rules.items() if v.enabled}
    findings: List[Finding] = []

    def make(rule_id: str, evidence: List[SourceSpan], owner: str, roots: Set[str], depth: int,
             matched: str, ambiguous: bool, **fmt) -> Finding:
        spec = rules[rule_id]
        evidence = sorted(evidence, key=SourceSpan.sort_key)
        owner_class = owner_class_of(owner)
        values = dict(owner=owner_class.rsplit(".", 1)[-1], roots=len(roots), depth=depth, type=matched)
        values.update(fmt)
        service = _service_of(summary, owner)
        return Finding(
            id=finding_id(rule_id, evidence[0]),
            rule_id=rule_id,
            title=spec.title,
            interpretation=_fmt(spec.interpretation, **values),
            suggestion=_fmt(spec.suggestion, **values),
            evidence=evidence,
            owner_method_id=owner,
            reachable_root_count=len(roots),
            loop_depth=depth,
            base_severity=spec.base_severity,
            owner_class=owner_class,
            matched_type=matched,
            ambiguous_support=ambiguous,
            default_service=service == DEFAULT_SERVICE,
        )

    # R1 / R3: group qualifying allocations per (rule, class, type)
    groups: Dict[Tuple[str, str, str], List] = {}
    for alloc in behavior.allocations:
        if alloc.category == "service_call":
            rule_id = "R1"
        elif alloc.category == "serializer":
            rule_id = "R3"
        else:
            continue
        if rule_id not in rules or not reach.roots(alloc.owner_method_id):
            continue
        groups.setdefault((rule_id, owner_class_of(alloc.owner_method_id), alloc.type_name), []).append(alloc)
    for (rule_id, _cls, type_name), allocs in sorted(groups.items()):
        allocs.sort(key=lambda a: a.evidence.sort_key())
        roots: Set[str] = set()
        for a in allocs:
            roots |= reach.roots(a.owner_method_id)
        findings.append(make(
            rule_id, [a.evidence for a in allocs], allocs[0].owner_method_id, roots,
            max(a.loop_depth for a in allocs), type_name,
            any(reach.ambiguous(a.owner_method_id) for a in allocs),
            count=len(allocs), field=shared_field_name(rule_id, type_name),
        ))

    if "R2" in rules:
        for sync in behavior.sync:
            roots = reach.roots(sync.owner_method_id)
            if roots:
                findings.append(make("R2", [sync.evidence], sync.owner_method_id, roots, 0, "synchronized",
                                     reach.ambiguous(sync.owner_method_id), form=sync.form))

    if "R4" in rules:
        for site in behavior.sites:
            if site.loop_depth < 1:
                continue
            roots = reach.roots(site.owner_method_id)
            if roots:
                findings.append(make("R4", [site.evidence], site.owner_method_id, roots, site.loop_depth,
                                     site.matched_pattern, reach.ambiguous(site.owner_method_id),
                                     kind=site.kind.replace("_", " ")))
    return findings


def impact_score(base_severity: float, reachable_root_count: int, loop_depth: int) -> float:
    return base_severity * math.log2(1 + reachable_root_count) * (1 + loop_depth)


def _confidence(f: Finding) -> str:
    if f.default_service:
        return "low"
    return "medium" if f.ambiguous_support else "high"


def rank_findings(findings: Iterable[Finding]) -> List[Finding]:
    """Score, sort by (impact desc, confidence desc, path, line) and assign ranks 1..n."""
    scored = []
    for f in findings:
        f.impact_score = impact_score(f.base_severity, f.reachable_root_count, f.loop_depth)
        f.confidence = _confidence(f)
        scored.append(f)
    scored.sort(key=lambda f: (-f.impact_score, -CONFIDENCE_ORDER[f.confidence], f.primary.path,
                               f.primary.start_line, f.primary.start_col, f.rule_id, f.id))
    for i, f in enumerate(scored, 1):
        f.rank = i
    return scored


RISK_R2 = ("{id}: removing the lock in {owner} is only safe if no compound read-modify-write depends on it; "
           "automatic rewriting is limited to flag-style bodies")


def build_report(findings: Sequence[Finding], summary: SystemSummary) -> AnalysisReport:
    files: Dict[str, None] = {}
    for f in findings:
        for span in f.evidence:
            files[span.path] = None
    risks = [RISK_R2.format(id=f.id, owner=f.owner_method_id.split(":", 1)[1])
             for f in findings if f.rule_id == "R2"]
    risks += [f"{f.id}: {f.rule_id} relies on an ambiguous call resolution" for f in findings
              if f.confidence == "medium"]
    gaps = [f"unresolved_calls: {summary.behavior.behavior.call_graph.unresolved_calls}"]
    gaps += [f"diagnostic: {d}" for d in summary.diagnostics]
    return AnalysisReport(
        findings=list(findings),
        candidate_files=sorted(files),
        risks=risks,
        gaps=gaps,
        summary_fingerprint=summary.repo_fingerprint,
    )


def analyze(summary: SystemSummary, catalog: PatternCatalog, exclude: Iterable[str] = ()) -> AnalysisReport:
    excluded = set(exclude)
    found = [f for f in detect_findings(summary, catalog) if f.id not in excluded]
    return build_report(rank_findings(found), summary)


def save_report(report: AnalysisReport, path):
    return write_json(path, report)


def load_report(path) -> AnalysisReport:
    return from_jsonable(AnalysisReport, read_json(path))


def render_text(report: AnalysisReport) -> str:
    lines = [f"{len(report.findings)} finding(s); fingerprint {report.summary_fingerprint[:12]}"]
    for f in report.findings:
        lines.append(f"#{f.rank} [{f.rule_id}] {f.title}  impact={f.impact_score:.2f} confidence={f.confidence}")
        lines.append(f"    at {f.primary}  ({f.owner_method_id})")
        lines.append(f"    {f.interpretation}")
        lines.append(f"    suggestion: {f.suggestion}")
    if report.candidate_files:
        lines.append("candidate files:")
        lines.extend(f"    {p}" for p in report.candidate_files)
    if report.risks:
        lines.append("risks:")
        lines.extend(f"    {r}" for r in report.risks)
    lines.append("gaps:")
    lines.extend(f"    {g}" for g in report.gaps)
    return "\n".join(lines) + "\n"
