"""Entry-point-rooted call graphs, interaction sites, synchronization and flow metrics."""

from __future__ import annotations

import hashlib
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .components import Endpoint, method_id
from .config import PatternCatalog
from .errors import EmptyCatalog
from .frontend.model import CodeModel, Diagnostic, SourceSpan, simple_type_name
from .resolution import resolve_alloc, resolve_call

log = logging.getLogger(__name__)


@dataclass
class CallEdge:
    caller_id: str
    callee_id: str
    evidence: SourceSpan
    ambiguous: bool = False


@dataclass
class CallGraph:
    nodes: List[str]
    edges: List[CallEdge]
    roots: List[str]
    unresolved_calls: int = 0
    diagnostics: List[Diagnostic] = field(default_factory=list)

    def successors(self) -> Dict[str, List[str]]:
        succ: Dict[str, List[str]] = {n: [] for n in self.nodes}
        for e in self.edges:
            succ[e.caller_id].append(e.callee_id)
        return succ

    def edge_index(self) -> Dict[Tuple[str, str], CallEdge]:
        return {(e.caller_id, e.callee_id): e for e in self.edges}


@dataclass
class InteractionSite:
    id: str
    kind: str  # "service_call" | "db_access" | "external"
    owner_method_id: str
    matched_pattern: str
    loop_depth: int
    evidence: SourceSpan
    # where the matched type name is written (allocation or receiver declaration)
    type_evidence: Optional[SourceSpan] = None
    via: str = "call"  # "call" | "allocation"


@dataclass
class SyncConstruct:
    id: str
    form: str  # "synchronized_method" | "synchronized_block"
    owner_method_id: str
    evidence: SourceSpan


@dataclass
class FlowMetrics:
    method_id: str
    branch_count: int
    loop_count: int
    max_loop_depth: int
    call_fan_out: int


@dataclass
class TrackedAllocation:
    """``new`` of a catalog-listed client or serializer type."""

    owner_method_id: str
    type_name: str
    category: str  # a site kind, or "serializer"
    loop_depth: int
    evidence: SourceSpan
    arg_text: str = ""


@dataclass
class BehaviorModel:
    call_graph: CallGraph
    sites: List[InteractionSite]
    sync: List[SyncConstruct]
    metrics: Dict[str, FlowMetrics]
    allocations: List[TrackedAllocation] = field(default_factory=list)


def _short_id(prefix: str, *parts: object) -> str:
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode("utf-8")).hexdigest()[:12]
    return f"{prefix}-{digest}"


def resolved_edges(model: CodeModel) -> Tuple[List[CallEdge], Dict[str, int]]:
    """Every resolvable (caller, callee) pair in the model, first evidence kept per pair.

    An edge is ambiguous only if every fact producing it had more than one candidate.
    Also returns the number of unresolved calls per caller id.
    """
    edges: Dict[Tuple[str, str], CallEdge] = {}
    certain: Set[Tuple[str, str]] = set()
    unresolved: Dict[str, int] = {}
    for m in model.methods():
        mid = method_id(m)
        facts = [(c.span, "call", c) for c in m.facts.calls] + [(a.span, "alloc", a) for a in m.facts.allocations]
        facts.sort(key=lambda f: f[0].sort_key())
        for span, kind, fact in facts:
            targets = resolve_call(model, m, fact) if kind == "call" else resolve_alloc(model, m, fact)
            if kind == "call" and not targets:
                unresolved[mid] = unresolved.get(mid, 0) + 1
            for target in targets:
                key = (mid, method_id(target))
                if key not in edges:
                    edges[key] = CallEdge(key[0], key[1], span, len(targets) > 1)
                if len(targets) == 1:
                    certain.add(key)
    for key in certain:
        edges[key].ambiguous = False
    return sorted(edges.values(), key=lambda e: (e.caller_id, e.callee_id)), unresolved


def build_call_graph(model: CodeModel, entrypoints: Sequence[Endpoint]) -> CallGraph:
    roots = sorted({ep.component_id for ep in entrypoints})
    if not roots:
        diag = Diagnostic("", 1, 1, "no-roots", "no entry points found; call graph is empty")
        return CallGraph([], [], [], 0, [diag])
    all_edges, unresolved = resolved_edges(model)
    succ: Dict[str, List[CallEdge]] = {}
    for e in all_edges:
        succ.setdefault(e.caller_id, []).append(e)
    seen: Set[str] = set(roots)
    queue = deque(roots)
    while queue:
        node = queue.popleft()
        for e in succ.get(node, ()):
            if e.callee_id not in seen:
                seen.add(e.callee_id)
                queue.append(e.callee_id)
    edges = [e for e in all_edges if e.caller_id in seen]
    return CallGraph(
        nodes=sorted(seen),
        edges=edges,
        roots=roots,
        unresolved_calls=sum(unresolved.get(n, 0) for n in seen),
    )


def reachable_roots(graph: CallGraph, mid: str) -> Set[str]:
    """Roots from which ``mid`` is reachable (a root reaches itself)."""
    if mid not in set(graph.nodes):
        return set()
    pred: Dict[str, List[str]] = {}
    for e in graph.edges:
        pred.setdefault(e.callee_id, []).append(e.caller_id)
    seen = {mid}
    stack = [mid]
    while stack:
        node = stack.pop()
        for p in pred.get(node, ()):
            if p not in seen:
                seen.add(p)
                stack.append(p)
    return seen & set(graph.roots)


def roots_by_node(graph: CallGraph) -> Dict[str, Set[str]]:
    """``reachable_roots`` for every node at once (one forward search per root)."""
    succ = graph.successors()
    result: Dict[str, Set[str]] = {n: set() for n in graph.nodes}
    for root in graph.roots:
        seen = {root}
        stack = [root]
        while stack:
            node = stack.pop()
            result[node].add(root)
            for nxt in succ.get(node, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
    return result


def detect_interaction_sites(model: CodeModel, catalog: PatternCatalog) -> List[InteractionSite]:
    if not any(catalog.sites.values()):
        raise EmptyCatalog("pattern catalog lists no interaction-site types")
    sites: List[InteractionSite] = []
    for m in model.methods():
        mid = method_id(m)
        for call in m.facts.calls:
            if not call.receiver or call.implicit:
                continue
            name = simple_type_name(call.receiver)
            kind = catalog.site_kind(name)
            if kind:
                sites.append(InteractionSite(
                    id=_short_id("site", mid, call.span.sort_key()),
                    kind=kind, owner_method_id=mid, matched_pattern=name,
                    loop_depth=call.loop_depth, evidence=call.span,
                    type_evidence=call.receiver_decl or call.span, via="call",
                ))
        for alloc in m.facts.allocations:
            name = simple_type_name(alloc.type_name)
            kind = catalog.site_kind(name)
            if kind:
                sites.append(InteractionSite(
                    id=_short_id("site", mid, alloc.span.sort_key()),
                    kind=kind, owner_method_id=mid, matched_pattern=name,
                    loop_depth=alloc.loop_depth, evidence=alloc.span,
                    type_evidence=alloc.span, via="allocation",
                ))
    return sorted(sites, key=lambda s: (s.evidence.sort_key(), s.id))


def detect_sync_constructs(model: CodeModel) -> List[SyncConstruct]:
    out: List[SyncConstruct] = []
    for m in model.methods():
        mid = method_id(m)
        if m.is_synchronized:
            span = m.header_span or m.span
            out.append(SyncConstruct(_short_id("sync", mid, "method"), "synchronized_method", mid, span))
        for block in m.facts.sync_blocks:
            out.append(SyncConstruct(_short_id("sync", mid, block.sort_key()), "synchronized_block", mid, block))
    return sorted(out, key=lambda s: (s.evidence.sort_key(), s.id))


def compute_flow_metrics(model: CodeModel) -> Dict[str, FlowMetrics]:
    metrics = {}
    for m in model.methods():
        mid = method_id(m)
        callees = {(c.receiver, c.callee, c.arg_count) for c in m.facts.calls}
        metrics[mid] = FlowMetrics(mid, m.facts.branch_count, m.facts.loop_count,
                                   m.facts.max_loop_depth, len(callees))
    return dict(sorted(metrics.items()))


def track_allocations(model: CodeModel, catalog: PatternCatalog) -> List[TrackedAllocation]:
    serializers = set(catalog.stateless_serializers)
    out = []
    for m in model.methods():
        for alloc in m.facts.allocations:
            name = simple_type_name(alloc.type_name)
            category = catalog.site_kind(name) or ("serializer" if name in serializers else None)
            if category:
                out.append(TrackedAllocation(method_id(m), name, category, alloc.loop_depth, alloc.span,
                                             alloc.arg_text))
    return sorted(out, key=lambda a: a.evidence.sort_key())


def build_behavior_model(model: CodeModel, catalog: PatternCatalog, entrypoints: Sequence[Endpoint]) -> BehaviorModel:
    return BehaviorModel(
        call_graph=build_call_graph(model, entrypoints),
        sites=detect_interaction_sites(model, catalog),
        sync=detect_sync_constructs(model),
        metrics=compute_flow_metrics(model),
        allocations=track_allocations(model, catalog),
    )
