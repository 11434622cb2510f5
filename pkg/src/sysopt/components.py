"""Component inventory, exported interfaces and typed dependency edges."""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .config import PatternCatalog
from .frontend.model import CodeModel, Diagnostic, MethodDecl, SourceSpan, TypeDecl, simple_type_name
from .resolution import resolve_alloc, resolve_call

log = logging.getLogger(__name__)

LEVELS = ("service", "package", "class", "method")
DEFAULT_SERVICE = "service:default"


@dataclass
class Component:
    id: str
    level: str
    display_name: str
    parent_id: Optional[str]
    role: str = "unknown"
    evidence: List[SourceSpan] = field(default_factory=list)


@dataclass
class Endpoint:
    component_id: str
    kind: str  # "http" | "internal_api"
    route: str
    http_method: str
    evidence: SourceSpan

    def key(self) -> Tuple[str, str, str, str]:
        return (self.component_id, self.kind, self.route, self.http_method)


@dataclass
class DependencyEdge:
    from_id: str
    to_id: str
    kind: str  # "call_based" | "type_based" | "resource_based"
    weight: int
    evidence: List[SourceSpan]


@dataclass
class ComponentGraph:
    components: Dict[str, Component]
    endpoints: List[Endpoint] = field(default_factory=list)
    edges: List[DependencyEdge] = field(default_factory=list)
    service_count: int = 0
    package_count: int = 0
    class_count: int = 0
    method_count: int = 0
    diagnostics: List[Diagnostic] = field(default_factory=list)

    def ancestors(self, component_id: str) -> List[str]:
        """``component_id`` followed by its parent chain up to the service."""
        chain = []
        current: Optional[str] = component_id
        while current is not None:
            chain.append(current)
            current = self.components[current].parent_id
        return chain

    def ancestor_at(self, component_id: str, level: str) -> str:
        for cid in self.ancestors(component_id):
            if self.components[cid].level == level:
                return cid
        raise KeyError(f"{component_id} has no {level} ancestor")

    def service_of(self, component_id: str) -> str:
        return self.ancestor_at(component_id, "service")

    def of_level(self, level: str) -> List[Component]:
        return [c for c in self.components.values() if c.level == level]


def method_id(m: MethodDecl) -> str:
    return f"method:{m.signature_key}"


def class_id(t: TypeDecl) -> str:
    return f"class:{t.qualified_name}"


@dataclass
class ServiceBoundaryRule:
    """A service is a directory below the repository root holding a build descriptor."""

    marker: str = "pom.xml"

    def service_roots(self, root: str | Path) -> List[str]:
        root = Path(root)
        roots = []
        for path in sorted(root.rglob(self.marker)):
            rel = path.parent.relative_to(root).as_posix()
            if rel == "." or any(part.startswith(".") or part == "target" for part in PurePosixPath(rel).parts):
                continue
            roots.append(rel)
        return roots

    def assign(self, model: CodeModel) -> Tuple[Dict[str, str], Dict[str, str], List[Diagnostic]]:
        """Map unit path -> service id; returns (assignment, service id -> root dir, diagnostics)."""
        roots = self.service_roots(model.root)
        basenames = defaultdict(int)
        for r in roots:
            basenames[PurePosixPath(r).name] += 1
        ids = {r: "service:" + (PurePosixPath(r).name if basenames[PurePosixPath(r).name] == 1 else r)
               for r in roots}
        assignment: Dict[str, str] = {}
        diags: List[Diagnostic] = []
        for unit in model.units:
            matches = [r for r in roots if unit.path.startswith(r + "/")]
            if len(matches) > 1:
                diags.append(Diagnostic(unit.path, 1, 1, "ambiguous-service-boundary",
                                        f"file lies under service roots {matches}; assigned to {matches[0]}"))
            assignment[unit.path] = ids[matches[0]] if matches else DEFAULT_SERVICE
        service_dirs = {sid: r for r, sid in ids.items()}
        return assignment, service_dirs, diags


def build_inventory(model: CodeModel, service_rule: Optional[ServiceBoundaryRule] = None) -> ComponentGraph:
    service_rule = service_rule or ServiceBoundaryRule()
    assignment, _, diags = service_rule.assign(model)
    components: Dict[str, Component] = {}
    for unit in model.units:
        if not unit.types:
            continue
        sid = assignment[unit.path]
        if sid not in components:
            components[sid] = Component(sid, "service", sid.split(":", 1)[1], None)
        pkg_name = unit.package_name or "(default)"
        pid = f"package:{sid.split(':', 1)[1]}/{pkg_name}"
        if pid not in components:
            components[pid] = Component(pid, "package", pkg_name, sid)
        for t in unit.types:
            cid = class_id(t)
            components[cid] = Component(cid, "class", t.qualified_name, pid, evidence=[t.header_span or t.span])
            for m in t.methods:
                mid = method_id(m)
                components[mid] = Component(mid, "method", m.signature_key.split("#", 1)[1], cid,
                                            evidence=[m.header_span or m.span])
    counts = defaultdict(int)
    for c in components.values():
        counts[c.level] += 1
    return ComponentGraph(
        components=dict(sorted(components.items())),
        service_count=counts["service"],
        package_count=counts["package"],
        class_count=counts["class"],
        method_count=counts["method"],
        diagnostics=diags,
    )


def _is_servlet(model: CodeModel, t: TypeDecl, catalog: PatternCatalog) -> bool:
    bases = set(catalog.servlet_bases)
    for decl in model.supertypes_closure(t):
        if decl is not t and decl.name in bases:
            return True
        if any(simple_type_name(s) in bases for s in decl.supertypes):
            return True
    return False


def _first_string(annotations, names: Iterable[str]) -> Optional[str]:
    names = set(names)
    for a in annotations:
        if a.simple_name in names and a.string_arguments:
            return a.string_arguments[0]
    return None


def _join_route(prefix: str, suffix: str) -> str:
    if not prefix:
        return suffix
    if not suffix:
        return prefix
    return prefix.rstrip("/") + "/" + suffix.lstrip("/")


def detect_endpoints(model: CodeModel, catalog: PatternCatalog) -> List[Endpoint]:
    verbs = set(catalog.http_method_annotations)
    method_level = set(catalog.endpoint_annotations) - {"WebServlet"}
    internal = set(catalog.internal_api_classes)
    endpoints: List[Endpoint] = []
    for t in model.types():
        class_route = _first_string(t.annotations, ["Path"]) or ""
        servlet = _is_servlet(model, t, catalog) or any(a.simple_name == "WebServlet" for a in t.annotations)
        servlet_route = ""
        if servlet:
            for decl in model.supertypes_closure(t):
                found = _first_string(decl.annotations, ["WebServlet"])
                if found is not None:
                    servlet_route = found
                    break
        for m in t.methods:
            triggers = [a for a in m.annotations if a.simple_name in method_level]
            if triggers:
                verb = next((a.simple_name for a in triggers if a.simple_name in verbs), "")
                route = _join_route(class_route, _first_string(m.annotations, ["Path"]) or "")
                endpoints.append(Endpoint(method_id(m), "http", route, verb, triggers[0].span))
            elif (servlet and m.name in catalog.servlet_handlers and not m.is_abstract
                  and m.visibility in ("public", "protected")):
                endpoints.append(Endpoint(method_id(m), "http", servlet_route, m.name[2:].upper(),
                                          m.header_span or m.span))
            elif (t.name in internal or t.qualified_name in internal) and m.visibility == "public" \
                    and not m.is_constructor:
                endpoints.append(Endpoint(method_id(m), "internal_api", "", "", m.header_span or m.span))
    return sorted(endpoints, key=lambda e: e.key())


def derive_dependencies(model: CodeModel, graph: ComponentGraph, sites: Sequence = ()) -> List[DependencyEdge]:
    """Call-, type- and resource-based edges, lifted eagerly to every hierarchy level."""
    base: List[Tuple[str, str, str, SourceSpan]] = []
    for t in model.types():
        cid = class_id(t)
        unit = model.unit_of(t.qualified_name)
        for sup in t.supertypes:
            for target in model.resolve_type(sup, unit):
                base.append(("type_based", cid, class_id(target), t.header_span or t.span))
        for f in t.fields:
            for target in model.resolve_type(f.declared_type, unit):
                base.append(("type_based", cid, class_id(target), f.type_span or f.span))
        for m in t.methods:
            mid = method_id(m)
            type_names = [p[1] for p in m.parameters] + ([m.return_type] if m.return_type else [])
            for name in type_names:
                for target in model.resolve_type(name, unit):
                    base.append(("type_based", cid, class_id(target), m.header_span or m.span))
            for call in m.facts.calls:
                for callee in resolve_call(model, m, call):
                    base.append(("call_based", mid, method_id(callee), call.span))
            for alloc in m.facts.allocations:
                for ctor in resolve_alloc(model, m, alloc):
                    base.append(("call_based", mid, method_id(ctor), alloc.span))
    for site in sites:
        owner = model.method(site.owner_method_id.split(":", 1)[1])
        if owner is None:
            continue
        unit = model.unit_of(owner.owner)
        for target in model.resolve_type(site.matched_pattern, unit):
            span = site.type_evidence or site.evidence
            base.append(("resource_based", f"class:{owner.owner}", class_id(target), span))

    aggregated: Dict[Tuple[str, str, str], Dict[SourceSpan, None]] = {}
    for kind, src, dst, span in base:
        if src not in graph.components or dst not in graph.components:
            continue
        src_chain = graph.ancestors(src)
        dst_chain = graph.ancestors(dst)
        level_of = {graph.components[c].level: c for c in dst_chain}
        for s in src_chain:
            lvl = graph.components[s].level
            d = level_of.get(lvl)
            if d is None or d == s:
                continue
            aggregated.setdefault((s, d, kind), {})[span] = None
    edges = []
    for (src, dst, kind), spans in sorted(aggregated.items()):
        ev = sorted(spans, key=SourceSpan.sort_key)
        edges.append(DependencyEdge(src, dst, kind, len(ev), ev))
    return edges


ROLE_ORDER = ("service_endpoint", "data_access", "integration_interface")


def classify_roles(graph: ComponentGraph, sites: Sequence) -> ComponentGraph:
    """Assign class and method roles with precedence endpoint > data access > integration > internal."""
    has: Dict[str, set] = defaultdict(set)
    for ep in graph.endpoints:
        for cid in graph.ancestors(ep.component_id)[:2]:
            has[cid].add("service_endpoint")
    for site in sites:
        role = {"db_access": "data_access", "service_call": "integration_interface"}.get(site.kind)
        if role and site.owner_method_id in graph.components:
            for cid in graph.ancestors(site.owner_method_id)[:2]:
                has[cid].add(role)
    for comp in graph.components.values():
        if comp.level not in ("class", "method"):
            continue
        comp.role = next((r for r in ROLE_ORDER if r in has[comp.id]), "internal")
    return graph


def build_component_graph(model: CodeModel, catalog: PatternCatalog, sites: Sequence = (),
                          service_rule: Optional[ServiceBoundaryRule] = None) -> ComponentGraph:
    graph = build_inventory(model, service_rule)
    graph.endpoints = detect_endpoints(model, catalog)
    graph.edges = derive_dependencies(model, graph, sites)
    return classify_roles(graph, sites)
