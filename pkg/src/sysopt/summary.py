"""Consolidated system summary: component, behavior and environment views."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .behavior import BehaviorModel
from .components import ComponentGraph
from .errors import InconsistentInputs, SchemaVersionMismatch
from .frontend.model import Diagnostic
from .jsonio import from_jsonable, read_json, write_json

SCHEMA_VERSION = 1
DEFAULT_LANGUAGE = "java-subset"


@dataclass
class ServiceStats:
    service_id: str
    class_count: int
    endpoint_count: int
    outbound_service_edges: int
    inbound_service_edges: int


@dataclass
class ComponentSummary:
    graph: ComponentGraph
    per_service: List[ServiceStats]


@dataclass
class HotPath:
    root_id: str
    path_node_ids: List[str]
    sites_on_path: int
    sync_on_path: int


@dataclass
class BehaviorSummary:
    behavior: BehaviorModel
    hot_paths: List[HotPath]


@dataclass
class Dependency:
    group: str
    artifact: str
    version: str


@dataclass
class ConfigEntry:
    key: str
    value: str
    source: str


@dataclass
class EnvironmentSummary:
    language: str = DEFAULT_LANGUAGE
    language_version: str = ""
    dependencies: List[Dependency] = field(default_factory=list)
    config_entries: List[ConfigEntry] = field(default_factory=list)
    build_files: List[str] = field(default_factory=list)
    diagnostics: List[Diagnostic] = field(default_factory=list)


@dataclass
class SystemSummary:
    component: ComponentSummary
    behavior: BehaviorSummary
    environment: EnvironmentSummary
    repo_fingerprint: str
    created_at: str
    schema_version: int = SCHEMA_VERSION
    diagnostics: List[Diagnostic] = field(default_factory=list)


# -- environment -------------------------------------------------------------

_TAG = r"<{0}>\s*([^<]*?)\s*</{0}>"
_VERSION_TAGS = ("maven.compiler.release", "maven.compiler.target", "maven.compiler.source", "release", "java.version")
_SKIP_DIRS = {".git", ".sysopt", "target", "node_modules", ".idea"}


def _tag(text: str, name: str) -> Optional[str]:
    m = re.search(_TAG.format(re.escape(name)), text)
    return m.group(1) if m else None


def _strip_xml_comments(text: str) -> str:
    return re.sub(r"<!--.*?-->", "", text, flags=re.S)


def _scan_pom(text: str, rel: str) -> Tuple[List[Dependency], str]:
    """Minimal tag scan of a Maven descriptor: dependency triples and compiler release."""
    text = _strip_xml_comments(text)
    opens = len(re.findall(r"<dependency>", text))
    closes = len(re.findall(r"</dependency>", text))
    if opens != closes or text.count("<project") != text.count("</project>"):
        raise ValueError(f"unbalanced tags in {rel}")
    deps = []
    for block in re.findall(r"<dependency>(.*?)</dependency>", text, flags=re.S):
        group = _tag(block, "groupId") or ""
        artifact = _tag(block, "artifactId") or ""
        if not group or not artifact:
            raise ValueError(f"dependency without groupId/artifactId in {rel}")
        deps.append(Dependency(group, artifact, _tag(block, "version") or ""))
    version = ""
    for name in _VERSION_TAGS:
        found = _tag(text, name)
        if found:
            version = found
            break
    return deps, version


def _scan_properties(text: str, rel: str) -> List[ConfigEntry]:
    entries = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line[0] in "#!":
            continue
        m = re.match(r"([^=:\s]+)\s*[=:]\s*(.*)$", line)
        if m:
            entries.append(ConfigEntry(m.group(1), m.group(2).strip(), rel))
    return entries


def _walk(root: Path, pattern: str) -> List[Path]:
    out = []
    for path in root.rglob(pattern):
        rel_parts = path.relative_to(root).parts
        if any(p in _SKIP_DIRS for p in rel_parts[:-1]):
            continue
        if path.is_file():
            out.append(path)
    return sorted(out)


def summarize_environment(root: str | Path) -> EnvironmentSummary:
    root = Path(root)
    env = EnvironmentSummary()
    for pom in _walk(root, "pom.xml"):
        rel = pom.relative_to(root).as_posix()
        try:
            deps, version = _scan_pom(pom.read_text(encoding="utf-8"), rel)
        except (ValueError, UnicodeDecodeError) as exc:
            env.diagnostics.append(Diagnostic(rel, 1, 1, "malformed-build-file", str(exc)))
            continue
        env.build_files.append(rel)
        env.dependencies.extend(deps)
        if version and not env.language_version:
            env.language_version = version
    for props in _walk(root, "*.properties"):
        rel = props.relative_to(root).as_posix()
        try:
            env.config_entries.extend(_scan_properties(props.read_text(encoding="utf-8"), rel))
        except UnicodeDecodeError as exc:
            env.diagnostics.append(Diagnostic(rel, 1, 1, "malformed-build-file", str(exc)))
    return env


# -- consolidation -----------------------------------------------------------

def _per_service(graph: ComponentGraph) -> List[ServiceStats]:
    stats = {c.id: ServiceStats(c.id, 0, 0, 0, 0) for c in graph.of_level("service")}
    for c in graph.of_level("class"):
        stats[graph.service_of(c.id)].class_count += 1
    for ep in graph.endpoints:
        stats[graph.service_of(ep.component_id)].endpoint_count += 1
    for e in graph.edges:
        if e.from_id in stats and e.to_id in stats:
            stats[e.from_id].outbound_service_edges += 1
            stats[e.to_id].inbound_service_edges += 1
    return [stats[k] for k in sorted(stats)]


def find_hot_paths(behavior: BehaviorModel, max_roots: int = 10, max_length: int = 32,
                   budget: int = 200_000) -> List[HotPath]:
    """Per root, the simple call path carrying the most interaction sites.

    Depth-first search with cycle cutting (no node repeats on a path), path
    length capped at ``max_length`` nodes and a global expansion ``budget``.
    Ties keep the first path found, children visited in id order. The
    ``max_roots`` roots with the highest site counts are kept.
    """
    graph = behavior.call_graph
    sites_at: Dict[str, int] = {}
    for s in behavior.sites:
        sites_at[s.owner_method_id] = sites_at.get(s.owner_method_id, 0) + 1
    sync_at: Dict[str, int] = {}
    for s in behavior.sync:
        sync_at[s.owner_method_id] = sync_at.get(s.owner_method_id, 0) + 1
    succ = {n: sorted(v) for n, v in graph.successors().items()}
    paths = []
    remaining = [budget]
    for root in graph.roots:
        best: List[Tuple[int, List[str]]] = [(-1, [])]
        path = [root]
        on_path = {root}

        def dfs(node: str, score: int) -> None:
            remaining[0] -= 1
            if score > best[0][0]:
                best[0] = (score, list(path))
            if len(path) >= max_length or remaining[0] <= 0:
                return
            for nxt in succ.get(node, ()):
                if nxt in on_path:
                    continue
                path.append(nxt)
                on_path.add(nxt)
                dfs(nxt, score + sites_at.get(nxt, 0))
                on_path.discard(nxt)
                path.pop()

        dfs(root, sites_at.get(root, 0))
        score, nodes = best[0]
        paths.append(HotPath(root, nodes, score, sum(sync_at.get(n, 0) for n in nodes)))
    paths.sort(key=lambda p: (-p.sites_on_path, p.root_id))
    return paths[:max_roots]


def build_system_summary(graph: ComponentGraph, behavior: BehaviorModel, env: EnvironmentSummary,
                         fingerprint: str = "", created_at: Optional[str] = None,
                         max_roots: int = 10, max_length: int = 32,
                         diagnostics: Optional[List[Diagnostic]] = None) -> SystemSummary:
    known = set(graph.components)
    referenced = set(behavior.call_graph.nodes)
    referenced.update(s.owner_method_id for s in behavior.sites)
    referenced.update(s.owner_method_id for s in behavior.sync)
    referenced.update(behavior.metrics)
    missing = sorted(referenced - known)
    if missing:
        raise InconsistentInputs(f"behavior references unknown components: {missing[:5]}")
    return SystemSummary(
        component=ComponentSummary(graph, _per_service(graph)),
        behavior=BehaviorSummary(behavior, find_hot_paths(behavior, max_roots, max_length)),
        environment=env,
        repo_fingerprint=fingerprint,
        created_at=created_at or datetime.now(timezone.utc).isoformat(timespec="seconds"),
        diagnostics=sorted(list(diagnostics or []) + graph.diagnostics + behavior.call_graph.diagnostics
                           + env.diagnostics, key=lambda d: (d.path, d.line, d.col, d.code)),
    )


def save_summary(summary: SystemSummary, path: str | Path) -> Path:
    return write_json(path, summary)


def load_summary(path: str | Path) -> SystemSummary:
    data = read_json(path)
    if data.get("schema_version") != SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"{path}: summary schema_version {data.get('schema_version')} != {SCHEMA_VERSION}; re-run `sysopt summarize`")
    return from_jsonable(SystemSummary, data)


def summarize_model(model, catalog, root: str | Path, service_marker: str = "pom.xml",
                    max_roots: int = 10, max_length: int = 32,
                    created_at: Optional[str] = None) -> SystemSummary:
    """Run component, behavior and environment analysis over a parsed model."""
    from .behavior import build_behavior_model, detect_interaction_sites
    from .components import ServiceBoundaryRule, build_component_graph

    sites = detect_interaction_sites(model, catalog)
    graph = build_component_graph(model, catalog, sites, ServiceBoundaryRule(service_marker))
    behavior = build_behavior_model(model, catalog, graph.endpoints)
    return build_system_summary(graph, behavior, summarize_environment(root), model.fingerprint,
                                created_at, max_roots, max_length, list(model.diagnostics))
