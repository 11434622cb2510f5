"""Environment scan, hot paths, consolidation, persistence and schemas."""

from __future__ import annotations

import itertools

import pytest

from conftest import TEASTORE, analyze_repo, schema_validator, write_repo
from sysopt.behavior import BehaviorModel, CallEdge, CallGraph, InteractionSite, SyncConstruct
from sysopt.errors import InconsistentInputs, SchemaVersionMismatch
from sysopt.frontend.model import SourceSpan
from sysopt.jsonio import canonical_dumps, read_json, to_jsonable, write_json
from sysopt.summary import (
    build_system_summary,
    find_hot_paths,
    load_summary,
    save_summary,
    summarize_environment,
)

POM = """
<project>
  <properties><maven.compiler.release>17</maven.compiler.release></properties>
  <dependencies>
    <dependency><groupId>org.a</groupId><artifactId>alpha</artifactId><version>1.0</version></dependency>
    <!-- <dependency><groupId>x</groupId><artifactId>ignored</artifactId></dependency> -->
    <dependency><groupId>org.b</groupId><artifactId>beta</artifactId></dependency>
  </dependencies>
</project>
"""


def test_environment_from_build_and_properties(tmp_path):
    write_repo(tmp_path, {
        "pom.xml": POM,
        "src/main/resources/app.properties": "# comment\ndb.pool=10\nname : shop\n",
        "target/pom.xml": "<project><dependency>",
    })
    env = summarize_environment(tmp_path)
    assert [(d.group, d.artifact, d.version) for d in env.dependencies] == [("org.a", "alpha", "1.0"), ("org.b", "beta", "")]
    assert env.language_version == "17"
    assert [(c.key, c.value, c.source) for c in env.config_entries] == [
        ("db.pool", "10", "src/main/resources/app.properties"),
        ("name", "shop", "src/main/resources/app.properties"),
    ]
    assert env.build_files == ["pom.xml"]


def test_environment_without_build_files(tmp_path):
    env = summarize_environment(tmp_path)
    assert env.language == "java-subset" and env.dependencies == [] and env.build_files == []


def test_malformed_descriptor_is_a_diagnostic(tmp_path):
    write_repo(tmp_path, {"pom.xml": "<project><dependency><groupId>g</groupId></project>"})
    env = summarize_environment(tmp_path)
    assert env.build_files == []
    assert [d.code for d in env.diagnostics] == ["malformed-build-file"]


# -- hot paths -----------------------------------------------------------------

def _span(line):
    return SourceSpan("F.java", line, line, 1, 2)


def _behavior(edges, sites=(), roots=("r",), sync=()):
    nodes = sorted({n for e in edges for n in e} | set(roots))
    graph = CallGraph(nodes, [CallEdge(a, b, _span(1)) for a, b in edges], list(roots))
    site_objs = [InteractionSite(f"s{i}", "db_access", owner, "EntityManager", 0, _span(i + 1))
                 for i, owner in enumerate(sites)]
    sync_objs = [SyncConstruct(f"y{i}", "synchronized_method", owner, _span(1)) for i, owner in enumerate(sync)]
    return BehaviorModel(graph, site_objs, sync_objs, {})


def _best_by_enumeration(behavior, root, max_length):
    """Max sites over every simple path from ``root`` of at most ``max_length`` nodes."""
    succ = behavior.call_graph.successors()
    count = {}
    for s in behavior.sites:
        count[s.owner_method_id] = count.get(s.owner_method_id, 0) + 1
    best = 0
    stack = [[root]]
    while stack:
        path = stack.pop()
        best = max(best, sum(count.get(n, 0) for n in path))
        if len(path) < max_length:
            stack.extend(path + [n] for n in succ.get(path[-1], ()) if n not in path)
    return best


def test_single_root_with_two_db_sites():
    b = _behavior([("r", "a"), ("a", "b")], sites=["b", "b"])
    (hp,) = find_hot_paths(b)
    assert hp.path_node_ids == ["r", "a", "b"] and hp.sites_on_path == 2


def test_no_roots_no_hot_paths():
    assert find_hot_paths(_behavior([], roots=())) == []


def test_cycles_are_cut_and_length_capped():
    b = _behavior([("r", "a"), ("a", "r"), ("a", "b"), ("b", "c")], sites=["c"], sync=["a"])
    (hp,) = find_hot_paths(b, max_length=3)
    assert hp.sites_on_path == 0
    (hp,) = find_hot_paths(b, max_length=4)
    assert hp.path_node_ids == ["r", "a", "b", "c"] and hp.sites_on_path == 1 and hp.sync_on_path == 1


@pytest.mark.parametrize("seed", range(40))
def test_hot_path_score_matches_enumeration(seed):
    import random

    rnd = random.Random(seed)
    names = [f"n{i}" for i in range(7)]
    edges = sorted({(rnd.choice(names), rnd.choice(names)) for _ in range(rnd.randint(3, 14))})
    sites = [rnd.choice(names) for _ in range(rnd.randint(0, 6))]
    roots = sorted(set(rnd.sample(names, 2)))
    b = _behavior(edges, sites, roots)
    for length in (2, 4, 32):
        for hp in find_hot_paths(b, max_length=length):
            assert hp.sites_on_path == _best_by_enumeration(b, hp.root_id, length)
            assert len(hp.path_node_ids) <= length
            for a, c in itertools.pairwise(hp.path_node_ids):
                assert (a, c) in set(edges)


def test_max_roots_keeps_highest_scoring():
    b = _behavior([("r1", "x"), ("r2", "y")], sites=["y", "y"], roots=("r1", "r2"))
    (hp,) = find_hot_paths(b, max_roots=1)
    assert hp.root_id == "r2"


# -- consolidation -------------------------------------------------------------

def test_teastore_summary_counts():
    _, summary, _ = analyze_repo(TEASTORE)
    g = summary.component.graph
    assert (g.service_count, len(g.endpoints)) == (6, 16)
    assert {s.service_id for s in summary.component.per_service} == {
        "service:auth", "service:image", "service:persistence",
        "service:recommender", "service:registry", "service:webui"}
    assert summary.environment.language_version == "17"
    assert summary.behavior.hot_paths


def test_inconsistent_inputs_rejected():
    _, summary, _ = analyze_repo(TEASTORE)
    behavior = summary.behavior.behavior
    behavior.sync.append(SyncConstruct("x", "synchronized_method", "method:nowhere#m()", _span(1)))
    with pytest.raises(InconsistentInputs):
        build_system_summary(summary.component.graph, behavior, summary.environment)


def test_fingerprint_changes_with_source_bytes(tmp_path):
    write_repo(tmp_path, {"A.java": "class A { @GET public void m() {} }"})
    _, first, _ = analyze_repo(tmp_path)
    (tmp_path / "A.java").write_text("class A { @GET public void m() { } }")
    _, second, _ = analyze_repo(tmp_path)
    assert first.repo_fingerprint != second.repo_fingerprint


def test_round_trip_is_byte_identical(tmp_path):
    _, summary, _ = analyze_repo(TEASTORE)
    path = save_summary(summary, tmp_path / "s.json")
    again = save_summary(load_summary(path), tmp_path / "t.json")
    assert path.read_bytes() == again.read_bytes()
    assert canonical_dumps(load_summary(path)) == canonical_dumps(summary)


def test_schema_version_checked_on_load(tmp_path):
    _, summary, _ = analyze_repo(TEASTORE)
    data = to_jsonable(summary)
    data["schema_version"] = 0
    write_json(tmp_path / "old.json", data)
    with pytest.raises(SchemaVersionMismatch, match="re-run"):
        load_summary(tmp_path / "old.json")


def test_documents_validate_against_published_schemas(tmp_path):
    _, summary, report = analyze_repo(TEASTORE)
    save_summary(summary, tmp_path / "s.json")
    doc = read_json(tmp_path / "s.json")
    schema_validator("system_summary").validate(doc)
    schema_validator("component_graph").validate(doc["component"]["graph"])
    schema_validator("analysis_report").validate(to_jsonable(report))


def test_schema_catches_a_broken_document():
    from jsonschema import ValidationError

    _, summary, _ = analyze_repo(TEASTORE)
    doc = to_jsonable(summary)
    doc["component"]["graph"]["edges"][0]["kind"] = "telepathic"
    with pytest.raises(ValidationError):
        schema_validator("system_summary").validate(doc)
