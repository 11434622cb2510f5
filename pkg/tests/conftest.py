"""Shared helpers: fixture locations, throwaway repositories, one-call analysis."""

from __future__ import annotations

import json
import shutil
import textwrap
from pathlib import Path
from typing import Dict

import pytest

from sysopt.analysis import analyze
from sysopt.config import load_catalog
from sysopt.frontend import parse_repository
from sysopt.summary import summarize_model

FIXTURES = Path(__file__).parent / "fixtures"
TEASTORE = FIXTURES / "teastore-mini"
CORPUS = FIXTURES / "corpus"
ORACLE = FIXTURES / "expected_findings.json"


@pytest.fixture(scope="session")
def catalog():
    return load_catalog()


def write_repo(root: Path, files: Dict[str, str]) -> Path:
    """Create ``root`` holding ``files`` (path -> dedented source)."""
    for rel, text in files.items():
        path = root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(textwrap.dedent(text).lstrip("\n"), encoding="utf-8")
    return root


def analyze_repo(root: Path, catalog=None):
    """(model, summary, report) for a repository on disk."""
    catalog = catalog or load_catalog()
    model = parse_repository(root)
    summary = summarize_model(model, catalog, root, created_at="2026-01-01T00:00:00+00:00")
    return model, summary, analyze(summary, catalog)


def copy_fixture(src: Path, dst: Path) -> Path:
    shutil.copytree(src, dst, ignore=shutil.ignore_patterns(".sysopt"))
    return dst


def load_oracle() -> dict:
    return json.loads(ORACLE.read_text(encoding="utf-8"))["repos"]


@pytest.fixture
def teastore(tmp_path):
    return copy_fixture(TEASTORE, tmp_path / "teastore-mini")


SCHEMAS = Path(__file__).resolve().parent.parent / "docs" / "schemas"


def schema_validator(name: str):
    """Draft 2020-12 validator for ``docs/schemas/<name>.schema.json`` with cross-file refs."""
    from jsonschema import Draft202012Validator
    from referencing import Registry, Resource

    resources = []
    for path in SCHEMAS.glob("*.schema.json"):
        doc = json.loads(path.read_text(encoding="utf-8"))
        resources.append((doc["$id"], Resource.from_contents(doc)))
    registry = Registry().with_resources(resources)
    schema = json.loads((SCHEMAS / f"{name}.schema.json").read_text(encoding="utf-8"))
    return Draft202012Validator(schema, registry=registry, format_checker=Draft202012Validator.FORMAT_CHECKER)


# -- acceptance summary ----------------------------------------------------------

ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
