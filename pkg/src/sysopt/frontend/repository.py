"""Repository-level parsing: file discovery and CodeModel assembly."""

from __future__ import annotations

import fnmatch
import glob
import logging
from pathlib import Path
from typing import Iterable, List, Optional

from ..config import RepoConfig
from ..errors import NoSourcesFound, UnreadableSource
from .model import CodeModel, Diagnostic
from .parser import parse_bytes

log = logging.getLogger(__name__)


def _excluded(rel: str, patterns: Iterable[str]) -> bool:
    for pat in patterns:
        if fnmatch.fnmatchcase(rel, pat):
            return True
        # "**/x/**" should also match "x/..." at the repository root
        if pat.startswith("**/") and fnmatch.fnmatchcase(rel, pat[3:]):
            return True
    return False


def discover_sources(root: str | Path, config: RepoConfig) -> List[str]:
    """Repository-relative POSIX paths matched by the source globs minus exclusions, sorted."""
    root = Path(root)
    found = set()
    for pattern in config.source_globs:
        for rel in glob.glob(pattern, root_dir=root, recursive=True):
            rel = Path(rel).as_posix()
            if (root / rel).is_file() and not _excluded(rel, config.exclude_globs):
                found.add(rel)
    return sorted(found)


def parse_repository(root: str | Path, config: Optional[RepoConfig] = None) -> CodeModel:
    config = config or RepoConfig()
    root = Path(root)
    if not root.is_dir():
        raise NoSourcesFound(f"repository root does not exist: {root}")
    paths = discover_sources(root, config)
    if not paths:
        raise NoSourcesFound(f"no files under {root} match {config.source_globs}")
    units = []
    diagnostics: List[Diagnostic] = []
    seen_types = {}
    for rel in paths:
        try:
            unit = parse_bytes((root / rel).read_bytes(), rel)
        except UnreadableSource as exc:
            diagnostics.append(Diagnostic(rel, 1, 1, "unreadable-source", str(exc), "error"))
            continue
        kept = []
        for t in unit.types:
            if t.qualified_name in seen_types:
                unit.diagnostics.append(Diagnostic(rel, t.span.start_line, t.span.start_col, "duplicate-type",
                                                   f"{t.qualified_name} already declared in {seen_types[t.qualified_name]}"))
                continue
            seen_types[t.qualified_name] = rel
            kept.append(t)
        unit.types = kept
        units.append(unit)
        diagnostics.extend(unit.diagnostics)
    log.debug("parsed %d units under %s", len(units), root)
    return CodeModel(root=str(root.resolve()), units=units, diagnostics=diagnostics)
