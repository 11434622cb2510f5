"""Patches, the non-breaking gate and workspace application."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

from ..analysis import Finding
from ..components import detect_endpoints
from ..config import PatternCatalog, load_catalog
from ..errors import FingerprintMismatch, NotApplicable, ParseFailureAfterPatch, PatchConflict, StaleEvidence
from ..frontend import parse_bytes
from ..frontend.model import CodeModel, normalize_path
from ..jsonio import atomic_write_bytes, from_jsonable, read_json, write_json
from .diffs import apply_unified_diff, diff_target
from .transforms import SourceFile, rewrite_for

log = logging.getLogger(__name__)

PATCH_STATUSES = ("proposed", "applied", "rejected_tests", "rejected_breaking", "rejected_conflict")


@dataclass
class Patch:
    finding_id: str
    rule_id: str
    diff: str
    justification: str
    status: str = "proposed"
    path: str = ""
    reason: str = ""

    @property
    def id(self) -> str:
        return self.finding_id


@dataclass
class PatchSet:
    patches: List[Patch]
    base_fingerprint: str
    iteration: int = 1
    skipped: List[str] = field(default_factory=list)  # "finding_id: reason" for NotApplicable findings
    diagnostics: List[str] = field(default_factory=list)


@dataclass
class Verdict:
    ok: bool
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


@dataclass
class ApplyResult:
    applied: List[Patch]
    rejected: List[Patch]
    model: Optional[CodeModel] = None


# -- generation ----------------------------------------------------------------

def justification_for(finding: Finding, description: str) -> str:
    return f"{finding.title} ({finding.rule_id}, {finding.primary}). {finding.interpretation} Change: {description}."


def generate_patch(finding: Finding, model: CodeModel, root: str | Path | None = None) -> Patch:
    """One-file patch for an R1/R2/R3 finding, diffed against the pristine file."""
    if finding.rule_id not in ("R1", "R2", "R3"):
        raise NotApplicable(f"{finding.rule_id} has no deterministic transformation")
    rewrite = rewrite_for(finding, model, root if root is not None else model.root)
    diff = rewrite.diff()
    if not diff:
        raise NotApplicable("transformation produced no change")
    return Patch(finding.id, finding.rule_id, diff, justification_for(finding, rewrite.description),
                 "proposed", rewrite.path)


def generate_patchset(findings: Sequence[Finding], model: CodeModel, iteration: int = 1,
                      root: str | Path | None = None) -> PatchSet:
    """Patches for every applicable finding, in the findings' (rank) order."""
    patches, skipped = [], []
    for f in findings:
        try:
            patches.append(generate_patch(f, model, root))
        except (NotApplicable, StaleEvidence) as exc:
            skipped.append(f"{f.id}: {type(exc).__name__}: {exc}")
    return PatchSet(patches, model.fingerprint, iteration, skipped)


# -- verification --------------------------------------------------------------

def _public_signatures(model: CodeModel) -> Counter:
    return Counter(m.signature_key for m in model.methods() if m.visibility in ("public", "protected"))


def _public_fields(model: CodeModel) -> dict:
    return {(t.qualified_name, f.name): f.declared_type for t in model.types() for f in t.fields
            if f.visibility == "public"}


def verify_non_breaking(patch: Patch, before: CodeModel, after: CodeModel,
                        catalog: Optional[PatternCatalog] = None) -> Verdict:
    """Public API and endpoint invariance between two models; first violated clause wins."""
    unit = after.unit_at(patch.path) if patch.path else None
    if unit is not None and not unit.ok:
        errors = [str(d) for d in unit.diagnostics if d.severity == "error"]
        raise ParseFailureAfterPatch(f"{patch.path} no longer parses: {errors[0]}")
    old_sigs, new_sigs = _public_signatures(before), _public_signatures(after)
    removed = old_sigs - new_sigs
    if removed:
        return Verdict(False, f"public signature removed: {sorted(removed)[0]}")
    added = new_sigs - old_sigs
    if added:
        return Verdict(False, f"public signature added: {sorted(added)[0]}")
    catalog = catalog or load_catalog()
    old_eps = {e.key() for e in detect_endpoints(before, catalog)}
    new_eps = {e.key() for e in detect_endpoints(after, catalog)}
    if old_eps != new_eps:
        changed = sorted(old_eps ^ new_eps)[0]
        return Verdict(False, f"endpoint set changed: {changed[0]} {changed[3]} {changed[2]}".rstrip())
    old_fields, new_fields = _public_fields(before), _public_fields(after)
    for key, declared in sorted(old_fields.items()):
        if key not in new_fields:
            return Verdict(False, f"public field removed: {key[0]}.{key[1]}")
        if new_fields[key] != declared:
            return Verdict(False, f"public field retyped: {key[0]}.{key[1]} {declared} -> {new_fields[key]}")
    return Verdict(True)


def dry_run(patch: Patch, model: CodeModel, root: str | Path,
            catalog: Optional[PatternCatalog] = None) -> Tuple[str, str, Optional[CodeModel], bytes]:
    """Apply ``patch`` in memory and gate it.

    Returns (status, reason, patched model, new file bytes); status is
    ``proposed`` when the patch would apply cleanly and is non-breaking.
    """
    try:
        target = normalize_path(diff_target(patch.diff))
    except (PatchConflict, ValueError) as exc:
        return "rejected_conflict", str(exc), None, b""
    if patch.path and normalize_path(patch.path) != target:
        return "rejected_conflict", f"diff targets {target}, patch declares {patch.path}", None, b""
    patch.path = target
    file_path = Path(root) / target
    if not file_path.is_file() or model.unit_at(target) is None:
        return "rejected_conflict", f"{target} is not a source file of the workspace", None, b""
    src = SourceFile.read(root, target)
    try:
        _, new_text = apply_unified_diff(src.text, patch.diff)
    except PatchConflict as exc:
        return "rejected_conflict", str(exc), None, b""
    data = src.encode(new_text)
    after = model.replace_unit(parse_bytes(data, target))
    try:
        verdict = verify_non_breaking(patch, model, after, catalog)
    except ParseFailureAfterPatch as exc:
        return "rejected_breaking", str(exc), None, b""
    if not verdict:
        return "rejected_breaking", verdict.reason, None, b""
    return "proposed", "", after, data


def apply_patchset(patch_set: PatchSet, workspace: str | Path, model: Optional[CodeModel] = None,
                   catalog: Optional[PatternCatalog] = None, parse=None) -> ApplyResult:
    """Apply patches in order, each all-or-nothing; failures are marked and skipped.

    ``model`` is the parsed workspace (re-parsed via ``parse(workspace)`` when
    omitted) and must match the set's base fingerprint.
    """
    if model is None:
        if parse is None:
            from ..frontend import parse_repository
            parse = parse_repository
        model = parse(workspace)
    if model.fingerprint != patch_set.base_fingerprint:
        raise FingerprintMismatch(
            f"workspace fingerprint {model.fingerprint[:12]} != patch set base {patch_set.base_fingerprint[:12]}")
    applied, rejected = [], []
    for patch in patch_set.patches:
        if patch.status != "proposed":
            rejected.append(patch)
            continue
        status, reason, after, data = dry_run(patch, model, workspace, catalog)
        if status != "proposed":
            patch.status, patch.reason = status, reason
            rejected.append(patch)
            log.info("patch %s %s: %s", patch.id, status, reason)
            continue
        atomic_write_bytes(Path(workspace) / patch.path, data)
        patch.status = "applied"
        model = after
        applied.append(patch)
    return ApplyResult(applied, rejected, model)


# -- persistence ---------------------------------------------------------------

def save_patchset(patch_set: PatchSet, directory: str | Path) -> Path:
    """``patchset.json`` plus one ``<finding_id>.diff`` per patch."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for p in patch_set.patches:
        atomic_write_bytes(directory / f"{p.finding_id}.diff", p.diff.encode("utf-8"))
    return write_json(directory / "patchset.json", patch_set)


def load_patchset(path: str | Path) -> PatchSet:
    return from_jsonable(PatchSet, read_json(path))


def revert_files(workspace: str | Path, snapshot: Iterable[Tuple[str, bytes]]) -> None:
    for rel, data in snapshot:
        atomic_write_bytes(Path(workspace) / rel, data)
