"""Patch generation, verification and application."""

from .diffs import apply_unified_diff, make_unified_diff, parse_unified_diff
from .patches import (
    ApplyResult,
    Patch,
    PatchSet,
    Verdict,
    apply_patchset,
    dry_run,
    generate_patch,
    generate_patchset,
    load_patchset,
    save_patchset,
    verify_non_breaking,
)

__all__ = [
    "ApplyResult", "Patch", "PatchSet", "Verdict", "apply_patchset", "apply_unified_diff", "dry_run",
    "generate_patch", "generate_patchset", "load_patchset", "make_unified_diff", "parse_unified_diff",
    "save_patchset", "verify_non_breaking",
]
