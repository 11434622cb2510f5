"""Unified diffs: generation with difflib and strict, all-or-nothing application.

Application locates each hunk's old block (context plus removed lines) at
its recorded position, falling back to the nearest exact match within the
file.  A hunk that cannot be located, or that would overlap an earlier
hunk, makes the whole diff a conflict; nothing is partially applied.
"""

from __future__ import annotations

import difflib
import re
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from ..errors import PatchConflict

NO_NEWLINE = "\\ No newline at end of file"
_HUNK_RE = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")


def make_unified_diff(path: str, before: str, after: str, context: int = 3) -> str:
    """Diff of one file with ``a/`` and ``b/`` headers; empty string when unchanged."""
    if before == after:
        return ""
    a = before.splitlines(keepends=True)
    b = after.splitlines(keepends=True)
    out = []
    for line in difflib.unified_diff(a, b, fromfile=f"a/{path}", tofile=f"b/{path}", n=context):
        if line.endswith("\n"):
            out.append(line)
        else:
            out.append(line + "\n" + NO_NEWLINE + "\n")
    return "".join(out)


@dataclass
class Hunk:
    old_start: int
    old_len: int
    new_start: int
    new_len: int
    # (tag, text) with tag in " ", "-", "+"; text keeps its line ending
    lines: List[Tuple[str, str]] = field(default_factory=list)

    def old_lines(self) -> List[str]:
        return [t for tag, t in self.lines if tag in " -"]

    def new_lines(self) -> List[str]:
        return [t for tag, t in self.lines if tag in " +"]


@dataclass
class FileDiff:
    old_path: str
    new_path: str
    hunks: List[Hunk]

    @property
    def path(self) -> str:
        return self.new_path


def _strip_prefix(header: str) -> str:
    name = header.split("\t", 1)[0].strip()
    if name.startswith(("a/", "b/")):
        name = name[2:]
    return name


def parse_unified_diff(text: str) -> List[FileDiff]:
    """Parse diff text into per-file hunks. Raises ``PatchConflict`` on malformed input."""
    lines = text.splitlines(keepends=True)
    files: List[FileDiff] = []
    i = 0
    while i < len(lines):
        line = lines[i]
        if not line.startswith("--- "):
            i += 1
            continue
        if i + 1 >= len(lines) or not lines[i + 1].startswith("+++ "):
            raise PatchConflict(f"malformed diff: '---' header without '+++' at line {i + 1}")
        current = FileDiff(_strip_prefix(line[4:]), _strip_prefix(lines[i + 1][4:]), [])
        files.append(current)
        i += 2
        while i < len(lines) and lines[i].startswith("@@"):
            m = _HUNK_RE.match(lines[i])
            if not m:
                raise PatchConflict(f"malformed hunk header: {lines[i].rstrip()}")
            old_len = int(m.group(2)) if m.group(2) is not None else 1
            new_len = int(m.group(4)) if m.group(4) is not None else 1
            hunk = Hunk(int(m.group(1)), old_len, int(m.group(3)), new_len)
            i += 1
            seen_old = seen_new = 0
            while i < len(lines) and (seen_old < old_len or seen_new < new_len):
                body = lines[i]
                tag = body[:1]
                if tag not in (" ", "-", "+"):
                    if body.rstrip("\r\n") == "":
                        tag, body = " ", " " + body  # tolerate blank context lines with stripped space
                    else:
                        raise PatchConflict(f"unexpected line in hunk: {body.rstrip()}")
                hunk.lines.append((tag, body[1:]))
                seen_old += tag in " -"
                seen_new += tag in " +"
                i += 1
                if i < len(lines) and lines[i].startswith("\\"):
                    t, s = hunk.lines[-1]
                    hunk.lines[-1] = (t, s[:-2] if s.endswith("\r\n") else s.rstrip("\n"))
                    i += 1
            if seen_old != old_len or seen_new != new_len:
                raise PatchConflict("hunk body shorter than its header declares")
            current.hunks.append(hunk)
    if not files:
        raise PatchConflict("no file headers found in diff")
    return files


def _locate(source: List[str], block: List[str], expected: int, floor: int) -> Optional[int]:
    """Index where ``block`` occurs, nearest to ``expected`` and not before ``floor``."""
    n = len(block)
    limit = len(source) - n
    if limit < floor:
        return None
    best = None
    for pos in range(floor, limit + 1):
        if source[pos:pos + n] == block:
            if best is None or abs(pos - expected) < abs(best - expected):
                best = pos
            if pos > expected:
                break
    return best


def apply_file_diff(text: str, diff: FileDiff) -> str:
    """Apply all hunks or raise ``PatchConflict``."""
    source = text.splitlines(keepends=True)
    out: List[str] = []
    cursor = 0
    for hunk in diff.hunks:
        old = hunk.old_lines()
        expected = max(hunk.old_start - 1, 0) if hunk.old_len else hunk.old_start
        pos = _locate(source, old, expected, cursor)
        if pos is None:
            raise PatchConflict(f"{diff.path}: hunk @@ -{hunk.old_start},{hunk.old_len} @@ does not match")
        out.extend(source[cursor:pos])
        out.extend(hunk.new_lines())
        cursor = pos + len(old)
    out.extend(source[cursor:])
    return "".join(out)


def apply_unified_diff(text: str, diff_text: str) -> Tuple[str, str]:
    """Apply a single-file diff to ``text``; returns (target path, new text)."""
    files = parse_unified_diff(diff_text)
    if len(files) != 1:
        raise PatchConflict(f"expected exactly one file in diff, found {len(files)}")
    fd = files[0]
    if fd.old_path != fd.new_path or fd.old_path == "/dev/null":
        raise PatchConflict("creating, deleting or renaming files is not supported")
    return fd.path, apply_file_diff(text, fd)


def diff_target(diff_text: str) -> str:
    files = parse_unified_diff(diff_text)
    if len(files) != 1:
        raise PatchConflict(f"expected exactly one file in diff, found {len(files)}")
    return files[0].path
