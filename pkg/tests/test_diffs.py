"""Unified diff generation and strict application, cross-checked with GNU patch."""

from __future__ import annotations

import shutil
import subprocess

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from sysopt.errors import PatchConflict
from sysopt.optimize.diffs import (
    NO_NEWLINE,
    apply_unified_diff,
    diff_target,
    make_unified_diff,
    parse_unified_diff,
)

_LINE = st.sampled_from(["a", "b", "c", "{", "}", "    x = 1;", "", "return;"])


@st.composite
def _text(draw):
    lines = draw(st.lists(_LINE, max_size=25))
    text = "\n".join(lines)
    if lines and draw(st.booleans()):
        text += "\n"
    return text


@st.composite
def _edit(draw, text):
    lines = text.split("\n")
    for _ in range(draw(st.integers(1, 4))):
        op = draw(st.sampled_from(["insert", "delete", "replace"]))
        pos = draw(st.integers(0, len(lines)))
        if op == "insert":
            lines.insert(pos, draw(_LINE))
        elif lines and pos < len(lines):
            if op == "delete":
                del lines[pos]
            else:
                lines[pos] = draw(_LINE) + "!"
    return "\n".join(lines)


@settings(max_examples=400, deadline=None)
@given(st.data())
def test_apply_inverts_make(data):
    before = data.draw(_text())
    after = data.draw(_edit(before))
    diff = make_unified_diff("src/F.java", before, after)
    if before == after:
        assert diff == ""
        return
    path, result = apply_unified_diff(before, diff)
    assert path == "src/F.java"
    assert result == after


@pytest.mark.skipif(shutil.which("patch") is None, reason="GNU patch not installed")
@settings(max_examples=120, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.data())
def test_gnu_patch_agrees(tmp_path, data):
    before = data.draw(_text())
    after = data.draw(_edit(before))
    diff = make_unified_diff("F.java", before, after)
    if not diff:
        return
    target = tmp_path / "F.java"
    target.write_text(before, encoding="utf-8")
    (tmp_path / "p.diff").write_text(diff, encoding="utf-8")
    proc = subprocess.run(["patch", "-p1", "-s", "-f", "--no-backup-if-mismatch", "-i", "p.diff"],
                          cwd=tmp_path, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert target.read_text(encoding="utf-8") == after == apply_unified_diff(before, diff)[1]


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_hunks_survive_a_shifted_file(data):
    before = data.draw(_text())
    after = data.draw(_edit(before))
    diff = make_unified_diff("F.java", before, after)
    if not diff or not before:
        return  # a hunk against an empty file has no context to anchor it
    prefix = "// header one\n// header two\n"
    _, shifted = apply_unified_diff(prefix + before, diff)
    assert shifted == prefix + after


def test_reapplying_a_replacement_is_a_conflict():
    before = "a\nb\nc\nd\n"
    after = "a\nB\nc\nd\n"
    diff = make_unified_diff("F.java", before, after)
    _, once = apply_unified_diff(before, diff)
    assert once == after
    with pytest.raises(PatchConflict):
        apply_unified_diff(once, diff)


def test_missing_final_newline_round_trips():
    diff = make_unified_diff("F.java", "a\nb", "a\nc")
    assert NO_NEWLINE in diff
    assert apply_unified_diff("a\nb", diff)[1] == "a\nc"
    diff = make_unified_diff("F.java", "a\nb", "a\nb\n")
    assert apply_unified_diff("a\nb", diff)[1] == "a\nb\n"


def test_crlf_lines_are_preserved():
    before = "one\r\ntwo\r\nthree\r\n"
    after = "one\r\n2\r\nthree\r\n"
    assert apply_unified_diff(before, make_unified_diff("F.java", before, after))[1] == after


def test_target_and_headers():
    diff = make_unified_diff("pkg/A.java", "x\n", "y\n")
    assert diff.startswith("--- a/pkg/A.java\n+++ b/pkg/A.java\n")
    assert diff_target(diff) == "pkg/A.java"
    (fd,) = parse_unified_diff(diff)
    assert (fd.hunks[0].old_start, fd.hunks[0].old_len) == (1, 1)


@pytest.mark.parametrize("bad", [
    "",
    "not a diff at all\n",
    "--- a/F.java\n",
    "--- a/F.java\n+++ b/F.java\n@@ bogus @@\n",
    "--- a/F.java\n+++ b/F.java\n@@ -1,3 +1,3 @@\n a\n-b\n",
    "--- a/F.java\n+++ b/F.java\n@@ -1 +1 @@\n?x\n",
])
def test_malformed_diffs_are_conflicts(bad):
    with pytest.raises(PatchConflict):
        apply_unified_diff("a\nb\nc\n", bad)


def test_multi_file_and_rename_rejected():
    one = make_unified_diff("A.java", "x\n", "y\n")
    two = make_unified_diff("B.java", "x\n", "y\n")
    with pytest.raises(PatchConflict, match="exactly one file"):
        apply_unified_diff("x\n", one + two)
    renamed = one.replace("+++ b/A.java", "+++ b/C.java")
    with pytest.raises(PatchConflict, match="renaming"):
        apply_unified_diff("x\n", renamed)


def test_hunk_that_does_not_match_leaves_nothing_half_done():
    before = "".join(f"line {i}\n" for i in range(40))
    after = before.replace("line 3\n", "LINE 3\n").replace("line 30\n", "LINE 30\n")
    diff = make_unified_diff("F.java", before, after)
    assert diff.count("@@ -") == 2
    damaged = before.replace("line 30\n", "changed elsewhere\n")
    with pytest.raises(PatchConflict):
        apply_unified_diff(damaged, diff)
