"""Deterministic source rewrites for R1, R2 and R3 findings.

Edits are anchored to evidence spans and applied to the pristine file text;
untouched bytes are preserved exactly.  Every transformation either yields a
one-file unified diff or raises ``NotApplicable`` / ``StaleEvidence``.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple

from ..analysis import Finding, shared_field_name
from ..errors import NotApplicable, StaleEvidence
from ..frontend.lexer import IDENT, NUMBER, PRIMITIVES, STRING, CHAR, LexError, tokenize
from ..frontend.model import CodeModel, FieldDecl, MethodDecl, SourceSpan, TypeDecl, simple_type_name
from .diffs import make_unified_diff

_BOM = "﻿"
_ALLOC_RE = re.compile(r"^new\s+(?P<type>[A-Za-z_$][\w$]*(?:\s*\.\s*[A-Za-z_$][\w$]*)*)\s*(?P<targs><[^()]*>)?\s*\(",
                       re.S)


@dataclass
class SourceFile:
    """Decoded file text plus what is needed to write it back byte-for-byte."""

    path: str
    text: str
    bom: str = ""

    @classmethod
    def read(cls, root: str | Path, path: str, expected_digest: str = "") -> "SourceFile":
        data = (Path(root) / path).read_bytes()
        if expected_digest and hashlib.sha256(data).hexdigest() != expected_digest:
            raise StaleEvidence(f"{path} changed since it was analyzed")
        text = data.decode("utf-8")
        bom = ""
        if text.startswith(_BOM):
            bom, text = _BOM, text[1:]
        return cls(path, text, bom)

    def encode(self, text: Optional[str] = None) -> bytes:
        return (self.bom + (self.text if text is None else text)).encode("utf-8")


@dataclass
class Rewrite:
    path: str
    before: str
    after: str
    description: str

    def diff(self) -> str:
        return make_unified_diff(self.path, self.before, self.after)


class _Editor:
    """Collects non-overlapping (offset, length, replacement) edits over one text."""

    def __init__(self, text: str):
        self.text = text
        self.lines = text.splitlines(keepends=True)
        self.line_starts = [0]
        for line in self.lines:
            self.line_starts.append(self.line_starts[-1] + len(line))
        self.edits: List[Tuple[int, int, str]] = []

    def offset(self, line: int, col: int) -> int:
        return self.line_starts[line - 1] + col - 1

    def span_range(self, span: SourceSpan) -> Tuple[int, int]:
        return self.offset(span.start_line, span.start_col), self.offset(span.end_line, span.end_col) + 1

    def replace(self, start: int, end: int, text: str) -> None:
        for s, e, _ in self.edits:
            if start < e and s < end:
                raise NotApplicable("overlapping edits")
        self.edits.append((start, end, text))

    def insert_after_line(self, line: int, text: str) -> None:
        pos = self.line_starts[line]
        self.edits.append((pos, pos, text))

    def newline_of(self, line: int) -> str:
        raw = self.lines[line - 1] if 0 < line <= len(self.lines) else "\n"
        if raw.endswith("\r\n"):
            return "\r\n"
        return "\n"

    def indent_of(self, line: int) -> str:
        raw = self.lines[line - 1]
        return raw[:len(raw) - len(raw.lstrip(" \t"))]

    def result(self) -> str:
        out = self.text
        # stable: later offsets first; insertions at one point keep their order
        for start, end, text in sorted(self.edits, key=lambda e: (e[0], e[1]), reverse=True):
            out = out[:start] + text + out[end:]
        return out


def _owner_type(model: CodeModel, finding: Finding) -> TypeDecl:
    decl = model.type(finding.owner_class)
    if decl is None:
        raise StaleEvidence(f"type {finding.owner_class} no longer exists")
    return decl


def _unit_digest(model: CodeModel, path: str) -> str:
    unit = model.unit_at(path)
    if unit is None:
        raise StaleEvidence(f"{path} is not part of the analyzed model")
    return unit.digest


# -- R1 / R3 -------------------------------------------------------------------

def _split_args(arg_text: str) -> List[str]:
    depth = 0
    parts, cur = [], []
    for ch in arg_text:
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    tail = "".join(cur).strip()
    if tail or parts:
        parts.append(tail)
    return parts


def _constant_args(arg_text: str, owner: TypeDecl, model: CodeModel) -> bool:
    """True if the constructor arguments can be evaluated once at class initialization.

    Allowed: literals, ``X.class``, static fields of the owner or its
    enclosing types, and dotted references to capitalized types or ALL_CAPS
    constants.  Locals, parameters, instance fields and calls are rejected.
    """
    try:
        toks = tokenize(arg_text)
    except LexError:
        return False
    statics: Set[str] = set()
    decl: Optional[TypeDecl] = owner
    while decl is not None:
        statics |= {f.name for f in decl.fields if f.is_static}
        decl = model.type(decl.enclosing) if decl.enclosing else None
    for k, t in enumerate(toks):
        if t.kind in (STRING, CHAR, NUMBER):
            continue
        if t.kind != IDENT:
            if t.text == "(" and k > 0 and toks[k - 1].kind == IDENT:
                return False  # method call
            if t.text in ("new", "->", "::", "++", "--", "="):
                return False
            continue
        word = t.text
        if word in ("true", "false", "null", "class"):
            continue
        if word in ("this", "super", "new"):
            return False
        prev_dot = k > 0 and toks[k - 1].text == "."
        next_dot = k + 1 < len(toks) and toks[k + 1].text == "."
        if prev_dot:
            if word[:1].isupper():
                continue
            return False
        if word in statics:
            continue
        if next_dot and word[:1].isupper():
            continue
        return False
    return True


def _protocol_variant(arg_text: str) -> str:
    low = arg_text.lower()
    if "https" in low:
        return "HTTPS"
    if "http" in low:
        return "HTTP"
    return ""


def _insertion_line(owner: TypeDecl, editor: _Editor) -> Tuple[int, str]:
    """Line after which the shared field goes, and the indentation to use."""
    if owner.fields:
        last = max(owner.fields, key=lambda f: f.span.end_line)
        return last.span.end_line, editor.indent_of(last.span.start_line)
    if owner.kind == "enum":
        raise NotApplicable("enum without fields: no safe insertion point after the constants")
    header_line = (owner.header_span or owner.span).start_line
    body_line = owner.body_open_line or header_line
    if body_line >= len(editor.lines):
        raise NotApplicable("class body opens on the last line")
    indent = editor.indent_of(header_line) + "    "
    return body_line, indent


def hoist_allocations(finding: Finding, model: CodeModel, root: str | Path) -> Rewrite:
    """R1/R3: one shared static final field per distinct allocation, sites replaced by field reads."""
    owner = _owner_type(model, finding)
    if owner.kind == "interface":
        raise NotApplicable("allocations inside interfaces are not rewritten")
    paths = {s.path for s in finding.evidence}
    if len(paths) != 1:
        raise NotApplicable("evidence spans more than one file")
    path = paths.pop()
    src = SourceFile.read(root, path, _unit_digest(model, path))
    editor = _Editor(src.text)

    sites = []
    for span in finding.evidence:
        try:
            text = span.slice(src.text)
        except IndexError as exc:
            raise StaleEvidence(f"{span} lies outside the file") from exc
        m = _ALLOC_RE.match(text)
        if not m or not text.endswith(")"):
            raise StaleEvidence(f"{span} no longer holds an allocation")
        type_text = re.sub(r"\s+", "", m.group("type"))
        if simple_type_name(type_text) != finding.matched_type:
            raise StaleEvidence(f"{span} allocates {type_text}, expected {finding.matched_type}")
        targs = (m.group("targs") or "").replace(" ", "")
        if targs == "<>":
            raise NotApplicable("diamond allocation: the shared field's type arguments cannot be inferred")
        args = text[m.end():-1].strip()
        if not _constant_args(args, owner, model):
            raise NotApplicable(f"constructor arguments at {span} depend on per-call state: ({args})")
        sites.append((span, type_text + targs, args))

    # group by normalized constructor arguments
    variants: Dict[str, str] = {}
    arg_keys = []
    for _, _, args in sites:
        key = ",".join(a.replace(" ", "") for a in _split_args(args))
        arg_keys.append(key)
    distinct = sorted(set(arg_keys), key=arg_keys.index)
    if len(distinct) == 1:
        variants[distinct[0]] = shared_field_name(finding.rule_id, finding.matched_type)
    elif finding.rule_id == "R1" and len(distinct) == 2:
        by_proto = {}
        for key, (_, _, args) in zip(arg_keys, sites):
            by_proto.setdefault(key, _protocol_variant(args))
        if sorted(by_proto.values()) != ["HTTP", "HTTPS"]:
            raise NotApplicable("client allocations differ in configuration and no protocol variant separates them")
        for key, proto in by_proto.items():
            variants[key] = shared_field_name("R1", finding.matched_type, proto)
    else:
        raise NotApplicable(f"{len(distinct)} distinct constructor configurations cannot share one instance")

    existing = {f.name for f in owner.fields}
    clash = sorted(set(variants.values()) & existing)
    if clash:
        raise NotApplicable(f"field {clash[0]} already exists in {owner.name}")

    line, indent = _insertion_line(owner, editor)
    nl = editor.newline_of(line)
    declared = []
    for key in distinct:
        idx = arg_keys.index(key)
        _, type_text, args = sites[idx]
        declared.append(f"{indent}private static final {type_text} {variants[key]} = new {type_text}({args});{nl}")
    editor.insert_after_line(line, "".join(declared))
    for (span, _, _), key in zip(sites, arg_keys):
        start, end = editor.span_range(span)
        editor.replace(start, end, variants[key])
    names = ", ".join(variants[k] for k in distinct)
    return Rewrite(path, src.text, editor.result(),
                   f"hoisted {len(sites)} allocation(s) of {finding.matched_type} into {names}")


# -- R2 ------------------------------------------------------------------------

def _flag_fields(method: MethodDecl, owner: TypeDecl, body: str) -> List[FieldDecl]:
    """Fields written by a flag-style body, or raise NotApplicable.

    Accepted statements have the shape ``[this.]f = v;`` where ``f`` is a
    primitive field of the owner and ``v`` is a literal, a parameter, or a
    (possibly ``this.``-qualified) field read, optionally negated.
    """
    facts = method.facts
    if facts.calls or facts.allocations or facts.loop_count or facts.branch_count or facts.sync_blocks:
        raise NotApplicable("synchronized body does more than assign flags (calls, allocations, loops or branches)")
    try:
        toks = tokenize(body)
    except LexError as exc:
        raise NotApplicable(f"body could not be tokenized: {exc}") from exc
    if not toks or toks[0].text != "{" or toks[-1].text != "}":
        raise NotApplicable("unexpected body shape")
    toks = toks[1:-1]
    params = {p[0] for p in method.parameters}
    written: Dict[str, FieldDecl] = {}
    stmts: List[list] = [[]]
    for t in toks:
        if t.text == ";" and t.kind != STRING:
            stmts.append([])
        else:
            stmts[-1].append(t)
    if stmts[-1]:
        raise NotApplicable("trailing tokens after the last statement")
    stmts = [s for s in stmts if s]
    if not stmts:
        raise NotApplicable("empty synchronized body")

    def field_ref(seq) -> Optional[str]:
        words = [t.text for t in seq]
        if len(words) == 3 and words[0] == "this" and words[1] == ".":
            return words[2]
        if len(words) == 1 and seq[0].kind == IDENT:
            return words[0]
        return None

    def value_ok(seq) -> bool:
        if seq and seq[0].text == "!":
            seq = seq[1:]
        if len(seq) == 1:
            t = seq[0]
            if t.kind in (NUMBER, CHAR) or t.text in ("true", "false"):
                return True
            if t.kind == IDENT and (t.text in params or owner.field_named(t.text)):
                return True
            return False
        if len(seq) == 2 and seq[0].text == "-" and seq[1].kind == NUMBER:
            return True
        name = field_ref(seq)
        return name is not None and owner.field_named(name) is not None

    for stmt in stmts:
        eq = [i for i, t in enumerate(stmt) if t.text == "="]
        if len(eq) != 1:
            raise NotApplicable("statement is not a single plain assignment")
        target = field_ref(stmt[:eq[0]])
        if target is None or (target in params and stmt[0].text != "this"):
            raise NotApplicable("assignment target is not a field")
        fdecl = owner.field_named(target)
        if fdecl is None:
            raise NotApplicable(f"{target} is not a field of {owner.name}")
        if fdecl.declared_type not in PRIMITIVES or fdecl.declared_type == "void":
            raise NotApplicable(f"field {target} has non-primitive type {fdecl.declared_type}")
        if fdecl.is_final:
            raise NotApplicable(f"field {target} is final")
        if not value_ok(stmt[eq[0] + 1:]):
            raise NotApplicable("assigned value is not a literal, parameter or field read")
        written[target] = fdecl
    return list(written.values())


def drop_lock(finding: Finding, model: CodeModel, root: str | Path) -> Rewrite:
    """R2: remove ``synchronized`` from a flag-style method and make its fields volatile."""
    method = model.method(finding.owner_method_id.split(":", 1)[1])
    if method is None:
        raise StaleEvidence(f"{finding.owner_method_id} no longer exists")
    if not method.is_synchronized or method.synchronized_span is None:
        raise NotApplicable("only synchronized methods are rewritten; synchronized blocks are left alone")
    if method.body_span is None:
        raise NotApplicable("method has no body")
    owner = model.owner_of(method)
    path = method.span.path
    src = SourceFile.read(root, path, _unit_digest(model, path))
    body = method.body_span.slice(src.text)
    fields = _flag_fields(method, owner, body)
    editor = _Editor(src.text)
    start, end = editor.span_range(method.synchronized_span)
    if src.text[start:end] != "synchronized":
        raise StaleEvidence(f"{method.synchronized_span} no longer holds the synchronized modifier")
    while end < len(src.text) and src.text[end] in " \t":
        end += 1
    editor.replace(start, end, "")
    done: Set[SourceSpan] = set()
    for f in fields:
        if f.is_volatile or f.type_span is None or f.type_span in done:
            continue
        done.add(f.type_span)
        pos = editor.offset(f.type_span.start_line, f.type_span.start_col)
        editor.replace(pos, pos, "volatile ")
    names = ", ".join(f.name for f in fields)
    return Rewrite(path, src.text, editor.result(),
                   f"removed synchronized from {method.name}; volatile on {names}")


def rewrite_for(finding: Finding, model: CodeModel, root: str | Path) -> Rewrite:
    if finding.rule_id in ("R1", "R3"):
        return hoist_allocations(finding, model, root)
    if finding.rule_id == "R2":
        return drop_lock(finding, model, root)
    raise NotApplicable(f"{finding.rule_id} has no deterministic transformation")
