"""Tolerant parser for the Java-style structural subset.

Recognized: package/import headers, class/interface/enum declarations
(including nested named types), fields and methods with modifiers and
annotations. Inside method bodies only calls, ``new`` expressions,
``synchronized`` blocks, loops and ``if``/``switch`` branches produce facts;
everything else is opaque. Unsupported constructs are skipped with a
diagnostic instead of aborting the parse.
"""

from __future__ import annotations

import hashlib
import re
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .lexer import IDENT, KEYWORDS, OP, PRIMITIVES, STRING, LexError, Token, string_value, tokenize
from .model import (
    AllocFact,
    AnnotationFact,
    CallFact,
    Diagnostic,
    FieldDecl,
    MethodDecl,
    MethodFacts,
    SourceSpan,
    SourceUnit,
    TypeDecl,
    normalize_path,
    strip_generics,
)

MODIFIERS = frozenset(
    "public protected private static final abstract synchronized native transient "
    "volatile strictfp default sealed".split()
)
_TYPE_KINDS = ("class", "interface", "enum")
_ANGLE_OK = {",", ".", "?", "[", "]", "&", "<", ">", "@"}
_PACKAGE_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*")
_CALL_EXCLUDED = KEYWORDS - {"this", "super"}


def _is_type_like(name: str) -> bool:
    """Capitalized identifier that is not an ALL_CAPS constant."""
    return name[:1].isupper() and not name.isupper()


class _Parser:
    def __init__(self, text: str, path: str):
        self.text = text
        self.path = path
        self.diags: List[Diagnostic] = []
        self.toks: List[Token] = []
        self.match: Dict[int, int] = {}

    # -- helpers -----------------------------------------------------------

    def diag(self, tok: Optional[Token], code: str, message: str, severity: str = "warning") -> None:
        line, col = (tok.line, tok.col) if tok else (1, 1)
        self.diags.append(Diagnostic(self.path, line, col, code, message, severity))

    def span(self, a: int, b: int) -> SourceSpan:
        ta, tb = self.toks[a], self.toks[b]
        return SourceSpan(self.path, ta.line, tb.end_line, ta.col, tb.end_col)

    def tok(self, i: int) -> Optional[Token]:
        return self.toks[i] if 0 <= i < len(self.toks) else None

    def is_op(self, i: int, text: str) -> bool:
        t = self.tok(i)
        return t is not None and t.kind == OP and t.text == text

    def is_word(self, i: int, text: str) -> bool:
        t = self.tok(i)
        return t is not None and t.kind == IDENT and t.text == text

    def is_ident(self, i: int) -> bool:
        t = self.tok(i)
        return t is not None and t.kind == IDENT and t.text not in KEYWORDS

    def source(self, a: int, b: int) -> str:
        """Whitespace-collapsed source text of tokens a..b inclusive."""
        if b < a:
            return ""
        return " ".join(self.text[self.toks[a].start:self.toks[b].end].split())

    def compact(self, a: int, b: int) -> str:
        return "".join(t.text if t.kind != IDENT or i == a or self.toks[i - 1].kind != IDENT
                       else " " + t.text for i, t in enumerate(self.toks[a:b + 1], a))

    def match_brackets(self) -> bool:
        pairs = {")": "(", "]": "[", "}": "{"}
        stack: List[int] = []
        for i, t in enumerate(self.toks):
            if t.kind != OP:
                continue
            if t.text in "([{":
                stack.append(i)
            elif t.text in pairs:
                if not stack or self.toks[stack[-1]].text != pairs[t.text]:
                    self.diag(t, "unbalanced-brackets", f"unexpected '{t.text}'", "error")
                    return False
                self.match[stack.pop()] = i
        if stack:
            self.diag(self.toks[stack[-1]], "unbalanced-brackets",
                      f"unclosed '{self.toks[stack[-1]].text}'", "error")
            return False
        return True

    def skip_angles(self, i: int) -> Optional[int]:
        """Index after a balanced ``<...>`` starting at ``i``; None if it is not a type argument list."""
        depth = 0
        j = i
        while j < len(self.toks):
            t = self.toks[j]
            if t.kind == OP:
                if t.text == "<":
                    depth += 1
                elif t.text == ">":
                    depth -= 1
                    if depth == 0:
                        return j + 1
                elif t.text not in _ANGLE_OK:
                    return None
            elif t.kind != IDENT:
                return None
            elif t.text in KEYWORDS and t.text not in ("extends", "super") and t.text not in PRIMITIVES:
                return None
            j += 1
        return None

    def type_ref_end(self, i: int) -> Optional[int]:
        """Index after a type reference starting at ``i`` (dotted, generic, array, varargs)."""
        t = self.tok(i)
        if t is None or t.kind != IDENT:
            return None
        if t.text in KEYWORDS and t.text not in PRIMITIVES:
            return None
        j = i + 1
        if t.text not in PRIMITIVES:
            while True:
                if self.is_op(j, "<"):
                    k = self.skip_angles(j)
                    if k is None:
                        return None
                    j = k
                if self.is_op(j, ".") and self.is_ident(j + 1):
                    j += 2
                    continue
                break
        while self.is_op(j, "[") and self.is_op(j + 1, "]"):
            j += 2
        if self.is_op(j, "..."):
            j += 1
        return j

    def skip_statement(self, i: int, limit: int) -> int:
        """Index after the next ``;`` or balanced block at depth 0."""
        j = i
        while j < limit:
            t = self.toks[j]
            if t.kind == OP:
                if t.text == ";":
                    return j + 1
                if t.text == "{":
                    return self.match[j] + 1
                if t.text in "([":
                    j = self.match[j] + 1
                    continue
            j += 1
        return limit

    # -- declarations ------------------------------------------------------

    def parse(self) -> SourceUnit:
        digest = hashlib.sha256(self.text.encode("utf-8")).hexdigest()
        lines = self.text.splitlines() or [""]
        whole = SourceSpan(self.path, 1, max(1, len(lines)), 1, max(1, len(lines[-1])))
        try:
            self.toks = tokenize(self.text)
        except LexError as exc:
            self.diags.append(Diagnostic(self.path, exc.line, exc.col, "lex-error", str(exc), "error"))
            return SourceUnit(whole, "", [], [], digest, self.diags)
        if not self.match_brackets():
            return SourceUnit(whole, "", [], [], digest, self.diags)

        i = 0
        package = ""
        imports: List[str] = []
        n = len(self.toks)
        if self.is_word(0, "package") or (self.is_op(0, "@") and self._annotated_package()):
            while not self.is_word(i, "package"):
                i += 1
            j = i + 1
            while j < n and not self.is_op(j, ";"):
                j += 1
            package = "".join(t.text for t in self.toks[i + 1:j])
            if not _PACKAGE_RE.fullmatch(package):
                self.diag(self.toks[i], "bad-package", f"unrecognized package name {package!r}")
                package = ""
            i = j + 1
        while self.is_word(i, "import"):
            j = i + 1
            while j < n and not self.is_op(j, ";"):
                j += 1
            parts = [t.text for t in self.toks[i + 1:j] if t.text != "static"]
            imports.append("".join(parts))
            i = j + 1

        types: List[TypeDecl] = []
        while i < n:
            i = self.parse_member_or_type(i, n, package, None, types, top_level=True)
        return SourceUnit(whole, package, imports, types, digest, self.diags)

    def _annotated_package(self) -> bool:
        return any(t.is_word("package") for t in self.toks[:50])

    def parse_modifiers(self, i: int, limit: int) -> Tuple[List[AnnotationFact], Set[str], int]:
        annotations: List[AnnotationFact] = []
        mods: Set[str] = set()
        while i < limit:
            t = self.toks[i]
            if t.is_op("@") and not self.is_word(i + 1, "interface"):
                j = i + 1
                if not self.is_ident(j):
                    break
                j += 1
                while self.is_op(j, ".") and self.is_ident(j + 1):
                    j += 2
                name = "".join(x.text for x in self.toks[i + 1:j])
                args: List[str] = []
                end = j - 1
                if self.is_op(j, "("):
                    close = self.match[j]
                    args = [string_value(x) for x in self.toks[j + 1:close] if x.kind == STRING]
                    end = close
                    j = close + 1
                annotations.append(AnnotationFact(name, args, self.span(i, end)))
                i = j
                continue
            if t.kind == IDENT and t.text in MODIFIERS:
                mods.add(t.text)
                i += 1
                continue
            if t.is_word("non") and self.is_op(i + 1, "-") and self.is_word(i + 2, "sealed"):
                i += 3
                continue
            break
        return annotations, mods, i

    def parse_member_or_type(self, i: int, limit: int, package: str, owner: Optional[TypeDecl],
                             out_types: List[TypeDecl], top_level: bool = False) -> int:
        """Parse one declaration starting at ``i``; returns the index after it."""
        start = i
        t = self.toks[i]
        if t.is_op(";"):
            return i + 1
        if t.is_op("{") or (t.is_word("static") and self.is_op(i + 1, "{")):
            k = i if t.is_op("{") else i + 1
            self.diag(t, "initializer-block", "initializer block treated as opaque")
            return self.match[k] + 1
        annotations, mods, i = self.parse_modifiers(i, limit)
        if i >= limit:
            return limit
        t = self.toks[i]
        if t.kind == IDENT and t.text in _TYPE_KINDS:
            return self.parse_type(start, i, annotations, mods, package, owner, out_types)
        if t.is_op("@") and self.is_word(i + 1, "interface"):
            self.diag(t, "opaque-construct", "annotation type declaration skipped")
            return self.skip_statement(i, limit)
        if t.is_word("record") and self.is_ident(i + 1) and (self.is_op(i + 2, "(") or self.is_op(i + 2, "<")):
            self.diag(t, "opaque-construct", "record declaration skipped")
            return self.skip_statement(i, limit)
        if owner is None:
            self.diag(t, "opaque-construct", f"unexpected top-level token {t.text!r}")
            return self.skip_statement(i, limit)
        return self.parse_member(start, i, annotations, mods, owner, limit)

    def parse_type(self, start: int, i: int, annotations: List[AnnotationFact], mods: Set[str],
                   package: str, owner: Optional[TypeDecl], out_types: List[TypeDecl]) -> int:
        kind = self.toks[i].text
        if not self.is_ident(i + 1):
            self.diag(self.toks[i], "opaque-construct", f"{kind} without a name")
            return self.skip_statement(i, len(self.toks))
        name = self.toks[i + 1].text
        j = i + 2
        if self.is_op(j, "<"):
            j = self.skip_angles(j) or j + 1
        supertypes: List[str] = []
        while j < len(self.toks) and not self.is_op(j, "{"):
            t = self.toks[j]
            if t.kind == IDENT and t.text in ("extends", "implements", "permits"):
                collecting = t.text != "permits"
                j += 1
                while True:
                    while self.is_op(j, "@"):
                        _, _, j = self.parse_modifiers(j, len(self.toks))
                    end = self.type_ref_end(j)
                    if end is None:
                        break
                    if collecting:
                        supertypes.append(strip_generics(self.compact(j, end - 1)))
                    j = end
                    if self.is_op(j, ","):
                        j += 1
                        continue
                    break
                continue
            j += 1
        if j >= len(self.toks):
            self.diag(self.toks[i], "opaque-construct", f"{kind} {name} has no body")
            return len(self.toks)
        open_idx, close_idx = j, self.match[j]

        if owner is None:
            qualified = f"{package}.{name}" if package else name
            visibility = _visibility(mods, "package")
        else:
            qualified = f"{owner.qualified_name}.{name}"
            visibility = _visibility(mods, "public" if owner.kind == "interface" else "package")
        decl = TypeDecl(
            name=name,
            qualified_name=qualified,
            kind=kind,
            visibility=visibility,
            annotations=annotations,
            fields=[],
            methods=[],
            supertypes=supertypes,
            span=self.span(start, close_idx),
            header_span=self.span(start, open_idx - 1) if open_idx > start else self.span(start, start),
            body_open_line=self.toks[open_idx].line,
            is_abstract="abstract" in mods or kind == "interface",
            enclosing=owner.qualified_name if owner else "",
        )
        out_types.append(decl)

        k = open_idx + 1
        if kind == "enum":
            k = self.skip_enum_constants(k, close_idx)
        while k < close_idx:
            k = self.parse_member_or_type(k, close_idx, package, decl, out_types)
        return close_idx + 1

    def skip_enum_constants(self, k: int, close: int) -> int:
        while k < close:
            t = self.toks[k]
            if t.is_op(";"):
                return k + 1
            if t.is_op("{"):
                self.diag(t, "anonymous-class", "enum constant body treated as opaque")
                k = self.match[k] + 1
                continue
            if t.is_op("("):
                k = self.match[k] + 1
                continue
            k += 1
        return close

    def parse_member(self, start: int, i: int, annotations: List[AnnotationFact], mods: Set[str],
                     owner: TypeDecl, limit: int) -> int:
        if self.is_op(i, "<"):
            k = self.skip_angles(i)
            if k is None:
                self.diag(self.toks[i], "opaque-construct", "unparseable type parameters")
                return self.skip_statement(i, limit)
            i = k
            while self.is_op(i, "@"):
                more, _, i = self.parse_modifiers(i, limit)
                annotations = annotations + more
        default_vis = "public" if owner.kind == "interface" else "package"
        visibility = _visibility(mods, default_vis)

        if self.is_ident(i) and self.is_op(i + 1, "("):
            name_tok = self.toks[i]
            if name_tok.text != owner.name:
                self.diag(name_tok, "opaque-construct", f"method {name_tok.text!r} without return type")
                return self.skip_statement(i, limit)
            return self.parse_method(start, i, i, annotations, mods, visibility, owner, "", limit, True)

        type_end = self.type_ref_end(i)
        if type_end is None or not self.is_ident(type_end):
            self.diag(self.toks[i], "opaque-construct", f"unrecognized member starting with {self.toks[i].text!r}")
            return self.skip_statement(i, limit)
        type_text = self.compact(i, type_end - 1)
        if self.is_op(type_end + 1, "("):
            return self.parse_method(start, i, type_end, annotations, mods, visibility, owner, type_text, limit, False)
        return self.parse_fields(start, i, type_end, mods, visibility, owner, type_text, limit)

    def parse_fields(self, start: int, type_start: int, j: int, mods: Set[str], visibility: str,
                     owner: TypeDecl, type_text: str, limit: int) -> int:
        declarators: List[Tuple[str, str]] = []
        while j < limit and self.is_ident(j):
            name = self.toks[j].text
            j += 1
            dims = ""
            while self.is_op(j, "[") and self.is_op(j + 1, "]"):
                dims += "[]"
                j += 2
            kind = "none"
            if self.is_op(j, "="):
                j += 1
                kind = "new_expression" if self.is_word(j, "new") else "other"
                while j < limit and not (self.is_op(j, ",") or self.is_op(j, ";")):
                    t = self.toks[j]
                    if t.is_word("new"):
                        self.check_anonymous(j, limit)
                    if t.kind == OP and t.text in "([{":
                        j = self.match[j] + 1
                        continue
                    j += 1
            declarators.append((name + dims, kind))
            if self.is_op(j, ","):
                j += 1
                continue
            break
        if not self.is_op(j, ";"):
            self.diag(self.tok(min(j, len(self.toks) - 1)), "opaque-construct", "malformed field declaration")
            return self.skip_statement(j, limit)
        span = self.span(start, j)
        type_span = self._type_span(type_start)
        for raw, kind in declarators:
            name = raw.replace("[]", "")
            extra = raw[len(name):]
            owner.fields.append(FieldDecl(
                name=name,
                declared_type=type_text + extra,
                is_static="static" in mods or owner.kind == "interface",
                is_final="final" in mods or owner.kind == "interface",
                is_volatile="volatile" in mods,
                initializer_kind=kind,
                span=span,
                visibility=visibility,
                type_span=type_span,
            ))
        return j + 1

    def _type_span(self, type_start: int) -> SourceSpan:
        end = self.type_ref_end(type_start)
        return self.span(type_start, (end or type_start + 1) - 1)

    def check_anonymous(self, new_idx: int, limit: int) -> Optional[Tuple[int, int]]:
        """Range of an anonymous class body following ``new T(...)``, if present."""
        end = self.type_ref_end(new_idx + 1)
        if end is None or not self.is_op(end, "("):
            return None
        after = self.match[end] + 1
        if after < limit and self.is_op(after, "{"):
            return after, self.match[after]
        return None

    def parse_method(self, start: int, type_start: int, name_idx: int, annotations: List[AnnotationFact],
                     mods: Set[str], visibility: str, owner: TypeDecl, return_type: str, limit: int,
                     is_ctor: bool) -> int:
        name = self.toks[name_idx].text
        lparen = name_idx + 1
        rparen = self.match[lparen]
        params, param_spans = self.parse_params(lparen + 1, rparen)
        j = rparen + 1
        while self.is_op(j, "[") and self.is_op(j + 1, "]"):
            j += 2
        if self.is_word(j, "throws"):
            while j < limit and not (self.is_op(j, "{") or self.is_op(j, ";")):
                j += 1
        if self.is_word(j, "default"):
            j = self.skip_statement(j, limit) - 1
        header = self.span(start, rparen)
        sync_span = None
        if "synchronized" in mods:
            for k in range(start, name_idx):
                if self.toks[k].is_word("synchronized"):
                    sync_span = self.span(k, k)
                    break
        body_span = None
        facts = MethodFacts()
        if self.is_op(j, "{"):
            close = self.match[j]
            body_span = self.span(j, close)
            scanner = _BodyScanner(self, j + 1, close, owner, params, param_spans)
            facts = scanner.scan()
            end = close
        elif self.is_op(j, ";"):
            end = j
        else:
            self.diag(self.toks[name_idx], "opaque-construct", f"method {name} has neither body nor ';'")
            return self.skip_statement(j, limit)
        param_key = ",".join(strip_generics(p[1]).replace("...", "[]") for p in params)
        decl = MethodDecl(
            name=name,
            visibility=visibility,
            is_static="static" in mods,
            is_synchronized="synchronized" in mods,
            parameters=params,
            return_type="" if is_ctor else return_type,
            annotations=annotations,
            facts=facts,
            signature_key=f"{owner.qualified_name}#{name}({param_key})",
            span=self.span(start, end),
            header_span=header,
            body_span=body_span,
            is_constructor=is_ctor,
            is_abstract=body_span is None,
            synchronized_span=sync_span,
            owner=owner.qualified_name,
        )
        if any(m.signature_key == decl.signature_key for m in owner.methods):
            self.diag(self.toks[name_idx], "duplicate-signature", f"duplicate method {decl.signature_key} skipped")
        else:
            owner.methods.append(decl)
        return end + 1

    def parse_params(self, a: int, b: int) -> Tuple[List[Tuple[str, str]], List[SourceSpan]]:
        params: List[Tuple[str, str]] = []
        spans: List[SourceSpan] = []
        j = a
        while j < b:
            _, _, j = self.parse_modifiers(j, b)
            end = self.type_ref_end(j)
            if end is None or end >= b + 1:
                self.diag(self.tok(j), "opaque-construct", "unparseable parameter list")
                return params, spans
            if self.is_word(end, "this"):  # receiver parameter
                j = end + 1
            elif self.is_ident(end):
                ptype = self.compact(j, end - 1)
                pname = self.toks[end].text
                k = end + 1
                while self.is_op(k, "[") and self.is_op(k + 1, "]"):
                    ptype += "[]"
                    k += 2
                params.append((pname, ptype))
                spans.append(self.span(j, end - 1))
                j = k
            else:
                self.diag(self.tok(j), "opaque-construct", "unparseable parameter")
                return params, spans
            while j < b and not self.is_op(j, ","):
                j += 1
            j += 1
        return params, spans


class _BodyScanner:
    """Extracts MethodFacts from the tokens strictly between a body's braces."""

    def __init__(self, parser: _Parser, lo: int, hi: int, owner: TypeDecl,
                 params: Sequence[Tuple[str, str]], param_spans: Sequence[SourceSpan]):
        self.p = parser
        self.lo = lo
        self.hi = hi
        self.owner = owner
        self.params = {name: (ptype, span) for (name, ptype), span in zip(params, param_spans)}
        self.excluded: List[Tuple[int, int]] = []
        self.loop_ranges: List[Tuple[int, int]] = []
        self.loops: List[int] = []
        self.do_tails: Set[int] = set()
        self.locals: List[Tuple[int, str, str, SourceSpan]] = []

    def in_excluded(self, k: int) -> bool:
        return any(a <= k <= b for a, b in self.excluded)

    def depth(self, k: int) -> int:
        return sum(1 for a, b in self.loop_ranges if a <= k <= b)

    def stmt_end(self, s: int) -> int:
        """Index of the last token of the statement beginning at ``s``."""
        p = self.p
        last = self.hi - 1
        if s > last:
            return last
        t = p.toks[s]
        if t.is_op("{"):
            return p.match[s]
        if t.is_op(";"):
            return s
        if t.kind == IDENT:
            word = t.text
            if word == "if" and p.is_op(s + 1, "("):
                e = self.stmt_end(p.match[s + 1] + 1)
                if p.is_word(e + 1, "else"):
                    return self.stmt_end(e + 2)
                return e
            if word in ("for", "while", "synchronized", "switch") and p.is_op(s + 1, "("):
                return self.stmt_end(p.match[s + 1] + 1)
            if word == "do":
                e = self.stmt_end(s + 1)
                if p.is_word(e + 1, "while") and p.is_op(e + 2, "("):
                    k = p.match[e + 2] + 1
                    return k if p.is_op(k, ";") else k - 1
                return e
            if word == "try":
                k = s + 1
                if p.is_op(k, "("):
                    k = p.match[k] + 1
                if not p.is_op(k, "{"):
                    return self._to_semicolon(s)
                e = p.match[k]
                while p.is_word(e + 1, "catch") and p.is_op(e + 2, "("):
                    blk = p.match[e + 2] + 1
                    if not p.is_op(blk, "{"):
                        break
                    e = p.match[blk]
                if p.is_word(e + 1, "finally") and p.is_op(e + 2, "{"):
                    e = p.match[e + 2]
                return e
            if word not in KEYWORDS and p.is_op(s + 1, ":"):
                return self.stmt_end(s + 2)
        return self._to_semicolon(s)

    def _to_semicolon(self, s: int) -> int:
        p = self.p
        j = s
        while j < self.hi:
            t = p.toks[j]
            if t.kind == OP:
                if t.text == ";":
                    return j
                if t.text in "([{":
                    j = p.match[j] + 1
                    continue
            j += 1
        return self.hi - 1

    def structure(self) -> None:
        p = self.p
        for k in range(self.lo, self.hi):
            t = p.toks[k]
            if t.kind != IDENT:
                continue
            if t.text == "new":
                anon = p.check_anonymous(k, self.hi)
                if anon and not self.in_excluded(anon[0]):
                    p.diag(p.toks[anon[0]], "anonymous-class", "anonymous class body treated as opaque")
                    self.excluded.append(anon)
            elif t.text in ("class", "interface", "enum", "record") and not p.is_op(k - 1, ".") \
                    and p.is_ident(k + 1) and (t.text != "record" or p.is_op(k + 2, "(") or p.is_op(k + 2, "<")):
                j = k + 2
                while j < self.hi and not p.is_op(j, "{"):
                    j += 1
                if j < self.hi and not self.in_excluded(k):
                    p.diag(t, "opaque-construct", f"local {t.text} {p.toks[k + 1].text} treated as opaque")
                    self.excluded.append((k, p.match[j]))
        for k in range(self.lo, self.hi):
            t = p.toks[k]
            if t.kind != IDENT or self.in_excluded(k):
                continue
            if t.text in ("for", "while") and p.is_op(k + 1, "(") and k not in self.do_tails:
                body = p.match[k + 1] + 1
                self.loops.append(k)
                self.loop_ranges.append((body, self.stmt_end(body)))
            elif t.text == "do":
                end = self.stmt_end(k + 1)
                self.loops.append(k)
                self.loop_ranges.append((k + 1, end))
                if p.is_word(end + 1, "while"):
                    self.do_tails.add(end + 1)

    def lookup(self, name: str, before: int) -> Tuple[str, Optional[SourceSpan]]:
        for k, lname, ltype, span in reversed(self.locals):
            if k < before and lname == name:
                return ltype, span
        if name in self.params:
            ptype, span = self.params[name]
            return ptype, span
        return self.field_type(name)

    def field_type(self, name: str) -> Tuple[str, Optional[SourceSpan]]:
        f = self.owner.field_named(name)
        if f is not None:
            return f.declared_type, f.type_span
        return "", None

    def note_local(self, k: int) -> None:
        """Record ``Type name`` declarations so receivers can be typed textually."""
        p = self.p
        prev = p.tok(k - 1)
        if prev is None or not ((prev.kind == OP and prev.text in "{};(,:") or prev.is_word("final")):
            return
        end = p.type_ref_end(k)
        if end is None or end >= self.hi or not p.is_ident(end):
            return
        after = p.tok(end + 1)
        if after is None or after.kind != OP or after.text not in ("=", ";", ":", ",", ")"):
            return
        type_text = p.compact(k, end - 1)
        if type_text == "var":
            # ``var x = new T(...)``: take T; any other initializer leaves x untyped
            new_end = p.type_ref_end(end + 3) if after.text == "=" and p.is_word(end + 2, "new") else None
            if new_end is None:
                return
            type_text = p.compact(end + 3, new_end - 1)
        self.locals.append((end, p.toks[end].text, type_text, p.span(k, end - 1)))

    def receiver_of(self, k: int) -> Tuple[str, Optional[SourceSpan], int]:
        """(type hint, declaration span, first token index) for the call whose name is at ``k``."""
        p = self.p
        if not p.is_op(k - 1, "."):
            return self.owner.name, None, k
        r = p.tok(k - 2)
        if r is None:
            return "", None, k
        if r.is_word("this"):
            return self.owner.name, None, k - 2
        if r.is_word("super"):
            return (self.owner.supertypes[0] if self.owner.supertypes else ""), None, k - 2
        if r.kind != IDENT or r.text in KEYWORDS:
            return "", None, k
        if p.is_op(k - 3, "."):
            if p.is_word(k - 4, "this") and not p.is_op(k - 5, "."):
                ftype, span = self.field_type(r.text)
                return strip_generics(ftype), span, k - 4
            return (r.text if _is_type_like(r.text) else ""), None, k - 2
        ltype, span = self.lookup(r.text, k)
        if ltype:
            return strip_generics(ltype), span, k - 2
        if _is_type_like(r.text):
            return r.text, None, k - 2
        return "", None, k - 2

    def scan(self) -> MethodFacts:
        p = self.p
        self.structure()
        facts = MethodFacts()
        ctor_names: Set[int] = set()
        for k in range(self.lo, self.hi):
            if self.in_excluded(k):
                continue
            t = p.toks[k]
            if t.kind != IDENT:
                continue
            word = t.text
            if word not in KEYWORDS or word in PRIMITIVES:
                self.note_local(k)
            if word == "new":
                end = p.type_ref_end(k + 1)
                if end is None or not p.is_op(end, "("):
                    continue
                for x in range(k + 1, end):
                    ctor_names.add(x)
                close = p.match[end]
                type_name = strip_generics(p.compact(k + 1, end - 1))
                facts.allocations.append(AllocFact(
                    type_name=type_name,
                    loop_depth=self.depth(k),
                    span=p.span(k, close),
                    arg_text=p.source(end + 1, close - 1),
                    arg_count=self.arg_count(end, close),
                ))
                continue
            if word in ("if", "switch") and p.is_op(k + 1, "("):
                facts.branch_count += 1
                continue
            if word == "synchronized" and p.is_op(k + 1, "("):
                facts.sync_blocks.append(p.span(k, self.stmt_end(k)))
                continue
            if word in _CALL_EXCLUDED or word in ("this", "super") or k in ctor_names:
                continue
            if not p.is_op(k + 1, "(") or p.is_op(k - 1, "@"):
                continue
            close = p.match[k + 1]
            receiver, decl_span, first = self.receiver_of(k)
            implicit = not p.is_op(k - 1, ".") or (p.is_word(k - 2, "this") and not p.is_op(k - 3, "."))
            facts.calls.append(CallFact(
                callee=word,
                receiver=receiver,
                arg_count=self.arg_count(k + 1, close),
                loop_depth=self.depth(k),
                span=p.span(first, close),
                receiver_decl=decl_span,
                implicit=implicit,
            ))
        facts.loop_count = len(self.loops)
        facts.max_loop_depth = max((self.depth(k) + 1 for k in self.loops), default=0)
        return facts

    def arg_count(self, lparen: int, rparen: int) -> int:
        p = self.p
        if rparen == lparen + 1:
            return 0
        count = 1
        j = lparen + 1
        while j < rparen:
            t = p.toks[j]
            if t.kind == OP:
                if t.text == ",":
                    count += 1
                elif t.text in "([{":
                    j = p.match[j] + 1
                    continue
                elif t.text == "<":
                    k = p.skip_angles(j)
                    if k is not None and k <= rparen:
                        j = k
                        continue
            j += 1
        return count


def _visibility(mods: Set[str], default: str) -> str:
    for v in ("public", "protected", "private"):
        if v in mods:
            return v
    return default


def parse_unit(source_text: str, path: str) -> SourceUnit:
    """Parse one file. Never raises for syntax problems; see ``SourceUnit.diagnostics``."""
    return _Parser(source_text, normalize_path(path)).parse()


def parse_bytes(data: bytes, path: str) -> SourceUnit:
    """Decode UTF-8 (BOM tolerated) then parse; raises UnreadableSource on bad encoding."""
    from ..errors import UnreadableSource

    try:
        text = data.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise UnreadableSource(f"{path}: {exc}") from exc
    unit = parse_unit(text, path)
    unit.digest = hashlib.sha256(data).hexdigest()
    return unit
