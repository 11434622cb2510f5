"""Structural representation produced by the Java-subset frontend."""

from __future__ import annotations

import hashlib
import posixpath
import re
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

Visibility = str  # "public" | "package" | "protected" | "private"

_GENERIC_RE = re.compile(r"<[^<>]*>")


def strip_generics(type_name: str) -> str:
    """``Map<String, List<X>>[]`` -> ``Map[]``; whitespace removed."""
    text = type_name.replace(" ", "")
    prev = None
    while prev != text:
        prev = text
        text = _GENERIC_RE.sub("", text)
    return text


def simple_type_name(type_name: str) -> str:
    """Last dotted segment with generics, arrays and varargs removed."""
    text = strip_generics(type_name).replace("...", "").replace("[]", "")
    return text.rsplit(".", 1)[-1]


def normalize_path(path: str) -> str:
    norm = posixpath.normpath(path.replace("\\", "/"))
    if norm.startswith("../") or norm == ".." or norm.startswith("/"):
        raise ValueError(f"path escapes repository: {path!r}")
    return norm


@dataclass(frozen=True)
class SourceSpan:
    path: str
    start_line: int
    end_line: int
    start_col: int
    end_col: int

    def __post_init__(self):
        if self.start_line > self.end_line:
            raise ValueError(f"start_line {self.start_line} > end_line {self.end_line}")
        if self.start_col < 1 or self.end_col < 1:
            raise ValueError("columns are 1-based")

    def slice(self, text: str) -> str:
        """Source text covered by this span (end column inclusive)."""
        lines = text.splitlines(keepends=True)
        if self.start_line == self.end_line:
            return lines[self.start_line - 1][self.start_col - 1:self.end_col]
        parts = [lines[self.start_line - 1][self.start_col - 1:]]
        parts.extend(lines[self.start_line:self.end_line - 1])
        parts.append(lines[self.end_line - 1][:self.end_col])
        return "".join(parts)

    def sort_key(self) -> Tuple[str, int, int, int, int]:
        return (self.path, self.start_line, self.start_col, self.end_line, self.end_col)

    def __str__(self) -> str:
        return f"{self.path}:{self.start_line}:{self.start_col}"


@dataclass(frozen=True)
class Diagnostic:
    path: str
    line: int
    col: int
    code: str
    message: str
    severity: str = "warning"

    def __str__(self) -> str:
        return f"{self.path}:{self.line}:{self.col}: {self.code}: {self.message}"


@dataclass
class AnnotationFact:
    name: str
    string_arguments: List[str]
    span: SourceSpan

    @property
    def simple_name(self) -> str:
        return self.name.rsplit(".", 1)[-1]


@dataclass
class CallFact:
    callee: str
    receiver: str  # textual type hint, "" when unknown
    arg_count: int
    loop_depth: int
    span: SourceSpan
    # declaration that supplied ``receiver`` (field, local or parameter), if any
    receiver_decl: Optional[SourceSpan] = None
    implicit: bool = False  # unqualified or ``this.`` call on the enclosing instance


@dataclass
class AllocFact:
    type_name: str
    loop_depth: int
    span: SourceSpan
    arg_text: str = ""
    arg_count: int = 0


@dataclass
class MethodFacts:
    calls: List[CallFact] = field(default_factory=list)
    allocations: List[AllocFact] = field(default_factory=list)
    sync_blocks: List[SourceSpan] = field(default_factory=list)
    loop_count: int = 0
    branch_count: int = 0
    max_loop_depth: int = 0


@dataclass
class FieldDecl:
    name: str
    declared_type: str
    is_static: bool
    is_final: bool
    is_volatile: bool
    initializer_kind: str  # "none" | "new_expression" | "other"
    span: SourceSpan
    visibility: Visibility = "package"
    type_span: Optional[SourceSpan] = None


@dataclass
class MethodDecl:
    name: str
    visibility: Visibility
    is_static: bool
    is_synchronized: bool
    parameters: List[Tuple[str, str]]
    return_type: str
    annotations: List[AnnotationFact]
    facts: MethodFacts
    signature_key: str
    span: SourceSpan
    header_span: Optional[SourceSpan] = None
    body_span: Optional[SourceSpan] = None
    is_constructor: bool = False
    is_abstract: bool = False
    synchronized_span: Optional[SourceSpan] = None
    owner: str = ""  # qualified name of the declaring type

    @property
    def arity(self) -> int:
        return len(self.parameters)

    @property
    def is_varargs(self) -> bool:
        return bool(self.parameters) and self.parameters[-1][1].endswith("...")

    def accepts(self, arg_count: int) -> bool:
        if self.is_varargs:
            return arg_count >= self.arity - 1
        return arg_count == self.arity


@dataclass
class TypeDecl:
    name: str
    qualified_name: str
    kind: str  # "class" | "interface" | "enum"
    visibility: Visibility
    annotations: List[AnnotationFact]
    fields: List[FieldDecl]
    methods: List[MethodDecl]
    supertypes: List[str]
    span: SourceSpan
    header_span: Optional[SourceSpan] = None
    body_open_line: int = 0
    is_abstract: bool = False
    enclosing: str = ""  # qualified name of enclosing type, "" for top level

    def field_named(self, name: str) -> Optional[FieldDecl]:
        for f in self.fields:
            if f.name == name:
                return f
        return None


@dataclass
class SourceUnit:
    span: SourceSpan
    package_name: str
    imports: List[str]
    types: List[TypeDecl]
    digest: str = ""
    diagnostics: List[Diagnostic] = field(default_factory=list)

    @property
    def path(self) -> str:
        return self.span.path

    @property
    def ok(self) -> bool:
        """False when the file is structurally broken (unbalanced braces, unterminated literal)."""
        return not any(d.severity == "error" for d in self.diagnostics)

    def all_types(self) -> Iterator[TypeDecl]:
        return iter(self.types)


@dataclass
class CodeModel:
    root: str
    units: List[SourceUnit]
    diagnostics: List[Diagnostic] = field(default_factory=list)

    def __post_init__(self):
        self._reindex()

    def _reindex(self) -> None:
        self._types: Dict[str, TypeDecl] = {}
        self._type_unit: Dict[str, SourceUnit] = {}
        self._methods: Dict[str, MethodDecl] = {}
        self._by_simple: Dict[str, List[TypeDecl]] = {}
        self._by_method_name: Dict[str, List[MethodDecl]] = {}
        for unit in self.units:
            for t in unit.types:
                self._types[t.qualified_name] = t
                self._type_unit[t.qualified_name] = unit
                self._by_simple.setdefault(t.name, []).append(t)
                for m in t.methods:
                    self._methods[m.signature_key] = m
                    self._by_method_name.setdefault(m.name, []).append(m)

    @property
    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for unit in sorted(self.units, key=lambda u: u.path):
            h.update(unit.path.encode("utf-8") + b"\0" + unit.digest.encode("ascii") + b"\n")
        return h.hexdigest()

    def types(self) -> List[TypeDecl]:
        return [t for u in self.units for t in u.types]

    def methods(self) -> List[MethodDecl]:
        return [m for t in self.types() for m in t.methods]

    def type(self, qualified_name: str) -> Optional[TypeDecl]:
        return self._types.get(qualified_name)

    def unit_of(self, qualified_name: str) -> Optional[SourceUnit]:
        return self._type_unit.get(qualified_name)

    def unit_at(self, path: str) -> Optional[SourceUnit]:
        for u in self.units:
            if u.path == path:
                return u
        return None

    def method(self, signature_key: str) -> Optional[MethodDecl]:
        return self._methods.get(signature_key)

    def methods_named(self, name: str) -> List[MethodDecl]:
        return list(self._by_method_name.get(name, ()))

    def types_named(self, simple: str) -> List[TypeDecl]:
        return list(self._by_simple.get(simple, ()))

    def resolve_type(self, name: str, context: Optional[SourceUnit] = None) -> List[TypeDecl]:
        """Textual resolution of a type reference to known declarations.

        Dotted names match qualified names exactly or by suffix; simple names
        prefer the context unit's package and explicit imports, falling back
        to every type with that simple name.
        """
        name = strip_generics(name).replace("[]", "").replace("...", "")
        if not name:
            return []
        if "." in name:
            exact = self._types.get(name)
            if exact:
                return [exact]
            tail = name.rsplit(".", 1)[-1]
            return [t for t in self._by_simple.get(tail, ()) if t.qualified_name.endswith("." + name)
                    or t.qualified_name == name]
        candidates = self._by_simple.get(name, [])
        if len(candidates) <= 1 or context is None:
            return list(candidates)
        for imp in context.imports:
            if imp.endswith("." + name) and imp in self._types:
                return [self._types[imp]]
        same_pkg = [t for t in candidates if self._type_unit[t.qualified_name].package_name == context.package_name]
        return same_pkg or list(candidates)

    def supertypes_closure(self, decl: TypeDecl) -> List[TypeDecl]:
        """``decl`` followed by every textually resolvable ancestor, cycle-safe."""
        seen = {decl.qualified_name}
        order = [decl]
        i = 0
        while i < len(order):
            current = order[i]
            unit = self._type_unit.get(current.qualified_name)
            for sup in current.supertypes:
                for resolved in self.resolve_type(sup, unit):
                    if resolved.qualified_name not in seen:
                        seen.add(resolved.qualified_name)
                        order.append(resolved)
            i += 1
        return order

    def owner_of(self, method: MethodDecl) -> TypeDecl:
        return self._types[method.owner]

    def replace_unit(self, unit: SourceUnit) -> "CodeModel":
        """New model with the unit at ``unit.path`` swapped in."""
        units = [unit if u.path == unit.path else u for u in self.units]
        return CodeModel(root=self.root, units=units, diagnostics=list(self.diagnostics))
