"""Java-subset frontend: source text to CodeModel."""

from .model import (
    AllocFact,
    AnnotationFact,
    CallFact,
    CodeModel,
    Diagnostic,
    FieldDecl,
    MethodDecl,
    MethodFacts,
    SourceSpan,
    SourceUnit,
    TypeDecl,
    simple_type_name,
    strip_generics,
)
from .parser import parse_bytes, parse_unit
from .repository import discover_sources, parse_repository

__all__ = [
    "AllocFact", "AnnotationFact", "CallFact", "CodeModel", "Diagnostic", "FieldDecl", "MethodDecl",
    "MethodFacts", "SourceSpan", "SourceUnit", "TypeDecl", "discover_sources", "parse_bytes",
    "parse_repository", "parse_unit", "simple_type_name", "strip_generics",
]
