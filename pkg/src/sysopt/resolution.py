"""Textual call resolution shared by dependency derivation and call-graph construction.

A call matches declared methods by simple name and arity. A receiver type
hint restricts candidates to the hinted class and its textual supertypes
(plus enclosing types for implicit ``this`` calls); a hint naming no known
class means the callee lives outside the repository and the call stays
unresolved. More than one candidate marks the resolution ambiguous.
"""

from __future__ import annotations

from typing import List, Set

from .frontend.model import AllocFact, CallFact, CodeModel, MethodDecl, TypeDecl


def _receiver_scope(model: CodeModel, caller: MethodDecl, receiver: str) -> Set[str]:
    owner = model.owner_of(caller)
    if receiver == owner.name:
        scope: List[TypeDecl] = []
        current = owner
        while current is not None:
            scope.extend(model.supertypes_closure(current))
            current = model.type(current.enclosing) if current.enclosing else None
        return {t.qualified_name for t in scope}
    unit = model.unit_of(owner.qualified_name)
    names: Set[str] = set()
    for t in model.resolve_type(receiver, unit):
        names.update(s.qualified_name for s in model.supertypes_closure(t))
    return names


def resolve_call(model: CodeModel, caller: MethodDecl, call: CallFact) -> List[MethodDecl]:
    candidates = [m for m in model.methods_named(call.callee)
                  if not m.is_constructor and m.accepts(call.arg_count)]
    if call.receiver:
        scope = _receiver_scope(model, caller, call.receiver)
        candidates = [m for m in candidates if m.owner in scope]
    return sorted(candidates, key=lambda m: m.signature_key)


def resolve_alloc(model: CodeModel, caller: MethodDecl, alloc: AllocFact) -> List[MethodDecl]:
    """Constructors of a known class invoked by ``new``; empty for library types or implicit constructors."""
    unit = model.unit_of(caller.owner)
    out = []
    for t in model.resolve_type(alloc.type_name, unit):
        out.extend(m for m in t.methods if m.is_constructor and m.accepts(alloc.arg_count))
    return sorted(out, key=lambda m: m.signature_key)
