"""Tokenizer for Java-style source.

Comments are dropped. String, text-block and char literals become single
tokens so nothing inside them can be mistaken for code.
"""

from __future__ import annotations

import bisect
import re
from dataclasses import dataclass
from typing import List, Tuple

IDENT, STRING, CHAR, NUMBER, OP = "ident", "string", "char", "number", "op"

KEYWORDS = frozenset("""
abstract assert boolean break byte case catch char class const continue default do double
else enum extends final finally float for goto if implements import instanceof int interface
long native new package private protected public return short static strictfp super switch
synchronized this throw throws transient try void volatile while true false null
""".split())

# ``var``, ``record`` and ``yield`` are contextual and stay ordinary identifiers.
PRIMITIVES = frozenset("boolean byte char short int long float double void".split())

_IDENT_RE = re.compile(r"[A-Za-z_$][A-Za-z0-9_$]*")
_NUMBER_RE = re.compile(
    r"0[xX][0-9a-fA-F_]+[lL]?|0[bB][01_]+[lL]?|"
    r"(?:\d[\d_]*\.?[\d_]*|\.\d[\d_]*)(?:[eE][+-]?\d+)?[fFdDlL]?"
)
_MULTI_OPS = ("...", "->", "::", "==", "!=", "<=", ">=", "&&", "||", "++", "--",
              "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=")


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    start: int  # character offsets, end exclusive
    end: int
    line: int
    col: int
    end_line: int
    end_col: int  # inclusive

    def is_op(self, text: str) -> bool:
        return self.kind == OP and self.text == text

    def is_word(self, text: str) -> bool:
        return self.kind == IDENT and self.text == text


class LexError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(message)
        self.line = line
        self.col = col


class LineIndex:
    def __init__(self, text: str):
        self.starts = [0]
        for i, ch in enumerate(text):
            if ch == "\n":
                self.starts.append(i + 1)

    def position(self, offset: int) -> Tuple[int, int]:
        """1-based (line, col) of a character offset; tabs count as one column."""
        line = bisect.bisect_right(self.starts, offset) - 1
        return line + 1, offset - self.starts[line] + 1


def _scan_quoted(text: str, i: int, quote: str) -> int:
    """Index just past the closing quote of a literal opened at ``i``."""
    j = i + 1
    n = len(text)
    while j < n:
        ch = text[j]
        if ch == "\\":
            j += 2
            continue
        if ch == quote:
            return j + 1
        if ch == "\n":
            return -1
        j += 1
    return -1


def tokenize(text: str) -> List[Token]:
    index = LineIndex(text)
    tokens: List[Token] = []
    i = 0
    n = len(text)

    def emit(kind: str, start: int, end: int) -> None:
        line, col = index.position(start)
        end_line, end_col = index.position(max(start, end - 1))
        tokens.append(Token(kind, text[start:end], start, end, line, col, end_line, end_col))

    while i < n:
        ch = text[i]
        if ch in " \t\r\n\f":
            i += 1
            continue
        if text.startswith("//", i):
            nl = text.find("\n", i)
            i = n if nl < 0 else nl + 1
            continue
        if text.startswith("/*", i):
            close = text.find("*/", i + 2)
            if close < 0:
                raise LexError("unterminated comment", *index.position(i))
            i = close + 2
            continue
        if text.startswith('"""', i):
            close = i + 3
            while True:
                close = text.find('"""', close)
                if close < 0:
                    raise LexError("unterminated text block", *index.position(i))
                if text[close - 1] != "\\":
                    break
                close += 1
            emit(STRING, i, close + 3)
            i = close + 3
            continue
        if ch == '"' or ch == "'":
            end = _scan_quoted(text, i, ch)
            if end < 0:
                raise LexError("unterminated literal", *index.position(i))
            emit(STRING if ch == '"' else CHAR, i, end)
            i = end
            continue
        m = _IDENT_RE.match(text, i)
        if m:
            emit(IDENT, i, m.end())
            i = m.end()
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            m = _NUMBER_RE.match(text, i)
            end = m.end() if m and m.end() > i else i + 1
            emit(NUMBER, i, end)
            i = end
            continue
        for op in _MULTI_OPS:
            if text.startswith(op, i):
                emit(OP, i, i + len(op))
                i += len(op)
                break
        else:
            emit(OP, i, i + 1)
            i += 1
    return tokens


def string_value(token: Token) -> str:
    """Unquoted value of a string literal token (escapes left as written, except \\" and \\\\)."""
    raw = token.text
    if raw.startswith('"""'):
        body = raw[3:-3]
    else:
        body = raw[1:-1]
    return body.replace('\\"', '"').replace("\\\\", "\\")
