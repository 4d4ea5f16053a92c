"""Tokenizer for the Solidity grammar subset.

Tokens carry exact character spans into the original source; comments and
whitespace are skipped but never lost, because all rewriting happens through
spans against the original text.
"""

from __future__ import annotations

from dataclasses import dataclass

IDENT = "ident"
NUMBER = "number"
STRING = "string"
PUNCT = "punct"
EOF = "eof"

# longest-match operator table, ordered by length
_PUNCT3 = (">>=", "<<=", "**=")
_PUNCT2 = ("++", "--", "**", "==", "!=", "<=", ">=", "&&", "||", "+=", "-=",
           "*=", "/=", "%=", "|=", "&=", "^=", "<<", ">>", "=>", "->", ":=")
_PUNCT1 = set("+-*/%!~&|^<>=()[]{};,.?:")

KEYWORDS = frozenset({
    "abstract", "address", "anonymous", "as", "assembly", "bool", "break",
    "bytes", "calldata", "catch", "constant", "constructor", "continue",
    "contract", "delete", "do", "else", "emit", "enum", "error", "event",
    "external", "fallback", "false", "for", "function", "if", "immutable",
    "import", "indexed", "interface", "internal", "is", "library", "mapping",
    "memory", "modifier", "new", "override", "payable", "pragma", "private",
    "public", "pure", "receive", "return", "returns", "revert", "storage",
    "string", "struct", "true", "try", "type", "unchecked", "using", "view",
    "virtual", "while",
})

UNIT_SUFFIXES = frozenset({
    "wei", "gwei", "ether", "seconds", "minutes", "hours", "days", "weeks",
})

_ELEMENTARY_BASE = {"bool", "address", "string", "bytes", "uint", "int", "byte"}


def is_elementary_type_name(name: str) -> bool:
    if name in _ELEMENTARY_BASE:
        return True
    for prefix, lo, hi, step in (("uint", 8, 256, 8), ("int", 8, 256, 8), ("bytes", 1, 32, 1)):
        if name.startswith(prefix) and name[len(prefix):].isdigit():
            n = int(name[len(prefix):])
            return lo <= n <= hi and n % step == 0
    return False


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    start: int
    end: int

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)


class LexError(Exception):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} at offset {pos}")
        self.pos = pos


def _scan_string(src: str, i: int) -> int:
    quote = src[i]
    j = i + 1
    while j < len(src):
        c = src[j]
        if c == "\\":
            j += 2
            continue
        if c == quote:
            return j + 1
        if c == "\n":
            break
        j += 1
    raise LexError("unterminated string literal", i)


def _scan_number(src: str, i: int) -> int:
    j = i
    if src.startswith("0x") or src.startswith("0X"):
        pass  # callers slice, handle below with full text
    if src[i] == "0" and i + 1 < len(src) and src[i + 1] in "xX":
        j = i + 2
        while j < len(src) and (src[j] in "0123456789abcdefABCDEF_"):
            j += 1
        return j
    while j < len(src) and (src[j].isdigit() or src[j] == "_"):
        j += 1
    if j < len(src) and src[j] == "." and j + 1 < len(src) and src[j + 1].isdigit():
        j += 1
        while j < len(src) and (src[j].isdigit() or src[j] == "_"):
            j += 1
    if j < len(src) and src[j] in "eE":
        k = j + 1
        if k < len(src) and src[k] in "+-":
            k += 1
        if k < len(src) and src[k].isdigit():
            j = k
            while j < len(src) and src[j].isdigit():
                j += 1
    return j


def tokenize(source: str) -> list[Token]:
    """Tokenize the whole source; raises LexError on malformed lexemes."""
    tokens: list[Token] = []
    i = 0
    n = len(source)
    while i < n:
        c = source[i]
        if c in " \t\r\n":
            i += 1
            continue
        if source.startswith("//", i):
            j = source.find("\n", i)
            i = n if j < 0 else j + 1
            continue
        if source.startswith("/*", i):
            j = source.find("*/", i + 2)
            if j < 0:
                raise LexError("unterminated block comment", i)
            i = j + 2
            continue
        if c.isalpha() or c == "_" or c == "$":
            j = i + 1
            while j < n and (source[j].isalnum() or source[j] in "_$"):
                j += 1
            text = source[i:j]
            # hex"..." / unicode"..." string forms lex as one token
            if text in ("hex", "unicode") and j < n and source[j] in "\"'":
                j = _scan_string(source, j)
                tokens.append(Token(STRING, source[i:j], i, j))
            else:
                tokens.append(Token(IDENT, text, i, j))
            i = j
            continue
        if c.isdigit():
            j = _scan_number(source, i)
            tokens.append(Token(NUMBER, source[i:j], i, j))
            i = j
            continue
        if c in "\"'":
            j = _scan_string(source, i)
            tokens.append(Token(STRING, source[i:j], i, j))
            i = j
            continue
        matched = False
        for group in (_PUNCT3, _PUNCT2):
            for op in group:
                if source.startswith(op, i):
                    tokens.append(Token(PUNCT, op, i, i + len(op)))
                    i += len(op)
                    matched = True
                    break
            if matched:
                break
        if matched:
            continue
        if c in _PUNCT1:
            tokens.append(Token(PUNCT, c, i, i + 1))
            i += 1
            continue
        raise LexError(f"unexpected character {c!r}", i)
    tokens.append(Token(EOF, "", n, n))
    return tokens


def line_col(source: str, pos: int) -> tuple[int, int]:
    """1-based line and column of a character offset."""
    line = source.count("\n", 0, pos) + 1
    last_nl = source.rfind("\n", 0, pos)
    return line, pos - last_nl
