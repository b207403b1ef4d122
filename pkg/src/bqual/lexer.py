"""Tokenizer for the bounded machine language.

Comments come in two forms, ``(* ... *)`` and ``// ...`` to end of line;
both are dropped from the token stream but their spans are remembered so
that the word count can be taken over comment-free text.
"""

from __future__ import annotations

from dataclasses import dataclass

KEYWORDS = frozenset(
    {
        "MACHINE",
        "SETS",
        "VARIABLES",
        "INVARIANT",
        "INITIALISATION",
        "OPERATIONS",
        "PRE",
        "SELECT",
        "WHEN",
        "ANY",
        "WHERE",
        "THEN",
        "END",
        "skip",
        "not",
        "or",
    }
)

# Longest first so ':=' wins over ':' and '<=' over '<'.
_SYMBOLS = (
    ":=",
    "..",
    "||",
    "/=",
    "<=",
    ">=",
    "<",
    ">",
    "=",
    "&",
    ":",
    ";",
    ",",
    "+",
    "-",
    "*",
    "(",
    ")",
    "{",
    "}",
)


class LexError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Token:
    kind: str  # "keyword" | "ident" | "int" | one of _SYMBOLS | "eof"
    text: str
    line: int
    column: int

    def __repr__(self):
        return f"{self.kind}({self.text})@{self.line}:{self.column}"


def strip_comments(source: str) -> str:
    """Blank out every comment (spaces, newlines kept) so token positions
    in the result match positions in the original source."""
    out: list[str] = []
    i, n = 0, len(source)
    line, col = 1, 1

    def blank(upto: int) -> None:
        nonlocal i, line, col
        while i < upto:
            if source[i] == "\n":
                out.append("\n")
                line += 1
                col = 1
            else:
                out.append(" ")
                col += 1
            i += 1

    while i < n:
        ch = source[i]
        if ch == "(" and source.startswith("(*", i):
            start_line, start_col = line, col
            end = source.find("*)", i + 2)
            if end < 0:
                raise LexError("unterminated comment", start_line, start_col)
            blank(end + 2)
        elif ch == "/" and source.startswith("//", i):
            end = source.find("\n", i)
            blank(n if end < 0 else end)
        else:
            out.append(ch)
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1
    return "".join(out)


def word_count(source: str) -> int:
    """Number of whitespace-delimited chunks after comment removal."""
    return len(strip_comments(source).split())


def tokenize(source: str) -> list[Token]:
    """Produce the token list for ``source``; raises LexError on any
    character outside the language."""
    text = strip_comments(source)
    tokens: list[Token] = []
    i, n = 0, len(text)
    line, col = 1, 1

    def advance(k: int) -> None:
        nonlocal i, line, col
        for _ in range(k):
            if text[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        ch = text[i]
        if ch.isspace():
            advance(1)
            continue
        if ch.isdigit():
            start_line, start_col = line, col
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(Token("int", text[i:j], start_line, start_col))
            advance(j - i)
            continue
        if ch.isalpha() or ch == "_":
            start_line, start_col = line, col
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = "keyword" if word in KEYWORDS else "ident"
            tokens.append(Token(kind, word, start_line, start_col))
            advance(j - i)
            continue
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                tokens.append(Token(sym, sym, line, col))
                advance(len(sym))
                break
        else:
            raise LexError(f"illegal character {ch!r}", line, col)
    tokens.append(Token("eof", "", line, col))
    return tokens
