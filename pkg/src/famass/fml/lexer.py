"""Tokenizer for FML documents."""

from __future__ import annotations

import re
from dataclasses import dataclass

from famass.fml.errors import FmlSyntaxError

IDENT_RE = re.compile(r"[A-Za-z0-9_.]+")
INT_RE = re.compile(r"-?\d+")
FLOAT_RE = re.compile(r"-?\d+\.\d+")

PUNCT = set("{}[](),=")


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT NUMBER STRING ARROW OP PUNCT NEWLINE EOF
    value: object
    line: int
    col: int
    text: str = ""

    def __str__(self) -> str:
        if self.kind == "NEWLINE":
            return "end of line"
        if self.kind == "EOF":
            return "end of file"
        return repr(self.text)


def _number(text: str):
    if INT_RE.fullmatch(text):
        return int(text)
    if FLOAT_RE.fullmatch(text):
        return float(text)
    return None


def tokenize(text: str) -> list[Token]:
    """Split ``text`` into tokens.

    Newlines are significant (they end statements) except inside ``[]`` and
    ``()``. CRLF is folded to LF before scanning; columns are 1-based.
    """
    text = text.replace("\r\n", "\n")
    tokens: list[Token] = []
    depth = 0
    i, line, line_start = 0, 1, 0
    n = len(text)
    while i < n:
        ch = text[i]
        col = i - line_start + 1
        if ch == "\n":
            if depth == 0 and tokens and tokens[-1].kind != "NEWLINE":
                tokens.append(Token("NEWLINE", None, line, col))
            i += 1
            line += 1
            line_start = i
        elif ch in " \t\r\ufeff":
            i += 1
        elif ch == "#":
            while i < n and text[i] != "\n":
                i += 1
        elif ch == '"':
            j = i + 1
            buf = []
            while True:
                if j >= n or text[j] == "\n":
                    raise FmlSyntaxError("unterminated string", line, col, '"')
                c = text[j]
                if c == "\\" and j + 1 < n:
                    esc = text[j + 1]
                    buf.append({"n": "\n", "t": "\t"}.get(esc, esc))
                    j += 2
                    continue
                if c == '"':
                    break
                buf.append(c)
                j += 1
            tokens.append(Token("STRING", "".join(buf), line, col, text[i : j + 1]))
            i = j + 1
        elif text.startswith("->", i):
            tokens.append(Token("ARROW", "->", line, col, "->"))
            i += 2
        elif text[i : i + 2] in ("<=", ">=", "=="):
            op = text[i : i + 2]
            tokens.append(Token("OP", op, line, col, op))
            i += 2
        elif ch in "<>":
            tokens.append(Token("OP", ch, line, col, ch))
            i += 1
        elif ch in PUNCT:
            if ch in "[(":
                depth += 1
            elif ch in "])":
                depth = max(0, depth - 1)
            tokens.append(Token("PUNCT", ch, line, col, ch))
            i += 1
        elif ch == "-" and i + 1 < n and text[i + 1].isdigit():
            m = IDENT_RE.match(text, i + 1)
            word = "-" + m.group(0)
            value = _number(word)
            if value is None:
                raise FmlSyntaxError(f"malformed number {word!r}", line, col, word)
            tokens.append(Token("NUMBER", value, line, col, word))
            i = m.end()
        else:
            m = IDENT_RE.match(text, i)
            if not m:
                raise FmlSyntaxError(f"unexpected character {ch!r}", line, col, ch)
            word = m.group(0)
            value = _number(word)
            if value is not None:
                tokens.append(Token("NUMBER", value, line, col, word))
            else:
                tokens.append(Token("IDENT", word, line, col, word))
            i = m.end()
    if tokens and tokens[-1].kind != "NEWLINE":
        tokens.append(Token("NEWLINE", None, line, i - line_start + 1))
    tokens.append(Token("EOF", None, line, i - line_start + 1))
    return tokens
