"""Hand-written lexer for MiniMove source text."""

from __future__ import annotations

from dataclasses import dataclass

from ..diagnostics import ParseError, Span

KEYWORDS = {
    "module", "struct", "enum", "fun", "spec", "has", "let", "if", "else",
    "while", "return", "abort", "true", "false", "as", "move_to", "move_from",
    "exists", "forall", "in", "old", "result", "requires", "ensures",
    "aborts_if", "invariant", "pragma", "reads_of", "modifies_of", "modifies",
    "requires_of", "aborts_of", "ensures_of", "result_of",
    "u64", "u128", "bool", "address", "vector", "mut", "self", "inferred",
}

# longest-match first
SYMBOLS = [
    "<==>", "==>", "::", "..", "|~", "&&", "||", "==", "!=", "<=", ">=",
    "+=", "-=", "{", "}", "(", ")", "[", "]", "<", ">", ",", ";", ":", ".",
    "|", "&", "!", "=", "+", "-", "*", "/", "%", "@",
]


@dataclass(frozen=True)
class Token:
    kind: str  # 'ident' | 'int' | 'kw' | symbol text | 'eof'
    text: str
    span: Span

    def __repr__(self):
        return f"Token({self.kind!r},{self.text!r}@{self.span})"


def tokenize(source: str) -> list:
    toks = []
    i, line, col = 0, 1, 1
    n = len(source)

    def span(l0, c0, l1, c1):
        return Span(l0, c0, l1, c1)

    while i < n:
        c = source[i]
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                i += 1
                col += 1
            continue
        if source.startswith("/*", i):
            l0, c0 = line, col
            i += 2
            col += 2
            while i < n and not source.startswith("*/", i):
                if source[i] == "\n":
                    line += 1
                    col = 1
                else:
                    col += 1
                i += 1
            if i >= n:
                raise ParseError("unterminated block comment", span(l0, c0, line, col))
            i += 2
            col += 2
            continue
        if c.isdigit():
            l0, c0 = line, col
            j = i
            if source.startswith("0x", i) or source.startswith("0X", i):
                j = i + 2
                while j < n and (source[j] in "0123456789abcdefABCDEF" or source[j] == "_"):
                    j += 1
                text = source[i:j]
                value = int(text.replace("_", ""), 16)
            else:
                while j < n and (source[j].isdigit() or source[j] == "_"):
                    j += 1
                text = source[i:j]
                value = int(text.replace("_", ""))
            col += j - i
            i = j
            toks.append(Token("int", str(value), span(l0, c0, line, col)))
            continue
        if c.isalpha() or c == "_":
            l0, c0 = line, col
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            text = source[i:j]
            col += j - i
            i = j
            kind = "kw" if text in KEYWORDS else "ident"
            toks.append(Token(kind, text, span(l0, c0, line, col)))
            continue
        for sym in SYMBOLS:
            if source.startswith(sym, i):
                l0, c0 = line, col
                i += len(sym)
                col += len(sym)
                toks.append(Token(sym, sym, span(l0, c0, line, col)))
                break
        else:
            raise ParseError(f"unexpected character {c!r}", span(line, col, line, col + 1))
    toks.append(Token("eof", "", Span(line, col, line, col)))
    return toks
