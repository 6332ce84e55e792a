"""Tokenizer and operator-precedence reader for Prolog-style CHR text."""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .term import NIL, OPERATORS, PREFIX_OPERATORS, Num, Struct, Term, Var, fresh_var, mklist


class ChrSyntaxError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column


@dataclass(slots=True)
class Token:
    kind: str  # atom, var, num, str, punct, end, eof
    text: str
    line: int
    col: int
    layout_before: bool = False
    value: object = None


_SYMBOLS = "+-*/\\^<>=~:.?@#&$"
_NUMBER = re.compile(r"\d+(\.\d+)?")
_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i, n = 0, len(text)
    line, line_start = 1, 0
    layout = True

    def pos(k):
        return line, k - line_start + 1

    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            line_start = i + 1
            i += 1
            layout = True
            continue
        if c.isspace():
            i += 1
            layout = True
            continue
        if c == "%":
            while i < n and text[i] != "\n":
                i += 1
            layout = True
            continue
        if text.startswith("/*", i):
            end = text.find("*/", i + 2)
            if end < 0:
                raise ChrSyntaxError("unterminated block comment", *pos(i))
            line += text.count("\n", i, end)
            nl = text.rfind("\n", i, end)
            if nl >= 0:
                line_start = nl + 1
            i = end + 2
            layout = True
            continue
        ln, col = pos(i)
        if c.isdigit():
            m = _NUMBER.match(text, i)
            tokens.append(Token("num", m.group(), ln, col, layout, Fraction(m.group())))
            i = m.end()
        elif c.isalpha() or c == "_":
            m = _NAME.match(text, i)
            word = m.group()
            kind = "var" if (word[0].isupper() or word[0] == "_") else "atom"
            tokens.append(Token(kind, word, ln, col, layout))
            i = m.end()
        elif c == "'":
            j = i + 1
            buf = []
            while True:
                if j >= n:
                    raise ChrSyntaxError("unterminated quoted atom", ln, col)
                if text[j] == "\\" and j + 1 < n:
                    buf.append(text[j + 1])
                    j += 2
                elif text[j] == "'":
                    if j + 1 < n and text[j + 1] == "'":
                        buf.append("'")
                        j += 2
                    else:
                        break
                else:
                    buf.append(text[j])
                    j += 1
            tokens.append(Token("atom", "".join(buf), ln, col, layout, "quoted"))
            i = j + 1
        elif c in "()[]{},|":
            tokens.append(Token("punct", c, ln, col, layout))
            i += 1
        elif c in "!;":
            tokens.append(Token("atom", c, ln, col, layout))
            i += 1
        elif c in _SYMBOLS:
            if c == "." and (i + 1 >= n or text[i + 1].isspace() or text[i + 1] == "%"):
                tokens.append(Token("end", ".", ln, col, layout))
                i += 1
            else:
                j = i
                while j < n and text[j] in _SYMBOLS:
                    j += 1
                tokens.append(Token("atom", text[i:j], ln, col, layout))
                i = j
        else:
            raise ChrSyntaxError(f"unexpected character {c!r}", ln, col)
        layout = False
    ln, col = pos(n)
    tokens.append(Token("eof", "", ln, col, True))
    return tokens


_TERMINATORS = {")", "]", "}", ",", "|"}


class Reader:
    """Reads a sequence of clauses (terms terminated by ``.``)."""

    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0
        self.varmap: dict[str, Var] = {}

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.peek()
        raise ChrSyntaxError(msg, tok.line, tok.col)

    def expect(self, kind: str, text: str | None = None) -> Token:
        tok = self.next()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text or kind
            got = tok.text or tok.kind
            self.error(f"expected {want!r}, found {got!r}", tok)
        return tok

    def at_eof(self) -> bool:
        return self.peek().kind == "eof"

    def read_clause(self) -> tuple[Term, dict[str, Var], Token]:
        self.varmap = {}
        first = self.peek()
        t = self.parse(1200)
        self.expect("end")
        return t, self.varmap, first

    def read_term(self) -> Term:
        """Read one term filling the whole input (a trailing ``.`` is optional)."""
        self.varmap = {}
        t = self.parse(1200)
        if self.peek().kind == "end":
            self.next()
        if not self.at_eof():
            self.error(f"unexpected {self.peek().text!r}")
        return t

    # -- Pratt parsing ------------------------------------------------------

    def _infix_op(self, tok: Token):
        if tok.kind == "atom" and tok.value != "quoted" and tok.text in OPERATORS:
            return tok.text
        if tok.kind == "punct" and tok.text in (",", "|"):
            return tok.text
        return None

    def parse(self, max_prec: int) -> Term:
        left, left_prec = self.parse_primary(max_prec)
        while True:
            tok = self.peek()
            op = self._infix_op(tok)
            if op is None:
                break
            prec, typ = OPERATORS[op]
            if prec > max_prec:
                break
            lmax = prec - 1 if typ[0] == "x" else prec
            if left_prec > lmax:
                break
            self.next()
            rmax = prec - 1 if typ[2] == "x" else prec
            right = self.parse(rmax)
            left = Struct(op, (left, right))
            left_prec = prec
        return left

    def _starts_term(self, tok: Token) -> bool:
        if tok.kind in ("var", "num", "str"):
            return True
        if tok.kind == "punct":
            return tok.text in ("(", "[", "{")
        if tok.kind == "atom":
            return tok.text not in OPERATORS or tok.text in PREFIX_OPERATORS
        return False

    def parse_primary(self, max_prec: int) -> tuple[Term, int]:
        tok = self.next()
        if tok.kind == "num":
            return Num(tok.value), 0
        if tok.kind == "var":
            if tok.text == "_":
                return fresh_var("_"), 0
            v = self.varmap.get(tok.text)
            if v is None:
                v = self.varmap[tok.text] = Var(tok.text)
            return v, 0
        if tok.kind == "punct":
            if tok.text == "(":
                t = self.parse(1200)
                self.expect("punct", ")")
                return t, 0
            if tok.text == "[":
                return self.parse_list(), 0
            if tok.text == "{":
                if self.peek().kind == "punct" and self.peek().text == "}":
                    self.next()
                    return Struct("{}"), 0
                t = self.parse(1200)
                self.expect("punct", "}")
                return Struct("{}", (t,)), 0
            self.error(f"unexpected {tok.text!r}", tok)
        if tok.kind == "atom":
            name = tok.text
            nxt = self.peek()
            if nxt.kind == "punct" and nxt.text == "(" and not nxt.layout_before:
                self.next()
                args = [self.parse(999)]
                while self.peek().kind == "punct" and self.peek().text == ",":
                    self.next()
                    args.append(self.parse(999))
                self.expect("punct", ")")
                return Struct(name, tuple(args)), 0
            if tok.value != "quoted" and name in PREFIX_OPERATORS:
                if name == "-" and nxt.kind == "num" and not nxt.layout_before:
                    self.next()
                    return Num(-nxt.value), 0
                if self._starts_term(nxt) and not (nxt.kind == "atom" and nxt.text in OPERATORS
                                                   and nxt.text not in PREFIX_OPERATORS):
                    prec, typ = PREFIX_OPERATORS[name]
                    if prec > max_prec:
                        prec = 999
                    amax = prec - 1 if typ == "fx" else prec
                    arg = self.parse(amax)
                    return Struct(name, (arg,)), prec
            prec = 0
            if tok.value != "quoted" and (name in OPERATORS or name in PREFIX_OPERATORS):
                prec = max(OPERATORS.get(name, (0,))[0], PREFIX_OPERATORS.get(name, (0,))[0])
                if prec > max_prec:
                    prec = 0
            return Struct(name), prec
        if tok.kind == "end":
            self.error("unexpected end of clause", tok)
        self.error("unexpected end of input", tok)

    def parse_list(self) -> Term:
        if self.peek().kind == "punct" and self.peek().text == "]":
            self.next()
            return NIL
        items = [self.parse(999)]
        while self.peek().kind == "punct" and self.peek().text == ",":
            self.next()
            items.append(self.parse(999))
        tail = NIL
        if self.peek().kind == "punct" and self.peek().text == "|":
            self.next()
            tail = self.parse(999)
        self.expect("punct", "]")
        return mklist(items, tail)


def read_term(text: str) -> Term:
    return Reader(text).read_term()


def read_clauses(text: str) -> list[tuple[Term, dict[str, Var], Token]]:
    r = Reader(text)
    out = []
    while not r.at_eof():
        out.append(r.read_clause())
    return out


def conjuncts(t: Term) -> list[Term]:
    """Flatten a ``,``-conjunction into a list, dropping ``true``."""
    out: list[Term] = []
    stack = [t]
    while stack:
        x = stack.pop()
        if isinstance(x, Struct) and x.functor == "," and len(x.args) == 2:
            stack.append(x.args[1])
            stack.append(x.args[0])
        elif x == Struct("true"):
            continue
        else:
            out.append(x)
    return out
