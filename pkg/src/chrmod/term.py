"""First-order terms, substitutions, unification and head matching.

Terms are immutable.  A term is a :class:`Var`, a :class:`Num` (an exact
rational numeral) or a :class:`Struct`; constants are zero-arity structs.
Lists use the functor ``'.'`` with ``'[]'`` as the empty list.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, Sequence, Union


@dataclass(frozen=True, slots=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name

    def __repr__(self) -> str:
        return f"Var({self.name!r})"


@dataclass(frozen=True, slots=True)
class Num:
    value: Fraction

    def __hash__(self) -> int:
        # Fraction hashing is slow; reduced fractions are unique anyway
        return hash((self.value.numerator, self.value.denominator))

    def __str__(self) -> str:
        return format_term(self)


@dataclass(frozen=True, slots=True)
class Struct:
    functor: str
    args: tuple = ()
    _hash: int = field(default=0, compare=False, repr=False)

    def __hash__(self) -> int:
        h = self._hash
        if not h:
            h = hash((self.functor, self.args)) or 1
            object.__setattr__(self, "_hash", h)
        return h

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def indicator(self) -> tuple[str, int]:
        return (self.functor, len(self.args))

    def __str__(self) -> str:
        return format_term(self)


Term = Union[Var, Num, Struct]

NIL = Struct("[]")


def num(value) -> Num:
    return Num(Fraction(value))


def atom(name: str) -> Struct:
    return Struct(name)


def mklist(items: Sequence[Term], tail: Term = NIL) -> Term:
    out = tail
    for item in reversed(items):
        out = Struct(".", (item, out))
    return out


def list_items(t: Term) -> tuple[list[Term], Term]:
    """Split a (possibly partial) list into its elements and its tail."""
    items = []
    while isinstance(t, Struct) and t.functor == "." and len(t.args) == 2:
        items.append(t.args[0])
        t = t.args[1]
    return items, t


def is_proper_list(t: Term) -> bool:
    return list_items(t)[1] == NIL


def is_constant(t: Term) -> bool:
    return isinstance(t, Num) or (isinstance(t, Struct) and not t.args)


def is_ground(t: Term) -> bool:
    if isinstance(t, Var):
        return False
    if isinstance(t, Struct):
        return all(is_ground(a) for a in t.args)
    return True


def term_vars(t, acc: dict | None = None) -> dict:
    """Variables of a term (or nested tuple/list of terms) in first-occurrence order."""
    if acc is None:
        acc = {}
    if isinstance(t, Var):
        acc.setdefault(t, None)
    elif isinstance(t, Struct):
        for a in t.args:
            term_vars(a, acc)
    elif isinstance(t, (tuple, list)):
        for a in t:
            term_vars(a, acc)
    return acc


def vars_of(t) -> set[Var]:
    return set(term_vars(t))


_fresh_counter = itertools.count(1)


def base_name(name: str) -> str:
    """The user-level name a fresh variable was derived from."""
    head, sep, tail = name.rpartition("__")
    if sep and tail.isdigit():
        return head or "_G"
    return name


def fresh_var(base: str = "_G") -> Var:
    return Var(f"{base_name(base)}__{next(_fresh_counter)}")


# ---------------------------------------------------------------------------
# Substitutions


class Subst:
    """A substitution: a proper binding map, or one of FAILURE / ERROR.

    Proper substitutions are kept fully resolved, so applying one is a
    single simultaneous replacement.
    """

    __slots__ = ("bindings", "kind")

    def __init__(self, bindings: Mapping[Var, Term] | None = None, kind: str = "proper"):
        self.kind = kind
        self.bindings = {} if bindings is None else {
            v: t for v, t in bindings.items() if v != t}

    @property
    def is_proper(self) -> bool:
        return self.kind == "proper"

    @property
    def is_failure(self) -> bool:
        return self.kind == "failure"

    @property
    def is_error(self) -> bool:
        return self.kind == "error"

    def __eq__(self, other) -> bool:
        return (isinstance(other, Subst) and self.kind == other.kind
                and self.bindings == other.bindings)

    def __hash__(self) -> int:
        return hash((self.kind, frozenset(self.bindings.items())))

    def __repr__(self) -> str:
        if not self.is_proper:
            return self.kind
        inner = ", ".join(f"{v}/{format_term(t)}" for v, t in
                          sorted(self.bindings.items(), key=lambda kv: kv[0].name))
        return "{" + inner + "}"

    def __call__(self, t):
        return substitute(t, self)

    def domain(self) -> set[Var]:
        return set(self.bindings)


EPSILON = Subst()
FAILURE = Subst(kind="failure")
ERROR = Subst(kind="error")


def _subst_term(t: Term, b: Mapping[Var, Term]) -> Term:
    if isinstance(t, Var):
        return b.get(t, t)
    if isinstance(t, Struct) and t.args:
        new = tuple(_subst_term(a, b) for a in t.args)
        if new != t.args:
            return Struct(t.functor, new)
    return t


def substitute(e, s: Subst | Mapping[Var, Term]):
    """Apply a substitution to a term, or to a tuple/list of terms.

    Objects exposing ``substitute(s)`` (such as states) delegate to it, so the
    failure/error substitutions map a state to the failure/error state.
    """
    if isinstance(s, Subst):
        if hasattr(e, "substitute") and not isinstance(e, (tuple, list)):
            return e.substitute(s)
        if not s.is_proper:
            raise ValueError(f"cannot apply {s.kind} substitution to a term")
        b = s.bindings
    else:
        b = s
    if not b:
        return e
    if isinstance(e, tuple):
        return tuple(substitute(x, b) for x in e)
    if isinstance(e, list):
        return [substitute(x, b) for x in e]
    if hasattr(e, "substitute"):
        return e.substitute(Subst(b))
    return _subst_term(e, b)


def compose(s1: Subst, s2: Subst) -> Subst:
    """``compose(s1, s2)`` applies ``s1`` first, then ``s2``."""
    if not s1.is_proper:
        return s1
    if not s2.is_proper:
        return s2
    out = {v: _subst_term(t, s2.bindings) for v, t in s1.bindings.items()}
    for v, t in s2.bindings.items():
        if v not in s1.bindings:
            out[v] = t
    return Subst(out)


def _walk(t: Term, b: dict) -> Term:
    while isinstance(t, Var) and t in b:
        t = b[t]
    return t


def _occurs(v: Var, t: Term, b: dict) -> bool:
    stack = [t]
    while stack:
        x = _walk(stack.pop(), b)
        if x == v:
            return True
        if isinstance(x, Struct):
            stack.extend(x.args)
    return False


def _resolve(t: Term, b: dict) -> Term:
    t = _walk(t, b)
    if isinstance(t, Struct) and t.args:
        return Struct(t.functor, tuple(_resolve(a, b) for a in t.args))
    return t


def unify_into(pairs: Iterable[tuple[Term, Term]], b: dict) -> bool:
    """Extend triangular bindings ``b`` to unify all pairs (with occurs check)."""
    stack = list(pairs)
    while stack:
        x, y = stack.pop()
        x = _walk(x, b)
        y = _walk(y, b)
        if x == y:
            continue
        if isinstance(x, Var):
            if _occurs(x, y, b):
                return False
            b[x] = y
        elif isinstance(y, Var):
            if _occurs(y, x, b):
                return False
            b[y] = x
        elif isinstance(x, Struct) and isinstance(y, Struct):
            if x.functor != y.functor or len(x.args) != len(y.args):
                return False
            stack.extend(zip(x.args, y.args))
        else:
            return False
    return True


def unify_all(pairs: Iterable[tuple[Term, Term]]) -> Subst:
    b: dict = {}
    if not unify_into(pairs, b):
        return FAILURE
    return Subst({v: _resolve(t, b) for v, t in b.items()})


def unify(t1: Term, t2: Term) -> Subst:
    """Most general unifier of two terms, or FAILURE.  Never ERROR."""
    return unify_all([(t1, t2)])


# ---------------------------------------------------------------------------
# One-way matching


def match_into(pattern: Term, term: Term, b: dict) -> bool:
    """Bind variables of ``pattern`` so it becomes identical to ``term``.

    Variables of ``term`` are treated as rigid constants.
    """
    stack = [(pattern, term)]
    while stack:
        p, t = stack.pop()
        if isinstance(p, Var):
            bound = b.get(p)
            if bound is None:
                b[p] = t
            elif bound != t:
                return False
        elif isinstance(p, Struct):
            if not isinstance(t, Struct) or p.functor != t.functor or len(p.args) != len(t.args):
                return False
            stack.extend(zip(p.args, t.args))
        elif p != t:
            return False
    return True


def match(pattern: Term, term: Term) -> Subst:
    b: dict = {}
    return Subst(b) if match_into(pattern, term, b) else FAILURE


def match_head(pattern: Sequence[Term], store, init: Mapping[Var, Term] | None = None
               ) -> Iterator[tuple[Subst, tuple[int, ...]]]:
    """All one-way matchings of a head pattern into an indexed store.

    ``store`` is a mapping or a sequence of ``(index, atom)`` pairs.  Yields
    ``(theta, indices)`` where ``indices`` is an injective assignment of store
    indices to the pattern positions, in pattern order.
    """
    items = sorted(store.items() if isinstance(store, Mapping) else store,
                   key=lambda kv: kv[0])
    by_key: dict = {}
    for i, a in items:
        if isinstance(a, Struct):
            by_key.setdefault((a.functor, len(a.args)), []).append((i, a))
    candidates = []
    for p in pattern:
        if not isinstance(p, Struct):
            return
        cands = by_key.get((p.functor, len(p.args)))
        if not cands:
            return
        candidates.append(cands)

    def go(k: int, b: dict, used: tuple):
        if k == len(pattern):
            yield Subst(dict(b)), used
            return
        for i, a in candidates[k]:
            if i in used:
                continue
            nb = dict(b)
            if match_into(pattern[k], a, nb):
                yield from go(k + 1, nb, used + (i,))

    yield from go(0, dict(init or {}), ())


# ---------------------------------------------------------------------------
# Ordering and printing

OPERATORS: dict[str, tuple[int, str]] = {
    ":-": (1200, "xfx"),
    "@": (1190, "xfx"),
    "<=>": (1180, "xfx"),
    "==>": (1180, "xfx"),
    "|": (1100, "xfy"),
    ";": (1100, "xfy"),
    "\\": (1100, "xfx"),
    ",": (1000, "xfy"),
    "=": (700, "xfx"),
    "is": (700, "xfx"),
    ">=": (700, "xfx"),
    "=<": (700, "xfx"),
    ">": (700, "xfx"),
    "<": (700, "xfx"),
    "==": (700, "xfx"),
    "\\=": (700, "xfx"),
    "\\==": (700, "xfx"),
    "=:=": (700, "xfx"),
    "=\\=": (700, "xfx"),
    "+": (500, "yfx"),
    "-": (500, "yfx"),
    "*": (400, "yfx"),
    "/": (400, "yfx"),
}

PREFIX_OPERATORS: dict[str, tuple[int, str]] = {
    ":-": (1200, "fx"),
    "chr_constraint": (1150, "fx"),
    "-": (200, "fy"),
}

_SYMBOL_CHARS = set("+-*/\\^<>=~:.?@#&$")


def _atom_text(name: str) -> str:
    if name in ("[]", "!", ";", ","):
        return name if name != "," else "','"
    if name and name[0].islower() and all(c.isalnum() or c == "_" for c in name):
        return name
    if name and all(c in _SYMBOL_CHARS for c in name):
        return name
    return "'" + name.replace("\\", "\\\\").replace("'", "\\'") + "'"


def format_number(v: Fraction) -> str:
    if v.denominator == 1:
        return str(v.numerator)
    d = v.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return f"{v.numerator}/{v.denominator}"
    digits = max(twos, fives)
    scaled = abs(v) * 10 ** digits
    whole, frac = divmod(int(scaled), 10 ** digits)
    sign = "-" if v < 0 else ""
    return f"{sign}{whole}.{str(frac).rjust(digits, '0')}"


@lru_cache(maxsize=200_000)
def format_term(t: Term, prec: int = 1200) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Num):
        s = format_number(t.value)
        if t.value < 0 and prec < 200:
            return f"({s})"
        return s
    if t.functor == "." and len(t.args) == 2:
        items, tail = list_items(t)
        body = ",".join(format_term(x, 999) for x in items)
        if tail != NIL:
            body += "|" + format_term(tail, 999)
        return f"[{body}]"
    if not t.args:
        return _atom_text(t.functor)
    if len(t.args) == 2 and t.functor in OPERATORS:
        p, typ = OPERATORS[t.functor]
        lp = p - 1 if typ[0] == "x" else p
        rp = p - 1 if typ[2] == "x" else p
        left = format_term(t.args[0], lp)
        right = format_term(t.args[1], rp)
        op = t.functor
        if op == ",":
            s = f"{left}, {right}"
        elif op in ("+", "-", "*", "/"):
            s = f"{left}{op}{right}"
            if op == "-" and right.startswith("-"):
                s = f"{left}-({right})"
        else:
            s = f"{left} {op} {right}"
        return f"({s})" if p > prec else s
    if len(t.args) == 1 and t.functor in PREFIX_OPERATORS and t.functor != "-":
        p, _ = PREFIX_OPERATORS[t.functor]
        s = f"{t.functor} {format_term(t.args[0], p - 1)}"
        return f"({s})" if p > prec else s
    args = ",".join(format_term(a, 999) for a in t.args)
    return f"{_atom_text(t.functor)}({args})"


def order_key(t: Term, anonymous: bool = False):
    """Total order key: numerals, then compounds, then variables.

    With ``anonymous`` set, all variables share one key (used to compute the
    shape of an atom regardless of variable names).
    """
    if isinstance(t, Num):
        return (0, t.value)
    if isinstance(t, Struct):
        return (1, len(t.args), t.functor, tuple(order_key(a, anonymous) for a in t.args))
    return (2, "") if anonymous else (2, t.name)


def rename_vars(t, mapping: dict[Var, Var]):
    return substitute(t, mapping)
