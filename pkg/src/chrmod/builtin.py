"""Built-in predicates: the evaluation procedure Exe and classification."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .term import (EPSILON, ERROR, FAILURE, Num, Struct, Subst, Term, Var, compose,
                   is_constant, is_ground, substitute, unify)


@dataclass(frozen=True)
class BuiltinDef:
    name: str
    arity: int
    fn: Callable[..., Subst]
    logical: bool
    complete: bool


@dataclass(frozen=True)
class BuiltinClass:
    logical: bool
    complete: bool
    i_complete: bool
    state_builtin: bool


REGISTRY: dict[tuple[str, int], BuiltinDef] = {}


def register(name: str, arity: int, logical: bool, complete: bool):
    def deco(fn):
        REGISTRY[(name, arity)] = BuiltinDef(name, arity, fn, logical, complete)
        return fn
    return deco


def evaluate(t: Term) -> Fraction | None:
    """Value of a ground arithmetic expression, or None when it has none."""
    if isinstance(t, Num):
        return t.value
    if not isinstance(t, Struct):
        return None
    if len(t.args) == 2 and t.functor in ("+", "-", "*", "/"):
        a = evaluate(t.args[0])
        if a is None:
            return None
        b = evaluate(t.args[1])
        if b is None:
            return None
        if t.functor == "+":
            return a + b
        if t.functor == "-":
            return a - b
        if t.functor == "*":
            return a * b
        if b == 0:
            return None
        return a / b
    if len(t.args) == 1 and t.functor in ("-", "+"):
        a = evaluate(t.args[0])
        if a is None:
            return None
        return -a if t.functor == "-" else a
    return None


def is_arithmetic(t: Term) -> bool:
    return evaluate(t) is not None


@register("=", 2, True, True)
def _unify(a, b):
    return unify(a, b)


@register("true", 0, True, True)
def _true():
    return EPSILON


@register("fail", 0, True, True)
def _fail():
    return FAILURE


@register("is", 2, True, False)
def _is(a, b):
    v = evaluate(b)
    if v is None:
        return ERROR
    return unify(a, Num(v))


def _compare(op):
    def fn(a, b):
        x = evaluate(a)
        y = evaluate(b)
        if x is None or y is None:
            return ERROR
        return EPSILON if op(x, y) else FAILURE
    return fn


register(">=", 2, True, False)(_compare(lambda x, y: x >= y))
register("=<", 2, True, False)(_compare(lambda x, y: x <= y))
register(">", 2, True, False)(_compare(lambda x, y: x > y))
register("<", 2, True, False)(_compare(lambda x, y: x < y))


def _test(pred):
    def fn(*args):
        return EPSILON if pred(*args) else FAILURE
    return fn


register("var", 1, False, True)(_test(lambda t: isinstance(t, Var)))
register("nonvar", 1, False, True)(_test(lambda t: not isinstance(t, Var)))
register("ground", 1, False, True)(_test(is_ground))
register("constant", 1, False, True)(_test(is_constant))
register("==", 2, False, True)(_test(lambda a, b: a == b))
register("\\=", 2, False, True)(_test(lambda a, b: unify(a, b).is_failure))


def is_builtin(t: Term) -> bool:
    return isinstance(t, Struct) and (t.functor, len(t.args)) in REGISTRY


def exe(b: Term) -> Subst:
    """Evaluate one built-in atom to a proper substitution, FAILURE or ERROR."""
    if not isinstance(b, Struct):
        raise ValueError(f"not a built-in atom: {b}")
    d = REGISTRY.get((b.functor, len(b.args)))
    if d is None:
        raise ValueError(f"unknown built-in {b.functor}/{len(b.args)}")
    return d.fn(*b.args)


def exe_sequence(bs: Sequence[Term]) -> Subst:
    """Evaluate a guard or other built-in sequence left to right.

    Each atom sees the bindings of its predecessors; the first failure or
    error is returned.
    """
    acc = EPSILON
    for b in bs:
        s = exe(substitute(b, acc) if acc.bindings else b)
        if not s.is_proper:
            return s
        acc = compose(acc, s)
    return acc


def indicator_text(name: str, arity: int) -> str:
    return f"{name}/{arity}"


def parse_indicator(text: str) -> tuple[str, int]:
    name, _, arity = str(text).rpartition("/")
    if not name or not arity.isdigit():
        raise ValueError(f"bad predicate indicator {text!r}")
    return name, int(arity)


def classify(name: str, arity: int, inv=None) -> BuiltinClass:
    """Classification of a built-in predicate relative to an invariant.

    ``inv`` may be None (the trivial invariant) or any object with
    ``i_complete_builtins`` and ``state_builtins`` sets of indicators.
    """
    d = REGISTRY.get((name, arity))
    if d is None:
        raise ValueError(f"unknown built-in {name}/{arity}")
    i_complete = d.complete
    state = False
    if inv is not None:
        if d.logical and not d.complete and (name, arity) in inv.i_complete_builtins:
            i_complete = True
        state = (name, arity) in inv.state_builtins
    return BuiltinClass(d.logical, d.complete, d.logical and i_complete, state)


def guard_is_critical(guard: Iterable[Term], inv=None) -> bool:
    """True when a guard is non-logical or I-incomplete."""
    for g in guard:
        c = classify(g.functor, len(g.args), inv)
        if not c.logical or not c.i_complete:
            return True
    return False
