from fractions import Fraction

import pytest

from chrmod.syntax import read_term
from chrmod.term import (EPSILON, ERROR, FAILURE, NIL, Num, Struct, Subst, Var, compose,
                         format_term, is_ground, list_items, match, match_head, mklist,
                         substitute, unify)


def t(text):
    return read_term(text)


def test_unify_single_binding():
    s = unify(t("p(Z)"), t("p(a)"))
    assert s.is_proper and s.bindings == {Var("Z"): Struct("a")}


def test_unify_two_sides():
    s = unify(t("f(X,a)"), t("f(b,Y)"))
    assert s.bindings == {Var("X"): Struct("b"), Var("Y"): Struct("a")}


@pytest.mark.parametrize("a,b", [("a", "b"), ("X", "f(X)"), ("f(X,X)", "f(a,b)"),
                                 ("g(a)", "g(a,a)")])
def test_unify_failures(a, b):
    assert unify(t(a), t(b)) is FAILURE or unify(t(a), t(b)).is_failure


def test_unify_resolves_chains():
    s = unify(t("f(X,Y,Z)"), t("f(Y,Z,c)"))
    assert substitute(t("g(X,Y,Z)"), s) == t("g(c,c,c)")


def test_apply_substitution():
    assert substitute(t("q(Z)"), Subst({Var("Z"): Num(Fraction(4))})) == t("q(4)")
    assert substitute(t("q(Z)"), EPSILON) == t("q(Z)")


def test_compose_applies_left_then_right():
    s1 = Subst({Var("X"): t("f(Y)")})
    s2 = Subst({Var("Y"): t("a")})
    c = compose(s1, s2)
    assert substitute(t("h(X,Y)"), c) == substitute(substitute(t("h(X,Y)"), s1), s2)


def test_compose_with_special():
    assert compose(FAILURE, EPSILON).is_failure
    assert compose(EPSILON, ERROR).is_error


def test_numbers_are_exact():
    assert t("0.1") == Num(Fraction(1, 10))
    assert t("-0.5") == Num(Fraction(-1, 2))
    assert format_term(Num(Fraction(1, 2))) == "0.5"


def test_lists_roundtrip():
    lst = mklist([Struct("a"), Struct("b")])
    assert format_term(lst) == "[a,b]"
    items, tail = list_items(lst)
    assert items == [Struct("a"), Struct("b")] and tail == NIL
    assert t("[a|T]") == Struct(".", (Struct("a"), Var("T")))


def test_ground():
    assert is_ground(t("f(a,[b,1])"))
    assert not is_ground(t("f(a,[X])"))


def test_match_is_one_way():
    assert match(t("p(X)"), t("p(a)")).bindings == {Var("X"): Struct("a")}
    assert match(t("p(a)"), t("p(X)")).is_failure


def test_match_head_is_injective():
    store = [(1, t("item(a)")), (2, t("item(b)"))]
    found = [idx for _, idx in match_head([t("item(X)"), t("item(Y)")], store)]
    assert sorted(found) == [(1, 2), (2, 1)]
    assert list(match_head([t("item(X)"), t("item(X)")], store)) == []


@pytest.mark.parametrize("text", ["p(X,[a,b|T])", "X is 2+3*Y", "a \\= b", "- (1)",
                                  "f(-1)", "p(0.5)", "[]"])
def test_format_read_roundtrip(text):
    term = t(text)
    assert t(format_term(term)) == term
