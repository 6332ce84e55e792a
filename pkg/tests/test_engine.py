from fractions import Fraction

import pytest

from chrmod.engine import (BuiltinExec, RuleApp, StepError, confluence_by_exhaustion,
                           enumerate_steps, explore, initial_state, run, step)
from chrmod.program import Record, parse_program
from chrmod.state import State
from chrmod.syntax import read_term

from conftest import atoms


def S(text, history=()):
    return State(list(enumerate(atoms(text), 1)), history)


def test_simpagation_apply_step():
    prog = parse_program(":- chr_constraint p/1, q/1, r/1.\nr1 @ p(X) \\ q(Y) <=> X = Y | r(X).")
    s = S("p(a), q(a)")
    steps = list(enumerate_steps(s, prog))
    assert len(steps) == 1
    label, nxt = steps[0]
    assert label == RuleApp("r1", (1, 2))
    assert nxt == State([(1, read_term("p(a)")), (3, read_term("r(a)"))])


def test_propagation_history_update():
    prog = parse_program(":- chr_constraint r/1, s/1.\nr2 @ r(X) ==> s(X).")
    s = S("r(a), r(b), s(b)", {Record("r2", (2,))})
    steps = list(enumerate_steps(s, prog))
    assert [l for l, _ in steps] == [RuleApp("r2", (1,))]
    nxt = steps[0][1]
    assert nxt.store[-1] == (4, read_term("s(a)"))
    assert nxt.history == {Record("r2", (2,)), Record("r2", (1,))}
    assert list(enumerate_steps(nxt, prog)) == []


def test_removal_drops_records_on_removed_indices():
    prog = parse_program(":- chr_constraint r/1, s/1, t/0.\nr2 @ r(X) ==> s(X).\nr3 @ r(X) <=> t.")
    s = S("r(a)", {Record("r2", (1,))})
    nxt = step(s, RuleApp("r3", (1,)), prog)
    assert nxt.history == frozenset() and nxt.atoms == [read_term("t")]


def test_guard_error_is_treated_as_failure():
    prog = parse_program(":- chr_constraint p/1, q/1.\nr @ p(Y) <=> Z is Y+A | q(Z).")
    assert list(enumerate_steps(S("p(1)"), prog)) == []


def test_builtin_step_error_gives_error_state():
    prog = parse_program(":- chr_constraint p/1, q/1.\nr @ p(Y) <=> q(Y).")
    s = S("Z is 2+A")
    steps = list(enumerate_steps(s, prog))
    assert len(steps) == 1
    label, nxt = steps[0]
    assert label == BuiltinExec(1) and nxt.is_error


def test_builtin_step_failure_and_success():
    prog = parse_program(":- chr_constraint p/1, q/1.\nr @ p(Y) <=> q(Y).")
    assert step(S("fail"), BuiltinExec(1), prog).is_failure
    nxt = step(S("p(Z), Z is 2+2"), BuiltinExec(2), prog)
    assert nxt.atoms == [read_term("p(4)")]


def test_guard_may_not_bind_head_variables():
    prog = parse_program(":- chr_constraint p/1, q/1.\nr @ p(Z) <=> Z is 2+2 | q(Z).")
    assert list(enumerate_steps(S("p(W)"), prog)) == []
    assert len(list(enumerate_steps(S("p(4)"), prog))) == 1


def test_body_indices_continue_after_max():
    prog = parse_program(":- chr_constraint p/1, q/1, o/0.\n"
                         "r @ p(Y) <=> Z is Y+2 | q(Z).")
    s = S("o, o, o, o, o, p(2)")
    (_, nxt), = enumerate_steps(s, prog)
    assert nxt.store[-1] == (7, read_term("q(4)"))


def test_step_rejects_inapplicable_labels():
    prog = parse_program(":- chr_constraint p/1, q/0.\nr @ p(a) <=> q.")
    with pytest.raises(StepError):
        step(S("p(b)"), RuleApp("r", (1,)), prog)
    with pytest.raises(StepError):
        step(S("p(a)"), RuleApp("nope", (1,)), prog)
    with pytest.raises(StepError):
        step(S("p(a)"), BuiltinExec(1), prog)
    with pytest.raises(StepError):
        step(State(kind="failure"), BuiltinExec(1), prog)


def test_body_builtins_join_the_store():
    prog = parse_program(":- chr_constraint p/1, q/1.\nr @ p(X) <=> Y is X+1, q(Y).")
    nxt = step(S("p(1)"), RuleApp("r", (1,)), prog)
    kinds = [a.functor for a in nxt.atoms]
    assert kinds == ["is", "q"]
    final = list(run(nxt, prog))[-1][1]
    assert final.atoms == [read_term("q(2)")]


def test_explore_set_program():
    prog = parse_program("set(L), item(A) <=> set([A|L]).")
    g = explore(initial_state("item(a), item(b), set([])", prog), prog)
    assert len(g.finals) == 2 and g.longest_path() == 2 and not g.truncated


def test_explore_truncation_is_flagged():
    prog = parse_program("r @ p(X) <=> p(s(X)).")
    g = explore(initial_state("p(0)", prog), prog, max_nodes=5)
    assert g.truncated
    assert confluence_by_exhaustion("p(0)", prog, max_nodes=5).kind == "inconclusive"


def test_exhaustion_counterexample_pair():
    prog = parse_program(":- chr_constraint a/0, b/0, c/0.\nr1 @ a <=> b.\nr2 @ a <=> c.")
    v = confluence_by_exhaustion("a", prog)
    assert v.kind == "counterexample"
    assert {str(x) for x in v.pair} == {"<{1:b}, {}>", "<{1:c}, {}>"}


def test_numbers_stay_exact_through_derivations():
    prog = parse_program(":- chr_constraint p/1, q/1.\nr @ p(X) <=> Y is X*0.1 | q(Y).")
    (_, nxt), = enumerate_steps(S("p(3)"), prog)
    assert nxt.atoms[0].args[0].value == Fraction(3, 10)
