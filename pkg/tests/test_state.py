import pytest

from chrmod.program import Record, parse_program
from chrmod.state import (ERROR_STATE, FAILURE_STATE, IDENTITY, State, all_relevant_app_recs,
                          canonical_form, canonical_key, canonical_state, check_equivalence,
                          check_invariant, equivalence_from_dict, invariant_from_dict,
                          load_equivalence, load_invariant, variant)
from chrmod.term import Subst, Var, ERROR, FAILURE
from chrmod.syntax import read_term

from conftest import atoms


def S(text, history=(), start=1):
    return State(list(enumerate(atoms(text), start)), history)


def test_variance_ignores_variable_names_and_indices():
    a = S("p(X), q(X, Y)", {Record("r", (1, 2))})
    b = State([(7, read_term("q(Z,W)")), (3, read_term("p(Z)"))], {Record("r", (3, 7))})
    assert variant(a, b)
    assert canonical_key(a) == canonical_key(b)


def test_variance_respects_sharing():
    assert not variant(S("p(X), q(X)"), S("p(X), q(Y)"))


def test_variance_respects_history():
    assert not variant(S("p(a), p(b)", {Record("r", (1,))}),
                       S("p(a), p(b)", {Record("r", (2,))}))


def test_canonical_state_is_idempotent():
    s = S("q(Y), p(X, Y), p(X, X)", {Record("r", (2, 3))})
    c1, _ = canonical_state(s)
    c2, _ = canonical_state(c1)
    assert c1 == c2 and variant(s, c1)


def test_duplicate_atoms_with_history():
    a = S("p(a), p(a), q", {Record("r", (1, 3))})
    b = S("p(a), p(a), q", {Record("r", (2, 3))})
    c = S("p(a), p(a), q", {Record("r", (1, 3)), Record("r", (2, 3))})
    assert variant(a, b) and not variant(a, c)


def test_special_states():
    assert FAILURE_STATE.is_failure and ERROR_STATE.is_error
    assert S("p(X)").substitute(ERROR) is ERROR_STATE
    assert S("p(X)").substitute(FAILURE) is FAILURE_STATE
    with pytest.raises(ValueError):
        State([(1, read_term("p")), (1, read_term("q"))])


def test_relevant_records():
    prog = parse_program(":- chr_constraint r/1, s/1.\nr2 @ r(X) ==> s(X).")
    recs = all_relevant_app_recs(S("r(a), r(b), s(b)").store, prog)
    assert recs == {Record("r2", (1,)), Record("r2", (2,))}


def test_sorted_arg_equivalence():
    eq = equivalence_from_dict({"kind": "sorted_arg", "predicate": "set/1", "positions": [1]})
    assert check_equivalence(S("set([a,b])"), S("set([b,a])"), eq)
    assert not check_equivalence(S("set([a,b])"), S("set([a,a])"), eq)
    assert not check_equivalence(S("set([a,b])"), S("set([b,a])"), IDENTITY)


def test_wildcard_equivalence():
    eq = equivalence_from_dict({"kind": "wildcard_args", "predicate": "path/4", "positions": [4]})
    assert check_equivalence(S("path([],q3,1,[q3,q1])"), S("path([],q3,1,[q3,q2])"), eq)
    assert not check_equivalence(S("path([],q3,1,[q3])"), S("path([],q3,2,[q3])"), eq)


def test_composition_equivalence():
    eq = equivalence_from_dict({"kind": "composition", "parts": [
        {"kind": "sorted_arg", "predicate": "set/1", "positions": [1]},
        {"kind": "wildcard_args", "predicate": "tag/2", "positions": [2]}]})
    assert check_equivalence(S("set([a,b]), tag(x,1)"), S("set([b,a]), tag(x,2)"), eq)


def test_special_states_equivalence():
    assert check_equivalence(FAILURE_STATE, FAILURE_STATE, IDENTITY)
    assert not check_equivalence(FAILURE_STATE, ERROR_STATE, IDENTITY)
    assert not check_equivalence(FAILURE_STATE, S("p"), IDENTITY)


def test_invariant_checks():
    inv = invariant_from_dict({"checks": [
        {"check": "count", "predicate": "set/1", "n": 1},
        {"check": "arg_shape", "predicate": "set/1", "position": 1, "shape": "list_of_constants"},
        "ground_store"]})
    assert check_invariant(S("set([a]), item(b)"), inv) is True
    assert check_invariant(S("set([a]), set([])"), inv) is False
    assert check_invariant(S("set([X])"), inv) is False
    assert check_invariant(FAILURE_STATE, inv) is False
    assert check_invariant(S("anything"), None) is True


def test_reachable_invariant():
    prog = parse_program(":- chr_constraint a/0, b/0, c/0.\nr1 @ a <=> b.\nr2 @ b <=> c.")
    inv = invariant_from_dict({"checks": [{"check": "reachable_from", "queries": ["a"]}]}, prog)
    assert check_invariant(S("c", start=5), inv) is True
    assert check_invariant(S("a, b"), inv) is False


def test_bad_specs():
    with pytest.raises(ValueError):
        invariant_from_dict({"checks": [{"check": "nonsense"}]})
    with pytest.raises(ValueError):
        invariant_from_dict({"checks": [{"check": "arg_shape", "predicate": "p/1",
                                         "position": 1, "shape": "blob"}]})


def test_corpus_specs_load():
    prog = parse_program(":- chr_constraint set/1, item/1.\nset(L), item(A) <=> set([A|L]).")
    assert load_invariant("set_inv", prog).name == "set_inv"
    assert load_equivalence("viterbi_eq").kind == "wildcard_args"
