"""Randomized property suites; every suite runs at least 200 derandomized cases."""

import random
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from chrmod.builtin import exe
from chrmod.checker import random_corner_audit
from chrmod.corners import enumerate_pre_corners
from chrmod.engine import enumerate_steps, step
from chrmod.program import Record, parse_program
from chrmod.state import (State, canonical_key, canonical_state, check_equivalence,
                          equivalence_from_dict, variant)
from chrmod.term import Num, Struct, Var, substitute, term_vars

from conftest import load

CASES = settings(max_examples=200, derandomize=True, deadline=None,
                 suppress_health_check=[HealthCheck.too_slow])

consts = st.sampled_from([Struct("a"), Struct("b"), Num(Fraction(0)), Num(Fraction(1, 2))])
variables = st.sampled_from([Var("X"), Var("Y"), Var("Z")])
leaves = st.one_of(consts, variables)


def lists(elem):
    return st.lists(elem, max_size=3).map(_mklist)


def _mklist(items):
    from chrmod.term import mklist
    return mklist(items)


terms = st.one_of(leaves, lists(consts), st.builds(lambda a: Struct("s", (a,)), leaves))


@st.composite
def stores(draw, min_size=0, max_size=5, ground=False):
    arg = st.one_of(consts, lists(consts)) if ground else terms
    atom = st.one_of(
        st.builds(lambda t: Struct("p", (t,)), arg),
        st.builds(lambda t, u: Struct("q", (t, u)), arg, arg),
        st.builds(lambda t: Struct("set", (t,)), lists(consts)),
        st.builds(lambda t: Struct("tag", (t,)), consts),
    )
    items = draw(st.lists(atom, min_size=min_size, max_size=max_size))
    idx = draw(st.permutations(range(1, 12)))[:len(items)]
    return list(zip(idx, items))


@st.composite
def states(draw, ground=False):
    store = draw(stores(ground=ground))
    recs = []
    idx = [i for i, _ in store]
    for i in idx:
        if draw(st.booleans()):
            recs.append(Record("r", (i,)))
    if len(idx) >= 2 and draw(st.booleans()):
        recs.append(Record("k", tuple(draw(st.permutations(idx))[:2])))
    return State(store, recs)


@st.composite
def renamings(draw, s: State):
    vs = list(term_vars(s.atoms))
    names = draw(st.permutations([f"V{k}" for k in range(len(vs) + 2)]))
    vmap = {v: Var(n) for v, n in zip(vs, names)}
    new = draw(st.permutations(range(20, 20 + len(s.store) + 3)))
    imap = {i: new[k] for k, (i, _) in enumerate(s.store)}
    store = [(imap[i], substitute(a, vmap)) for i, a in s.store]
    return State(store, [r.renumber(imap) for r in s.history])


PROGRAM = parse_program(""":- chr_constraint p/1, q/2, set/1, tag/1, r/1.
r1 @ p(X), q(X, Y) <=> r(Y).
r2 @ p(X) ==> X = a | r(X).
r3 @ set(L), tag(A) <=> set([A|L]).
r4 @ q(X, X) <=> X = b.
r5 @ p(X) \\ p(Y) <=> nonvar(X), X = Y | true.
""")


# ---------------------------------------------------------------- determinism

@CASES
@given(states())
def test_steps_are_deterministic(s):
    for label, nxt in enumerate_steps(s, PROGRAM):
        again = step(s, label, PROGRAM)
        assert again == nxt
        assert variant(again, step(s, label, PROGRAM))


# ------------------------------------------------------------ canonicalization

@CASES
@given(st.data())
def test_canonical_form_is_invariant_under_renaming(data):
    s = data.draw(states())
    r = data.draw(renamings(s))
    assert canonical_key(s) == canonical_key(r)
    assert canonical_state(s)[0] == canonical_state(r)[0]


@CASES
@given(states())
def test_canonicalization_is_idempotent(s):
    c1, mapping = canonical_state(s)
    c2, _ = canonical_state(c1)
    assert c1 == c2
    assert sorted(mapping) == sorted(s.indices)
    assert canonical_key(c1) == canonical_key(s)


@CASES
@given(states(), states())
def test_equal_keys_mean_variants(s1, s2):
    if canonical_key(s1) == canonical_key(s2):
        assert canonical_state(s1)[0] == canonical_state(s2)[0]
        assert len(s1.store) == len(s2.store) and len(s1.history) == len(s2.history)
        assert sorted(map(str, _shape(s1))) == sorted(map(str, _shape(s2)))


def _shape(s):
    """Atoms with variables blanked; preserved by any renaming."""
    return [substitute(a, {v: Var("_") for v in term_vars(a)}) for a in s.atoms]


@CASES
@given(states(ground=True))
def test_ground_fast_path_agrees_with_general_form(s):
    c, _ = canonical_state(s)
    t, _ = canonical_state(State(list(reversed(s.store)), s.history))
    assert c == t


# ------------------------------------------------------------- equivalence laws

EQUIVALENCES = {
    "identity": {"kind": "identity"},
    "sorted_arg": {"kind": "sorted_arg", "predicate": "set/1", "positions": [1]},
    "wildcard_args": {"kind": "wildcard_args", "predicate": "q/2", "positions": [2]},
    "composition": {"kind": "composition", "parts": [
        {"kind": "sorted_arg", "predicate": "set/1", "positions": [1]},
        {"kind": "wildcard_args", "predicate": "q/2", "positions": [2]}]},
}


@pytest.mark.parametrize("kind", sorted(EQUIVALENCES))
def test_equivalence_laws(kind):
    eq = equivalence_from_dict(EQUIVALENCES[kind])

    @CASES
    @given(states(ground=True), states(ground=True), states(ground=True))
    def laws(a, b, c):
        assert check_equivalence(a, a, eq)
        ab, ba = check_equivalence(a, b, eq), check_equivalence(b, a, eq)
        assert ab == ba
        if ab and check_equivalence(b, c, eq):
            assert check_equivalence(a, c, eq)
        if variant(a, b):
            assert ab

    laws()


@pytest.mark.parametrize("kind", sorted(EQUIVALENCES))
def test_equivalence_laws_on_near_copies(kind):
    # random states rarely collide, so also perturb one state in ways each
    # relation may or may not ignore
    eq = equivalence_from_dict(EQUIVALENCES[kind])
    rng = random.Random(kind)
    for _ in range(200):
        base = [(i, Struct("set", (_list(rng),))) for i in (1, 2)] + \
               [(3, Struct("q", (Struct("a"), _list(rng))))]
        a = State(base)
        b = State([(i, _perturb(t, rng)) for i, t in base])
        c = State([(i, _perturb(t, rng)) for i, t in b.store])
        assert check_equivalence(a, a, eq)
        assert check_equivalence(a, b, eq) == check_equivalence(b, a, eq)
        if check_equivalence(a, b, eq) and check_equivalence(b, c, eq):
            assert check_equivalence(a, c, eq)


def _list(rng):
    from chrmod.term import mklist
    return mklist([Struct(rng.choice("abc")) for _ in range(rng.randint(0, 3))])


def _perturb(t, rng):
    from chrmod.term import list_items, mklist
    if t.functor == "set" and rng.random() < 0.7:
        items, _ = list_items(t.args[0])
        rng.shuffle(items)
        return Struct("set", (mklist(items),))
    if t.functor == "q" and rng.random() < 0.5:
        return Struct("q", (t.args[0], _list(rng)))
    return t


# ------------------------------------------------------ built-in instantiation

@CASES
@given(terms, terms, st.dictionaries(variables, st.one_of(consts, lists(consts))))
def test_logical_builtins_stay_error_free(t, u, theta):
    b = Struct("=", (t, u))
    assert not exe(b).is_error
    assert not exe(substitute(b, theta)).is_error


# ------------------------------------------------------ audit and cross-check

AUDITED = ["set.chr", "viterbi.chr", "infinite.chr"]


@pytest.mark.parametrize("name", AUDITED)
def test_corner_audit(name):
    prog, inv, eq, cfg = load(name)
    res = random_corner_audit(prog, inv, eq, n=200, seed=0, settings=cfg, cross_check=True)
    assert res.states == 200
    assert res.corners > 0
    assert res.violations == []
    assert res.mismatches == []          # covers agrees with subsumes on every corner


def test_corner_audit_negative_control():
    # the pre-corners of a program missing one rule do not subsume the corner
    # start splits into, and without the invariant that corner is not joinable
    prog, _, eq, cfg = load("infinite.chr")
    pcs = enumerate_pre_corners(prog.without("hard"), None, eq)
    res = random_corner_audit(prog, None, eq, n=200, seed=0, precorners=pcs, settings=cfg)
    assert res.violations
    assert all("start" in str(c.ancestor) for c in res.violations)
    assert res.mismatches == []
