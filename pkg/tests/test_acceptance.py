"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary.
"""

import dataclasses
import functools
import itertools
import subprocess
import sys
import time
from fractions import Fraction
from pathlib import Path

from chrmod.checker import confluence_report, join_search
from chrmod.cli import build_config
from chrmod.corners import enumerate_pre_corners, make_corner, succ_numeral
from chrmod.builtin import exe
from chrmod.engine import (BuiltinExec, RuleApp, confluence_by_exhaustion, enumerate_steps,
                           explore, initial_state, step)
from chrmod.program import Record, parse_program
from chrmod.state import CORPUS, IDENTITY, State, check_equivalence
from chrmod.syntax import read_term
from chrmod.term import Num, Struct

from conftest import atoms, load, record_criterion
from test_builtin import EXE_TABLE

HMM1 = ("trans(q0,q1,0.3), trans(q0,q2,0.7), trans(q1,q3,1), trans(q2,q3,1), "
        "emit(q0,a,0.2), emit(q0,b,0.8), emit(q1,a,0.2), emit(q1,b,0.8), "
        "emit(q2,a,0.9), emit(q2,b,0.1), path([a,b],q0,1,[q0])")


@functools.cache
def report(name, config=None, hints=True):
    cfg = build_config(name, config)
    prog, inv, eq = cfg.load()
    settings = cfg.settings if hints else dataclasses.replace(cfg.settings, split_hints={})
    return confluence_report(prog, inv, eq, settings)


def finish(number, title, checks):
    ok, failed = record_criterion(number, title, checks)
    assert ok, failed


def test_criterion_1_set_program():
    t0 = time.perf_counter()
    prog, inv, eq, _ = load("set.chr")
    v = confluence_by_exhaustion("item(a), item(b), set([])", prog, eq)
    finals = v.finals
    pcs = enumerate_pre_corners(prog, inv, eq)
    alpha1 = [pc for pc in pcs if pc.kind == "alpha1"]
    rep = report("set.chr")
    by_overlap = {tuple(a.functor for a in r.precorner.ancestor.atoms): r
                  for r in rep.corners if r.kind == "alpha1"}
    set_set = by_overlap.get(("set", "item", "set"))
    item_item = by_overlap.get(("set", "item", "item"))
    depths = [max(len(x.join.witness[0]), len(x.join.witness[1]))
              for x in (item_item.results if item_item else [])]
    elapsed = time.perf_counter() - t0
    finish(1, "set program", [
        ("exactly 2 final states", len(finals) == 2),
        ("finals equivalent under sorted_arg", check_equivalence(finals[0], finals[1], eq)),
        ("finals differ under identity", not check_equivalence(finals[0], finals[1], IDENTITY)),
        ("exactly 2 alpha1 pre-corners", len(alpha1) == 2),
        ("set/set lift inconsistent", set_set is not None and set_set.verdict == "inconsistent"),
        ("item/item joinable", item_item is not None
         and item_item.verdict == "joinable_all_sampled"),
        ("item/item joins within depth 2", bool(depths) and max(depths) <= 2),
        (f"runtime {elapsed:.2f}s < 1s", elapsed < 1.0),
    ])


def test_criterion_2_viterbi():
    prog, inv, eq, _ = load("viterbi.chr")
    t0 = time.perf_counter()
    g = explore(initial_state(HMM1, prog), prog, max_nodes=100_000)
    elapsed = time.perf_counter() - t0
    finals = g.final_states()
    best, worse = Num(Fraction(6, 125)), Num(Fraction(7, 500))

    def has_path(s, p):
        return any(a.functor == "path" and a.args[0] == read_term("[]")
                   and a.args[1] == Struct("q3") and a.args[2] == p for a in s.atoms)

    rep = report("viterbi.chr")
    corner = rep.corner("alpha1:expand/prune:1")
    finish(2, "Viterbi", [
        ("exploration complete", not g.truncated and finals != []),
        ("every final has path([],q3,6/125,_)", all(has_path(s, best) for s in finals)),
        ("no final has path([],q3,7/500,_)", not any(has_path(s, worse) for s in finals)),
        ("finals pairwise equivalent under wildcard",
         all(check_equivalence(a, b, eq) for a, b in itertools.combinations(finals, 2))),
        ("three-way split hint gives split_joinable", corner.verdict == "split_joinable"),
        ("overall split_joinable", rep.overall == "split_joinable"),
        (f"exploration {elapsed:.2f}s < 10s", elapsed < 10.0),
    ])


def _concrete(prog, x):
    s = State.from_atoms([Struct("p", (Num(Fraction(x)),))])
    c = make_corner(s, RuleApp("r1", (1,)), RuleApp("r2", (1,)), prog)
    r = join_search(c, prog, IDENTITY, depth=4)
    return [lab.rule for lab in r.witness[0]] if r.joinable else None, \
        [lab.rule for lab in r.witness[1]] if r.joinable else None


def test_criterion_3_incomplete_guards():
    prog, inv, eq, _ = load("ex46.chr")
    pos = _concrete(prog, Fraction(1, 2))
    neg = _concrete(prog, Fraction(-1, 2))
    plain = report("ex46.chr", hints=False)
    hinted = report("ex46.chr")
    unsplit = plain.corner("alpha1:r1/r2:1")
    split = hinted.corner("alpha1:r1/r2:1")
    finish(3, "incomplete arithmetic guards", [
        ("X=0.5 joins via r3", pos == (["r3"], [])),
        ("X=-0.5 joins via r4", neg == (["r4"], [])),
        ("lifted r1/r2 needs a split", unsplit.verdict == "needs_split"),
        ("with the hint both halves join", split.verdict == "split_joinable"
         and len(split.cases) == 2
         and all(c.verdict == "joinable_all_sampled" for c in split.cases)),
    ])


def test_criterion_4_infinite_split():
    prog, inv, eq, _ = load("infinite.chr")
    target = State.from_atoms([read_term("c(0)"), read_term("end")])
    per_n = []
    for n in range(9):
        start = State.from_atoms([Struct("start"), Struct("c", (succ_numeral(n),))])
        g = explore(start, prog)
        finals = g.final_states()
        longest = g.longest_path()
        per_n.append((f"n={n}: single final class {{c(0), end}}, longest {longest} <= {n + 2}",
                      not g.truncated and finals != []
                      and all(check_equivalence(f, target, IDENTITY) for f in finals)
                      and longest is not None and longest <= n + 2))
    rep = report("infinite.chr")
    split = rep.corner("alpha1:easy/hard:1")
    noinv = report("infinite.chr", str(CORPUS / "infinite_noinv.yaml"))
    bad = [c for c in noinv.corners if c.verdict == "counterexample"]
    finish(4, "countably infinite split", per_n + [
        ("with invariant: split_joinable", rep.overall == "split_joinable"
         and split.verdict == "split_joinable"),
        ("split bound N=8", len(split.cases) == 9),
        ("truncation flagged", split.truncated),
        ("without invariant: counterexample", noinv.overall == "counterexample"
         and any(c.id == "alpha1:easy/hard:1" for c in bad)),
    ])


def test_criterion_5_semantics():
    p1 = parse_program(":- chr_constraint p/1, q/1, r/1.\nr1 @ p(X) \\ q(Y) <=> X = Y | r(X).")
    s1 = State.from_atoms(atoms("p(a), q(a)"))
    steps1 = list(enumerate_steps(s1, p1))
    p2 = parse_program(":- chr_constraint r/1, s/1.\nr2 @ r(X) ==> s(X).")
    s2 = State(list(enumerate(atoms("r(a), r(b), s(b)"), 1)), {Record("r2", (2,))})
    steps2 = list(enumerate_steps(s2, p2))
    p3 = parse_program(":- chr_constraint p/1, q/1.\nr @ p(Y) <=> Z is Y+A | q(Z).")
    guard_err = list(enumerate_steps(State.from_atoms(atoms("p(1)")), p3))
    bi_err = step(State.from_atoms(atoms("Z is 2+A")), BuiltinExec(1), p3)
    table_ok = []
    for text, expected in EXE_TABLE:
        s = exe(read_term(text))
        kind = "failure" if s.is_failure else "error" if s.is_error else "proper"
        table_ok.append(kind == (expected if isinstance(expected, str) else "proper"))
    finish(5, "semantics", [
        ("simpagation Apply step", [str(x) for _, x in steps1] == ["<{1:p(a), 3:r(a)}, {}>"]),
        ("propagation adds 4:s(a) and r2@1",
         len(steps2) == 1 and steps2[0][0] == RuleApp("r2", (1,))
         and steps2[0][1].store[-1] == (4, read_term("s(a)"))
         and steps2[0][1].history == {Record("r2", (1,)), Record("r2", (2,))}),
        ("no second propagation", list(enumerate_steps(steps2[0][1], p2)) == []),
        ("guard error means no Apply step", guard_err == []),
        ("Built-in step error gives the error state", bi_err.is_error),
        (f"Exe table ({len(EXE_TABLE)} cases)", len(EXE_TABLE) >= 15 and all(table_ok)),
    ])


def test_criterion_6_property_suites():
    here = Path(__file__).parent
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                           str(here / "test_properties.py")],
                          capture_output=True, text=True, cwd=here.parent)
    elapsed = time.perf_counter() - t0
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr
    finish(6, "property suites", [
        (f"all property suites pass ({summary})", proc.returncode == 0),
        (f"total {elapsed:.1f}s < 60s", elapsed < 60.0),
    ])


CORPUS_RUNS = [
    ("set.chr", None), ("viterbi.chr", None), ("ex41.chr", None), ("ex46.chr", None),
    ("infinite.chr", None), ("infinite.chr", "infinite_noinv.yaml"),
]


def test_criterion_7_oracle_agreement():
    checks = []
    for name, config in CORPUS_RUNS:
        rep = report(name, str(CORPUS / config) if config else None)
        cfg = build_config(name, str(CORPUS / config) if config else None)
        prog, _inv, eq = cfg.load()
        verdicts = [confluence_by_exhaustion(q, prog, eq, max_nodes=cfg.settings.max_nodes).kind
                    for q in cfg.settings.witness_queries]
        label = f"{name}" + (f" [{config}]" if config else "")
        contradiction = rep.overall == "counterexample" and verdicts \
            and all(v == "confluent_mod_eq" for v in verdicts)
        checks.append((f"{label}: exhaustion and report agree", not contradiction))
        for c in rep.corners:
            if c.verdict == "counterexample":
                anc = c.counterexample.instance.ancestor
                v = confluence_by_exhaustion(anc, prog, eq, max_nodes=cfg.settings.max_nodes)
                checks.append((f"{label}: counterexample {c.id} confirmed by exhaustion",
                               v.kind != "confluent_mod_eq"))
        if rep.exit_code == 0:
            checks.append((f"{label}: no witness contradicts a positive verdict",
                           all(o.verdict != "counterexample" or o.invariant is not True
                               for o in rep.oracle)))
    finish(7, "oracle agreement", checks)
