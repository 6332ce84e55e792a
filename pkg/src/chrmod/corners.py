"""Critical pre-corners, subsumption, abstract corners, covering and splitting."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence

from .builtin import REGISTRY, classify, exe, exe_sequence, guard_is_critical, is_builtin
from .engine import BuiltinExec, Label, RuleApp, apply_rule, instantiate, step
from .program import Program, Record, Rule
from .state import (IDENTITY, EquivalenceSpec, InvariantSpec, State, all_relevant_app_recs,
                    canonical_key, check_equivalence, check_invariant, has_shape)
from .syntax import read_term
from .term import (EPSILON, NIL, Num, Struct, Subst, Term, Var, base_name, compose,
                   format_term, fresh_var, is_constant, is_ground, list_items, match_head, mklist,
                   substitute, term_vars, unify, unify_all)


class CornerError(ValueError):
    pass


@dataclass(frozen=True)
class Equiv:
    """The equivalence relation used as the left relation of a beta corner."""

    indices = ()

    def renumber(self, mapping) -> "Equiv":
        return self

    def __str__(self) -> str:
        return "~"


EQUIV = Equiv()


def _tag(label) -> str:
    if isinstance(label, RuleApp):
        return "rule:" + label.rule
    if isinstance(label, BuiltinExec):
        return "builtin"
    return "equiv"


# ---------------------------------------------------------------------------
# Ground-term universes


@dataclass
class UniverseConfig:
    depth: int = 2                 # maximal list length
    extra_constants: tuple = ("a", "b")
    numerals: tuple = (Fraction(0), Fraction(1, 2), Fraction(-1, 2), Fraction(1),
                       Fraction(-1), Fraction(2))
    succ_depth: int = 3
    extension_k: int = 1
    max_instances: int = 200
    max_product: int = 20_000
    variables: int = 1             # size of the variable pool for non-ground states


@dataclass
class ProgramFeatures:
    constants: list
    arithmetic: bool
    lists: bool
    succ: bool


_ARITH = {"is", ">=", "=<", ">", "<"}


def program_features(program: Program) -> ProgramFeatures:
    consts: dict = {}
    arith = lists = succ = False

    def walk(t, top):
        nonlocal lists, succ
        if isinstance(t, Num):
            consts.setdefault(t, None)
        elif isinstance(t, Struct):
            if t.functor == "." and len(t.args) == 2:
                lists = True
            if t.functor == "s" and len(t.args) == 1:
                succ = True
            if not t.args and not top and t != NIL:
                consts.setdefault(t, None)
            for a in t.args:
                walk(a, False)

    for r in program.rules:
        for a in r.heads + r.body:
            walk(a, True)
        for g in r.guard + r.body:
            if isinstance(g, Struct) and g.functor in _ARITH and len(g.args) == 2:
                arith = True
        for g in r.guard:
            for a in g.args if isinstance(g, Struct) else ():
                walk(a, False)
    return ProgramFeatures(list(consts), arith, lists, succ)


def succ_numeral(n: int) -> Term:
    t: Term = Num(Fraction(0))
    for _ in range(n):
        t = Struct("s", (t,))
    return t


class Universe:
    """Finite, shape-typed sets of terms used to ground templates."""

    def __init__(self, program: Program, inv: InvariantSpec | None = None,
                 cfg: UniverseConfig | None = None):
        self.program = program
        self.inv = inv
        self.cfg = cfg = cfg or UniverseConfig()
        f = self.features = program_features(program)
        consts: dict = {}
        for c in f.constants:
            if isinstance(c, Struct):
                consts.setdefault(c, None)
        for name in cfg.extra_constants:
            consts.setdefault(Struct(str(name)), None)
        nums: dict = {}
        for c in f.constants:
            if isinstance(c, Num):
                nums.setdefault(c, None)
        if f.arithmetic:
            for v in cfg.numerals:
                nums.setdefault(Num(Fraction(v)), None)
        self.atoms = list(consts)
        self.nums = list(nums)
        self.constants = self.nums + self.atoms if f.arithmetic else self.atoms + self.nums
        self.lists = []
        if f.lists:
            for n in range(cfg.depth + 1):
                for combo in itertools.product(self.atoms, repeat=n):
                    self.lists.append(mklist(list(combo)))
        self.succs = [succ_numeral(n) for n in range(cfg.succ_depth + 1)] if f.succ else []
        self.ground_terms = _dedup(self.constants + self.lists + self.succs)
        ground_store = inv is not None and inv.has("ground_store")
        self.pool = [] if ground_store else [Var(f"_u{k}") for k in range(1, cfg.variables + 1)]

    def for_shape(self, shape: str | None) -> list[Term]:
        if shape == "list_of_constants":
            return self.lists or [NIL]
        if shape == "succ_numeral":
            return [succ_numeral(n) for n in range(self.cfg.succ_depth + 1)]
        if shape == "constant":
            return list(self.constants)
        if shape == "ground":
            return list(self.ground_terms)
        return self.ground_terms + self.pool

    def shape_at(self, pred, pos) -> str | None:
        return self.inv.shape_of(pred, pos) if self.inv is not None else None

    def var_options(self, template: State, v: Var) -> list[Term]:
        """Candidate values for a template variable; the variable itself stays
        available when the store need not be ground."""
        shape = None
        for _, a in template.store:
            if isinstance(a, Struct):
                for pos, arg in enumerate(a.args, 1):
                    if arg == v:
                        shape = shape or self.shape_at(a.indicator, pos)
        opts = self.for_shape(shape)
        if shape is None and self.pool:
            opts = [v] + opts
        return opts

    def extension_atoms(self) -> list[Term]:
        preds = sorted(self.program.constraints)
        if self.inv is not None:
            preds += sorted(self.inv.state_builtins)
        out = []
        for name, arity in preds:
            choices = [self.for_shape(self.shape_at((name, arity), p)) for p in range(1, arity + 1)]
            for args in itertools.product(*choices):
                out.append(Struct(name, tuple(args)))
        return out


def _dedup(items):
    return list(dict.fromkeys(items))


# ---------------------------------------------------------------------------
# Guard satisfiability


@dataclass(frozen=True)
class GuardSat:
    status: str  # sat, unsat, unknown
    witness: Subst | None = None


def _guard_ok(guard: Sequence[Term], heads: Sequence[Term]) -> bool:
    tau = exe_sequence(guard)
    if not tau.is_proper:
        return False
    return not (set(term_vars(list(heads))) & tau.domain())


def guard_satisfiable(guard: Sequence[Term], heads: Sequence[Term],
                      universe: Sequence[Term] | None = None, max_tries: int = 5000) -> GuardSat:
    """Three-valued test for a substitution making ``guard`` proper without
    touching ``heads``.  Unsat is only claimed for ground guards."""
    guard = tuple(guard)
    if _guard_ok(guard, heads):
        return GuardSat("sat", EPSILON)
    if all(is_ground(g) for g in guard):
        return GuardSat("unsat")
    hv = set(term_vars(list(heads)))
    gvars = [v for v in term_vars(list(guard)) if v in hv]
    terms = list(universe) if universe is not None else default_terms()
    tries = 0
    for combo in itertools.product(terms, repeat=len(gvars)):
        tries += 1
        if tries > max_tries:
            break
        theta = Subst(dict(zip(gvars, combo)))
        if _guard_ok(substitute(guard, theta), substitute(tuple(heads), theta)):
            return GuardSat("sat", theta)
    return GuardSat("unknown")


def default_terms() -> list[Term]:
    nums = [Num(Fraction(v)) for v in UniverseConfig.numerals]
    return nums + [Struct("a"), Struct("b")]


# ---------------------------------------------------------------------------
# Pre-corners

KINDS = ("alpha1", "alpha2", "alpha3", "beta1", "beta2")


@dataclass
class PreCorner:
    id: str
    kind: str
    ancestor: State
    left: object
    right: object
    parts: tuple[str, ...]
    overlap: tuple = ()
    unifier: Subst | None = None
    guard_status: str = "sat"
    guard: tuple = ()

    @property
    def template_indices(self) -> list[int]:
        return self.ancestor.indices

    @property
    def history(self) -> frozenset:
        return self.ancestor.history

    def key(self):
        return precorner_key(self.ancestor, self.left, self.right)

    def describe(self) -> str:
        return f"{self.id}  {self.left} <- {self.ancestor} -> {self.right}"

    def to_dict(self) -> dict:
        return {
            "id": self.id, "kind": self.kind, "ancestor": str(self.ancestor),
            "left": str(self.left), "right": str(self.right), "parts": list(self.parts),
            "overlap": [list(p) for p in self.overlap], "guard": self.guard_status,
        }


def precorner_key(ancestor: State, left, right):
    marks = [(_tag(left), tuple(left.indices)), (_tag(right), tuple(right.indices))]
    return canonical_key(ancestor, marks)


def _clean_names(store: list[tuple[int, Term]], extra: Iterable[Term] = ()) -> dict[Var, Var]:
    mapping: dict[Var, Var] = {}
    used: set[str] = set()
    anon = 0
    for v in term_vars([a for _, a in store] + list(extra)):
        base = base_name(v.name)
        if base in ("_", "_G"):
            anon += 1
            name = f"_{anon}"
        else:
            name, k = base, 1
            while name in used:
                k += 1
                name = f"{base}_{k}" if base[-1].isdigit() else f"{base}{k}"
        used.add(name)
        mapping[v] = Var(name)
    return mapping


def _matchings(h1: Sequence[Term], h2: Sequence[Term]) -> Iterator[tuple[tuple[int, int], ...]]:
    """Nonempty partial injective matchings between same-predicate head positions."""
    def go(j, used, acc):
        if j == len(h2):
            if acc:
                yield tuple(acc)
            return
        yield from go(j + 1, used, acc)
        for i, a in enumerate(h1):
            if i in used or not isinstance(a, Struct) or not isinstance(h2[j], Struct):
                continue
            if a.indicator == h2[j].indicator:
                yield from go(j + 1, used | {i}, acc + [(i, j)])
    yield from go(0, frozenset(), [])


def _most_general(pred: tuple[str, int], names="UVW") -> Term:
    name, arity = pred
    args = tuple(fresh_var(names[k] if k < len(names) else f"U{k}") for k in range(arity))
    return Struct(name, args)


def enumerate_pre_corners(program: Program, inv: InvariantSpec | None = None,
                          eq: EquivalenceSpec | None = None,
                          universe: Sequence[Term] | None = None) -> list[PreCorner]:
    """All most general critical pre-corners, up to renaming and left/right swap."""
    eq = eq or IDENTITY
    terms = list(universe) if universe is not None else default_terms()
    raw: list[PreCorner] = []
    rules = program.rules

    # alpha1: overlapping rule applications where one removes a shared constraint
    for i, r1 in enumerate(rules):
        for r2 in rules[i:]:
            f1, f2 = r1.fresh(), r2.fresh()
            h1, h2 = f1.heads, f2.heads
            n1 = len(h1)
            for m in _matchings(h1, h2):
                if not any(p >= len(f1.kept) or q >= len(f2.kept) for p, q in m):
                    continue
                sigma = unify_all([(h1[p], h2[q]) for p, q in m])
                if not sigma.is_proper:
                    continue
                matched = {q: p for p, q in m}
                ind1 = tuple(range(1, n1 + 1))
                ind2, nxt = [], n1 + 1
                for q in range(len(h2)):
                    if q in matched:
                        ind2.append(matched[q] + 1)
                    else:
                        ind2.append(nxt)
                        nxt += 1
                ind2 = tuple(ind2)
                if r1.name == r2.name and ind1 == ind2:
                    continue
                store = [(k + 1, substitute(h1[k], sigma)) for k in range(n1)]
                store += [(ind2[q], substitute(h2[q], sigma)) for q in range(len(h2))
                          if q not in matched]
                guard = substitute(f1.guard + f2.guard, sigma)
                heads = [a for _, a in store]
                gs = guard_satisfiable(guard, heads, terms)
                if gs.status == "unsat":
                    continue
                raw.append(_finish("alpha1", program, store, RuleApp(r1.name, ind1),
                                   RuleApp(r2.name, ind2), (r1.name, r2.name), tuple(m), sigma,
                                   gs.status, guard))

    state_builtins = sorted(inv.state_builtins) if inv is not None else []

    # alpha2: critical guard against a most general state built-in
    for r in rules:
        if not r.guard or not guard_is_critical(r.guard, inv):
            continue
        for pred in state_builtins:
            f = r.fresh()
            gs = guard_satisfiable(f.guard, f.heads, terms)
            if gs.status == "unsat":
                continue
            n = len(f.heads)
            store = [(k + 1, h) for k, h in enumerate(f.heads)] + [(n + 1, _most_general(pred))]
            raw.append(_finish("alpha2", program, store, RuleApp(r.name, tuple(range(1, n + 1))),
                               BuiltinExec(n + 1), (r.name, pred[0]), (), None, gs.status,
                               f.guard))

    # alpha3: two state built-ins, the first non-logical or incomplete
    for p1 in state_builtins:
        c1 = classify(p1[0], p1[1], inv)
        if c1.logical and c1.i_complete:
            continue
        for p2 in state_builtins:
            store = [(1, _most_general(p1)), (2, _most_general(p2))]
            raw.append(_finish("alpha3", program, store, BuiltinExec(1), BuiltinExec(2),
                               (p1[0], p2[0]), (), None, "sat", ()))

    if not eq.is_identity:
        for r in rules:
            f = r.fresh()
            gs = guard_satisfiable(f.guard, f.heads, terms)
            if gs.status == "unsat":
                continue
            store = [(k + 1, h) for k, h in enumerate(f.heads)]
            raw.append(_finish("beta1", program, store, EQUIV,
                               RuleApp(r.name, tuple(range(1, len(f.heads) + 1))), (r.name,), (),
                               None, gs.status, f.guard))
        for pred in state_builtins:
            raw.append(_finish("beta2", program, [(1, _most_general(pred))], EQUIV,
                               BuiltinExec(1), (pred[0],), (), None, "sat", ()))

    out: list[PreCorner] = []
    seen = set()
    counters: dict = {}
    for pc in raw:
        k = pc.key()
        if k in seen:
            continue
        seen.add(k)
        group = (pc.kind, pc.parts)
        counters[group] = counters.get(group, 0) + 1
        pc.id = f"{pc.kind}:{'/'.join(pc.parts)}:{counters[group]}"
        out.append(pc)
    return out


def _finish(kind, program, store, left, right, parts, overlap, sigma, status, guard) -> PreCorner:
    names = _clean_names(store, guard)
    store = [(i, substitute(a, names)) for i, a in store]
    guard = substitute(tuple(guard), names)
    recs = all_relevant_app_recs(store, program)
    for lab in (left, right):
        if isinstance(lab, RuleApp):
            recs.discard(lab.record)
    return PreCorner("", kind, State(store, recs), left, right, parts, overlap, sigma, status,
                     guard)


# ---------------------------------------------------------------------------
# Concrete corners


@dataclass
class Corner:
    ancestor: State
    left: object
    right: object
    wing1: State
    wing2: State

    @property
    def kind(self) -> str:
        if isinstance(self.left, Equiv):
            return "beta1" if isinstance(self.right, RuleApp) else "beta2"
        rules = sum(isinstance(x, RuleApp) for x in (self.left, self.right))
        return {2: "alpha1", 1: "alpha2", 0: "alpha3"}[rules]

    def swapped(self) -> "Corner":
        return Corner(self.ancestor, self.right, self.left, self.wing2, self.wing1)

    def __str__(self) -> str:
        return f"{self.wing1} <-[{self.left}]- {self.ancestor} -[{self.right}]-> {self.wing2}"


def make_corner(ancestor: State, left, right, program: Program,
                left_wing: State | None = None) -> Corner:
    """Build a corner, computing wings by the step relation."""
    if isinstance(left, Equiv):
        if left_wing is None:
            raise CornerError("a beta corner needs its equivalent left wing")
        w1 = left_wing
    else:
        w1 = step(ancestor, left, program)
    w2 = step(ancestor, right, program)
    return Corner(ancestor, left, right, w1, w2)


# ---------------------------------------------------------------------------
# Subsumption


@dataclass
class Subsumption:
    theta: Subst
    phi: dict
    splus: tuple
    tplus: frozenset
    tdiv: frozenset
    swapped: bool


def _orientations(pc_left, pc_right, kind):
    yield pc_left, pc_right, False
    if not isinstance(pc_left, Equiv):
        yield pc_right, pc_left, True


def _substore_recs(store: Mapping[int, Term], indices, program) -> set[Record]:
    return all_relevant_app_recs([(i, store[i]) for i in sorted(indices)], program)


def subsumes(pc: PreCorner, c: Corner, program: Program) -> Subsumption | None:
    """A witness that ``pc`` subsumes ``c``, or None."""
    if not c.ancestor.is_proper:
        return None
    t_items = pc.ancestor.store
    t_idx = [i for i, _ in t_items]
    cstore = c.ancestor.as_dict()
    for theta, idx in match_head([a for _, a in t_items], c.ancestor.store):
        phi = dict(zip(t_idx, idx))
        for left, right, swapped in _orientations(pc.left, pc.right, pc.kind):
            if left.renumber(phi) != c.left or right.renumber(phi) != c.right:
                continue
            splus = tuple(i for i in cstore if i not in idx)
            mapped_t0 = {r.renumber(phi) for r in pc.history}
            tplus = frozenset(c.ancestor.history - mapped_t0)
            tdiv = frozenset(mapped_t0 - c.ancestor.history)
            all_recs = all_relevant_app_recs(c.ancestor.store, program)
            if any(not set(r.indices) & set(splus) or r not in all_recs for r in tplus):
                continue
            if not tdiv <= _substore_recs(cstore, idx, program):
                continue
            if pc.kind == "alpha2" and not _common_vars(c, program, left, right):
                continue
            return Subsumption(theta, phi, splus, tplus, tdiv, swapped)
    return None


def _common_vars(c: Corner, program: Program, rlabel, blabel) -> bool:
    if isinstance(rlabel, BuiltinExec):
        rlabel, blabel = blabel, rlabel
    rule = program.rule(rlabel.rule).fresh()
    store = c.ancestor.as_dict()
    atoms = [(i, store[i]) for i in rlabel.indices]
    for sigma, idx in match_head(rule.heads, atoms):
        if idx == tuple(rlabel.indices):
            gv = set(term_vars(list(substitute(rule.guard, sigma))))
            bv = set(term_vars(store[blabel.index]))
            return bool(gv & bv)
    return False


# ---------------------------------------------------------------------------
# Abstract corners


@dataclass
class AbstractCorner:
    """A pre-corner lifted to a template with an evaluable meta-constraint.

    The ancestor is ``<S0 + S+, T0 + T+ - T/>``; the meta-constraint is the
    conjunction of the invariant, guard executability of each rule label,
    the history side conditions, common variables (alpha2) and any case
    formulas added by splitting.  Wings are computed by the step relation.
    """

    precorner: PreCorner
    program: Program
    inv: InvariantSpec | None
    eq: EquivalenceSpec
    cases: tuple = ()
    case_label: str = ""
    case_texts: tuple = ()

    @property
    def id(self) -> str:
        return self.precorner.id + (f"#{self.case_label}" if self.case_label else "")

    @property
    def kind(self) -> str:
        return self.precorner.kind

    @property
    def template(self) -> State:
        return self.precorner.ancestor

    def meta_description(self) -> list[str]:
        pc = self.precorner
        out = ["I(<S0+S+, T0+T+-T/>)"]
        for lab in (pc.left, pc.right):
            if isinstance(lab, RuleApp):
                out.append(f"guard of {lab} executes and keeps its head")
        out.append("T+ records mention S+")
        recs = ", ".join(str(x) for x in (pc.left, pc.right) if isinstance(x, RuleApp))
        out.append(f"T/ within relevant records of S0 except {recs or 'none'}")
        if pc.kind == "alpha2":
            out.append("common-vars(guard, built-in)")
        out += list(self.case_texts) or [format_term(c) for c in self.cases]
        return out


def lift(pc: PreCorner, program: Program, inv: InvariantSpec | None = None,
         eq: EquivalenceSpec | None = None) -> AbstractCorner:
    return AbstractCorner(pc, program, inv, eq or IDENTITY)


@dataclass
class Instance:
    """One grounding of an abstract corner: a concrete ancestor plus labels."""

    ancestor: State
    left: object
    right: object
    phi: dict
    theta: dict
    left_wing: State | None = None

    def splus(self) -> list[int]:
        used = set(self.phi.values())
        return [i for i in self.ancestor.indices if i not in used]


def instantiate_template(ac: AbstractCorner, theta: Mapping[Var, Term],
                         extension: Sequence[Term] = (), tplus: Iterable[Record] = (),
                         tdiv: Iterable[Record] = ()) -> Instance:
    pc = ac.precorner
    store = [(i, substitute(a, dict(theta))) for i, a in pc.ancestor.store]
    nxt = pc.ancestor.max_index() + 1
    store += [(nxt + k, a) for k, a in enumerate(extension)]
    hist = (set(pc.history) | set(tplus)) - set(tdiv)
    phi = {i: i for i in pc.ancestor.indices}
    return Instance(State(store, hist), pc.left, pc.right, phi, dict(theta))


def meta_holds(ac: AbstractCorner, inst: Instance) -> bool:
    """Evaluate the meta-constraint of ``ac`` on a grounding."""
    s = inst.ancestor
    if not s.is_proper or check_invariant(s, ac.inv) is False:
        return False
    pc = ac.precorner
    store = s.as_dict()
    for lab in (inst.left, inst.right):
        if isinstance(lab, RuleApp):
            rule = ac.program.rule(lab.rule)
            if lab.record in s.history or instantiate(rule, s, lab.indices) is None:
                return False
        elif isinstance(lab, BuiltinExec):
            if lab.index not in store or not is_builtin(store[lab.index]):
                return False
    image = set(inst.phi.values())
    splus = set(store) - image
    t0 = {r.renumber(inst.phi) for r in pc.history}
    tplus = s.history - t0
    tdiv = t0 - s.history
    rel = all_relevant_app_recs(s.store, ac.program)
    for r in tplus:
        if not set(r.indices) & splus or r not in rel:
            return False
    allowed = _substore_recs(store, image, ac.program)
    for lab in (inst.left, inst.right):
        if isinstance(lab, RuleApp):
            allowed.discard(lab.record)
    if not tdiv <= allowed:
        return False
    if pc.kind == "alpha2":
        corner = Corner(s, inst.left, inst.right, s, s)
        if not _common_vars(corner, ac.program, inst.left, inst.right):
            return False
    if isinstance(inst.left, Equiv):
        w = inst.left_wing
        if w is None or check_invariant(w, ac.inv) is False:
            return False
        if not check_equivalence(w, s, ac.eq):
            return False
    for case in ac.cases:
        if not eval_case(case, inst):
            return False
    return True


def denote(ac: AbstractCorner, inst: Instance) -> Corner:
    return make_corner(inst.ancestor, inst.left, inst.right, ac.program, inst.left_wing)


def covers(ac: AbstractCorner, c: Corner) -> bool:
    """Whether some grounding of ``ac`` denotes exactly the corner ``c``."""
    s = c.ancestor
    if not s.is_proper:
        return False
    pc = ac.precorner
    t_items = pc.ancestor.store
    t_idx = [i for i, _ in t_items]
    for theta, idx in match_head([a for _, a in t_items], s.store):
        phi = dict(zip(t_idx, idx))
        pairs = [(pc.left, pc.right, False)]
        if not isinstance(pc.left, Equiv):
            pairs.append((pc.right, pc.left, True))
        for l0, r0, swapped in pairs:
            left, right = l0.renumber(phi), r0.renumber(phi)
            if left != c.left or right != c.right:
                continue
            inst = Instance(s, left, right, phi, dict(theta.bindings),
                            c.wing1 if isinstance(left, Equiv) else None)
            if not meta_holds(ac, inst):
                continue
            if not isinstance(left, Equiv):
                if step(s, left, ac.program).key() != c.wing1.key():
                    continue
            if step(s, right, ac.program).key() != c.wing2.key():
                continue
            return True
    return False


# ---------------------------------------------------------------------------
# Case formulas and splitting


class CaseFormulaError(CornerError):
    pass


def parse_case(text: str | Term) -> Term:
    if not isinstance(text, str):
        return text
    try:
        return read_term(text)
    except ValueError as e:
        raise CaseFormulaError(f"bad case formula {text!r}: {e}") from None


def eval_case(formula: Term, inst: Instance) -> bool:
    """Evaluate a case formula on a grounding (template variables pre-bound)."""
    start = Subst({v: t for v, t in inst.theta.items()})
    return next(_solve(formula, start, inst), None) is not None


def _int(t: Term) -> int | None:
    if isinstance(t, Num) and t.value.denominator == 1:
        return int(t.value)
    return None


def _solve(goal: Term, s: Subst, inst: Instance) -> Iterator[Subst]:
    g = substitute(goal, s) if s.bindings else goal
    if isinstance(g, Var):
        raise CaseFormulaError("unbound goal in case formula")
    if isinstance(g, Num):
        raise CaseFormulaError(f"bad goal {format_term(g)}")
    name, args = g.functor, g.args
    if name == "," and len(args) == 2:
        for s1 in _solve(args[0], s, inst):
            yield from _solve(args[1], s1, inst)
        return
    if name == ";" and len(args) == 2:
        yield from _solve(args[0], s, inst)
        yield from _solve(args[1], s, inst)
        return
    if name in ("not", "\\+") and len(args) == 1:
        if next(_solve(args[0], s, inst), None) is None:
            yield s
        return
    if name == "true" and not args:
        yield s
        return
    if name in ("fail", "false") and not args:
        return
    store = inst.ancestor.as_dict()
    if name == "history" and len(args) == 2:
        items, tail = list_items(args[1])
        nums = [_int(x) for x in items]
        if tail != NIL or None in nums or not isinstance(args[0], Struct):
            raise CaseFormulaError(f"bad history goal {format_term(g)}")
        if any(n not in inst.phi for n in nums):
            return
        rec = Record(args[0].functor, tuple(inst.phi[n] for n in nums))
        if rec in inst.ancestor.history:
            yield s
        return
    if name == "atom" and len(args) == 2:
        n = _int(args[0])
        if n is None:
            raise CaseFormulaError(f"bad atom goal {format_term(g)}")
        if n in inst.phi:
            mu = unify(args[1], store[inst.phi[n]])
            if mu.is_proper:
                yield compose(s, mu)
        return
    if name == "store" and len(args) == 1:
        for _, a in inst.ancestor.store:
            mu = unify(args[0], a)
            if mu.is_proper:
                yield compose(s, mu)
        return
    if name == "member" and len(args) == 2:
        items, _ = list_items(args[1])
        for x in items:
            mu = unify(args[0], x)
            if mu.is_proper:
                yield compose(s, mu)
        return
    shapes = {"succ": "succ_numeral", "succ_numeral": "succ_numeral",
              "list_of_constants": "list_of_constants"}
    if name in shapes and len(args) == 1:
        if has_shape(args[0], shapes[name]):
            yield s
        return
    if is_builtin(g):
        mu = exe(g)
        if mu.is_proper:
            yield compose(s, mu)
        return
    raise CaseFormulaError(f"unknown predicate {name}/{len(args)} in case formula")


def split(ac: AbstractCorner, cases: Sequence[str | Term],
          labels: Sequence[str] | None = None) -> list[AbstractCorner]:
    """One abstract corner per case, each with the case conjoined."""
    if not cases:
        raise CornerError(f"empty case list for {ac.id}")
    out = []
    for k, c in enumerate(cases, 1):
        label = labels[k - 1] if labels else f"case{k}"
        text = c if isinstance(c, str) else format_term(c)
        out.append(AbstractCorner(ac.precorner, ac.program, ac.inv, ac.eq,
                                  ac.cases + (parse_case(c),), label, ac.case_texts + (text,)))
    return out


def succ_cases(pattern: str, variable: str, bound: int) -> list[Term]:
    """Cases ``store(P)`` with the variable set to each numeral 0..bound."""
    p = parse_case(pattern)
    v = Var(variable)
    if v not in term_vars(p):
        raise CaseFormulaError(f"variable {variable} does not occur in {pattern}")
    return [Struct("store", (substitute(p, {v: succ_numeral(n)}),)) for n in range(bound + 1)]
