"""CHR states, canonical forms, and invariant / equivalence specifications."""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import yaml

from .builtin import is_builtin, parse_indicator
from .program import Program, Record
from .term import (NIL, Num, Struct, Subst, Term, Var, format_term, is_constant, is_ground,
                   list_items, order_key, substitute, term_vars)


class State:
    """A proper state ``<S, T>`` or one of the two special states.

    ``store`` is a tuple of ``(index, atom)`` pairs sorted by index and
    ``history`` a frozenset of :class:`Record`.
    """

    __slots__ = ("kind", "store", "history", "_key", "_nkeys")

    def __init__(self, store: Iterable[tuple[int, Term]] = (), history: Iterable[Record] = (),
                 kind: str = "proper"):
        self.kind = kind
        self.store = tuple(sorted(store, key=lambda p: p[0])) if kind == "proper" else ()
        self.history = frozenset(history) if kind == "proper" else frozenset()
        self._key = None
        self._nkeys = None
        if kind == "proper":
            idx = [i for i, _ in self.store]
            if len(set(idx)) != len(idx):
                raise ValueError("duplicate index in store")

    @classmethod
    def from_atoms(cls, atoms: Sequence[Term], start: int = 1) -> "State":
        return cls(list(enumerate(atoms, start)))

    @property
    def is_proper(self) -> bool:
        return self.kind == "proper"

    @property
    def is_failure(self) -> bool:
        return self.kind == "failure"

    @property
    def is_error(self) -> bool:
        return self.kind == "error"

    @property
    def atoms(self) -> list[Term]:
        return [a for _, a in self.store]

    @property
    def indices(self) -> list[int]:
        return [i for i, _ in self.store]

    def as_dict(self) -> dict[int, Term]:
        return dict(self.store)

    def max_index(self) -> int:
        return max((i for i, _ in self.store), default=0)

    def substitute(self, s: Subst) -> "State":
        if s.is_failure:
            return FAILURE_STATE
        if s.is_error:
            return ERROR_STATE
        if not self.is_proper or not s.bindings:
            return self
        return State([(i, substitute(a, s.bindings)) for i, a in self.store], self.history)

    def vars(self) -> set[Var]:
        return set(term_vars(self.atoms))

    def is_relevant(self) -> bool:
        idx = set(self.indices)
        return all(set(r.indices) <= idx for r in self.history)

    def key(self):
        """Canonical variance key (cached)."""
        if self._key is None:
            self._key = canonical_key(self)
        return self._key

    def __eq__(self, other) -> bool:
        return isinstance(other, State) and self.kind == other.kind and \
            self.store == other.store and self.history == other.history

    def __hash__(self) -> int:
        return hash((self.kind, self.store, self.history))

    def __repr__(self) -> str:
        return format_state(self)

    def __str__(self) -> str:
        return format_state(self)


FAILURE_STATE = State(kind="failure")
ERROR_STATE = State(kind="error")


def format_state(s: State, names: Mapping[Var, str] | None = None) -> str:
    if not s.is_proper:
        return s.kind
    store = s.store
    if names:
        store = [(i, substitute(a, {v: Var(n) for v, n in names.items()})) for i, a in store]
    items = ", ".join(f"{i}:{format_term(a, 999)}" for i, a in store)
    hist = ", ".join(str(r) for r in sorted(s.history, key=lambda r: (r.rule, r.indices)))
    return f"<{{{items}}}, {{{hist}}}>"


# ---------------------------------------------------------------------------
# Canonical forms


def _rank(sigs: list) -> list[int]:
    order = sorted(set(sigs))
    pos = {s: k for k, s in enumerate(order)}
    return [pos[s] for s in sigs]


def _local_pattern(a: Term) -> tuple:
    seen: dict[Var, int] = {}
    return tuple(seen.setdefault(v, len(seen)) for v in _var_occurrences(a))


def _var_occurrences(t: Term) -> list[Var]:
    out: list[Var] = []
    stack = [t]
    while stack:
        x = stack.pop()
        if isinstance(x, Var):
            out.append(x)
        elif isinstance(x, Struct):
            stack.extend(reversed(x.args))
    return out


def _leaf(atoms, records, marks, order):
    """Representation of a state under a fixed constraint ordering."""
    newidx = {old: k for k, old in enumerate(order, 1)}
    names: dict[Var, Var] = {}
    rep_atoms = []
    for old in order:
        a = atoms[old]
        for v in _var_occurrences(a):
            if v not in names:
                names[v] = Var(f"_{len(names) + 1}")
        rep_atoms.append(order_key(substitute(a, names)))
    recs = tuple(sorted((r.rule, tuple(newidx[i] for i in r.indices)) for r in records))
    mk = tuple(sorted((m[0], tuple(newidx[i] for i in m[1])) for m in marks))
    return (tuple(rep_atoms), recs, mk), newidx, names


def canonical_form(s: State, marks: Sequence[tuple[str, tuple[int, ...]]] = ()):
    """Lexicographically minimal representation of the variance class of ``s``.

    ``marks`` are extra labelled index tuples (treated as an unordered set),
    used to canonicalize a state together with the steps taken from it.
    Returns ``(key, index_map, var_map)``.
    """
    if not s.is_proper:
        return (s.kind,), {}, {}
    atoms = dict(s.store)
    idxs = list(atoms)
    records = list(s.history)
    marks = [(m[0], tuple(m[1])) for m in marks]
    all_recs = [(r.rule, r.indices) for r in records] + [("#" + m[0], m[1]) for m in marks]

    ground = all(is_ground(a) for a in atoms.values())
    if ground:
        keys = {i: order_key(a) for i, a in atoms.items()}
        if len(set(keys.values())) == len(keys):
            order = sorted(idxs, key=lambda i: keys[i])
            return _leaf(atoms, records, marks, order)

    # colour refinement over constraints and variables
    part: dict[int, list] = {i: [] for i in idxs}
    for rule, ind in all_recs:
        for pos, i in enumerate(ind):
            part[i].append((rule, pos, len(ind)))
    base = [(order_key(atoms[i], anonymous=True), _local_pattern(atoms[i]), tuple(sorted(part[i])))
            for i in idxs]
    colour = dict(zip(idxs, _rank(base)))
    occ: dict[Var, list[tuple[int, int]]] = {}
    for i in idxs:
        for p, v in enumerate(_var_occurrences(atoms[i])):
            occ.setdefault(v, []).append((i, p))

    def refine(col: dict[int, int]) -> dict[int, int]:
        while True:
            vcol = {v: tuple(sorted((col[i], p) for i, p in o)) for v, o in occ.items()}
            sigs = []
            for i in idxs:
                vs = tuple(vcol[v] for v in _var_occurrences(atoms[i]))
                rs = tuple(sorted((rule, pos, tuple(col[j] for j in ind))
                                  for rule, ind in all_recs for pos, k in enumerate(ind) if k == i))
                sigs.append((col[i], vs, rs))
            ranks = _rank(sigs)
            new = dict(zip(idxs, ranks))
            if len(set(ranks)) == len(set(col.values())):
                return new
            col = new

    best = None

    def search(col):
        nonlocal best
        col = refine(col)
        cells: dict[int, list[int]] = {}
        for i in idxs:
            cells.setdefault(col[i], []).append(i)
        target = next((cells[c] for c in sorted(cells) if len(cells[c]) > 1), None)
        if target is None:
            order = sorted(idxs, key=lambda i: col[i])
            leaf = _leaf(atoms, records, marks, order)
            if best is None or leaf[0] < best[0]:
                best = leaf
            return
        for m in target:
            # individualize m: put it ahead of its cell-mates
            nc = {i: 2 * c + (0 if i == m else 1) for i, c in col.items()}
            search(nc)

    search(colour)
    return best


def canonical_key(s: State, marks=()):
    """Hashable variance key.  Ground stores without repeated atoms get a
    cheap set-based key; everything else goes through canonical_form."""
    if s.is_proper:
        atoms = dict(s.store)
        vals = list(atoms.values())
        if len(set(vals)) == len(vals) and all(is_ground(a) for a in vals):
            recs = frozenset((r.rule, tuple(atoms[i] for i in r.indices)) for r in s.history)
            mk = frozenset(("#" + m[0], tuple(atoms[i] for i in m[1])) for m in marks)
            return ("ground", frozenset(vals), recs, mk)
    return canonical_form(s, marks)[0]


def canonical_state(s: State) -> tuple[State, dict[int, int]]:
    """The canonical representative of ``s`` and the index renumbering used."""
    if not s.is_proper:
        return s, {}
    key, newidx, names = canonical_form(s)
    store = [(newidx[i], substitute(a, names)) for i, a in s.store]
    out = State(store, [r.renumber(newidx) for r in s.history])
    return out, newidx


def variant(s1: State, s2: State) -> bool:
    return s1.key() == s2.key()


# ---------------------------------------------------------------------------
# Application records


def all_relevant_app_recs(store, program: Program) -> set[Record]:
    """Records ``r@i1..in`` for propagation rules whose head predicates match
    store constraints positionally (injective indices)."""
    items = store.store if isinstance(store, State) else (
        sorted(store.items()) if isinstance(store, Mapping) else list(store))
    by_pred: dict[tuple[str, int], list[int]] = {}
    for i, a in items:
        if isinstance(a, Struct):
            by_pred.setdefault((a.functor, len(a.args)), []).append(i)
    out: set[Record] = set()
    for r in program.propagation_rules:
        cands = [by_pred.get((h.functor, len(h.args)), []) for h in r.heads]
        for combo in itertools.product(*cands):
            if len(set(combo)) == len(combo):
                out.add(Record(r.name, combo))
    return out


# ---------------------------------------------------------------------------
# Invariants


SHAPES = ("list_of_constants", "succ_numeral", "ground", "constant")


def is_succ_numeral(t: Term) -> bool:
    while isinstance(t, Struct) and t.functor == "s" and len(t.args) == 1:
        t = t.args[0]
    return isinstance(t, Num) and t.value == 0


def has_shape(t: Term, shape: str) -> bool:
    if shape == "ground":
        return is_ground(t)
    if shape == "constant":
        return is_constant(t)
    if shape == "succ_numeral":
        return is_succ_numeral(t)
    if shape == "list_of_constants":
        items, tail = list_items(t)
        return tail == NIL and all(is_constant(x) for x in items)
    raise ValueError(f"unknown shape {shape!r}")


@dataclass(frozen=True)
class Check:
    kind: str
    params: tuple = ()

    def describe(self) -> str:
        if not self.params:
            return self.kind
        return f"{self.kind}({', '.join(map(str, self.params))})"


class _ReachCache:
    """Per-session cache of explored state sets for reachable_from checks."""

    def __init__(self):
        self._lock = threading.Lock()
        self._data: dict = {}

    def get(self, key, compute):
        with self._lock:
            if key in self._data:
                return self._data[key]
        value = compute()
        with self._lock:
            return self._data.setdefault(key, value)


REACH_CACHE = _ReachCache()


@dataclass
class InvariantSpec:
    checks: list[Check] = field(default_factory=list)
    state_builtins: set[tuple[str, int]] = field(default_factory=set)
    i_complete: set[tuple[str, int]] = field(default_factory=set)
    program: Program | None = None
    name: str = "true"

    @property
    def i_complete_builtins(self) -> set[tuple[str, int]]:
        # groundedness of the store and of guards makes arithmetic I-complete
        if any(c.kind == "ground_store" for c in self.checks):
            return self.i_complete | {("is", 2), (">=", 2), ("=<", 2), (">", 2), ("<", 2)}
        return self.i_complete

    def has(self, kind: str) -> bool:
        return any(c.kind == kind for c in self.checks)

    def shape_of(self, pred: tuple[str, int], position: int) -> str | None:
        for c in self.checks:
            if c.kind == "arg_shape" and c.params[0] == pred and c.params[1] == position:
                return c.params[2]
        return None

    def describe(self) -> str:
        return " & ".join(c.describe() for c in self.checks) or "true"


TRIVIAL_INVARIANT = InvariantSpec()


def _explored(program: Program, queries: tuple[str, ...], bound: int):
    """Canonical states reachable from ``queries`` (cached) and a truncation flag."""
    from .engine import explore
    from .program import parse_query

    def compute():
        states: dict = {}
        truncated = False
        for q in queries:
            g = explore(State.from_atoms(parse_query(q, program)), program, max_nodes=bound)
            for k, st in g.states.items():
                states.setdefault(k, st)
            truncated = truncated or g.truncated
        return states, truncated
    return REACH_CACHE.get((str(program), queries, bound), compute)


def reachable_states(inv: InvariantSpec):
    """All canonical states reachable from the invariant's queries, with representatives."""
    out = {}
    for c in inv.checks:
        if c.kind == "reachable_from":
            states, _ = _explored(inv.program, c.params[0], c.params[1])
            for k, st in states.items():
                out.setdefault(k, st)
    return out


def check_invariant(s: State, inv: InvariantSpec | None) -> bool | None:
    """Three-valued invariant evaluation: True, False or None (unknown)."""
    if inv is None:
        return True
    if not s.is_proper:
        return False if inv.checks else True
    result: bool | None = True
    for c in inv.checks:
        v = _check_one(s, c, inv)
        if v is False:
            return False
        if v is None:
            result = None
    return result


def _check_one(s: State, c: Check, inv: InvariantSpec) -> bool | None:
    atoms = s.atoms
    if c.kind == "ground_store":
        return all(is_ground(a) for a in atoms)
    if c.kind == "empty_history":
        return not s.history
    if c.kind == "all_builtins_absent":
        return not any(is_builtin(a) for a in atoms)
    if c.kind == "count":
        preds, mode, n = c.params
        k = sum(1 for a in atoms if isinstance(a, Struct) and (a.functor, len(a.args)) in preds)
        return k == n if mode == "exactly" else k >= n
    if c.kind == "arg_shape":
        pred, pos, shape = c.params
        return all(has_shape(a.args[pos - 1], shape) for a in atoms
                   if isinstance(a, Struct) and (a.functor, len(a.args)) == pred)
    if c.kind == "reachable_from":
        if inv.program is None:
            return None
        keys, truncated = _explored(inv.program, c.params[0], c.params[1])
        if s.key() in keys:
            return True
        return None if truncated else False
    raise ValueError(f"unknown invariant check {c.kind!r}")


def _preds(value) -> frozenset:
    vals = value if isinstance(value, list) else [value]
    return frozenset(parse_indicator(v) for v in vals)


def invariant_from_dict(d: Mapping, program: Program | None = None, name: str = "") -> InvariantSpec:
    checks = []
    for item in d.get("checks", []) or []:
        if isinstance(item, str):
            item = {"check": item}
        kind = item.get("check")
        if kind in ("ground_store", "empty_history", "all_builtins_absent"):
            checks.append(Check(kind))
        elif kind == "count":
            mode = item.get("mode", "exactly")
            if mode not in ("exactly", "at_least"):
                raise ValueError(f"bad count mode {mode!r}")
            checks.append(Check(kind, (_preds(item["predicate"]), mode, int(item["n"]))))
        elif kind == "arg_shape":
            shape = item["shape"]
            if shape not in SHAPES:
                raise ValueError(f"unknown shape {shape!r}")
            checks.append(Check(kind, (parse_indicator(item["predicate"]), int(item["position"]), shape)))
        elif kind == "reachable_from":
            queries = tuple(item["queries"])
            checks.append(Check(kind, (queries, int(item.get("bound", 50000)))))
        else:
            raise ValueError(f"unknown invariant check {kind!r}")
    return InvariantSpec(checks,
                         {parse_indicator(x) for x in d.get("state_builtins", []) or []},
                         {parse_indicator(x) for x in d.get("i_complete", []) or []},
                         program, name or d.get("name", "invariant"))


# ---------------------------------------------------------------------------
# Equivalences

ANY = Struct("$any")


@dataclass(frozen=True)
class EquivalenceSpec:
    kind: str  # identity, sorted_arg, wildcard_args, composition
    predicate: tuple[str, int] | None = None
    positions: tuple[int, ...] = ()
    parts: tuple["EquivalenceSpec", ...] = ()
    name: str = ""

    @property
    def is_identity(self) -> bool:
        if self.kind == "composition":
            return all(p.is_identity for p in self.parts)
        return self.kind == "identity"

    def describe(self) -> str:
        if self.kind == "identity":
            return "identity"
        if self.kind == "composition":
            return " + ".join(p.describe() for p in self.parts)
        pred = f"{self.predicate[0]}/{self.predicate[1]}"
        return f"{self.kind}({pred}, {list(self.positions)})"

    def normalize_atom(self, a: Term) -> Term:
        if self.kind == "identity":
            return a
        if self.kind == "composition":
            for p in self.parts:
                a = p.normalize_atom(a)
            return a
        if not (isinstance(a, Struct) and (a.functor, len(a.args)) == self.predicate):
            return a
        args = list(a.args)
        if self.kind == "sorted_arg":
            for pos in self.positions:
                items, tail = list_items(args[pos - 1])
                if tail == NIL:
                    from .term import mklist
                    args[pos - 1] = mklist(sorted(items, key=lambda t: order_key(t, True)))
        elif self.kind == "wildcard_args":
            for pos in self.positions:
                args[pos - 1] = ANY
        return Struct(a.functor, tuple(args))

    def normalize(self, s: State) -> State:
        if not s.is_proper or self.is_identity:
            return s
        return State([(i, self.normalize_atom(a)) for i, a in s.store], s.history)

    def normal_key(self, s: State):
        if self.is_identity:
            return s.key()
        if s._nkeys is None:
            s._nkeys = {}
        k = s._nkeys.get(self)
        if k is None:
            k = s._nkeys[self] = self.normalize(s).key()
        return k


IDENTITY = EquivalenceSpec("identity", name="identity")


def check_equivalence(s1: State, s2: State, eq: EquivalenceSpec | None) -> bool:
    eq = eq or IDENTITY
    if not s1.is_proper or not s2.is_proper:
        return s1.kind == s2.kind
    return eq.normal_key(s1) == eq.normal_key(s2)


def equivalence_from_dict(d: Mapping, name: str = "") -> EquivalenceSpec:
    kind = d.get("kind", "identity")
    name = name or d.get("name", kind)
    if kind == "identity":
        return EquivalenceSpec("identity", name=name)
    if kind == "composition":
        parts = tuple(equivalence_from_dict(p) for p in d.get("parts", []))
        preds = [p.predicate for p in parts if p.predicate]
        if len(set(preds)) != len(preds):
            raise ValueError("composition parts must concern disjoint predicates")
        return EquivalenceSpec("composition", parts=parts, name=name)
    if kind == "sorted_arg":
        pos = d.get("position", d.get("positions", 1))
        pos = tuple(pos) if isinstance(pos, list) else (int(pos),)
        return EquivalenceSpec(kind, parse_indicator(d["predicate"]), pos, name=name)
    if kind == "wildcard_args":
        pos = d.get("positions", d.get("position"))
        pos = tuple(pos) if isinstance(pos, list) else (int(pos),)
        return EquivalenceSpec(kind, parse_indicator(d["predicate"]), tuple(int(p) for p in pos),
                               name=name)
    raise ValueError(f"unknown equivalence kind {kind!r}")


# ---------------------------------------------------------------------------
# Spec files

CORPUS = Path(__file__).parent / "corpus"


def resolve_spec_path(ref: str | Path, base: Path | None = None) -> Path:
    """Find a spec file by path, by name relative to ``base``, or in the corpus."""
    p = Path(ref)
    candidates = [p]
    if base is not None:
        candidates.append(base / p)
    if not p.suffix:
        candidates += [Path(str(c) + ".yaml") for c in list(candidates)]
        candidates.append(CORPUS / f"{p.name}.yaml")
    candidates.append(CORPUS / p.name)
    for c in candidates:
        if c.is_file():
            return c
    raise FileNotFoundError(f"spec file not found: {ref}")


def load_yaml(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a mapping")
    return data


def load_invariant(ref, program: Program | None = None, base: Path | None = None) -> InvariantSpec:
    if isinstance(ref, Mapping):
        return invariant_from_dict(ref, program)
    path = resolve_spec_path(ref, base)
    return invariant_from_dict(load_yaml(path), program, Path(path).stem)


def load_equivalence(ref, base: Path | None = None) -> EquivalenceSpec:
    if isinstance(ref, Mapping):
        return equivalence_from_dict(ref)
    if str(ref) == "identity":
        return IDENTITY
    path = resolve_spec_path(ref, base)
    return equivalence_from_dict(load_yaml(path), Path(path).stem)
