"""Derivation steps, exhaustive exploration and the exhaustion oracle."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterator, Sequence

from .builtin import exe, exe_sequence, is_builtin
from .program import Program, Record, Rule, parse_query
from .state import (ERROR_STATE, FAILURE_STATE, IDENTITY, EquivalenceSpec, State,
                    canonical_state)
from .term import Term, match_head, substitute, term_vars


class StepError(ValueError):
    pass


@dataclass(frozen=True)
class RuleApp:
    rule: str
    indices: tuple[int, ...]

    @property
    def record(self) -> Record:
        return Record(self.rule, self.indices)

    def renumber(self, mapping) -> "RuleApp":
        return RuleApp(self.rule, tuple(mapping[i] for i in self.indices))

    def __str__(self) -> str:
        return f"{self.rule}@{','.join(map(str, self.indices))}"


@dataclass(frozen=True)
class BuiltinExec:
    index: int

    @property
    def indices(self) -> tuple[int, ...]:
        return (self.index,)

    def renumber(self, mapping) -> "BuiltinExec":
        return BuiltinExec(mapping[self.index])

    def __str__(self) -> str:
        return f"builtin@{self.index}"


Label = RuleApp | BuiltinExec


def instantiate(rule: Rule, state: State, indices: Sequence[int]):
    """Head matching plus guard execution for ``rule`` at ``indices``.

    Returns ``(fresh_rule, sigma, tau)`` for an application instance, or None.
    ``tau`` never binds a variable of the matched head.
    """
    store = state.as_dict()
    if len(indices) != len(rule.heads) or len(set(indices)) != len(indices):
        return None
    if any(i not in store for i in indices):
        return None
    r = rule.fresh()
    atoms = [(i, store[i]) for i in indices]
    found = None
    for sigma, idx in match_head(r.heads, atoms):
        if idx == tuple(indices):
            found = sigma
            break
    if found is None:
        return None
    sigma = found
    tau = exe_sequence(substitute(r.guard, sigma))
    if not tau.is_proper:
        return None
    head_vars = set(term_vars([store[i] for i in indices]))
    if head_vars & tau.domain():
        return None
    return r, sigma, tau


def apply_rule(state: State, rule: Rule, indices: Sequence[int]) -> State | None:
    """The Apply step for ``rule`` at ``indices`` or None if not applicable."""
    if not state.is_proper:
        return None
    indices = tuple(indices)
    rec = Record(rule.name, indices)
    if rec in state.history:
        return None
    inst = instantiate(rule, state, indices)
    if inst is None:
        return None
    r, sigma, tau = inst
    body = substitute(substitute(r.body, sigma), tau)
    removed = set(indices[len(r.kept):])
    nxt = state.max_index() + 1
    store = [(i, a) for i, a in state.store if i not in removed]
    store += [(nxt + k, a) for k, a in enumerate(body)]
    hist = {t for t in state.history if not removed.intersection(t.indices)}
    if r.is_propagation:
        hist.add(rec)
    return State(store, hist)


def apply_builtin(state: State, index: int) -> State:
    store = state.as_dict()
    b = store.get(index)
    if b is None or not is_builtin(b):
        raise StepError(f"no built-in at index {index}")
    s = exe(b)
    if s.is_failure:
        return FAILURE_STATE
    if s.is_error:
        return ERROR_STATE
    rest = State([(i, a) for i, a in state.store if i != index], state.history)
    return rest.substitute(s)


def enumerate_steps(state: State, program: Program) -> Iterator[tuple[Label, State]]:
    """All derivation steps from ``state``, in a deterministic order."""
    if not state.is_proper:
        return
    for rule in program.rules:
        for _, idx in match_head(rule.heads, state.store):
            nxt = apply_rule(state, rule, idx)
            if nxt is not None:
                yield RuleApp(rule.name, idx), nxt
    for i, a in state.store:
        if is_builtin(a):
            yield BuiltinExec(i), apply_builtin(state, i)


def step(state: State, label: Label, program: Program) -> State:
    """The unique successor of ``state`` by ``label``."""
    if not state.is_proper:
        raise StepError("no step from a special state")
    if isinstance(label, BuiltinExec):
        return apply_builtin(state, label.index)
    try:
        rule = program.rule(label.rule)
    except KeyError:
        raise StepError(f"unknown rule {label.rule!r}") from None
    out = apply_rule(state, rule, label.indices)
    if out is None:
        raise StepError(f"{label} is not applicable")
    return out


def initial_state(query: str | Sequence[Term], program: Program | None = None) -> State:
    atoms = parse_query(query, program) if isinstance(query, str) else tuple(query)
    return State.from_atoms(atoms)


# ---------------------------------------------------------------------------
# Exploration


@dataclass
class DerivationGraph:
    """Derivation graph over canonical states."""

    root: object
    states: dict = field(default_factory=dict)   # key -> canonical representative
    edges: list = field(default_factory=list)     # (key, label, key)
    depth: dict = field(default_factory=dict)
    truncated: bool = False

    @property
    def nodes(self):
        return self.states.keys()

    @property
    def finals(self) -> list:
        sources = {e[0] for e in self.edges}
        return [k for k in self.states if k not in sources]

    def successors(self, key) -> list:
        return [(l, d) for s, l, d in self.edges if s == key]

    def final_states(self) -> list[State]:
        return [self.states[k] for k in self.finals]

    def has_cycle(self) -> bool:
        return self.longest_path() is None

    def longest_path(self) -> int | None:
        """Length of the longest derivation, or None if the graph has a cycle."""
        succ: dict = {}
        for s, _, d in self.edges:
            succ.setdefault(s, []).append(d)
        memo: dict = {}
        WHITE, GREY = 0, 1
        colour: dict = {}
        for start in self.states:
            if start in memo:
                continue
            stack = [(start, iter(succ.get(start, ())))]
            colour[start] = GREY
            while stack:
                node, it = stack[-1]
                child = next(it, None)
                if child is None:
                    memo[node] = max((memo[c] + 1 for c in succ.get(node, ())), default=0)
                    colour[node] = 2
                    stack.pop()
                    continue
                c = colour.get(child, WHITE)
                if c == GREY:
                    return None
                if c == WHITE:
                    colour[child] = GREY
                    stack.append((child, iter(succ.get(child, ()))))
        return memo.get(self.root, 0)


def explore(start: State, program: Program, max_nodes: int = 10_000,
            max_depth: int | None = None) -> DerivationGraph:
    """Breadth-first exploration of all derivations from ``start``.

    States are deduplicated by variance; ``truncated`` is set whenever a
    node or depth bound stops the search before the graph is complete.
    """
    rep, _ = canonical_state(start)
    root = rep.key()
    g = DerivationGraph(root)
    g.states[root] = rep
    g.depth[root] = 0
    queue = deque([root])
    while queue:
        key = queue.popleft()
        s = g.states[key]
        if not s.is_proper:
            continue
        if max_depth is not None and g.depth[key] >= max_depth:
            if next(enumerate_steps(s, program), None) is not None:
                g.truncated = True
            continue
        for label, nxt in enumerate_steps(s, program):
            nrep, _ = canonical_state(nxt)
            nk = nrep.key()
            if nk not in g.states:
                if len(g.states) >= max_nodes:
                    g.truncated = True
                    continue
                g.states[nk] = nrep
                g.depth[nk] = g.depth[key] + 1
                queue.append(nk)
            g.edges.append((key, label, nk))
    return g


@dataclass
class ExhaustionVerdict:
    kind: str  # confluent_mod_eq, counterexample, inconclusive
    finals: list[State]
    pair: tuple[State, State] | None = None
    reason: str = ""
    graph: DerivationGraph | None = None

    @property
    def confluent(self) -> bool:
        return self.kind == "confluent_mod_eq"


def confluence_by_exhaustion(query, program: Program, eq: EquivalenceSpec | None = None,
                             max_nodes: int = 10_000) -> ExhaustionVerdict:
    """Decide confluence modulo ``eq`` from one initial state by exhaustion."""
    eq = eq or IDENTITY
    start = query if isinstance(query, State) else initial_state(query, program)
    g = explore(start, program, max_nodes=max_nodes)
    finals = g.final_states()
    if g.truncated:
        return ExhaustionVerdict("inconclusive", finals, reason="node bound reached", graph=g)
    if g.has_cycle():
        return ExhaustionVerdict("inconclusive", finals, reason="cyclic derivation graph", graph=g)
    first = finals[0]
    k0 = eq.normal_key(first)
    for other in finals[1:]:
        if eq.normal_key(other) != k0:
            return ExhaustionVerdict("counterexample", finals, (first, other), graph=g)
    return ExhaustionVerdict("confluent_mod_eq", finals, graph=g)


def run(start: State, program: Program, max_steps: int = 10_000):
    """One derivation under the first-enumerated step policy; yields (label, state)."""
    s = start
    for _ in range(max_steps):
        nxt = next(enumerate_steps(s, program), None)
        if nxt is None:
            return
        yield nxt
        s = nxt[1]
