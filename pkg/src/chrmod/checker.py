"""Joinability search, abstract-corner verdicts, confluence reports and the corner audit."""

from __future__ import annotations

import itertools
import math
import random
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .corners import (EQUIV, AbstractCorner, Corner, CornerError, Equiv, Instance, PreCorner,
                      Universe, UniverseConfig, denote, enumerate_pre_corners, instantiate_template,
                      lift, meta_holds, parse_case, split, subsumes, succ_cases, covers,
                      eval_case)
from .engine import (BuiltinExec, RuleApp, confluence_by_exhaustion, enumerate_steps,
                     initial_state, step)
from .program import Program
from .state import (IDENTITY, EquivalenceSpec, InvariantSpec, State, all_relevant_app_recs,
                    canonical_state, check_equivalence, check_invariant, format_state,
                    reachable_states)
from .term import NIL, list_items, match_head, mklist, term_vars


# ---------------------------------------------------------------------------
# Joinability


@dataclass
class JoinResult:
    joinable: bool
    depth: int
    witness: tuple | None = None     # (left labels, right labels)
    ends: tuple | None = None         # (z1, z2)
    schemas: frozenset = frozenset()
    exhaustive: bool = False
    trivial: bool = False

    @property
    def verdict(self) -> str:
        if self.joinable:
            return "joinable"
        return "not_joinable" if self.exhaustive else "not_joinable_within"


def _jkey(s: State, eq: EquivalenceSpec):
    if not s.is_proper:
        return ("$special", s.kind)
    return eq.normal_key(s)


def _label_name(label, state: State) -> str:
    if isinstance(label, RuleApp):
        return label.rule
    a = state.as_dict()[label.index]
    return f"builtin:{a.functor}"


class _Side:
    """One direction of the join search: BFS layers keyed by normal form.

    Each node is ``[state, parent key, label, dist, rule multisets of the
    shortest paths]``."""

    def __init__(self, start: State, program: Program, eq, depth: int, max_nodes: int,
                 cap: int = 16):
        self.program, self.eq, self.depth, self.max_nodes, self.cap = (
            program, eq, depth, max_nodes, cap)
        k0 = _jkey(start, eq)
        self.nodes = {k0: [start, None, None, 0, {()}]}
        self.frontier = [k0]
        self.level = 0
        self.truncated = False

    @property
    def open(self) -> bool:
        return bool(self.frontier) and not self.truncated and self.level < self.depth

    def expand(self):
        nxt_frontier = []
        for k in self.frontier:
            s, _, _, d, ms = self.nodes[k]
            if not s.is_proper:
                continue
            for label, nxt in enumerate_steps(s, self.program):
                nk = _jkey(nxt, self.eq)
                name = _label_name(label, s)
                grown = {tuple(sorted(m + (name,))) for m in ms}
                node = self.nodes.get(nk)
                if node is not None:
                    if node[3] == d + 1 and len(node[4]) < self.cap:
                        node[4].update(grown)
                    continue
                if len(self.nodes) >= self.max_nodes:
                    self.truncated = True
                    continue
                self.nodes[nk] = [nxt, k, label, d + 1, grown]
                nxt_frontier.append(nk)
        self.frontier = nxt_frontier
        self.level += 1

    def finish(self):
        """Mark truncation if the depth bound cut off further steps."""
        if self.level >= self.depth and not self.truncated:
            for k in self.frontier:
                s = self.nodes[k][0]
                if s.is_proper and next(enumerate_steps(s, self.program), None) is not None:
                    self.truncated = True
                    break


def _path(nodes, k):
    labels = []
    while nodes[k][1] is not None:
        labels.append(nodes[k][2])
        k = nodes[k][1]
    return labels[::-1]


def join_search(c: Corner, program: Program, eq: EquivalenceSpec | None = None,
                depth: int = 10, max_nodes: int = 5000, slack: int = 2) -> JoinResult:
    """Search derivations from both wings for a pair of equivalent states.

    Both sides grow one BFS layer at a time (the shallower side first) until
    they meet, then ``slack`` more layers each; the schemas are the rule
    multisets of the shortest paths to every meeting state found.
    """
    eq = eq or IDENTITY
    left = _Side(c.wing1, program, eq, depth, max_nodes)
    right = _Side(c.wing2, program, eq, depth, max_nodes)
    while True:
        common = left.nodes.keys() & right.nodes.keys()
        if common:
            break
        side = min((x for x in (left, right) if x.open), key=lambda x: x.level, default=None)
        if side is None:
            break
        side.expand()
    if common:
        for _ in range(slack):
            for side in (left, right):
                if side.open:
                    side.expand()
        common = left.nodes.keys() & right.nodes.keys()
    else:
        left.finish()
        right.finish()
        return JoinResult(False, depth, exhaustive=not left.truncated and not right.truncated)
    n1, n2 = left.nodes, right.nodes
    best = min(common, key=lambda k: (n1[k][3] + n2[k][3], str(n1[k][0]), str(n2[k][0])))
    schemas = {(a, b) for k in common for a in n1[k][4] for b in n2[k][4]}
    lp, rp = _path(n1, best), _path(n2, best)
    return JoinResult(True, depth, (tuple(lp), tuple(rp)), (n1[best][0], n2[best][0]),
                      frozenset(schemas), False, trivial=not lp and not rp)


def replay(start: State, labels: Sequence, program: Program) -> State:
    s = start
    for lab in labels:
        s = step(s, lab, program)
    return s


def verify_witness(c: Corner, r: JoinResult, program: Program, eq: EquivalenceSpec) -> bool:
    """Re-run a joinability witness through the step relation."""
    if not r.joinable:
        return False
    z1 = replay(c.wing1, r.witness[0], program)
    z2 = replay(c.wing2, r.witness[1], program)
    return check_equivalence(z1, z2, eq)


# ---------------------------------------------------------------------------
# Grounding strategies


@dataclass
class CheckSettings:
    strategy: str = "universe"        # universe or reachable
    universe: UniverseConfig = field(default_factory=UniverseConfig)
    join_depth: int = 10
    max_nodes: int = 5000
    seed: int = 0
    jobs: int = 1
    split_hints: dict = field(default_factory=dict)
    witness_queries: list = field(default_factory=list)
    termination: str = ""


def eq_variants(s: State, eq: EquivalenceSpec, uni: Universe | None = None,
                limit: int = 3) -> list[State]:
    """A few states equivalent to ``s`` other than ``s`` itself."""
    out: list[State] = []
    seen = {s.key()}
    parts = eq.parts if eq.kind == "composition" else (eq,)
    for part in parts:
        if part.kind in ("identity", "composition"):
            continue
        for i, a in s.store:
            if not (hasattr(a, "args") and (a.functor, len(a.args)) == part.predicate):
                continue
            for pos in part.positions:
                for alt in _alternatives(a.args[pos - 1], part.kind, uni, s, part.predicate, pos):
                    args = list(a.args)
                    args[pos - 1] = alt
                    new = State([(j, b if j != i else type(a)(a.functor, tuple(args)))
                                 for j, b in s.store], s.history)
                    if new.key() not in seen:
                        seen.add(new.key())
                        out.append(new)
                    if len(out) >= limit:
                        return out
    return out


def _alternatives(t, kind, uni, s, pred, pos):
    if kind == "sorted_arg":
        items, tail = list_items(t)
        if tail != NIL:
            return []
        perms = dict.fromkeys(itertools.permutations(items[:5]))
        return [mklist(list(p) + items[5:]) for p in perms if list(p) != items[:5]]
    if kind == "wildcard_args":
        pool = uni.for_shape(uni.shape_at(pred, pos)) if uni is not None else []
        return [x for x in pool if x != t][:3]
    return []


def _subsets(items: list, cap: int = 8) -> list[tuple]:
    items = sorted(items, key=str)
    if len(items) <= 3:
        return [c for n in range(len(items) + 1) for c in itertools.combinations(items, n)]
    out = [()] + [(x,) for x in items] + [tuple(items)]
    return out[:cap]


def universe_candidates(ac: AbstractCorner, uni: Universe, rng: random.Random,
                        max_product: int | None = None) -> list[Instance]:
    """All groundings of ``ac`` over the universe satisfying its meta-constraint
    (randomly sampled when the product space is too large)."""
    t = ac.template
    tvars = list(term_vars([a for _, a in t.store]))
    opts = [uni.var_options(t, v) for v in tvars]
    ext_atoms = uni.extension_atoms()
    exts = [()]
    for k in range(1, uni.cfg.extension_k + 1):
        exts += list(itertools.combinations_with_replacement(ext_atoms, k))
    dims = [len(o) for o in opts] + [len(exts)]
    if any(d == 0 for d in dims):
        return []
    total = math.prod(dims)
    limit = max_product or uni.cfg.max_product
    if total <= limit:
        combos: Iterable = itertools.product(*[range(d) for d in dims])
    else:
        picked = set()
        while len(picked) < limit:
            picked.add(tuple(rng.randrange(d) for d in dims))
        combos = sorted(picked)
    pc = ac.precorner
    out = []
    for combo in combos:
        theta = {v: opts[k][j] for k, (v, j) in enumerate(zip(tvars, combo))}
        theta = {v: x for v, x in theta.items() if x != v}
        ext = exts[combo[-1]]
        base = instantiate_template(ac, theta, ext)
        splus = set(base.splus())
        plus_cands = [r for r in all_relevant_app_recs(base.ancestor.store, ac.program)
                      if set(r.indices) & splus and r not in pc.history]
        for tplus in _subsets(plus_cands):
            for tdiv in _subsets(list(pc.history)):
                inst = base if not tplus and not tdiv else instantiate_template(
                    ac, theta, ext, tplus, tdiv)
                if isinstance(pc.left, Equiv):
                    for y in eq_variants(inst.ancestor, ac.eq, uni) or [inst.ancestor]:
                        cand = Instance(inst.ancestor, inst.left, inst.right, inst.phi,
                                        inst.theta, y)
                        if meta_holds(ac, cand):
                            out.append(cand)
                elif meta_holds(ac, inst):
                    out.append(inst)
    return out


def reachable_candidates(ac: AbstractCorner) -> list[Instance]:
    """Groundings found by matching the template into reachable states."""
    inv = ac.inv
    if inv is None or not inv.has("reachable_from"):
        raise CornerError("the reachable strategy needs a reachable_from invariant")
    states = reachable_states(inv)
    keys = sorted(states, key=lambda k: str(states[k]))
    groups: dict = {}
    for k in keys:
        groups.setdefault(ac.eq.normal_key(states[k]), []).append(states[k])
    pc = ac.precorner
    t_items = pc.ancestor.store
    t_idx = [i for i, _ in t_items]
    out = []
    for k in keys:
        s = states[k]
        if not s.is_proper:
            continue
        for theta, idx in match_head([a for _, a in t_items], s.store):
            phi = dict(zip(t_idx, idx))
            left, right = pc.left.renumber(phi), pc.right.renumber(phi)
            if isinstance(left, Equiv):
                others = [y for y in groups[ac.eq.normal_key(s)] if y is not s] or [s]
                cands = [Instance(s, left, right, phi, dict(theta.bindings), y) for y in others]
            else:
                cands = [Instance(s, left, right, phi, dict(theta.bindings))]
            out.extend(c for c in cands if meta_holds(ac, c))
    return out


def candidates(ac: AbstractCorner, settings: CheckSettings, uni: Universe) -> list[Instance]:
    rng = random.Random(f"{settings.seed}:{ac.id}")
    if settings.strategy == "reachable":
        return reachable_candidates(ac)
    if settings.strategy == "universe":
        return universe_candidates(ac, uni, rng)
    raise CornerError(f"unknown grounding strategy {settings.strategy!r}")


def sample(items: list, n: int, key: str) -> list:
    if len(items) <= n:
        return list(items)
    rng = random.Random(key)
    picked = sorted(rng.sample(range(len(items)), n))
    return [items[i] for i in picked]


# ---------------------------------------------------------------------------
# Abstract corner verdicts


@dataclass
class InstanceResult:
    instance: Instance
    corner: Corner
    join: JoinResult
    invariant: bool | None = True

    @property
    def verdict(self) -> str:
        return self.join.verdict


@dataclass
class CornerResult:
    id: str
    kind: str
    verdict: str           # inconsistent, joinable_all_sampled, needs_split, counterexample,
                           # inconclusive, split_joinable
    candidates: int = 0
    results: list = field(default_factory=list)
    schema: tuple | None = None
    counterexample: InstanceResult | None = None
    potential: bool = False
    unsplit: str | None = None
    cases: list = field(default_factory=list)
    hint: object = None
    uncovered: int = 0
    truncated: bool = False
    precorner: PreCorner | None = None
    case_formula: str = ""

    @property
    def ok(self) -> bool:
        return self.verdict in ("inconsistent", "joinable_all_sampled", "split_joinable")


def _check_instances(ac: AbstractCorner, insts: list[Instance], program, eq,
                     settings: CheckSettings, known: dict | None = None) -> list[InstanceResult]:
    out = []
    for inst in insts:
        if known and id(inst) in known:
            out.append(known[id(inst)])
            continue
        c = denote(ac, inst)
        r = join_search(c, program, eq, settings.join_depth, settings.max_nodes)
        out.append(InstanceResult(inst, c, r, check_invariant(inst.ancestor, ac.inv)))
    return out


def check_abstract_corner(ac: AbstractCorner, settings: CheckSettings | None = None,
                          uni: Universe | None = None,
                          instances: list[Instance] | None = None,
                          known: dict | None = None) -> CornerResult:
    """Verdict for one abstract corner from its sampled groundings."""
    settings = settings or CheckSettings()
    uni = uni or Universe(ac.program, ac.inv, settings.universe)
    if instances is None:
        instances = candidates(ac, settings, uni)
    total = len(instances)
    insts = sample(instances, settings.universe.max_instances, f"{settings.seed}:{ac.id}")
    res = CornerResult(ac.id, ac.kind, "inconsistent", total, precorner=ac.precorner,
                       case_formula=" & ".join(ac.case_texts))
    if not insts:
        return res
    res.results = _check_instances(ac, insts, ac.program, ac.eq, settings, known)
    bad = [r for r in res.results if not r.join.joinable]
    if bad:
        certified = [r for r in bad if r.join.exhaustive]
        if certified:
            res.verdict = "counterexample"
            res.counterexample = certified[0]
            res.potential = certified[0].invariant is not True
        else:
            res.verdict = "inconclusive"
            res.counterexample = bad[0]
        return res
    common = None
    for r in res.results:
        common = set(r.join.schemas) if common is None else common & r.join.schemas
    if common:
        res.verdict = "joinable_all_sampled"
        res.schema = min(common, key=lambda s: (len(s[0]) + len(s[1]), s))
    else:
        res.verdict = "needs_split"
    return res


def hint_cases(hint) -> tuple[list, bool]:
    """Case formulas for a split hint and whether the split is a truncation."""
    if isinstance(hint, dict) and "succ_enumeration" in hint:
        h = hint["succ_enumeration"]
        return succ_cases(h["pattern"], h["variable"], int(h["bound"])), True
    if isinstance(hint, (list, tuple)) and hint:
        for c in hint:
            parse_case(c)
        return [c if isinstance(c, str) else parse_case(c) for c in hint], False
    raise CornerError(f"bad split hint {hint!r}")


def check_split(ac: AbstractCorner, hint, settings: CheckSettings, uni: Universe,
                parent: list[Instance], known: dict | None = None) -> CornerResult:
    """Check each case of a split; the parent instances are filtered per case."""
    cases, truncated = hint_cases(hint)
    subs = split(ac, cases)
    res = CornerResult(ac.id, ac.kind, "split_joinable", len(parent), hint=hint,
                       truncated=truncated, precorner=ac.precorner)
    for sub in subs:
        mine = [i for i in parent if all(eval_case(c, i) for c in sub.cases[len(ac.cases):])]
        res.cases.append(check_abstract_corner(sub, settings, uni, mine, known))
    parsed = [parse_case(c) for c in cases]
    res.uncovered = sum(1 for i in parent if not any(eval_case(c, i) for c in parsed))
    verdicts = {c.verdict for c in res.cases}
    if "counterexample" in verdicts:
        res.verdict = "counterexample"
        res.counterexample = next(c.counterexample for c in res.cases
                                  if c.verdict == "counterexample")
    elif not verdicts <= {"inconsistent", "joinable_all_sampled"} or res.uncovered:
        res.verdict = "inconclusive"
    return res


# ---------------------------------------------------------------------------
# Report


@dataclass
class OracleRun:
    query: str
    verdict: str
    invariant: bool | None
    finals: int
    pair: tuple[str, str] | None = None


@dataclass
class ConfluenceReport:
    program: str
    invariant: str
    equivalence: str
    settings: CheckSettings
    corners: list[CornerResult]
    overall: str
    reasons: list[str]
    oracle: list[OracleRun]
    exit_code: int
    hints_used: list[str] = field(default_factory=list)

    def corner(self, cid: str) -> CornerResult:
        for c in self.corners:
            if c.id == cid:
                return c
        raise KeyError(cid)

    def counts(self, kind: str | None = None) -> dict:
        out: dict = {}
        for c in self.corners:
            if kind is None or c.kind == kind:
                v = _short(c.verdict)
                out[v] = out.get(v, 0) + 1
        return out

    def to_dict(self) -> dict:
        return {
            "program": self.program,
            "invariant": self.invariant,
            "equivalence": self.equivalence,
            "strategy": self.settings.strategy,
            "join_depth": self.settings.join_depth,
            "seed": self.settings.seed,
            "corners": [_corner_dict(c) for c in self.corners],
            "overall": self.overall,
            "hints_used": self.hints_used,
            "reasons": self.reasons,
            "oracle": [vars(o) for o in self.oracle],
            "termination": self.settings.termination or "not proved; verdicts are bounded evidence",
            "exit_code": self.exit_code,
        }

    def to_text(self) -> str:
        lines = [f"program: {self.program}", f"invariant: {self.invariant}",
                 f"equivalence: {self.equivalence}"]
        lines.append(f"{len(self.corners)} pre-corners: {_count_text(self.counts())}")
        kinds = sorted({c.kind for c in self.corners})
        for k in kinds:
            n = sum(1 for c in self.corners if c.kind == k)
            lines.append(f"  {n} {k}: {_count_text(self.counts(k))}")
        for c in self.corners:
            lines.extend(_corner_lines(c, "  "))
        for o in self.oracle:
            lines.append(f"oracle: {o.query} -> {o.verdict} ({o.finals} final states)")
            if o.pair:
                lines.append(f"  non-equivalent: {o.pair[0]}  vs  {o.pair[1]}")
        lines.append(f"termination: {self.settings.termination or 'not proved; bounded evidence'}")
        for r in self.reasons:
            lines.append(f"note: {r}")
        verdict = self.overall
        if self.hints_used:
            verdict += f" ({', '.join(self.hints_used)})"
        lines.append(f"verdict: {verdict}")
        return "\n".join(lines) + "\n"


def _short(v: str) -> str:
    return {"joinable_all_sampled": "joinable", "split_joinable": "split-joinable",
            "needs_split": "needs split"}.get(v, v)


def _count_text(counts: dict) -> str:
    order = ["inconsistent", "joinable", "split-joinable", "needs split", "counterexample",
             "inconclusive"]
    return ", ".join(f"{counts[k]} {k}" for k in order if k in counts) or "none"


def show(s: State) -> str:
    if not s.is_proper:
        return str(s)
    return str(canonical_state(s)[0])


def _instance_dict(r: InstanceResult) -> dict:
    d = {"ancestor": str(r.instance.ancestor), "left": str(r.instance.left),
         "right": str(r.instance.right), "wing1": show(r.corner.wing1),
         "wing2": show(r.corner.wing2), "verdict": r.verdict}
    if r.join.joinable:
        d["witness"] = [[str(x) for x in r.join.witness[0]], [str(x) for x in r.join.witness[1]]]
    return d


def _corner_dict(c: CornerResult) -> dict:
    d = {"id": c.id, "kind": c.kind, "verdict": c.verdict, "instances": c.candidates,
         "checked": len(c.results)}
    if c.precorner is not None:
        d["ancestor"] = str(c.precorner.ancestor)
        d["labels"] = [str(c.precorner.left), str(c.precorner.right)]
        d["guard"] = c.precorner.guard_status
    if c.case_formula:
        d["case"] = c.case_formula
    if c.schema is not None:
        d["schema"] = [list(c.schema[0]), list(c.schema[1])]
    if c.counterexample is not None:
        d["counterexample"] = _instance_dict(c.counterexample)
        d["potential"] = c.potential
    if c.unsplit is not None:
        d["unsplit"] = c.unsplit
    if c.cases:
        d["cases"] = [_corner_dict(x) for x in c.cases]
        d["uncovered"] = c.uncovered
        d["truncated"] = c.truncated
    return d


def _corner_lines(c: CornerResult, pad: str) -> list[str]:
    head = f"{pad}{c.id}  {_short(c.verdict)}"
    if c.case_formula:
        head += f"  [{c.case_formula}]"
    head += f"  ({len(c.results)} of {c.candidates} instances checked)"
    out = [head]
    if c.unsplit is not None:
        out.append(f"{pad}  unsplit: {_short(c.unsplit)}")
    if c.schema is not None and not c.cases:
        l, r = c.schema
        out.append(f"{pad}  joins by [{', '.join(l)}] / [{', '.join(r)}]")
    if c.counterexample is not None and not c.cases:
        r = c.counterexample
        tag = " (potential)" if c.potential else ""
        out.append(f"{pad}  counterexample{tag}: {r.instance.ancestor}")
        out.append(f"{pad}    wing1: {show(r.corner.wing1)}")
        out.append(f"{pad}    wing2: {show(r.corner.wing2)}")
    if c.truncated:
        out.append(f"{pad}  split truncated at the numeral bound")
    if c.uncovered:
        out.append(f"{pad}  {c.uncovered} instances satisfy no case")
    for sub in c.cases:
        out.extend(_corner_lines(sub, pad + "  "))
    return out


def _check_one(pc: PreCorner, program, inv, eq, settings: CheckSettings,
               uni: Universe) -> CornerResult:
    ac = lift(pc, program, inv, eq)
    parent = candidates(ac, settings, uni)
    res = check_abstract_corner(ac, settings, uni, parent)
    hint = settings.split_hints.get(pc.id)
    if hint is None or res.verdict in ("inconsistent", "counterexample"):
        return res
    known = {id(r.instance): r for r in res.results}
    sres = check_split(ac, hint, settings, uni, parent, known)
    sres.unsplit = res.verdict
    sres.results = res.results
    return sres


def confluence_report(program: Program, inv: InvariantSpec | None = None,
                      eq: EquivalenceSpec | None = None,
                      settings: CheckSettings | None = None) -> ConfluenceReport:
    """Check every most general critical pre-corner and cross-check with exhaustion."""
    eq = eq or IDENTITY
    settings = settings or CheckSettings()
    uni = Universe(program, inv, settings.universe)
    if not uni.ground_terms:
        raise CornerError("empty universe")
    pcs = enumerate_pre_corners(program, inv, eq, uni.ground_terms)
    ids = {pc.id for pc in pcs}
    for cid in settings.split_hints:
        if cid not in ids:
            raise CornerError(f"split hint for unknown corner id {cid!r}")
        hint_cases(settings.split_hints[cid])

    def job(pc):
        return _check_one(pc, program, inv, eq, settings, uni)

    if settings.jobs > 1:
        with ThreadPoolExecutor(settings.jobs) as ex:
            results = list(ex.map(job, pcs))
    else:
        results = [job(pc) for pc in pcs]

    reasons: list[str] = []
    hints_used = [r.id for r in results if r.cases]
    verdicts = [r.verdict for r in results]
    if "counterexample" in verdicts:
        overall, code = "counterexample", 1
        cx = next(r for r in results if r.verdict == "counterexample")
        reasons.append(f"corner {cx.id} is not joinable")
        if cx.potential:
            reasons.append("the counterexample ancestor is not known to satisfy the invariant")
    elif "inconclusive" in verdicts or "needs_split" in verdicts:
        overall, code = "inconclusive", 2
        for r in results:
            if r.verdict == "needs_split":
                reasons.append(f"corner {r.id} needs a split hint")
            elif r.verdict == "inconclusive":
                reasons.append(f"corner {r.id} is inconclusive within the search bounds")
    elif hints_used:
        overall, code = "split_joinable", 0
    else:
        overall, code = "all_joinable", 0

    oracle = []
    queries = list(settings.witness_queries)
    for r in results:
        cx = r.counterexample if r.verdict == "counterexample" else None
        if cx is None:
            for sub in r.cases:
                if sub.verdict == "counterexample":
                    cx = sub.counterexample
        if cx is not None and cx.instance.ancestor not in queries:
            queries.append(cx.instance.ancestor)
    for q in queries:
        start = q if isinstance(q, State) else initial_state(q, program)
        v = confluence_by_exhaustion(start, program, eq, max_nodes=settings.max_nodes)
        oracle.append(OracleRun(q if isinstance(q, str) else str(q), v.kind,
                                check_invariant(start, inv), len(v.finals),
                                (show(v.pair[0]), show(v.pair[1])) if v.pair else None))
    if overall == "counterexample" and oracle and all(o.verdict == "confluent_mod_eq"
                                                       for o in oracle):
        reasons.append("oracle contradiction: every witness is confluent by exhaustion")
        overall, code = "inconclusive", 2
    if code == 0 and any(o.verdict == "counterexample" and o.invariant is True for o in oracle):
        reasons.append("oracle contradiction: a witness state is not confluent")
        overall, code = "inconclusive", 2

    return ConfluenceReport(program.source or "<program>", inv.name if inv else "true",
                            eq.describe(), settings, results, overall, reasons, oracle, code,
                            hints_used)


# ---------------------------------------------------------------------------
# Audit


@dataclass
class AuditResult:
    states: int
    corners: int
    joinable: int
    subsumed: int
    violations: list = field(default_factory=list)
    mismatches: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations and not self.mismatches

    def to_text(self) -> str:
        lines = [f"states: {self.states}", f"corners: {self.corners}",
                 f"joinable: {self.joinable}", f"subsumed: {self.subsumed}",
                 f"violations: {len(self.violations)}",
                 f"covers/subsumes mismatches: {len(self.mismatches)}"]
        for c in self.violations[:5]:
            lines.append(f"  violation: {c}")
        for c, pid in self.mismatches[:5]:
            lines.append(f"  mismatch: {pid} on {c}")
        return "\n".join(lines) + "\n"


def random_states(program: Program, inv: InvariantSpec | None, n: int, rng: random.Random,
                  uni: Universe, max_atoms: int = 4) -> list[State]:
    """``n`` random states satisfying the invariant."""
    if n <= 0:
        raise ValueError("sample count must be positive")
    if inv is not None and inv.has("reachable_from"):
        pool = [s for _, s in sorted(reachable_states(inv).items(), key=lambda kv: str(kv[1]))
                if s.is_proper]
        return [rng.choice(pool) for _ in range(n)] if pool else []
    atoms = uni.extension_atoms()
    out: list[State] = []
    tries = 0
    while len(out) < n and tries < 200 * n:
        tries += 1
        k = rng.randint(1, max_atoms)
        s = State.from_atoms([rng.choice(atoms) for _ in range(k)])
        recs = sorted(all_relevant_app_recs(s.store, program), key=str)
        hist = [r for r in recs if rng.random() < 0.5]
        if hist:
            s = State(s.store, hist)
        if check_invariant(s, inv) is True:
            out.append(s)
    return out


def state_corners(s: State, program: Program, eq: EquivalenceSpec,
                  uni: Universe | None = None, inv: InvariantSpec | None = None) -> list[Corner]:
    """The alpha corners of ``s`` and beta corners against a few variants of it;
    a variant is only used as a left wing when it satisfies the invariant."""
    steps = list(enumerate_steps(s, program))
    out = [Corner(s, l1, l2, w1, w2) for (l1, w1), (l2, w2) in itertools.combinations(steps, 2)]
    if not eq.is_identity:
        for y in eq_variants(s, eq, uni, limit=2):
            if check_invariant(y, inv) is False:
                continue
            out += [Corner(s, EQUIV, l, y, w) for l, w in steps]
    return out


def random_corner_audit(program: Program, inv: InvariantSpec | None = None,
                        eq: EquivalenceSpec | None = None, n: int = 200, seed: int = 0,
                        precorners: list[PreCorner] | None = None,
                        settings: CheckSettings | None = None,
                        cross_check: bool = True) -> AuditResult:
    """Every corner of random invariant states must be joinable or subsumed."""
    eq = eq or IDENTITY
    settings = settings or CheckSettings()
    rng = random.Random(seed)
    uni = Universe(program, inv, settings.universe)
    pcs = precorners if precorners is not None else enumerate_pre_corners(
        program, inv, eq, uni.ground_terms)
    lifted = [lift(pc, program, inv, eq) for pc in pcs]
    states = random_states(program, inv, n, rng, uni)
    res = AuditResult(len(states), 0, 0, 0)
    cache: dict = {}
    for s in states:
        for c in state_corners(s, program, eq, uni, inv):
            res.corners += 1
            ck = (s.key(), str(c.left), str(c.right), c.wing1.key())
            if ck in cache:
                joined, sub = cache[ck]
            else:
                joined = join_search(c, program, eq, settings.join_depth,
                                     settings.max_nodes).joinable
                subs = [subsumes(pc, c, program) is not None for pc in pcs]
                sub = any(subs)
                if cross_check:
                    for pc, ac, flag in zip(pcs, lifted, subs):
                        if covers(ac, c) != flag:
                            res.mismatches.append((c, pc.id))
                cache[ck] = (joined, sub)
            res.joinable += joined
            res.subsumed += sub
            if not joined and not sub:
                res.violations.append(c)
    return res
