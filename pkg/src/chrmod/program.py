"""CHR rules and programs, the program parser, and application records."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .builtin import is_builtin
from .syntax import ChrSyntaxError, Reader, conjuncts, read_clauses
from .term import Struct, Term, Var, base_name, format_term, fresh_var, substitute, term_vars


class ProgramError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class Record:
    """Application record ``rule @ i1 ... in`` (indices in head order)."""

    rule: str
    indices: tuple[int, ...]

    def __str__(self) -> str:
        return f"{self.rule}@{','.join(map(str, self.indices))}"

    def renumber(self, mapping) -> "Record":
        return Record(self.rule, tuple(mapping[i] for i in self.indices))


@dataclass(frozen=True)
class Rule:
    name: str
    kept: tuple[Term, ...]
    removed: tuple[Term, ...]
    guard: tuple[Term, ...] = ()
    body: tuple[Term, ...] = ()

    def __post_init__(self):
        if not self.kept and not self.removed:
            raise ProgramError(f"rule {self.name}: empty head")

    @property
    def heads(self) -> tuple[Term, ...]:
        return self.kept + self.removed

    @property
    def kind(self) -> str:
        if not self.kept:
            return "simplification"
        if not self.removed:
            return "propagation"
        return "simpagation"

    @property
    def is_propagation(self) -> bool:
        return not self.removed

    def head_vars(self) -> set[Var]:
        return set(term_vars(self.heads))

    def local_vars(self) -> list[Var]:
        hv = self.head_vars()
        return [v for v in term_vars((self.guard, self.body)) if v not in hv]

    def rename(self, mapping) -> "Rule":
        return Rule(self.name, substitute(self.kept, mapping), substitute(self.removed, mapping),
                    substitute(self.guard, mapping), substitute(self.body, mapping))

    def fresh(self) -> "Rule":
        """A variant with fresh variables throughout."""
        mapping = {v: fresh_var(v.name) for v in term_vars((self.heads, self.guard, self.body))}
        return self.rename(mapping)

    def __str__(self) -> str:
        return format_rule(self)


def _conj_text(items: Sequence[Term]) -> str:
    return ", ".join(format_term(t, 999) for t in items) if items else "true"


def _display_names(r: Rule) -> Rule:
    """Give fresh variables printable names; singleton anonymous ones become ``_``."""
    counts: dict[Var, int] = {}
    for part in (r.kept, r.removed, r.guard, r.body):
        for t in part:
            for v in _occurrences(t):
                counts[v] = counts.get(v, 0) + 1
    taken = {v.name for v in counts if "__" not in v.name}
    mapping = {}
    for v, n in counts.items():
        if "__" not in v.name:
            continue
        base = base_name(v.name)
        if base == "_" and n == 1:
            mapping[v] = Var("_")
            continue
        stem = base if base != "_" else "_G"
        k = 1
        name = stem
        while name in taken:
            k += 1
            name = f"{stem}{k}"
        taken.add(name)
        mapping[v] = Var(name)
    return r.rename(mapping) if mapping else r


def _occurrences(t):
    if isinstance(t, Var):
        yield t
    elif isinstance(t, Struct):
        for a in t.args:
            yield from _occurrences(a)


def format_rule(r: Rule) -> str:
    r = _display_names(r)
    if r.is_propagation:
        head = f"{_conj_text(r.kept)} ==> "
    elif not r.kept:
        head = f"{_conj_text(r.removed)} <=> "
    else:
        head = f"{_conj_text(r.kept)} \\ {_conj_text(r.removed)} <=> "
    guard = f"{_conj_text(r.guard)} | " if r.guard else ""
    return f"{r.name} @ {head}{guard}{_conj_text(r.body)}."


@dataclass
class Program:
    rules: list[Rule]
    constraints: set[tuple[str, int]] = field(default_factory=set)
    declared: bool = False
    source: str | None = None

    def rule(self, name: str) -> Rule:
        for r in self.rules:
            if r.name == name:
                return r
        raise KeyError(name)

    @property
    def propagation_rules(self) -> list[Rule]:
        return [r for r in self.rules if r.is_propagation]

    def without(self, *names: str) -> "Program":
        return Program([r for r in self.rules if r.name not in names], set(self.constraints),
                       self.declared, self.source)

    def __str__(self) -> str:
        lines = []
        if self.declared:
            decl = ", ".join(f"{n}/{a}" for n, a in sorted(self.constraints))
            lines.append(f":- chr_constraint {decl}.")
        lines.extend(format_rule(r) for r in self.rules)
        return "\n".join(lines) + "\n"


def _indicator(t: Term):
    if isinstance(t, Struct):
        return (t.functor, len(t.args))
    return None


def _decl_items(t: Term) -> list[tuple[str, int]]:
    out = []
    for item in conjuncts(t):
        if (isinstance(item, Struct) and item.functor == "/" and len(item.args) == 2
                and isinstance(item.args[0], Struct) and not item.args[0].args):
            ar = item.args[1]
            if hasattr(ar, "value") and ar.value.denominator == 1:
                out.append((item.args[0].functor, int(ar.value)))
                continue
        raise ProgramError(f"bad constraint declaration item {format_term(item)}")
    return out


def _split_rule(t: Term):
    """Decompose a clause term into (name, kept, removed, guard, body)."""
    name = None
    if isinstance(t, Struct) and t.functor == "@" and len(t.args) == 2:
        n = t.args[0]
        if not (isinstance(n, Struct) and not n.args):
            raise ProgramError(f"rule name must be an atom, found {format_term(n)}")
        name = n.functor
        t = t.args[1]
    if not (isinstance(t, Struct) and t.functor in ("<=>", "==>") and len(t.args) == 2):
        raise ProgramError(f"not a rule: {format_term(t)}")
    arrow = t.functor
    head, rhs = t.args
    if isinstance(rhs, Struct) and rhs.functor == "|" and len(rhs.args) == 2:
        guard, body = conjuncts(rhs.args[0]), conjuncts(rhs.args[1])
    else:
        guard, body = [], conjuncts(rhs)
    if arrow == "==>":
        if isinstance(head, Struct) and head.functor == "\\" and len(head.args) == 2:
            raise ProgramError("propagation rule cannot have a removed head")
        kept, removed = conjuncts(head), []
    elif isinstance(head, Struct) and head.functor == "\\" and len(head.args) == 2:
        kept, removed = conjuncts(head.args[0]), conjuncts(head.args[1])
    else:
        kept, removed = [], conjuncts(head)
    return name, kept, removed, guard, body


def parse_program(text: str, source: str | None = None) -> Program:
    """Parse CHR source text into a program.

    Constraint declarations are enforced when present; otherwise the
    constraint predicates are those occurring in rule heads.
    """
    clauses = read_clauses(text)
    declared: set[tuple[str, int]] = set()
    has_decl = False
    raw = []
    for term, _vars, tok in clauses:
        if isinstance(term, Struct) and term.functor == ":-" and len(term.args) == 1:
            d = term.args[0]
            if isinstance(d, Struct) and d.functor == "chr_constraint" and len(d.args) == 1:
                try:
                    declared.update(_decl_items(d.args[0]))
                except ProgramError as e:
                    raise ChrSyntaxError(str(e), tok.line, tok.col) from None
                has_decl = True
                continue
            raise ChrSyntaxError("unsupported directive", tok.line, tok.col)
        try:
            raw.append((_split_rule(term), tok))
        except ProgramError as e:
            raise ChrSyntaxError(str(e), tok.line, tok.col) from None

    if not has_decl:
        for (name, kept, removed, _g, _b), _tok in raw:
            for h in kept + removed:
                ind = _indicator(h)
                if ind is not None and not is_builtin(h):
                    declared.add(ind)

    rules: list[Rule] = []
    names: set[str] = set()
    for k, ((name, kept, removed, guard, body), tok) in enumerate(raw, 1):
        name = name or f"rule_{k}"
        if name in names:
            raise ProgramError(f"duplicate rule name {name!r} (line {tok.line})")
        names.add(name)
        for h in kept + removed:
            if not isinstance(h, Struct) or is_builtin(h) or _indicator(h) not in declared:
                raise ProgramError(
                    f"rule {name}: head {format_term(h)} is not a declared constraint")
        for g in guard:
            if not is_builtin(g):
                raise ProgramError(f"rule {name}: guard {format_term(g)} is not a built-in")
        for b in body:
            if not isinstance(b, Struct):
                raise ProgramError(f"rule {name}: bad body item {format_term(b)}")
            if not is_builtin(b) and _indicator(b) not in declared:
                raise ProgramError(
                    f"rule {name}: body constraint {b.functor}/{len(b.args)} is undeclared")
        rules.append(Rule(name, tuple(kept), tuple(removed), tuple(guard), tuple(body)))
    return Program(rules, declared, has_decl, source)


def parse_query(text: str, program: Program | None = None) -> tuple[Term, ...]:
    """Parse a query (body syntax) into a tuple of atoms."""
    t = Reader(text).read_term()
    items = tuple(conjuncts(t))
    for a in items:
        if not isinstance(a, Struct):
            raise ProgramError(f"bad query item {format_term(a)}")
        if program is not None and not is_builtin(a) and _indicator(a) not in program.constraints:
            raise ProgramError(f"query constraint {a.functor}/{len(a.args)} is undeclared")
    return items


def fresh_pre_application_instance(rule: Rule, next_index: int) -> tuple[Rule, tuple[int, ...]]:
    """A fresh variant of ``rule`` with head indices starting at ``next_index``."""
    return rule.fresh(), tuple(range(next_index, next_index + len(rule.heads)))


def application_record(rule: Rule | str, indices: Iterable[int]) -> Record:
    name = rule if isinstance(rule, str) else rule.name
    return Record(name, tuple(indices))
