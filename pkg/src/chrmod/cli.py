"""Command-line front end: run, explore, corners, check and audit."""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import click

from .checker import CheckSettings, confluence_report, random_corner_audit, show
from .corners import CornerError, UniverseConfig, enumerate_pre_corners, Universe
from .engine import confluence_by_exhaustion, explore as explore_graph, initial_state, run as run_steps
from .program import ProgramError, parse_program
from .state import (CORPUS, IDENTITY, load_equivalence, load_invariant, load_yaml,
                    resolve_spec_path)
from .syntax import ChrSyntaxError

EXIT_OK, EXIT_COUNTEREXAMPLE, EXIT_INCONCLUSIVE, EXIT_USAGE = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class AnalysisConfig:
    program: Path
    invariant: object = None          # spec name, path, mapping or None
    equivalence: object = "identity"
    settings: CheckSettings = field(default_factory=CheckSettings)
    base: Path | None = None          # directory for resolving relative spec names

    def load(self):
        try:
            prog = parse_program(self.program.read_text(encoding="utf-8"), self.program.name)
        except OSError as e:
            raise ConfigError(f"cannot read program: {e}") from None
        inv = None
        if self.invariant not in (None, "none", "true"):
            inv = load_invariant(self.invariant, prog, self.base)
        eq = IDENTITY if self.equivalence in (None, "identity") else load_equivalence(
            self.equivalence, self.base)
        return prog, inv, eq


def resolve_program(ref: str) -> Path:
    """A program path, falling back to the bundled corpus by file name."""
    p = Path(ref)
    if p.is_file():
        return p
    for cand in (CORPUS / p.name, CORPUS / f"{p.name}.chr"):
        if cand.is_file():
            return cand
    raise ConfigError(f"program not found: {ref}")


def default_config_path(program: Path) -> Path | None:
    for cand in (program.with_suffix(".yaml"), CORPUS / f"{program.stem}.yaml"):
        if cand.is_file():
            return cand
    return None


_UNIVERSE_KEYS = {"depth", "extra_constants", "succ_depth", "max_instances", "extension_k",
                  "max_product", "variables"}
_TOP_KEYS = {"program", "invariant", "equivalence", "strategy", "universe", "extension_k",
             "join_depth", "max_nodes", "seed", "witness_queries", "split_hints", "jobs",
             "termination"}


def apply_config(cfg: AnalysisConfig, data: dict, path: Path, with_program: bool) -> AnalysisConfig:
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    s = cfg.settings
    uni = s.universe
    u = data.get("universe") or {}
    if set(u) - _UNIVERSE_KEYS:
        raise ConfigError(f"{path}: unknown universe keys {sorted(set(u) - _UNIVERSE_KEYS)}")
    if "extra_constants" in u:
        uni = replace(uni, extra_constants=tuple(str(x) for x in u["extra_constants"]))
    for k in ("depth", "succ_depth", "max_instances", "extension_k", "max_product", "variables"):
        if k in u:
            uni = replace(uni, **{k: _positive(u[k], k, allow_zero=k != "max_instances")})
    if "extension_k" in data:
        uni = replace(uni, extension_k=_positive(data["extension_k"], "extension_k", True))
    s = replace(s, universe=uni)
    for k in ("join_depth", "max_nodes", "jobs"):
        if k in data:
            s = replace(s, **{k: _positive(data[k], k)})
    if "seed" in data:
        s = replace(s, seed=int(data["seed"]))
    if "strategy" in data:
        if data["strategy"] not in ("universe", "reachable"):
            raise ConfigError(f"{path}: unknown strategy {data['strategy']!r}")
        s = replace(s, strategy=data["strategy"])
    if "witness_queries" in data:
        s = replace(s, witness_queries=[str(q) for q in data["witness_queries"] or []])
    if "split_hints" in data:
        hints = data["split_hints"] or {}
        if not isinstance(hints, dict):
            raise ConfigError(f"{path}: split_hints must be a mapping")
        s = replace(s, split_hints=dict(hints))
    if "termination" in data:
        s = replace(s, termination=str(data["termination"]))
    cfg = replace(cfg, settings=s, base=path.parent)
    if "invariant" in data:
        cfg.invariant = data["invariant"]
    if "equivalence" in data:
        cfg.equivalence = data["equivalence"]
    if with_program and "program" in data:
        cfg.program = resolve_program(str(path.parent / data["program"])
                                      if (path.parent / data["program"]).is_file()
                                      else data["program"])
    return cfg


def _positive(v, name, allow_zero=False) -> int:
    try:
        n = int(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be an integer") from None
    if n < 0 or (n == 0 and not allow_zero):
        raise ConfigError(f"{name} must be positive")
    return n


def build_config(program: str | None, config: str | None = None, inv: str | None = None,
                 eq: str | None = None, **flags) -> AnalysisConfig:
    """Defaults from ``<program>.yaml``, then flags, then an explicit config file."""
    explicit = None
    if config:
        try:
            explicit = resolve_spec_path(config)
        except FileNotFoundError as e:
            raise ConfigError(str(e)) from None
    if program is None:
        if explicit is None:
            raise ConfigError("no program given")
        data = load_yaml(explicit)
        if "program" not in data:
            raise ConfigError(f"{explicit}: no program key")
        program = str(explicit.parent / data["program"])
    path = resolve_program(program)
    cfg = AnalysisConfig(path)
    default = default_config_path(path)
    if default is not None and explicit is None:
        cfg = apply_config(cfg, load_yaml(default), default, with_program=False)
    if inv is not None:
        cfg.invariant = inv
        cfg.base = None
    if eq is not None:
        cfg.equivalence = eq
    overrides = {k: v for k, v in flags.items() if v is not None}
    if overrides:
        data = {}
        uni = {}
        for k, v in overrides.items():
            if k == "universe_depth":
                uni["depth"] = v
            elif k in ("succ_depth", "max_instances"):
                uni[k] = v
            elif k == "depth":
                data["join_depth"] = v
            else:
                data[k] = v
        if uni:
            data["universe"] = uni
        base = cfg.base
        cfg = apply_config(cfg, data, Path("<flags>"), with_program=False)
        cfg.base = base
    if explicit is not None:
        cfg = apply_config(cfg, load_yaml(explicit), explicit, with_program=False)
    return cfg


def _emit(obj, as_json: bool, text: str):
    if as_json:
        click.echo(json.dumps(obj, indent=2, sort_keys=True, default=_json_default))
    else:
        click.echo(text, nl=not text.endswith("\n"))


def _json_default(o):
    if isinstance(o, Fraction):
        return str(o)
    return str(o)


_common = [
    click.option("--config", "config", default=None, help="Analysis config file (overrides flags)."),
    click.option("--inv", default=None, help="Invariant spec name or path, or 'none'."),
    click.option("--eq", default=None, help="Equivalence spec name or path, or 'identity'."),
    click.option("--json", "as_json", is_flag=True, help="Emit JSON."),
]


def common(fn):
    for opt in reversed(_common):
        fn = opt(fn)
    return fn


@click.group()
@click.version_option(package_name="chrmod")
def cli():
    """CHR engine and confluence-modulo-equivalence analyzer."""


@cli.command("run")
@click.argument("program")
@click.option("--query", "-q", required=True)
@click.option("--max-steps", default=10_000, show_default=True, type=int)
@click.option("--json", "as_json", is_flag=True)
def run_cmd(program, query, max_steps, as_json):
    """Run one derivation with the first-applicable step policy."""
    prog = parse_program(resolve_program(program).read_text(encoding="utf-8"))
    s = initial_state(query, prog)
    trace = [{"step": None, "state": str(s)}]
    for label, nxt in run_steps(s, prog, max_steps):
        trace.append({"step": str(label), "state": str(nxt)})
    lines = [f"   {trace[0]['state']}"]
    lines += [f"-> [{t['step']}] {t['state']}" for t in trace[1:]]
    _emit({"trace": trace, "final": trace[-1]["state"], "steps": len(trace) - 1}, as_json,
          "\n".join(lines) + "\n")
    return EXIT_OK


@cli.command("explore")
@click.argument("program")
@click.option("--query", "-q", required=True)
@click.option("--max-nodes", default=10_000, show_default=True, type=int)
@common
def explore_cmd(program, query, max_nodes, config, inv, eq, as_json):
    """Explore all derivations from a query and list the final states."""
    cfg = build_config(program, config, inv, eq)
    prog, _inv, eqs = cfg.load()
    start = initial_state(query, prog)
    v = confluence_by_exhaustion(start, prog, eqs, max_nodes=max_nodes)
    g = v.graph
    finals = [show(f) for f in v.finals]
    longest = g.longest_path()
    out = {"states": len(g.states), "edges": len(g.edges), "finals": finals,
           "truncated": g.truncated, "longest_derivation": longest,
           "equivalence": eqs.describe(), "verdict": v.kind}
    lines = [f"states: {len(g.states)}  edges: {len(g.edges)}  truncated: {g.truncated}",
             f"longest derivation: {longest if longest is not None else 'cyclic'}",
             f"{len(finals)} final states:"]
    lines += [f"  {f}" for f in finals]
    lines.append(f"modulo {eqs.describe()}: {v.kind}")
    if v.pair:
        out["pair"] = [show(v.pair[0]), show(v.pair[1])]
        lines.append(f"  non-equivalent: {out['pair'][0]}  vs  {out['pair'][1]}")
    _emit(out, as_json, "\n".join(lines) + "\n")
    return EXIT_OK


@cli.command("corners")
@click.argument("program", required=False)
@common
def corners_cmd(program, config, inv, eq, as_json):
    """List the most general critical pre-corners."""
    cfg = build_config(program, config, inv, eq)
    prog, invs, eqs = cfg.load()
    uni = Universe(prog, invs, cfg.settings.universe)
    pcs = enumerate_pre_corners(prog, invs, eqs, uni.ground_terms)
    kinds: dict = {}
    for pc in pcs:
        kinds[pc.kind] = kinds.get(pc.kind, 0) + 1
    lines = [f"{len(pcs)} pre-corners: " + ", ".join(f"{n} {k}" for k, n in sorted(kinds.items()))]
    for pc in pcs:
        lines.append(f"  {pc.id}")
        lines.append(f"    {pc.left} <- {pc.ancestor} -> {pc.right}")
        if pc.guard_status != "sat":
            lines.append(f"    guard satisfiability: {pc.guard_status}")
    _emit({"count": len(pcs), "kinds": kinds, "corners": [pc.to_dict() for pc in pcs]},
          as_json, "\n".join(lines) + "\n")
    return EXIT_OK


@cli.command("check")
@click.argument("program", required=False)
@common
@click.option("--depth", type=int, default=None, help="Join search depth.")
@click.option("--universe-depth", type=int, default=None, help="Maximal list length in the universe.")
@click.option("--succ-depth", type=int, default=None)
@click.option("--extension-k", type=int, default=None)
@click.option("--max-instances", type=int, default=None)
@click.option("--strategy", type=click.Choice(["universe", "reachable"]), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--jobs", type=int, default=None)
def check_cmd(program, config, inv, eq, as_json, **flags):
    """Check confluence modulo equivalence via abstract critical corners."""
    cfg = build_config(program, config, inv, eq, **flags)
    prog, invs, eqs = cfg.load()
    rep = confluence_report(prog, invs, eqs, cfg.settings)
    _emit(rep.to_dict(), as_json, rep.to_text())
    return rep.exit_code


@cli.command("audit")
@click.argument("program", required=False)
@common
@click.option("-n", "samples", default=200, show_default=True, type=int)
@click.option("--seed", type=int, default=None)
@click.option("--depth", type=int, default=None)
def audit_cmd(program, config, inv, eq, as_json, samples, seed, depth):
    """Check that every corner of random invariant states is joinable or subsumed."""
    if samples <= 0:
        raise ConfigError("-n must be positive")
    cfg = build_config(program, config, inv, eq, seed=seed, depth=depth)
    prog, invs, eqs = cfg.load()
    res = random_corner_audit(prog, invs, eqs, samples, cfg.settings.seed, settings=cfg.settings)
    out = {"states": res.states, "corners": res.corners, "joinable": res.joinable,
           "subsumed": res.subsumed, "violations": [str(c) for c in res.violations],
           "mismatches": [[str(c), pid] for c, pid in res.mismatches]}
    _emit(out, as_json, res.to_text())
    return EXIT_OK if res.ok else EXIT_COUNTEREXAMPLE


def main(argv=None) -> int:
    try:
        rv = cli.main(args=argv, prog_name="chrmod", standalone_mode=False)
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.ClickException as e:
        e.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        return EXIT_USAGE
    except (ConfigError, CornerError, ProgramError, ChrSyntaxError, FileNotFoundError,
            ValueError, KeyError) as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_USAGE
    return rv if isinstance(rv, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
