from chrmod.cli import build_config
from chrmod.program import parse_query


def load(name):
    """Program, invariant and equivalence of a bundled corpus entry with its config."""
    cfg = build_config(name)
    prog, inv, eq = cfg.load()
    return prog, inv, eq, cfg.settings


def atoms(text):
    return list(parse_query(text))


# one line per acceptance criterion, printed at the end of the run
CRITERIA: dict = {}


def record_criterion(number: int, title: str, checks: list[tuple[str, bool]]):
    ok = all(passed for _, passed in checks)
    failed = [name for name, passed in checks if not passed]
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}"
    if failed:
        line += "  (failed: " + "; ".join(failed) + ")"
    CRITERIA[number] = line
    return ok, failed


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[n])
