"""Shared pytest hooks: acceptance verdicts are echoed in the terminal summary."""

ACCEPTANCE: dict[str, str] = {}


def record(key: str, ok: bool, detail: str) -> None:
    """Store and print one verdict line; the calling test asserts ``ok``."""
    line = f"{key} {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[key] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
