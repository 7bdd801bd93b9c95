from __future__ import annotations

import pytest

_VERDICTS: dict[int, tuple[bool, str]] = {}


class Criterion:
    """Collects named checks for one acceptance criterion and reports a single verdict."""

    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title
        self.checks: list[tuple[str, bool, str]] = []

    def check(self, name: str, ok, detail: str = "") -> bool:
        ok = bool(ok)
        self.checks.append((name, ok, detail))
        return ok

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(ok for _, ok, _ in self.checks)

    def line(self) -> str:
        failed = [f"{n} ({d})" if d else n for n, ok, d in self.checks if not ok]
        tail = "; failed: " + ", ".join(failed) if failed else ""
        return f"criterion {self.number} {'PASS' if self.passed else 'FAIL'}: {self.title} [{len(self.checks)} checks]{tail}"

    def finish(self) -> None:
        _VERDICTS[self.number] = (self.passed, self.line())
        print(self.line())
        for name, ok, detail in self.checks:
            print(f"    {'ok ' if ok else 'BAD'} {name}" + (f": {detail}" if detail else ""))
        assert self.passed, self.line()


@pytest.fixture
def criterion():
    made = []

    def make(number: int, title: str) -> Criterion:
        c = Criterion(number, title)
        made.append(c)
        return c

    yield make
    for c in made:
        if c.number not in _VERDICTS:
            _VERDICTS[c.number] = (False, c.line() + " (did not finish)")


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_VERDICTS):
        terminalreporter.write_line(_VERDICTS[k][1])
