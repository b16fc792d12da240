import pytest

# criterion id -> (passed, detail); filled by the acceptance tests
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


class Criterion:
    """Collects named sub-checks for one acceptance criterion."""

    def __init__(self, cid: str, title: str):
        self.cid, self.title = cid, title
        self.checks: list[tuple[str, bool, str]] = []

    def check(self, name: str, ok: bool, detail: str = "") -> bool:
        self.checks.append((name, bool(ok), detail))
        return bool(ok)

    def finish(self):
        ok = all(c[1] for c in self.checks) and bool(self.checks)
        parts = [f"{n} {'ok' if good else 'FAILED'}{': ' + d if d else ''}"
                 for n, good, d in self.checks]
        ACCEPTANCE[self.cid] = (ok, f"{self.title} | " + "; ".join(parts))
        failed = [n for n, good, _ in self.checks if not good]
        assert ok, f"{self.cid} failed sub-checks: {failed}"


@pytest.fixture
def criterion(request):
    made = []

    def make(cid, title):
        c = Criterion(cid, title)
        made.append(c)
        return c

    yield make
    for c in made:
        if c.cid not in ACCEPTANCE:  # the test errored before finish()
            ACCEPTANCE[c.cid] = (False, f"{c.title} | did not complete")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE, key=lambda k: int(k[1:])):
        ok, detail = ACCEPTANCE[cid]
        tr.write_line(f"{cid} {'PASS' if ok else 'FAIL'} {detail}")
