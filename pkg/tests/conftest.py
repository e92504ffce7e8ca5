import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

# criterion number -> list of (passed, detail); filled by the acceptance tests
CRITERIA: dict[int, list] = {}


def record(number: int, passed: bool, detail: str) -> bool:
    CRITERIA.setdefault(number, []).append((bool(passed), detail))
    print(f"{'PASS' if passed else 'FAIL'} criterion {number:2d}: {detail}")
    return bool(passed)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        parts = CRITERIA[number]
        ok = all(p for p, _ in parts)
        detail = "; ".join(d for _, d in parts)
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {detail}")
