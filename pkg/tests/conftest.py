import sys
from pathlib import Path

# make the reference oracles importable as a plain module
sys.path.insert(0, str(Path(__file__).parent))

_CRITERIA = []


def record_criterion(number, passed, detail):
    """Remember a criterion result for the end-of-run summary."""
    _CRITERIA.append((number, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_CRITERIA):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}")
