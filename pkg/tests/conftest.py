from __future__ import annotations

import contextlib
from pathlib import Path

import pytest

FIXTURE_DIR = Path(__file__).resolve().parent / "fixtures" / "synthetic34"

_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def fixture_dir() -> Path:
    return FIXTURE_DIR


@pytest.fixture
def criterion(request):
    """Context manager that records a PASS/FAIL line for an acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    @contextlib.contextmanager
    def _criterion(tag: str, text: str):
        status = {"result": "PASS", "detail": ""}
        try:
            yield status
        except pytest.skip.Exception as exc:
            lines.append(f"SKIP {tag} {text}: {exc}")
            raise
        except BaseException as exc:
            lines.append(f"FAIL {tag} {text}: {exc}".splitlines()[0])
            raise
        detail = f": {status['detail']}" if status["detail"] else ""
        lines.append(f"{status['result']} {tag} {text}{detail}")

    return _criterion


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines, key=lambda s: s.split()[1]):
        terminalreporter.write_line(line)
