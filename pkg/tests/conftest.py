from __future__ import annotations

from contextlib import contextmanager
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from qgtrace import fixtures

settings.register_profile(
    "repo",
    derandomize=True,
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

DATA = Path(__file__).resolve().parents[1] / "src" / "qgtrace" / "data"

FIXTURE_GRAPHS = {
    "interval": fixtures.interval,
    "star3": fixtures.star,
    "triangle": fixtures.triangle,
    "lasso": fixtures.lasso,
    "four_vertex": fixtures.four_vertex_example,
}


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture(params=sorted(FIXTURE_GRAPHS))
def fixture_graph(request):
    return FIXTURE_GRAPHS[request.param]()


# acceptance criteria report: one line per criterion in the terminal summary
ACCEPTANCE: dict[int, str] = {}


@contextmanager
def criterion(number: int, title: str):
    notes: list[str] = []
    try:
        yield notes
    except BaseException as exc:
        notes.append(f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}")
        _record(number, title, False, notes)
        raise
    _record(number, title, True, notes)


def _record(number: int, title: str, ok: bool, notes: list[str]) -> None:
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}"
    if notes:
        line += "  [" + "; ".join(notes) + "]"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
