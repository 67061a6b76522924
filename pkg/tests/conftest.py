import sys

import pytest

from divmol.recipe import PriorRecipe, cached_prior

_CRITERIA: dict[int, str] = {}


@pytest.fixture(scope="session")
def default_prior(request):
    """The recipe prior, trained once (several minutes) and then reused from the pytest cache."""
    directory = request.config.cache.mkdir("divmol-prior")
    net, path = cached_prior(directory, PriorRecipe(), log=lambda m: print(m, file=sys.stderr, flush=True))
    return net, path


@pytest.fixture
def criterion():
    """Record one pass/fail line for an acceptance criterion and return the verdict."""

    def record(number: int, title: str, ok: bool, detail: str) -> bool:
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        _CRITERIA[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
