"""Shared fixtures: tables are expensive to build, so each is built once per session."""

import time

import pytest

from bingham_closure import build_table, build_table_biaxial, build_table_uni


class Built:
    def __init__(self, table, seconds):
        self.table = table
        self.seconds = seconds


def _timed(fn, *args, **kw):
    t0 = time.perf_counter()
    table = fn(*args, **kw)
    return Built(table, time.perf_counter() - t0)


@pytest.fixture(scope="session")
def circle_global_built():
    return _timed(build_table, "global")


@pytest.fixture(scope="session")
def circle_global(circle_global_built):
    return circle_global_built.table


@pytest.fixture(scope="session")
def circle_piecewise():
    return build_table("piecewise")


@pytest.fixture(scope="session")
def uni_global():
    return build_table_uni("global")


@pytest.fixture(scope="session")
def uni_piecewise():
    return build_table_uni("piecewise")


@pytest.fixture(scope="session")
def bi_piecewise():
    return build_table_biaxial("piecewise")


@pytest.fixture(scope="session")
def bi_global():
    return build_table_biaxial("global")


# -- acceptance report ------------------------------------------------------------

_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance(request):
    """``record(n, title, ok, detail)``: log one pass/fail line for criterion ``n``."""
    log = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(n, title, ok, detail):
        line = f"criterion {n:>2}  {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        log.append((n, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    log = config.stash.get(_ACCEPTANCE, [])
    if log:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(log):
            terminalreporter.write_line(line)
