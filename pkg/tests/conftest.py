import time
from contextlib import contextmanager

import numpy as np
import pytest

_LINES = pytest.StashKey[list]()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def criterion(request):
    """Time a block as one acceptance criterion and log a PASS/FAIL line.

    The block may set ``info["detail"]`` to a short summary of what it measured.
    A block that raises, or runs past ``limit`` seconds, is a FAIL.
    """
    lines = request.config.stash.setdefault(_LINES, [])

    @contextmanager
    def run(number: int, title: str, limit: float):
        info = {"detail": ""}
        start = time.perf_counter()
        try:
            yield info
        except BaseException:
            elapsed = time.perf_counter() - start
            lines.append(f"FAIL criterion {number}: {title} ({elapsed:.1f}s) {info['detail']}".rstrip())
            print(lines[-1])
            raise
        elapsed = time.perf_counter() - start
        ok = elapsed <= limit
        lines.append(f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} "
                     f"({elapsed:.1f}s, limit {limit:g}s) {info['detail']}".rstrip())
        print(lines[-1])
        assert ok, f"criterion {number} took {elapsed:.1f}s, limit {limit:g}s"

    return run


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
