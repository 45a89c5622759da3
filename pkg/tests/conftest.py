from __future__ import annotations

import functools

import pytest

from sba_lab.model import ExchangeKind, SystemConfig
from sba_lab.space import PointSpace, RunTree

ACCEPTANCE_LINES: list[str] = []


@functools.lru_cache(maxsize=None)
def tree(n: int, t: int, horizon: int | None = None) -> RunTree:
    return RunTree.exhaustive_tree(SystemConfig(n, t, horizon))


@functools.lru_cache(maxsize=None)
def space(n: int, t: int, kind: str, horizon: int | None = None) -> PointSpace:
    return PointSpace(tree(n, t, horizon), ExchangeKind.parse(kind))


@pytest.fixture
def get_space():
    return space


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
