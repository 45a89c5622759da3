"""Brute-force epistemic model checking over a :class:`~sba_lab.space.PointSpace`.

Formulas are evaluated one time level at a time: every operator used here
relates points of the same time only (local states carry the clock, and a
crashed agent is never consulted by E, C or D).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .model import DECIDE, NOOP, Action, SBAError
from .space import PointSpace

Point = tuple[int, int]  # (time, node index)


class UnknownAtom(SBAError):
    pass


class EmptyN(SBAError):
    """Distributed knowledge asked of an empty nonfailed set."""


class CrashedAgent(SBAError):
    pass


class Formula:
    def __invert__(self):
        return Not(self)

    def __and__(self, other):
        return And((self, other))

    def __or__(self, other):
        return Or((self, other))


@dataclass(frozen=True)
class Exists(Formula):
    value: int


@dataclass(frozen=True)
class Nonfailed(Formula):
    agent: int


@dataclass(frozen=True)
class Clean(Formula):
    pass


@dataclass(frozen=True)
class Failed(Formula):
    """At least ``count`` agents have crashed by the current time."""

    count: int


@dataclass(frozen=True)
class Not(Formula):
    sub: Formula


@dataclass(frozen=True)
class And(Formula):
    subs: tuple


@dataclass(frozen=True)
class Or(Formula):
    subs: tuple


@dataclass(frozen=True)
class K(Formula):
    agent: int
    sub: Formula


@dataclass(frozen=True)
class E(Formula):
    sub: Formula


@dataclass(frozen=True)
class C(Formula):
    sub: Formula


@dataclass(frozen=True)
class D(Formula):
    sub: Formula


ATOMS = (Exists, Nonfailed, Clean, Failed)


def holds(space: PointSpace, m: int, phi: Formula) -> np.ndarray:
    """Truth value of ``phi`` at every point of time ``m``."""
    key = ("holds", m, phi)
    cached = space._cache.get(key)
    if cached is not None:
        return cached
    if isinstance(phi, ATOMS):
        out = _atom(space, m, phi)
    elif isinstance(phi, Not):
        out = ~holds(space, m, phi.sub)
    elif isinstance(phi, And):
        out = np.logical_and.reduce([holds(space, m, f) for f in phi.subs])
    elif isinstance(phi, Or):
        out = np.logical_or.reduce([holds(space, m, f) for f in phi.subs])
    elif isinstance(phi, (K, E, C, D)):
        space.require_exhaustive()
        sub = holds(space, m, phi.sub)
        if isinstance(phi, K):
            out = _know(space, m, phi.agent, sub)
        elif isinstance(phi, E):
            out = everyone_knows(space, m, sub)
        elif isinstance(phi, C):
            out = common_knowledge(space, m, sub)
        else:
            out = distributed_knowledge(space, m, sub)
    else:
        raise UnknownAtom(f"cannot evaluate {phi!r}")
    out.setflags(write=False)
    space._cache[key] = out
    return out


def _atom(space: PointSpace, m: int, atom) -> np.ndarray:
    tree = space.tree
    level = tree.levels[m]
    if isinstance(atom, Exists):
        has = np.array([atom.value in init for init in tree.inits], dtype=bool)
        return has[level.root]
    if isinstance(atom, Nonfailed):
        return space.cells[m][atom.agent - 1] > 0
    if isinstance(atom, Clean):
        return level.clean.copy()
    if isinstance(atom, Failed):
        return n_failed(space, m) >= atom.count
    raise UnknownAtom(f"unknown atom {atom!r}")


def n_failed(space: PointSpace, m: int) -> np.ndarray:
    return space.tree.n_failed(m)


def _know(space: PointSpace, m: int, agent: int, sub: np.ndarray) -> np.ndarray:
    cells = space.cells[m][agent - 1]
    bad = np.bincount(cells[~sub], minlength=len(space.cell_states[m][agent - 1]))
    return bad[cells] == 0


def everyone_knows(space: PointSpace, m: int, sub: np.ndarray) -> np.ndarray:
    out = np.ones(space.size(m), dtype=bool)
    live = space.live(m)
    for i in space.config.agents:
        out &= ~live[i - 1] | _know(space, m, i, sub)
    return out


def components(space: PointSpace, m: int) -> np.ndarray:
    """Connected components of time-``m`` points under nonfailed-agent indistinguishability."""
    key = ("components", m)
    if key in space._cache:
        return space._cache[key]
    P = space.size(m)
    rows, cols, offset = [], [], P
    for i in range(space.config.n):
        cells = space.cells[m][i]
        live = np.nonzero(cells > 0)[0]
        rows.append(live)
        cols.append(offset + cells[live])
        offset += len(space.cell_states[m][i])
    r, c = np.concatenate(rows), np.concatenate(cols)
    graph = coo_matrix((np.ones(len(r), dtype=np.int8), (r, c)), shape=(offset, offset))
    _, labels = connected_components(graph, directed=False)
    labels = labels[:P]
    space._cache[key] = labels
    return labels


def common_knowledge(space: PointSpace, m: int, sub: np.ndarray) -> np.ndarray:
    """``C_N sub``: ``sub`` holds at every point reachable in one or more N-steps.

    Some nonfailed agent always exists (t < n), so every point reaches itself
    and the reachable set is exactly its connected component.
    """
    labels = components(space, m)
    bad = np.bincount(labels[~sub], minlength=labels.max() + 1 if len(labels) else 0)
    out = bad[labels] == 0
    nobody = ~space.live(m).any(axis=0)
    out[nobody] = True
    return out


def common_knowledge_by_iteration(space: PointSpace, m: int, sub: np.ndarray) -> tuple[np.ndarray, int]:
    """``C_N sub`` as the limit of ``E_N^k sub``; also returns the number of iterations."""
    current = everyone_knows(space, m, sub)
    steps = 1
    while True:
        nxt = current & everyone_knows(space, m, current)
        if (nxt == current).all():
            return current, steps
        current, steps = nxt, steps + 1


def distributed_cell(space: PointSpace, m: int, p: int) -> np.ndarray:
    """Points of time ``m`` that every agent nonfailed at ``p`` confuses with ``p``."""
    cells = space.cells[m]
    live = [i for i in range(space.config.n) if cells[i][p] > 0]
    if not live:
        raise EmptyN(f"no nonfailed agent at point ({m}, {p})")
    sig = tuple((i, int(cells[i][p])) for i in live)
    key = ("dcell", m, sig)
    cached = space._cache.get(key)
    if cached is not None:
        return cached
    members = _members(space, m)
    start = min(live, key=lambda i: len(members[i][cells[i][p]]))
    pts = members[start][cells[start][p]]
    for i in live:
        if i != start:
            pts = pts[cells[i][pts] == cells[i][p]]
    space._cache[key] = pts
    return pts


def _members(space: PointSpace, m: int) -> list[list[np.ndarray]]:
    key = ("members", m)
    if key not in space._cache:
        out = []
        for i in range(space.config.n):
            cells = space.cells[m][i]
            order = np.argsort(cells, kind="stable")
            bounds = np.searchsorted(cells[order], np.arange(len(space.cell_states[m][i]) + 1))
            out.append([order[bounds[c]:bounds[c + 1]] for c in range(len(bounds) - 1)])
        space._cache[key] = out
    return space._cache[key]


def distributed_knowledge(space: PointSpace, m: int, sub: np.ndarray) -> np.ndarray:
    out = np.empty(space.size(m), dtype=bool)
    for p in range(space.size(m)):
        out[p] = bool(sub[distributed_cell(space, m, p)].all())
    return out


def eval_atom(space: PointSpace, point: Point, atom: Formula) -> bool:
    if not isinstance(atom, ATOMS):
        raise UnknownAtom(f"{atom!r} is not an atomic proposition")
    m, p = point
    return bool(holds(space, m, atom)[p])


def eval_K(space: PointSpace, point: Point, agent: int, phi: Formula) -> bool:
    m, p = point
    return bool(holds(space, m, K(agent, phi))[p])


def eval_CN(space: PointSpace, m: int, phi: Formula) -> frozenset[Point]:
    truth = holds(space, m, C(phi))
    return frozenset((m, int(p)) for p in np.nonzero(truth)[0])


def eval_DN(space: PointSpace, point: Point, phi: Formula) -> bool:
    space.require_exhaustive()
    m, p = point
    return bool(holds(space, m, phi)[distributed_cell(space, m, p)].all())


def kb_actions(space: PointSpace, m: int) -> np.ndarray:
    """Knowledge-based program output for every agent and point at time ``m``.

    Encoded as ``[agent - 1, point]``: 0 or 1 for a decision, -1 for noop and
    -2 where the agent has crashed.
    """
    key = ("kb", m)
    if key in space._cache:
        return space._cache[key]
    out = np.full((space.config.n, space.size(m)), -1, dtype=np.int8)
    for i in space.config.agents:
        knows0 = holds(space, m, K(i, C(Exists(0))))
        knows1 = holds(space, m, K(i, C(Exists(1))))
        row = out[i - 1]
        row[knows1] = 1
        row[knows0] = 0
        row[~space.live(m)[i - 1]] = -2
    space._cache[key] = out
    return out


def eval_kbprogram(space: PointSpace, point: Point, agent: int) -> Action:
    """``decide(0)`` if the agent knows C_N(exists 0), else ``decide(1)`` if it knows C_N(exists 1)."""
    m, p = point
    if space.cells[m][agent - 1][p] == 0:
        raise CrashedAgent(f"agent {agent} has crashed at point {point}")
    if eval_K(space, point, agent, C(Exists(0))):
        return DECIDE[0]
    if eval_K(space, point, agent, C(Exists(1))):
        return DECIDE[1]
    return NOOP


def ck_values(space: PointSpace, m: int) -> np.ndarray:
    """Points of time ``m`` with ``C_N(exists 0) or C_N(exists 1)``."""
    return holds(space, m, Or((C(Exists(0)), C(Exists(1)))))


def ck_onset_times(space: PointSpace) -> np.ndarray:
    """First time each leaf run reaches common knowledge of some value (-1 if never)."""
    anc = space.tree.ancestors()
    out = np.full(len(space.tree.leaves), -1, dtype=np.int64)
    for m in range(space.horizon, -1, -1):
        hit = ck_values(space, m)[anc[m]]
        out[hit] = m
    return out


def ck_onset_time(space: PointSpace, run) -> Optional[int]:
    space.require_exhaustive()
    leaf = space.leaf_of(run)
    for m in range(space.horizon + 1):
        if ck_values(space, m)[space.tree.ancestor(leaf, m)]:
            return m
    return None
