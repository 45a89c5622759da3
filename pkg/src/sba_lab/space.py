"""Point spaces: every reachable point of an interpreted system, indexed for model checking.

Scenarios whose prefixes up to time ``m`` are observationally identical
(same initial values, same crashes so far, same messages delivered to agents
that survive the round) give the same point at time ``m``. The space stores
one node per such prefix, so its levels form a tree whose leaves are the
distinct runs. Each leaf carries the number of canonical scenarios it
stands for. Knowledge only depends on which points exist, so the quotient
loses nothing.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .exchanges import CRASHED, Exchange, get_exchange
from .model import VALUES, ExchangeKind, Scenario, SystemConfig, check_cap
from .runs import Run

# one round's crash events: ((agent, recipients that survive the round), ...)
Events = tuple


class SampledSpaceError(Exception):
    """Knowledge was requested over a space that is not the full run space."""


def _subsets(xs: Sequence[int]) -> list[tuple[int, ...]]:
    return [c for r in range(len(xs) + 1) for c in itertools.combinations(xs, r)]


def scenario_events(scenario: Scenario) -> tuple[Events, ...]:
    """Canonical per-round crash events of a scenario (rounds 1..horizon)."""
    config = scenario.config
    faults = scenario.pattern.faults
    out = []
    for m in range(1, config.horizon + 1):
        surv = {i for i in config.agents if i not in faults or faults[i].round > m}
        out.append(tuple(
            (j, tuple(sorted(c.delivered & surv)))
            for j, c in sorted(faults.items())
            if c.round == m
        ))
    return tuple(out)


@dataclass
class Level:
    """All nodes (points) at one time ``m``."""

    time: int
    parent: np.ndarray
    events: list
    root: np.ndarray
    crashed: np.ndarray  # bitmask, bit i-1 set when agent i is crashed
    clean: np.ndarray  # some round <= time was clean

    def __len__(self):
        return len(self.parent)


@dataclass
class RunTree:
    """Environment-only prefix tree shared by all exchanges over one configuration."""

    config: SystemConfig
    inits: list[tuple[int, ...]]
    levels: list[Level]
    weight: np.ndarray  # scenarios per leaf
    exhaustive: bool
    leaf_index: dict = field(default_factory=dict, repr=False)

    @property
    def horizon(self) -> int:
        return self.config.horizon

    @property
    def leaves(self) -> Level:
        return self.levels[-1]

    def n_failed(self, m: int) -> np.ndarray:
        return np.bitwise_count(self.levels[m].crashed).astype(np.int64)

    def init_of(self, m: int, idx: int) -> tuple[int, ...]:
        return self.inits[int(self.levels[m].root[idx])]

    def ancestor(self, leaf: int, m: int) -> int:
        idx = leaf
        for k in range(self.horizon, m, -1):
            idx = int(self.levels[k].parent[idx])
        return idx

    def ancestors(self) -> list[np.ndarray]:
        """``anc[m][leaf]`` is the time-``m`` node on each leaf's path."""
        anc = [None] * (self.horizon + 1)
        anc[self.horizon] = np.arange(len(self.leaves))
        for m in range(self.horizon, 0, -1):
            anc[m - 1] = self.levels[m].parent[anc[m]]
        return anc

    def locate(self, scenario: Scenario) -> int:
        """Leaf index of the run generated by ``scenario``."""
        key = (tuple(scenario.init), scenario_events(scenario))
        try:
            return self.leaf_index[key]
        except KeyError:
            raise KeyError("scenario is not part of this space") from None

    def leaf_faulty(self) -> np.ndarray:
        return self.n_failed(self.horizon)

    @classmethod
    def exhaustive_tree(cls, config: SystemConfig, cap: int | None = None) -> "RunTree":
        check_cap(config, cap)
        n, t = config.n, config.t
        inits = list(itertools.product(VALUES, repeat=n))
        everyone = (1 << n) - 1
        parent, events = [-1] * len(inits), [()] * len(inits)
        root, crashed = list(range(len(inits))), [0] * len(inits)
        clean, weight = [False] * len(inits), [1] * len(inits)
        keys = [(init, ()) for init in inits]
        levels = [_level(0, parent, events, root, crashed, clean)]

        # children depend only on the crashed set, so expand each set once
        expansions: dict[int, list] = {}

        def children(mask):
            if mask in expansions:
                return expansions[mask]
            live = [i for i in config.agents if not mask >> (i - 1) & 1]
            budget = t - (n - len(live))
            out = []
            for size in range(min(budget, len(live) - 1) + 1):
                for crashers in itertools.combinations(live, size):
                    surv = [i for i in live if i not in crashers]
                    options = _subsets(surv)
                    factor = 2 ** ((n - 1 - len(surv)) * size)
                    new_mask = mask
                    for j in crashers:
                        new_mask |= 1 << (j - 1)
                    for combo in itertools.product(options, repeat=size):
                        ev = tuple(zip(crashers, combo))
                        is_clean = all(len(d) in (0, len(surv)) for d in combo)
                        out.append((ev, new_mask, is_clean, factor))
            expansions[mask] = out
            return out

        prev_crashed, prev_clean, prev_weight, prev_root = crashed, clean, weight, root
        for m in range(1, config.horizon + 1):
            parent, events, root, crashed, clean, weight, new_keys = [], [], [], [], [], [], []
            for p, mask in enumerate(prev_crashed):
                for ev, new_mask, is_clean, factor in children(mask):
                    parent.append(p)
                    events.append(ev)
                    root.append(prev_root[p])
                    crashed.append(new_mask)
                    clean.append(prev_clean[p] or is_clean)
                    weight.append(prev_weight[p] * factor)
                    new_keys.append((keys[p][0], keys[p][1] + (ev,)))
            assert everyone not in crashed
            levels.append(_level(m, parent, events, root, crashed, clean))
            prev_crashed, prev_clean, prev_weight, prev_root, keys = crashed, clean, weight, root, new_keys
        leaf_index = {key: idx for idx, key in enumerate(keys)}
        return cls(config, inits, levels, np.array(weight, dtype=np.int64), True, leaf_index)

    @classmethod
    def from_scenarios(
        cls, config: SystemConfig, scenarios: Iterable[Scenario], exhaustive: bool = False
    ) -> "RunTree":
        """Group explicit scenarios by prefix. Duplicated runs add weight, not points."""
        inits: dict[tuple, int] = {}
        nodes: list[dict] = [dict() for _ in range(config.horizon + 1)]
        info: list[list] = [[] for _ in range(config.horizon + 1)]
        leaf_weight: dict[int, int] = {}
        for sc in scenarios:
            if sc.config != config:
                raise ValueError("scenario configuration differs from the space configuration")
            init = tuple(sc.init)
            r = inits.setdefault(init, len(inits))
            key = (init, ())
            if key not in nodes[0]:
                nodes[0][key] = len(info[0])
                info[0].append((-1, (), r, 0, False))
            idx = nodes[0][key]
            for m, ev in enumerate(scenario_events(sc), 1):
                key = (init, key[1] + (ev,))
                if key not in nodes[m]:
                    _, _, _, mask, was_clean = info[m - 1][idx]
                    for j, _ in ev:
                        mask |= 1 << (j - 1)
                    surv = sum(1 for i in config.agents if not mask >> (i - 1) & 1)
                    is_clean = all(len(d) in (0, surv) for _, d in ev)
                    nodes[m][key] = len(info[m])
                    info[m].append((idx, ev, r, mask, was_clean or is_clean))
                idx = nodes[m][key]
            leaf_weight[idx] = leaf_weight.get(idx, 0) + 1
        levels = [
            _level(m, *map(list, zip(*rows))) if rows else _level(m, [], [], [], [], [])
            for m, rows in enumerate(info)
        ]
        weight = np.array([leaf_weight.get(i, 0) for i in range(len(info[-1]))], dtype=np.int64)
        leaf_index = {key: idx for key, idx in nodes[-1].items()}
        return cls(config, list(inits), levels, weight, exhaustive, leaf_index)


def _level(m, parent, events, root, crashed, clean) -> Level:
    return Level(
        m,
        np.asarray(parent, dtype=np.int64),
        list(events),
        np.asarray(root, dtype=np.int64),
        np.asarray(crashed, dtype=np.int64),
        np.asarray(clean, dtype=bool),
    )


class PointSpace:
    """All points of the interpreted system for one exchange over a :class:`RunTree`.

    ``cells[m][i - 1][p]`` is agent ``i``'s indistinguishability cell at point
    ``(m, p)``: 0 when crashed (one cell per time), otherwise an index into
    ``cell_states[m][i - 1]``. Equal local states share a cell.
    """

    def __init__(self, tree: RunTree, kind: ExchangeKind | str):
        self.tree = tree
        self.config = tree.config
        self.exchange: Exchange = get_exchange(kind)
        self.kind = self.exchange.kind
        self.cells: list[np.ndarray] = []
        self.cell_states: list[list[list]] = []
        self._cache: dict = {}
        self._build()

    @classmethod
    def exhaustive(cls, config: SystemConfig, kind, cap: int | None = None) -> "PointSpace":
        return cls(RunTree.exhaustive_tree(config, cap), kind)

    @property
    def exhaustive_space(self) -> bool:
        return self.tree.exhaustive

    @property
    def horizon(self) -> int:
        return self.config.horizon

    def size(self, m: int) -> int:
        return len(self.tree.levels[m])

    def _build(self):
        config, ex, n = self.config, self.exchange, self.config.n
        level0 = self.tree.levels[0]
        states = [
            tuple(ex.initial(i, v, config) for i, v in zip(config.agents, self.tree.inits[r]))
            for r in level0.root
        ]
        self._index(states)
        for m in range(1, self.horizon + 1):
            level = self.tree.levels[m]
            prev_cells, prev_states = self.cells[m - 1], self.cell_states[m - 1]
            new_states = []
            cur_parent, msgs, memo = -1, None, None
            for p, ev in zip(level.parent.tolist(), level.events):
                if p != cur_parent:
                    cur_parent = p
                    pstates = [prev_states[i][prev_cells[i][p]] for i in range(n)]
                    msgs = [None if s is CRASHED else ex.message(s) for s in pstates]
                    memo = {}
                crashing = dict(ev)
                row = []
                for i in range(1, n + 1):
                    s = pstates[i - 1]
                    if s is CRASHED or i in crashing:
                        row.append(CRASHED)
                        continue
                    received = tuple(
                        None if (j in crashing and i not in crashing[j]) else msgs[j - 1]
                        for j in range(1, n + 1)
                        if j != i
                    )
                    key = (i, received)
                    nxt = memo.get(key)
                    if nxt is None:
                        nxt = memo[key] = ex.update(s, received, config)
                    row.append(nxt)
                new_states.append(row)
            self._index(new_states)

    def _index(self, states: list):
        n = self.config.n
        cells = np.zeros((n, len(states)), dtype=np.int64)
        per_agent = []
        for i in range(n):
            ids: dict = {}
            table = [CRASHED]
            col = cells[i]
            for p, row in enumerate(states):
                s = row[i]
                if s is CRASHED:
                    continue
                c = ids.get(s)
                if c is None:
                    c = ids[s] = len(table)
                    table.append(s)
                col[p] = c
            per_agent.append(table)
        self.cells.append(cells)
        self.cell_states.append(per_agent)

    def state(self, m: int, p: int, agent: int):
        return self.cell_states[m][agent - 1][self.cells[m][agent - 1][p]]

    def states(self, m: int, p: int) -> tuple:
        return tuple(self.state(m, p, i) for i in self.config.agents)

    def live(self, m: int) -> np.ndarray:
        """Boolean matrix ``[agent - 1, point]``: agent nonfailed at the point."""
        return self.cells[m] > 0

    def point(self, run, m: int) -> tuple[int, int]:
        """The point ``(m, index)`` of a run given as leaf index, :class:`Run` or :class:`Scenario`."""
        return (m, self.tree.ancestor(self.leaf_of(run), m))

    def leaf_of(self, run) -> int:
        if isinstance(run, Run):
            run = run.scenario
        if isinstance(run, Scenario):
            return self.tree.locate(run)
        return int(run)

    def to_run(self, leaf: int) -> Run:
        """Rebuild the full :class:`Run` for a leaf (deliveries use the canonical pattern)."""
        from .runs import generate_run

        return generate_run(self.representative(leaf), self.kind)

    def representative(self, leaf: int) -> Scenario:
        """A canonical scenario mapping to ``leaf`` (each crasher delivers only to survivors)."""
        from .model import Crash, FailurePattern

        crashes = {}
        idx = leaf
        for m in range(self.horizon, 0, -1):
            for j, d in self.tree.levels[m].events[idx]:
                crashes[j] = Crash(m, frozenset(d))
            idx = int(self.tree.levels[m].parent[idx])
        init = self.tree.inits[int(self.tree.levels[0].root[idx])]
        return Scenario(self.config, init, FailurePattern(tuple(sorted(crashes.items()))))

    def require_exhaustive(self):
        if not self.tree.exhaustive:
            raise SampledSpaceError(
                "knowledge over a sampled space is unsound: missing runs only add apparent knowledge"
            )
