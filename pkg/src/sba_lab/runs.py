"""Deterministic run generation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .exchanges import CRASHED, Exchange, get_exchange
from .model import Action, ExchangeKind, Scenario, SystemConfig, validate_pattern


@dataclass(frozen=True)
class Run:
    """States at times ``0..horizon`` plus what each round actually delivered.

    ``deliveries[m - 1][j - 1][k - 1]`` is F(m, j, k) for a sender ``j`` still
    running at the start of round ``m`` (False for senders already crashed).
    ``messages[m - 1][j - 1]`` is what ``j`` broadcast in round ``m``.
    """

    scenario: Scenario
    kind: ExchangeKind
    states: tuple[tuple, ...]
    deliveries: tuple[tuple[tuple[bool, ...], ...], ...]
    messages: tuple[tuple, ...]

    @property
    def config(self) -> SystemConfig:
        return self.scenario.config

    def state(self, agent: int, m: int):
        return self.states[m][agent - 1]

    def nonfailed(self, m: int) -> frozenset[int]:
        return frozenset(i for i, s in enumerate(self.states[m], 1) if s is not CRASHED)

    def actions(self, m: int) -> tuple[Action | None, ...]:
        """Rule output per agent at time ``m`` (``None`` for crashed agents)."""
        ex = get_exchange(self.kind)
        return tuple(None if s is CRASHED else ex.decide(s, self.config) for s in self.states[m])

    def is_clean(self, m: int) -> bool:
        return round_is_clean(self.deliveries[m - 1], self.nonfailed(m))

    def to_json(self, with_actions: bool = True) -> dict:
        ex = get_exchange(self.kind)
        times = []
        for m, states in enumerate(self.states):
            entry = {
                "time": m,
                "states": ["crashed" if s is CRASHED else ex.state_json(s) for s in states],
            }
            if with_actions and ex.has_rule:
                entry["actions"] = [
                    None if a is None else ("noop" if a.value is None else {"decide": a.value})
                    for a in self.actions(m)
                ]
            times.append(entry)
        rounds = [
            {
                "round": m,
                "delivered": [[int(x) for x in row] for row in matrix],
                "messages": [None if p is None else ex.message_json(p) for p in msgs],
                "clean": self.is_clean(m),
            }
            for m, (matrix, msgs) in enumerate(zip(self.deliveries, self.messages), 1)
        ]
        return {
            "scenario": self.scenario.to_json(),
            "exchange": self.kind.value,
            "times": times,
            "rounds": rounds,
        }


def round_is_clean(matrix: Sequence[Sequence[bool]], live: frozenset[int]) -> bool:
    """All agents alive after the round heard from exactly the same senders."""
    for row in matrix:
        heard = {row[i - 1] for i in live}
        if len(heard) > 1:
            return False
    return True


def initial_states(exchange: Exchange, config: SystemConfig, init: Sequence[int]) -> tuple:
    return tuple(exchange.initial(i, v, config) for i, v in zip(config.agents, init))


def advance(
    exchange: Exchange,
    config: SystemConfig,
    states: tuple,
    crashing: Mapping[int, frozenset[int]],
):
    """Play one round from ``states``.

    ``crashing`` maps each agent that crashes in this round to the recipients of
    its last message. Returns ``(new_states, delivery_matrix, messages)``.
    """
    n = config.n
    messages = tuple(None if s is CRASHED else exchange.message(s) for s in states)
    matrix = []
    for j, s in enumerate(states, 1):
        if s is CRASHED:
            matrix.append((False,) * n)
        elif j in crashing:
            matrix.append(tuple(k in crashing[j] for k in range(1, n + 1)))
        else:
            matrix.append((True,) * n)
    new_states = []
    for i, s in enumerate(states, 1):
        if s is CRASHED or i in crashing:
            new_states.append(CRASHED)
            continue
        received = tuple(
            messages[j - 1] if matrix[j - 1][i - 1] else None
            for j in range(1, n + 1)
            if j != i
        )
        new_states.append(exchange.update(s, received, config))
    return tuple(new_states), tuple(matrix), messages


def generate_run(scenario: Scenario, kind: ExchangeKind | str) -> Run:
    config = scenario.config
    validate_pattern(config, scenario.pattern)
    exchange = get_exchange(kind)
    states = initial_states(exchange, config, scenario.init)
    history, deliveries, sent = [states], [], []
    faults = scenario.pattern.faults
    for m in range(1, config.horizon + 1):
        crashing = {j: c.delivered for j, c in faults.items() if c.round == m}
        states, matrix, messages = advance(exchange, config, states, crashing)
        history.append(states)
        deliveries.append(matrix)
        sent.append(messages)
    return Run(scenario, exchange.kind, tuple(history), tuple(deliveries), tuple(sent))
