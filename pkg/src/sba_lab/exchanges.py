"""Information-exchange state machines and their standard decision rules.

Every update function takes the agent's state and ``received``, one slot per
*other* agent in increasing id order, holding that agent's message or
``None`` when nothing arrived. The agent's own message is never in
``received``; processing it would not change any state here.
"""

from __future__ import annotations

import json
import weakref
from typing import Iterable, NamedTuple, Optional, Sequence

from .model import DECIDE, NOOP, Action, ExchangeKind, SBAError, SystemConfig


class ConflictingValue(SBAError):
    """Two different values announced for one agent: impossible under crash faults."""


class _Crashed:
    __slots__ = ()

    def __repr__(self):
        return "crashed"

    def __reduce__(self):
        return "CRASHED"


CRASHED = _Crashed()


class FloodState(NamedTuple):
    W: frozenset
    time: int
    v: int


class CountState(NamedTuple):
    W: frozenset
    h: int
    time: int
    v: int


class CountPRState(NamedTuple):
    W: frozenset
    h_hist: tuple
    time: int
    v: int


class VectorState(NamedTuple):
    V: tuple
    New: frozenset
    time: int

    @property
    def beta(self) -> int:
        return sum(1 for x in self.V if x is None)


class SendWasteState(NamedTuple):
    W: frozenset
    h: int
    d: int
    time: int
    v: int


class FullInfoState:
    """Own initial value plus one record of received states per past round.

    Instances are interned, so equal histories are the same object and
    equality and hashing stay cheap on deep histories.
    """

    __slots__ = ("value", "history", "_hash", "__weakref__")
    _table: "weakref.WeakValueDictionary" = weakref.WeakValueDictionary()

    def __new__(cls, value: int, history: tuple = ()):
        key = (value, history)
        found = cls._table.get(key)
        if found is not None:
            return found
        self = object.__new__(cls)
        self.value = value
        self.history = history
        self._hash = hash(key)
        cls._table[key] = self
        return self

    @property
    def time(self) -> int:
        return len(self.history)

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, FullInfoState) or self._hash != other._hash:
            return False
        return self.value == other.value and self.history == other.history

    def __reduce__(self):
        return (FullInfoState, (self.value, self.history))

    def __repr__(self):
        return f"FullInfoState(v={self.value}, time={self.time})"


def _union(W: frozenset, received: Iterable[Optional[frozenset]]) -> frozenset:
    out = set(W)
    for msg in received:
        if msg is not None:
            out |= msg
    return frozenset(out)


def _missing(received: Sequence) -> int:
    return sum(1 for msg in received if msg is None)


def flood_update(s: FloodState, received: Sequence[Optional[frozenset]]) -> FloodState:
    return FloodState(_union(s.W, received), s.time + 1, s.v)


def flood_decide(s: FloodState, config: SystemConfig) -> Action:
    if s.time >= config.decision_bound:
        return DECIDE[min(s.W)]
    return NOOP


def count_update(s: CountState, received: Sequence[Optional[frozenset]]) -> CountState:
    return CountState(_union(s.W, received), _missing(received), s.time + 1, s.v)


def countpr_update(s: CountPRState, received: Sequence[Optional[frozenset]]) -> CountPRState:
    return CountPRState(
        _union(s.W, received), s.h_hist + (_missing(received),), s.time + 1, s.v
    )


def count_decide(s: CountState, config: SystemConfig) -> Action:
    if s.time >= config.decision_bound or s.h >= config.n - 1:
        return DECIDE[min(s.W)]
    return NOOP


def countpr_decide(s: CountPRState, config: SystemConfig) -> Action:
    if s.time >= config.decision_bound or any(h >= config.n - 1 for h in s.h_hist):
        return DECIDE[min(s.W)]
    return NOOP


def vector_round(s: VectorState, received: Sequence[Optional[frozenset]]) -> VectorState:
    V = list(s.V)
    new = set()
    for msg in received:
        if not msg:
            continue
        for v, k in msg:
            if s.V[k - 1] is not None:
                continue
            if V[k - 1] is not None and V[k - 1] != v:
                raise ConflictingValue(f"agent {k} announced as both {V[k - 1]} and {v}")
            V[k - 1] = v
            new.add((v, k))
    return VectorState(tuple(V), frozenset(new), s.time + 1)


def vector_decide(s: VectorState, config: SystemConfig) -> Action:
    # the program decides only after its rounds; at time 0 beta = n - 1 would
    # satisfy the inequality whenever t + 1 < n - 1
    if s.time >= 1 and s.time > config.decision_bound - max(1, s.beta):
        return DECIDE[0 if 0 in s.V else 1]
    return NOOP


def sendwaste_round(
    s: SendWasteState, received: Sequence[Optional[tuple[frozenset, int]]]
) -> SendWasteState:
    m = s.time + 1
    h = _missing(received)
    W = _union(s.W, (msg[0] for msg in received if msg is not None))
    d = max([s.d, h - m] + [msg[1] for msg in received if msg is not None])
    return SendWasteState(W, h, d, m, s.v)


def sendwaste_decide(s: SendWasteState, config: SystemConfig) -> Action:
    if s.time >= config.decision_bound - s.d:
        return DECIDE[min(s.W)]
    return NOOP


def fullinfo_round(s: FullInfoState, received: Sequence[Optional[FullInfoState]]) -> FullInfoState:
    return FullInfoState(s.value, s.history + (tuple(received),))


def _values(W) -> list[int]:
    return sorted(W)


class Exchange:
    """Binds the initial states, message selection, update and decision rule of one exchange."""

    kind: ExchangeKind
    has_rule = True

    def initial(self, agent: int, value: int, config: SystemConfig):
        raise NotImplementedError

    def message(self, state):
        """Broadcast payload for the coming round, or ``None`` to stay silent."""
        raise NotImplementedError

    def update(self, state, received: Sequence, config: SystemConfig):
        raise NotImplementedError

    def decide(self, state, config: SystemConfig) -> Action:
        raise NotImplementedError

    def state_json(self, state):
        raise NotImplementedError

    def message_json(self, payload):
        raise NotImplementedError

    def cost(self, state, received: Sequence) -> int:
        """Elementary operations spent by one update (a coarse model for profiling)."""
        return sum(len(msg) for msg in received if msg is not None) + len(received)

    def message_bytes(self, payload) -> int:
        return len(json.dumps(self.message_json(payload), separators=(",", ":")))

    def state_bytes(self, state) -> int:
        if state is CRASHED:
            return len('"crashed"')
        return len(json.dumps(self.state_json(state), separators=(",", ":")))


class FloodSet(Exchange):
    kind = ExchangeKind.FLOODSET

    def initial(self, agent, value, config):
        return FloodState(frozenset((value,)), 0, value)

    def message(self, state):
        return state.W

    def update(self, state, received, config):
        return flood_update(state, received)

    def decide(self, state, config):
        return flood_decide(state, config)

    def state_json(self, state):
        return {"W": _values(state.W), "time": state.time, "v": state.v}

    def message_json(self, payload):
        return {"W": _values(payload)}


class Counting(FloodSet):
    kind = ExchangeKind.COUNTING

    def initial(self, agent, value, config):
        return CountState(frozenset((value,)), 0, 0, value)

    def update(self, state, received, config):
        return count_update(state, received)

    def decide(self, state, config):
        return count_decide(state, config)

    def state_json(self, state):
        return {"W": _values(state.W), "h": state.h, "time": state.time, "v": state.v}


class CountingPR(FloodSet):
    kind = ExchangeKind.COUNTING_PR

    def initial(self, agent, value, config):
        return CountPRState(frozenset((value,)), (0,), 0, value)

    def update(self, state, received, config):
        return countpr_update(state, received)

    def decide(self, state, config):
        return countpr_decide(state, config)

    def state_json(self, state):
        return {"W": _values(state.W), "h": list(state.h_hist), "time": state.time, "v": state.v}


class Vectorized(Exchange):
    kind = ExchangeKind.VECTORIZED

    def initial(self, agent, value, config):
        V = [None] * config.n
        V[agent - 1] = value
        return VectorState(tuple(V), frozenset({(value, agent)}), 0)

    def message(self, state):
        return state.New or None

    def update(self, state, received, config):
        return vector_round(state, received)

    def decide(self, state, config):
        return vector_decide(state, config)

    def cost(self, state, received):
        # every incoming pair is checked against V, then V is scanned for beta
        return super().cost(state, received) + len(state.V)

    def state_json(self, state):
        return {"V": list(state.V), "new": sorted(map(list, state.New)), "time": state.time}

    def message_json(self, payload):
        return {"new": sorted(map(list, payload))}


class SendWaste(Exchange):
    kind = ExchangeKind.SENDWASTE

    def initial(self, agent, value, config):
        return SendWasteState(frozenset((value,)), 0, 0, 0, value)

    def message(self, state):
        return (state.W, state.d)

    def update(self, state, received, config):
        return sendwaste_round(state, received)

    def decide(self, state, config):
        return sendwaste_decide(state, config)

    def cost(self, state, received):
        return sum(len(msg[0]) + 1 for msg in received if msg is not None) + len(received)

    def state_json(self, state):
        return {"W": _values(state.W), "h": state.h, "d": state.d, "time": state.time, "v": state.v}

    def message_json(self, payload):
        return {"W": _values(payload[0]), "d": payload[1]}


class FullInfo(Exchange):
    """Full-information exchange: no standard rule, only used through the knowledge oracle."""

    kind = ExchangeKind.FULLINFO
    has_rule = False

    def initial(self, agent, value, config):
        return FullInfoState(value)

    def message(self, state):
        return state

    def update(self, state, received, config):
        return fullinfo_round(state, received)

    def decide(self, state, config):
        raise NotImplementedError(
            "full information has no local decision rule; use the common-knowledge oracle"
        )

    def cost(self, state, received):
        return sum(_size(msg) for msg in received if msg is not None) + len(received)

    def state_json(self, state):
        return {
            "v": state.value,
            "time": state.time,
            "history": [
                [None if s is None else self.state_json(s) for s in record]
                for record in state.history
            ],
        }

    def message_json(self, payload):
        return self.state_json(payload)


def _size(state: FullInfoState) -> int:
    return 1 + sum(_size(s) for record in state.history for s in record if s is not None)


EXCHANGES: dict[ExchangeKind, Exchange] = {
    ex.kind: ex for ex in (FloodSet(), Counting(), CountingPR(), Vectorized(), SendWaste(), FullInfo())
}


def get_exchange(kind: ExchangeKind | str) -> Exchange:
    if isinstance(kind, str) and not isinstance(kind, ExchangeKind):
        kind = ExchangeKind.parse(kind)
    return EXCHANGES[kind]
