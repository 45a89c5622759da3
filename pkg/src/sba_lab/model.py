"""Agents, values, crash adversaries and scenario enumeration.

Agents are numbered ``1..n`` and rounds ``1..horizon`` everywhere in the
public API. Round ``m`` runs between time ``m - 1`` and time ``m``.
"""

from __future__ import annotations

import enum
import itertools
import math
import os
import random
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

VALUES = (0, 1)

DEFAULT_CAP = 5_000_000
CAP_ENV = "SBA_LAB_CAP"


class SBAError(Exception):
    """Base class for errors raised by sba_lab."""


class ConfigError(SBAError, ValueError):
    pass


class PatternError(SBAError, ValueError):
    pass


class TooManyFaults(PatternError):
    pass


class BadRound(PatternError):
    pass


class SelfDelivery(PatternError):
    pass


class UnknownAgent(PatternError):
    pass


class SpaceTooLarge(SBAError):
    pass


class ScenarioFormatError(SBAError, ValueError):
    pass


@dataclass(frozen=True)
class SystemConfig:
    n: int
    t: int
    horizon: int | None = None

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError(f"need n >= 2, got n={self.n}")
        if not 0 <= self.t < self.n:
            raise ConfigError(f"need 0 <= t < n, got n={self.n}, t={self.t}")
        if self.horizon is None:
            object.__setattr__(self, "horizon", self.decision_bound + 1)
        elif self.horizon < self.decision_bound + 1:
            raise ConfigError(
                f"horizon {self.horizon} too short; need >= {self.decision_bound + 1}"
            )

    @property
    def decision_bound(self) -> int:
        """``min(t + 1, n - 1)``: every protocol here has decided by this time."""
        return min(self.t + 1, self.n - 1)

    @property
    def agents(self) -> range:
        return range(1, self.n + 1)


class ExchangeKind(str, enum.Enum):
    FLOODSET = "floodset"
    COUNTING = "counting"
    COUNTING_PR = "counting_pr"
    VECTORIZED = "vectorized"
    SENDWASTE = "sendwaste"
    FULLINFO = "fullinfo"

    @classmethod
    def limited(cls) -> tuple["ExchangeKind", ...]:
        return (cls.FLOODSET, cls.COUNTING, cls.COUNTING_PR, cls.VECTORIZED, cls.SENDWASTE)

    @classmethod
    def parse(cls, name: str) -> "ExchangeKind":
        key = name.strip().lower().replace("-", "_")
        aliases = {"flood": "floodset", "countingpr": "counting_pr", "count_pr": "counting_pr",
                   "vector": "vectorized", "full": "fullinfo", "full_info": "fullinfo"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ConfigError(f"unknown exchange {name!r}") from None


@dataclass(frozen=True)
class Action:
    """``decide(value)`` when ``value`` is set, ``noop`` otherwise."""

    value: int | None = None

    @property
    def is_decide(self) -> bool:
        return self.value is not None

    def __repr__(self):
        return "Noop" if self.value is None else f"Decide({self.value})"


NOOP = Action()
DECIDE = {v: Action(v) for v in VALUES}


@dataclass(frozen=True)
class Crash:
    round: int
    delivered: frozenset[int] = frozenset()


@dataclass(frozen=True)
class FailurePattern:
    """A canonical crash adversary.

    Faulty agent ``j`` with crash round ``c`` behaves correctly before round
    ``c``, sends its round-``c`` message only to ``delivered`` and is crashed
    from time ``c`` on.
    """

    crashes: tuple[tuple[int, Crash], ...] = ()

    @classmethod
    def of(cls, faults: Mapping[int, tuple[int, Iterable[int]]] | None = None) -> "FailurePattern":
        faults = faults or {}
        return cls(tuple(sorted(
            (int(j), Crash(int(c), frozenset(int(k) for k in d)))
            for j, (c, d) in faults.items()
        )))

    @property
    def faults(self) -> dict[int, Crash]:
        return dict(self.crashes)

    @property
    def faulty(self) -> frozenset[int]:
        return frozenset(j for j, _ in self.crashes)

    def crash_round(self, agent: int) -> int | None:
        for j, crash in self.crashes:
            if j == agent:
                return crash.round
        return None

    def delivers(self, m: int, sender: int, receiver: int) -> bool:
        """The adversary function F(m, sender, receiver)."""
        c = self.crash_round(sender)
        if c is None or m < c:
            return True
        if m > c or receiver == sender:
            return False
        return receiver in self.faults[sender].delivered

    def failed_by(self, m: int) -> int:
        return sum(1 for _, crash in self.crashes if crash.round <= m)


@dataclass(frozen=True)
class Scenario:
    config: SystemConfig
    init: tuple[int, ...]
    pattern: FailurePattern = field(default_factory=FailurePattern)

    def __post_init__(self):
        object.__setattr__(self, "init", tuple(int(v) for v in self.init))
        if len(self.init) != self.config.n:
            raise ConfigError(f"init has {len(self.init)} entries, need {self.config.n}")
        if any(v not in VALUES for v in self.init):
            raise ConfigError(f"initial values must be 0/1, got {self.init}")

    def to_json(self) -> dict:
        return {
            "n": self.config.n,
            "t": self.config.t,
            "horizon": self.config.horizon,
            "init": list(self.init),
            "crashes": [
                {"agent": j, "round": c.round, "delivered": sorted(c.delivered)}
                for j, c in self.pattern.crashes
            ],
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "Scenario":
        def need(obj, key, kind, where):
            if key not in obj:
                raise ScenarioFormatError(f"{where}: missing field {key!r}")
            val = obj[key]
            if not isinstance(val, kind) or isinstance(val, bool):
                raise ScenarioFormatError(f"{where}: field {key!r} has wrong type")
            return val

        if not isinstance(doc, Mapping):
            raise ScenarioFormatError("scenario must be a JSON object")
        n = need(doc, "n", int, "scenario")
        t = need(doc, "t", int, "scenario")
        horizon = doc.get("horizon")
        if horizon is not None and (not isinstance(horizon, int) or isinstance(horizon, bool)):
            raise ScenarioFormatError("scenario: field 'horizon' has wrong type")
        try:
            config = SystemConfig(n, t, horizon)
        except ConfigError as exc:
            raise ScenarioFormatError(f"scenario: {exc}") from None
        init = need(doc, "init", list, "scenario")
        if len(init) != n or any(v not in VALUES or isinstance(v, bool) for v in init):
            raise ScenarioFormatError(f"scenario: field 'init' must list {n} values in {{0, 1}}")
        faults = {}
        for idx, entry in enumerate(doc.get("crashes", [])):
            where = f"crashes[{idx}]"
            if not isinstance(entry, Mapping):
                raise ScenarioFormatError(f"{where}: must be an object")
            agent = need(entry, "agent", int, where)
            rnd = need(entry, "round", int, where)
            delivered = entry.get("delivered", [])
            if not isinstance(delivered, list) or not all(
                isinstance(k, int) and not isinstance(k, bool) for k in delivered
            ):
                raise ScenarioFormatError(f"{where}: field 'delivered' must list agent ids")
            if agent in faults:
                raise ScenarioFormatError(f"{where}: field 'agent' repeats agent {agent}")
            faults[agent] = (rnd, delivered)
        scenario = cls(config, tuple(init), FailurePattern.of(faults))
        try:
            validate_pattern(config, scenario.pattern)
        except PatternError as exc:
            raise ScenarioFormatError(f"crashes: {exc}") from None
        return scenario


def validate_pattern(config: SystemConfig, pattern: FailurePattern) -> None:
    """Raise a :class:`PatternError` unless ``pattern`` is a valid adversary."""
    if len(pattern.crashes) > config.t:
        raise TooManyFaults(f"{len(pattern.crashes)} faulty agents but t={config.t}")
    for j, crash in pattern.crashes:
        if j not in config.agents:
            raise UnknownAgent(f"agent {j} is not in 1..{config.n}")
        if not 1 <= crash.round <= config.horizon:
            raise BadRound(f"agent {j} crash round {crash.round} outside 1..{config.horizon}")
        if j in crash.delivered:
            raise SelfDelivery(f"agent {j} lists itself as a recipient")
        unknown = [k for k in crash.delivered if k not in config.agents]
        if unknown:
            raise UnknownAgent(f"agent {j} delivers to unknown agents {sorted(unknown)}")


def pattern_count(config: SystemConfig) -> int:
    """Number of canonical failure patterns: sum over faulty sets S of (horizon * 2^(n-1))^|S|."""
    per_agent = config.horizon * 2 ** (config.n - 1)
    return sum(math.comb(config.n, k) * per_agent**k for k in range(config.t + 1))


def scenario_count(config: SystemConfig) -> int:
    return 2**config.n * pattern_count(config)


def exhaustive_cap() -> int:
    raw = os.environ.get(CAP_ENV)
    return int(raw) if raw else DEFAULT_CAP


def check_cap(config: SystemConfig, cap: int | None = None) -> int:
    cap = exhaustive_cap() if cap is None else cap
    count = scenario_count(config)
    if count > cap:
        raise SpaceTooLarge(
            f"exhaustive space for n={config.n}, t={config.t}, horizon={config.horizon} "
            f"has {count} scenarios (cap {cap})"
        )
    return count


def _crash_choices(config: SystemConfig, agent: int) -> list[Crash]:
    others = [k for k in config.agents if k != agent]
    subsets = [
        frozenset(c) for r in range(len(others) + 1) for c in itertools.combinations(others, r)
    ]
    return [Crash(m, d) for m in range(1, config.horizon + 1) for d in subsets]


def enumerate_patterns(config: SystemConfig) -> Iterator[FailurePattern]:
    choices = {j: _crash_choices(config, j) for j in config.agents}
    for size in range(config.t + 1):
        for faulty in itertools.combinations(config.agents, size):
            for crashes in itertools.product(*(choices[j] for j in faulty)):
                yield FailurePattern(tuple(zip(faulty, crashes)))


def enumerate_scenarios(
    config: SystemConfig,
    mode: str = "exhaustive",
    count: int | None = None,
    seed: int | None = None,
    cap: int | None = None,
) -> Iterator[Scenario]:
    """Stream scenarios: all of them (``exhaustive``) or ``count`` uniform draws (``sampled``)."""
    if mode == "exhaustive":
        check_cap(config, cap)
        inits = list(itertools.product(VALUES, repeat=config.n))
        for pattern in enumerate_patterns(config):
            for init in inits:
                yield Scenario(config, init, pattern)
    elif mode == "sampled":
        if count is None:
            raise ConfigError("sampled mode needs a count")
        yield from _sample(config, count, seed)
    else:
        raise ConfigError(f"unknown mode {mode!r}")


def _sample(config: SystemConfig, count: int, seed: int | None) -> Iterator[Scenario]:
    rng = random.Random(seed)
    n = config.n
    per_agent = config.horizon * 2 ** (n - 1)
    # weight of faulty-set size k, exact integers so large n stays uniform
    weights = [math.comb(n, k) * per_agent**k for k in range(config.t + 1)]
    total = sum(weights)
    for _ in range(count):
        pick = rng.randrange(total)
        size = 0
        while pick >= weights[size]:
            pick -= weights[size]
            size += 1
        faulty = sorted(rng.sample(list(config.agents), size))
        crashes = []
        for j in faulty:
            others = [k for k in config.agents if k != j]
            delivered = frozenset(k for k in others if rng.getrandbits(1))
            crashes.append((j, Crash(rng.randint(1, config.horizon), delivered)))
        init = tuple(rng.getrandbits(1) for _ in range(n))
        yield Scenario(config, init, FailurePattern(tuple(crashes)))
