import itertools
import json

import pytest

from sba_lab.model import (
    Crash,
    ExchangeKind,
    FailurePattern,
    Scenario,
    ScenarioFormatError,
    SelfDelivery,
    SpaceTooLarge,
    SystemConfig,
    TooManyFaults,
    UnknownAgent,
    BadRound,
    ConfigError,
    enumerate_patterns,
    enumerate_scenarios,
    pattern_count,
    scenario_count,
    validate_pattern,
)


def test_config_defaults_horizon():
    c = SystemConfig(4, 3)
    assert c.decision_bound == 3
    assert c.horizon == 4
    assert SystemConfig(7, 2).decision_bound == 3


@pytest.mark.parametrize("n,t", [(3, 3), (1, 0), (3, -1)])
def test_config_rejects(n, t):
    with pytest.raises(ConfigError):
        SystemConfig(n, t)


def test_validate_examples():
    validate_pattern(SystemConfig(3, 1), FailurePattern.of({}))
    with pytest.raises(TooManyFaults):
        validate_pattern(SystemConfig(3, 1), FailurePattern.of({1: (1, {2}), 2: (2, set())}))
    validate_pattern(SystemConfig(4, 3), FailurePattern.of({2: (1, {1, 3})}))


def test_validate_errors():
    c = SystemConfig(3, 2)
    with pytest.raises(SelfDelivery):
        validate_pattern(c, FailurePattern.of({1: (1, {1})}))
    with pytest.raises(UnknownAgent):
        validate_pattern(c, FailurePattern.of({5: (1, set())}))
    with pytest.raises(UnknownAgent):
        validate_pattern(c, FailurePattern.of({1: (1, {9})}))
    with pytest.raises(BadRound):
        validate_pattern(c, FailurePattern.of({1: (0, set())}))
    with pytest.raises(BadRound):
        validate_pattern(c, FailurePattern.of({1: (4, set())}))


def test_adversary_encoding():
    p = FailurePattern.of({2: (2, {1})})
    assert p.delivers(1, 2, 3) and p.delivers(2, 2, 1)
    assert not p.delivers(2, 2, 3) and not p.delivers(3, 2, 1)
    assert not p.delivers(2, 2, 2)
    assert p.delivers(5, 1, 3)
    assert p.failed_by(1) == 0 and p.failed_by(2) == 1


def test_counts_small():
    c = SystemConfig(2, 1, horizon=2)
    assert pattern_count(c) == 9
    assert scenario_count(c) == 36
    assert len(list(enumerate_patterns(c))) == 9
    scs = list(enumerate_scenarios(c))
    assert len(scs) == 36 and len(set(scs)) == 36
    assert len(list(enumerate_scenarios(SystemConfig(3, 0)))) == 8


def test_count_formula_matches_enumeration():
    for n, t in [(3, 1), (3, 2), (4, 1)]:
        c = SystemConfig(n, t)
        assert len(list(enumerate_patterns(c))) == pattern_count(c)


def test_sampled_deterministic_and_valid():
    c = SystemConfig(5, 3)
    a = list(enumerate_scenarios(c, "sampled", 100, seed=42))
    b = list(enumerate_scenarios(c, "sampled", 100, seed=42))
    assert a == b
    assert a != list(enumerate_scenarios(c, "sampled", 100, seed=43))
    for s in a:
        validate_pattern(c, s.pattern)


def test_sampled_roughly_uniform_over_fault_count():
    # n=3,t=1,H=3: 8 failure-free scenarios vs 288 with one fault
    c = SystemConfig(3, 1)
    draws = list(enumerate_scenarios(c, "sampled", 3000, seed=1))
    frac = sum(1 for s in draws if not s.pattern.crashes) / len(draws)
    assert abs(frac - 8 / 296) < 0.015


def test_cap(monkeypatch):
    with pytest.raises(SpaceTooLarge):
        next(enumerate_scenarios(SystemConfig(8, 7)))
    monkeypatch.setenv("SBA_LAB_CAP", "10")
    with pytest.raises(SpaceTooLarge):
        next(enumerate_scenarios(SystemConfig(2, 1)))


def test_scenario_json_roundtrip():
    s = Scenario(SystemConfig(4, 2), (0, 1, 1, 0), FailurePattern.of({3: (1, set()), 4: (2, {1, 2})}))
    again = Scenario.from_json(json.loads(json.dumps(s.to_json())))
    assert again == s


@pytest.mark.parametrize("doc,field", [
    ({"t": 1, "init": [0, 0, 0], "crashes": []}, "'n'"),
    ({"n": 3, "t": 1, "init": [0, 2, 0], "crashes": []}, "init"),
    ({"n": 3, "t": 1, "init": [0, 0], "crashes": []}, "init"),
    ({"n": 3, "t": 1, "init": [0, 0, 0], "crashes": [{"agent": 7, "round": 1, "delivered": []}]}, "crashes"),
    ({"n": 3, "t": 1, "init": [0, 0, 0], "crashes": [{"agent": 1, "delivered": []}]}, "round"),
])
def test_scenario_bad_json(doc, field):
    with pytest.raises(ScenarioFormatError, match=field):
        Scenario.from_json(doc)


def test_exchange_kind_parse():
    assert ExchangeKind.parse("FloodSet") is ExchangeKind.FLOODSET
    assert len(ExchangeKind.limited()) == 5
    with pytest.raises(ValueError):
        ExchangeKind.parse("paxos")
