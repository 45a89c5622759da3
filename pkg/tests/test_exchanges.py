import pickle

import pytest

from sba_lab.exchanges import (
    CRASHED,
    ConflictingValue,
    CountPRState,
    CountState,
    FloodState,
    FullInfoState,
    SendWasteState,
    VectorState,
    count_decide,
    count_update,
    countpr_decide,
    countpr_update,
    flood_decide,
    flood_update,
    fullinfo_round,
    get_exchange,
    sendwaste_decide,
    sendwaste_round,
    vector_decide,
    vector_round,
)
from sba_lab.model import NOOP, ExchangeKind, SystemConfig

F = frozenset


def test_flood_update_examples():
    assert flood_update(FloodState(F({0}), 0, 0), [F({1}), F({1})]) == FloodState(F({0, 1}), 1, 0)
    assert flood_update(FloodState(F({0, 1}), 2, 1), [None, None]) == FloodState(F({0, 1}), 3, 1)
    assert flood_update(FloodState(F({1}), 0, 1), [F({0, 1}), None]) == FloodState(F({0, 1}), 1, 1)


def test_flood_decide_examples():
    assert flood_decide(FloodState(F({1}), 3, 1), SystemConfig(4, 3)).value == 1
    assert flood_decide(FloodState(F({0, 1}), 2, 1), SystemConfig(4, 3)) == NOOP
    assert flood_decide(FloodState(F({0, 1}), 3, 1), SystemConfig(7, 2)).value == 0


def test_count_update_examples():
    s = CountState(F({0}), 0, 0, 0)
    assert count_update(s, [F({1}), None, None]).h == 2
    assert count_update(s, [F({1}), F({0}), F({1})]).h == 0
    pr = CountPRState(F({0}), (0,), 0, 0)
    pr = countpr_update(pr, [F({1})] * 3)
    pr = countpr_update(pr, [F({1}), None, None])
    assert pr.h_hist == (0, 0, 2)


def test_count_decide_examples():
    c = SystemConfig(4, 3)
    assert count_decide(CountState(F({1}), 3, 1, 1), c).value == 1
    assert count_decide(CountState(F({0, 1}), 2, 1, 1), c) == NOOP
    assert countpr_decide(CountPRState(F({0, 1}), (0, 3, 0), 2, 1), c).value == 0


def test_vector_round_examples():
    s = VectorState((0, None, 0), F({(0, 3)}), 1)
    out = vector_round(s, [F({(1, 2)}), None])
    assert out.V == (0, 1, 0) and out.New == F({(1, 2)})
    assert s.beta == 1 and out.beta == 0
    again = vector_round(out, [F({(1, 2)}), None])
    assert again.New == F() and again.V == out.V


def test_vector_conflict():
    s = VectorState((0, None, None), F(), 1)
    with pytest.raises(ConflictingValue):
        vector_round(s, [F({(1, 2)}), F({(0, 2)})])


def test_vector_silent_when_nothing_new():
    assert get_exchange("vectorized").message(VectorState((0, 1), F(), 1)) is None


def test_vector_decide_examples():
    assert vector_decide(VectorState((0, 1, 0), F(), 2), SystemConfig(3, 2)).value == 0
    V2 = (0, 1, 1, None, None)
    assert vector_decide(VectorState(V2, F(), 2), SystemConfig(5, 3)) == NOOP
    assert vector_decide(VectorState(V2, F(), 3), SystemConfig(5, 3)).value == 0
    assert vector_decide(VectorState((1, 1, None, None, None), F(), 3), SystemConfig(5, 3)).value == 1


def test_vector_no_decision_at_time_zero():
    s = get_exchange("vectorized").initial(1, 0, SystemConfig(4, 1))
    assert s.beta == 3
    assert vector_decide(s, SystemConfig(4, 1)) == NOOP


def test_sendwaste_round_examples():
    s = SendWasteState(F({0}), 0, 0, 0, 0)
    assert sendwaste_round(s, [None, None]).d == 1
    s2 = SendWasteState(F({0}), 0, 0, 1, 0)
    assert sendwaste_round(s2, [(F({1}), 1), (F({0}), 0)]).d == 1
    assert sendwaste_round(s, [(F({1}), 0), (F({0}), 0)]).d == 0


def test_sendwaste_decide_examples():
    c = SystemConfig(5, 4)
    assert sendwaste_decide(SendWasteState(F({0, 1}), 0, 1, 3, 1), c).value == 0
    assert sendwaste_decide(SendWasteState(F({0, 1}), 0, 1, 2, 1), c) == NOOP


def test_fullinfo_round_structure():
    s = FullInfoState(0)
    other = FullInfoState(1)
    out = fullinfo_round(s, (other, None, other))
    assert out.time == 1 and len(out.history[0]) == 3
    assert out is fullinfo_round(FullInfoState(0), (FullInfoState(1), None, FullInfoState(1)))
    assert pickle.loads(pickle.dumps(out)) == out


def test_fullinfo_has_no_rule():
    with pytest.raises(NotImplementedError):
        get_exchange(ExchangeKind.FULLINFO).decide(FullInfoState(0), SystemConfig(3, 1))


def test_crashed_pickles_to_singleton():
    assert pickle.loads(pickle.dumps(CRASHED)) is CRASHED


def test_message_bytes_constant_for_flood():
    ex = get_exchange("floodset")
    assert ex.message_bytes(F({0, 1})) == len('{"W":[0,1]}')
