"""Property tests over randomly drawn scenarios."""

from hypothesis import given, settings
from hypothesis import strategies as st

from sba_lab.analysis import DecisionTable, audit_sba
from sba_lab.exchanges import CRASHED
from sba_lab.model import ExchangeKind, FailurePattern, Scenario, SystemConfig
from sba_lab.runs import generate_run


@st.composite
def scenarios(draw, max_n=6):
    n = draw(st.integers(2, max_n))
    t = draw(st.integers(0, n - 1))
    config = SystemConfig(n, t)
    init = tuple(draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)))
    faulty = draw(st.lists(st.integers(1, n), unique=True, max_size=t))
    crashes = {}
    for j in faulty:
        others = [k for k in config.agents if k != j]
        rnd = draw(st.integers(1, config.horizon))
        crashes[j] = (rnd, set(draw(st.lists(st.sampled_from(others), unique=True))))
    return Scenario(config, init, FailurePattern.of(crashes))


KINDS = st.sampled_from(ExchangeKind.limited())


@settings(max_examples=150, deadline=None)
@given(scenarios(), KINDS)
def test_sba_properties_on_random_runs(sc, kind):
    table = DecisionTable.from_runs([generate_run(sc, kind)])
    assert audit_sba(table).ok
    first = table.first_decision()[0]
    assert 0 < first <= sc.config.decision_bound


@settings(max_examples=100, deadline=None)
@given(scenarios())
def test_floodset_never_later(sc):
    firsts = {k: DecisionTable.from_runs([generate_run(sc, k)]).first_decision()[0]
              for k in ExchangeKind.limited()}
    assert all(v <= firsts[ExchangeKind.FLOODSET] for v in firsts.values())
    assert firsts[ExchangeKind.COUNTING] == firsts[ExchangeKind.COUNTING_PR]


@settings(max_examples=100, deadline=None)
@given(scenarios())
def test_state_monotonicity(sc):
    flood = generate_run(sc, "floodset")
    vec = generate_run(sc, "vectorized")
    sw = generate_run(sc, "sendwaste")
    for m in range(1, sc.config.horizon + 1):
        for i in range(sc.config.n):
            a, b = flood.states[m - 1][i], flood.states[m][i]
            if b is CRASHED:
                continue
            assert a.W <= b.W
            va, vb = vec.states[m - 1][i], vec.states[m][i]
            assert vb.beta <= va.beta
            assert all(x is None or x == y for x, y in zip(va.V, vb.V))
            assert vb.V[i] == sc.init[i]
            assert set(vb.V) - {None} == b.W
            assert sw.states[m][i].d >= sw.states[m - 1][i].d


@settings(max_examples=60, deadline=None)
@given(scenarios(max_n=5))
def test_scenario_json_roundtrip(sc):
    assert Scenario.from_json(sc.to_json()) == sc
