"""Cross-protocol experiments over runs and point spaces."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from itertools import permutations
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .epistemics import D, Failed, ck_onset_times, holds
from .exchanges import CRASHED
from .model import Action, ExchangeKind, SBAError, Scenario, SystemConfig
from .runs import Run, generate_run
from .space import PointSpace

# action codes shared by every table below
CRASHED_CODE = -2
NOOP_CODE = -1

Rule = Callable[[object, SystemConfig], Action]


class MismatchedScenarios(SBAError):
    pass


def _code(action: Action) -> int:
    return NOOP_CODE if action.value is None else action.value


@dataclass(frozen=True)
class DecisionRecord:
    """Rule firings of one run: ``firings[m][i - 1]`` is 0/1, -1 (noop) or -2 (crashed)."""

    scenario_id: int
    kind: ExchangeKind
    init: tuple[int, ...]
    firings: tuple[tuple[int, ...], ...]
    num_faulty: int = 0
    weight: int = 1

    @property
    def first_rounds(self) -> tuple[Optional[int], ...]:
        out = []
        for i in range(len(self.init)):
            out.append(next((m for m, row in enumerate(self.firings) if row[i] >= 0), None))
        return tuple(out)

    @property
    def first_values(self) -> tuple[Optional[int], ...]:
        return tuple(
            None if m is None else self.firings[m][i] for i, m in enumerate(self.first_rounds)
        )

    @property
    def first_decision(self) -> Optional[int]:
        rounds = [m for m in self.first_rounds if m is not None]
        return min(rounds) if rounds else None

    @property
    def simultaneous(self) -> bool:
        rounds = {m for m in self.first_rounds if m is not None}
        if len(rounds) > 1:
            return False
        if not rounds:
            return True
        row = self.firings[rounds.pop()]
        return all(code >= 0 for code in row if code != CRASHED_CODE)

    @property
    def agreed_value(self) -> Optional[int]:
        values = {code for row in self.firings for code in row if code >= 0}
        return values.pop() if len(values) == 1 else None


@dataclass
class DecisionTable:
    """Rule firings for many runs at once, shaped ``[time, agent - 1, run]``."""

    config: SystemConfig
    kind: ExchangeKind
    acts: np.ndarray
    inits: np.ndarray  # [run, agent - 1]
    weight: np.ndarray
    num_faulty: np.ndarray
    ids: np.ndarray
    source: object = field(default=None, repr=False)

    def __len__(self):
        return self.acts.shape[2]

    @classmethod
    def from_space(cls, space: PointSpace, rule: Rule | None = None) -> "DecisionTable":
        rule = rule or space.exchange.decide
        tree = space.tree
        anc = tree.ancestors()
        acts = np.empty((space.horizon + 1, space.config.n, len(tree.leaves)), dtype=np.int8)
        for m in range(space.horizon + 1):
            acts[m] = rule_codes(space, m, rule)[:, anc[m]]
        inits = np.array(tree.inits, dtype=np.int8)[tree.leaves.root]
        return cls(
            space.config, space.kind, acts, inits, tree.weight.copy(),
            tree.leaf_faulty(), np.arange(len(tree.leaves)), tree,
        )

    @classmethod
    def from_runs(cls, runs: Sequence[Run], rule: Rule | None = None, ids=None) -> "DecisionTable":
        if not runs:
            raise ValueError("no runs")
        config, kind = runs[0].config, runs[0].kind
        from .exchanges import get_exchange

        rule = rule or get_exchange(kind).decide
        acts = np.empty((config.horizon + 1, config.n, len(runs)), dtype=np.int8)
        for r, run in enumerate(runs):
            if run.kind != kind or run.config != config:
                raise MismatchedScenarios("runs mix exchanges or configurations")
            for m, states in enumerate(run.states):
                acts[m, :, r] = [
                    CRASHED_CODE if s is CRASHED else _code(rule(s, config)) for s in states
                ]
        inits = np.array([run.scenario.init for run in runs], dtype=np.int8)
        faulty = np.array([len(run.scenario.pattern.crashes) for run in runs], dtype=np.int64)
        ids = np.arange(len(runs)) if ids is None else np.asarray(ids)
        return cls(config, kind, acts, inits, np.ones(len(runs), dtype=np.int64), faulty, ids,
                   tuple(run.scenario for run in runs))

    def first_decision(self) -> np.ndarray:
        """Earliest time any agent decides in each run (-1 if nobody does)."""
        decided = (self.acts >= 0).any(axis=1)
        first = np.argmax(decided, axis=0)
        return np.where(decided.any(axis=0), first, -1)

    def decision_value(self) -> np.ndarray:
        first = self.first_decision()
        cols = np.arange(len(self))
        vals = self.acts[np.maximum(first, 0), :, cols]  # [run, agent]
        picked = np.where(vals >= 0, vals, 127).min(axis=1)
        return np.where(first >= 0, picked, -1)

    def simultaneous(self) -> np.ndarray:
        decide = self.acts >= 0
        live = self.acts != CRASHED_CODE
        # per round: nobody decides, or every nonfailed agent does
        ok_round = ~decide.any(axis=1) | (decide == live).all(axis=1)
        return ok_round.all(axis=0)

    def record(self, k: int) -> DecisionRecord:
        return DecisionRecord(
            int(self.ids[k]), self.kind, tuple(int(v) for v in self.inits[k]),
            tuple(tuple(int(c) for c in self.acts[m, :, k]) for m in range(self.acts.shape[0])),
            int(self.num_faulty[k]), int(self.weight[k]),
        )

    def records(self) -> Iterable[DecisionRecord]:
        return (self.record(k) for k in range(len(self)))


def rule_codes(space: PointSpace, m: int, rule: Rule | None = None) -> np.ndarray:
    """Rule output at every point of time ``m``, shaped ``[agent - 1, point]``."""
    rule = rule or space.exchange.decide
    out = np.empty((space.config.n, space.size(m)), dtype=np.int8)
    for i in range(space.config.n):
        table = [CRASHED_CODE] + [
            _code(rule(s, space.config)) for s in space.cell_states[m][i][1:]
        ]
        out[i] = np.array(table, dtype=np.int8)[space.cells[m][i]]
    return out


@dataclass
class AuditReport:
    kind: ExchangeKind
    runs: int = 0
    scenarios: int = 0
    violations: dict = field(default_factory=lambda: {
        "agreement": 0, "self_agreement": 0, "validity": 0, "simultaneity": 0, "termination": 0,
    })
    examples: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not any(self.violations.values())

    def to_json(self) -> dict:
        return {
            "exchange": self.kind.value, "runs": self.runs, "scenarios": self.scenarios,
            "violations": dict(self.violations), "examples": self.examples, "ok": self.ok,
        }


def audit_sba(records, kind: ExchangeKind | None = None) -> AuditReport:
    """Check Agreement, Self-Agreement, Validity, Simultaneity and Termination.

    Accepts a :class:`DecisionTable` (vectorised) or any iterable of
    :class:`DecisionRecord`. Violations are counted per run.
    """
    if isinstance(records, DecisionTable):
        return _audit_table(records)
    report = None
    for rec in records:
        if report is None:
            report = AuditReport(kind or rec.kind)
        if kind is not None and rec.kind != kind:
            raise MismatchedScenarios("records mix exchanges")
        report.runs += 1
        report.scenarios += rec.weight
        found = set()
        n = len(rec.init)
        for i in range(n):
            own = {row[i] for row in rec.firings if row[i] >= 0}
            if len(own) > 1:
                found.add("self_agreement")
        values = {c for row in rec.firings for c in row if c >= 0}
        if len(values) > 1:
            found.add("agreement")
        if values - set(rec.init):
            found.add("validity")
        for row in rec.firings:
            deciding = [c >= 0 for c in row if c != CRASHED_CODE]
            if any(deciding) and not all(deciding):
                found.add("simultaneity")
        for i in range(n):
            ever = any(row[i] >= 0 for row in rec.firings)
            crashed = rec.firings[-1][i] == CRASHED_CODE
            if not ever and not crashed:
                found.add("termination")
        for name in found:
            report.violations[name] += 1
            report.examples.setdefault(name, rec.scenario_id)
    return report or AuditReport(kind or ExchangeKind.FLOODSET)


def _audit_table(table: DecisionTable) -> AuditReport:
    acts = table.acts
    report = AuditReport(table.kind, len(table), int(table.weight.sum()))
    dec0, dec1 = (acts == 0), (acts == 1)
    own_both = (dec0.any(axis=0) & dec1.any(axis=0)).any(axis=0)
    both = dec0.any(axis=(0, 1)) & dec1.any(axis=(0, 1))
    has0 = (table.inits == 0).any(axis=1)
    has1 = (table.inits == 1).any(axis=1)
    invalid = (dec0.any(axis=(0, 1)) & ~has0) | (dec1.any(axis=(0, 1)) & ~has1)
    unsync = ~table.simultaneous()
    never = ~(acts >= 0).any(axis=0) & (acts[-1] != CRASHED_CODE)
    unterminated = never.any(axis=0)
    for name, mask in (("agreement", both), ("self_agreement", own_both), ("validity", invalid),
                       ("simultaneity", unsync), ("termination", unterminated)):
        report.violations[name] = int(mask.sum())
        if mask.any():
            report.examples[name] = int(table.ids[np.argmax(mask)])
    return report


@dataclass
class Comparison:
    kinds: tuple[ExchangeKind, ...]
    ids: np.ndarray
    first: dict  # kind -> first decision per run
    weight: np.ndarray
    earlier: dict  # (a, b) -> scenarios where a decides strictly before b

    def to_json(self) -> dict:
        return {
            "kinds": [k.value for k in self.kinds],
            "runs": len(self.ids),
            "scenarios": int(self.weight.sum()),
            "strictly_earlier": {f"{a.value}<{b.value}": v for (a, b), v in self.earlier.items()},
        }


def compare_decision_times(tables: dict) -> Comparison:
    """First-decision times per run for several exchanges over the same scenarios."""
    kinds = tuple(tables)
    base = tables[kinds[0]]
    for table in tables.values():
        same = len(table) == len(base) and np.array_equal(table.ids, base.ids)
        if same and isinstance(base.source, tuple):
            same = table.source == base.source
        elif same:
            same = table.source is base.source
        if not same:
            raise MismatchedScenarios("decision tables cover different scenario sets")
    first = {k: tables[k].first_decision() for k in kinds}
    earlier = {}
    for a, b in permutations(kinds, 2):
        fa, fb = first[a], first[b]
        mask = (fa >= 0) & ((fa < fb) | (fb < 0))
        earlier[(a, b)] = int(base.weight[mask].sum())
    return Comparison(kinds, base.ids, first, base.weight, earlier)


@dataclass
class WasteReport:
    scenario_id: int
    known_failures: tuple[int, ...]  # #KF(r, k) for k = 0..horizon
    diff: tuple[int, ...]
    waste: int
    fullinfo_ck_time: Optional[int]
    predicted_ck_time: int

    @property
    def identity_holds(self) -> bool:
        return self.fullinfo_ck_time == self.predicted_ck_time

    def to_json(self) -> dict:
        return {
            "scenario_id": self.scenario_id, "known_failures": list(self.known_failures),
            "diff": list(self.diff), "waste": self.waste,
            "fullinfo_ck_time": self.fullinfo_ck_time, "predicted_ck_time": self.predicted_ck_time,
            "identity_holds": self.identity_holds,
        }


def known_failures(space: PointSpace, m: int) -> np.ndarray:
    """#KF at every point of time ``m``: largest l <= t with D_N(at least l agents failed)."""
    space.require_exhaustive()
    out = np.zeros(space.size(m), dtype=np.int64)
    for count in range(1, space.config.t + 1):
        out[holds(space, m, D(Failed(count)))] = count
    return out


class WasteTable:
    """Waste and full-information CK onset for every run of a full-information space."""

    def __init__(self, space: PointSpace):
        if space.kind != ExchangeKind.FULLINFO:
            raise ValueError("the waste oracle needs the full-information space")
        space.require_exhaustive()
        self.space = space
        anc = space.tree.ancestors()
        kf = np.stack([known_failures(space, m)[anc[m]] for m in range(space.horizon + 1)])
        self.known_failures = kf  # [k, run]
        self.diff = kf - np.arange(space.horizon + 1)[:, None]
        self.waste = self.diff.max(axis=0)
        self.ck_time = ck_onset_times(space)
        self.predicted = space.config.decision_bound - self.waste

    def report(self, leaf: int) -> WasteReport:
        ck = int(self.ck_time[leaf])
        return WasteReport(
            leaf, tuple(int(x) for x in self.known_failures[:, leaf]),
            tuple(int(x) for x in self.diff[:, leaf]), int(self.waste[leaf]),
            None if ck < 0 else ck, int(self.predicted[leaf]),
        )

    def identity_failures(self) -> np.ndarray:
        return np.nonzero(self.ck_time != self.predicted)[0]


def compute_waste(space: PointSpace, run) -> WasteReport:
    table = space._cache.get("waste_table")
    if table is None:
        table = space._cache["waste_table"] = WasteTable(space)
    return table.report(space.leaf_of(run))


@dataclass
class GapReport:
    histogram: dict
    violations: int
    examples: list

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_json(self) -> dict:
        return {"gap_histogram": {str(k): v for k, v in sorted(self.histogram.items())},
                "violations": self.violations, "examples": self.examples, "ok": self.ok}


def check_sendwaste_vs_dm(sendwaste: DecisionTable, waste: WasteTable) -> GapReport:
    """SendWaste decides at m with m' <= m <= m' + 1, m' the full-information CK onset."""
    if sendwaste.kind != ExchangeKind.SENDWASTE:
        raise ValueError("need a SendWaste decision table")
    if sendwaste.source is not waste.space.tree:
        raise MismatchedScenarios("tables must come from the same run tree")
    m = sendwaste.first_decision()
    gap = m - waste.ck_time
    bad = (waste.ck_time < 0) | (m < 0) | (gap < 0) | (gap > 1)
    hist = Counter()
    for g, w in zip(gap.tolist(), sendwaste.weight.tolist()):
        hist[g] += w
    examples = [int(x) for x in np.nonzero(bad)[0][:10]]
    return GapReport(dict(hist), int(sendwaste.weight[bad].sum()), examples)


@dataclass
class ResourceRow:
    kind: ExchangeKind
    n: int
    runs: int
    max_message_bytes: int
    max_state_bytes: int
    mean_ops_per_round: float

    def to_json(self) -> dict:
        return {"exchange": self.kind.value, "n": self.n, "runs": self.runs,
                "max_message_bytes": self.max_message_bytes,
                "max_state_bytes": self.max_state_bytes,
                "mean_ops_per_round": round(self.mean_ops_per_round, 3)}


def measure_resources(scenarios: Iterable[Scenario], kind: ExchangeKind | str) -> list[ResourceRow]:
    """Largest serialized message and state, and mean update cost per round, grouped by n."""
    from .exchanges import get_exchange

    ex = get_exchange(kind)
    acc: dict[int, list] = {}
    for sc in scenarios:
        run = generate_run(sc, ex.kind)
        row = acc.setdefault(sc.config.n, [0, 0, 0, 0, 0])
        row[0] += 1
        for m in range(1, len(run.states)):
            msgs = run.messages[m - 1]
            for payload in msgs:
                if payload is not None:
                    row[1] = max(row[1], ex.message_bytes(payload))
            for i, (before, after) in enumerate(zip(run.states[m - 1], run.states[m]), 1):
                if before is CRASHED or after is CRASHED:
                    continue
                received = tuple(
                    msgs[j - 1] if run.deliveries[m - 1][j - 1][i - 1] else None
                    for j in sc.config.agents if j != i
                )
                row[3] += ex.cost(before, received)
                row[4] += 1
        for states in run.states:
            for s in states:
                row[2] = max(row[2], ex.state_bytes(s))
    return [
        ResourceRow(ex.kind, n, r[0], r[1], r[2], r[3] / r[4] if r[4] else 0.0)
        for n, r in sorted(acc.items())
    ]
