"""Command-line front end: ``sba-lab verify|compare|simulate|trace``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .analysis import (
    DecisionTable,
    WasteTable,
    audit_sba,
    compare_decision_times,
    measure_resources,
)
from .model import (
    ConfigError,
    ExchangeKind,
    SBAError,
    Scenario,
    ScenarioFormatError,
    SpaceTooLarge,
    SystemConfig,
    check_cap,
    enumerate_scenarios,
)
from .runs import generate_run
from .space import PointSpace, RunTree
from .theorems import default_matrix, verify

log = logging.getLogger("sba_lab")

COLUMNS = (
    "scenario_id", "n", "t", "num_faulty", "exchange", "first_decision_round",
    "decision_value", "simultaneous", "waste", "fullinfo_ck_round",
)
RESOURCE_SAMPLES = 1000

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class CliConfig:
    subcommand: str
    n: Optional[int]
    t: Optional[int]
    horizon: Optional[int]
    exchanges: tuple[ExchangeKind, ...]
    mode: str
    samples: int
    seed: int
    scenario: Optional[Path]
    out: Optional[Path]
    format: str
    cap: Optional[int]

    def system(self) -> SystemConfig:
        return SystemConfig(self.n, self.t, self.horizon)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sba-lab", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, exchange_default="all"):
        p.add_argument("--n", type=int)
        p.add_argument("--t", type=int)
        p.add_argument("--horizon", type=int)
        p.add_argument("--exchange", default=exchange_default,
                       help="one exchange name or 'all' (the five with a decision rule)")
        p.add_argument("--out", type=Path, help="output file (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--cap", type=int, help="exhaustive scenario cap (env SBA_LAB_CAP)")

    def sampling(p):
        p.add_argument("--mode", choices=("exhaustive", "sampled"), default="exhaustive")
        p.add_argument("--samples", type=int, default=1000)
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("verify", help="KB equivalence, SBA audit and theorem checks")
    common(p)
    p.set_defaults(format="json")
    p = sub.add_parser("compare", help="first-decision times of several exchanges")
    common(p)
    sampling(p)
    p = sub.add_parser("simulate", help="run scenarios and audit the decisions")
    common(p)
    sampling(p)
    p = sub.add_parser("trace", help="dump one run as JSON")
    common(p, exchange_default="floodset")
    p.add_argument("scenario", type=Path)
    p.set_defaults(format="json")
    return parser


def parse_config(argv: Sequence[str] | None = None) -> tuple[CliConfig, argparse.Namespace]:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        kinds = _exchanges(args.exchange)
    except ValueError as exc:
        parser.error(str(exc))
    if args.subcommand in ("compare", "simulate") and args.n is None:
        parser.error("--n is required")
    if args.n is not None:
        t = args.t
        if t is None and args.subcommand in ("compare", "simulate"):
            parser.error("--t is required")
        try:
            # t < n and the horizon are validated here, before any work starts
            SystemConfig(args.n, t if t is not None else args.n - 1, args.horizon)
        except (ConfigError, ValueError) as exc:
            parser.error(str(exc))
    elif args.t is not None and args.subcommand == "verify":
        parser.error("--t needs --n")
    config = CliConfig(
        subcommand=args.subcommand, n=args.n, t=args.t, horizon=args.horizon,
        exchanges=kinds,
        mode="exhaustive" if args.subcommand == "verify" else getattr(args, "mode", "exhaustive"),
        samples=getattr(args, "samples", 0), seed=getattr(args, "seed", 0),
        scenario=getattr(args, "scenario", None), out=args.out, format=args.format, cap=args.cap,
    )
    return config, args


def _exchanges(name: str) -> tuple[ExchangeKind, ...]:
    if name.lower() == "all":
        return ExchangeKind.limited()
    return (ExchangeKind.parse(name),)


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _dump(doc, out: Optional[Path]) -> None:
    _emit(json.dumps(doc, indent=2) + "\n", out)


def cmd_verify(cfg: CliConfig) -> int:
    if cfg.n is None:
        configs = default_matrix()
    elif cfg.t is None:
        configs = [SystemConfig(cfg.n, t, cfg.horizon) for t in range(1, cfg.n)]
    else:
        configs = [cfg.system()]
    for c in configs:
        check_cap(c, cfg.cap)
    report = verify(configs, cfg.exchanges, cfg.cap)
    for r in report["configs"]:
        for kind, entry in r["exchanges"].items():
            print(f"n={r['n']} t={r['t']} {kind:<12} points={entry['points']:<8} "
                  f"mismatches={entry['kb_mismatches']} "
                  f"{'PASS' if entry['ok'] else 'FAIL'}", file=sys.stderr)
    _dump(report, cfg.out)
    return EXIT_OK if report["ok"] else EXIT_FAIL


def _rows_from_tables(config: SystemConfig, tables: dict, scenario_ids, leaf_of=None,
                      waste: Optional[WasteTable] = None) -> list[list]:
    """One row per scenario and exchange; ``leaf_of`` maps scenario rows to table columns."""
    cols = np.arange(len(scenario_ids)) if leaf_of is None else leaf_of
    rows = []
    for kind, table in tables.items():
        first = table.first_decision()[cols]
        value = table.decision_value()[cols]
        simul = table.simultaneous()[cols]
        faulty = table.num_faulty[cols]
        w = waste.waste[cols] if waste is not None else None
        ck = waste.ck_time[cols] if waste is not None else None
        for r, sid in enumerate(scenario_ids):
            rows.append([
                int(sid), config.n, config.t, int(faulty[r]), kind.value,
                _blank(first[r]), _blank(value[r]), str(bool(simul[r])).lower(),
                "" if w is None else int(w[r]), "" if ck is None else _blank(ck[r]),
            ])
    return rows


def _blank(x) -> str | int:
    return "" if x < 0 else int(x)


def _csv(rows, header=COLUMNS) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _sampled_tables(cfg: CliConfig) -> tuple[list[Scenario], dict]:
    config = cfg.system()
    scenarios = list(enumerate_scenarios(config, cfg.mode, cfg.samples, cfg.seed, cfg.cap))
    tables = {
        kind: DecisionTable.from_runs([generate_run(s, kind) for s in scenarios])
        for kind in cfg.exchanges
    }
    return scenarios, tables


def _resources(cfg: CliConfig, scenarios: Optional[list]) -> list[dict]:
    if scenarios is None or len(scenarios) > RESOURCE_SAMPLES:
        # profiling needs full runs; a seeded sample keeps exhaustive mode affordable
        scenarios = list(enumerate_scenarios(cfg.system(), "sampled", RESOURCE_SAMPLES, cfg.seed))
    out = []
    for kind in cfg.exchanges:
        out += [row.to_json() for row in measure_resources(scenarios, kind)]
    return out


def cmd_compare(cfg: CliConfig) -> int:
    config = cfg.system()
    if cfg.mode == "exhaustive":
        check_cap(config, cfg.cap)
        tree = RunTree.exhaustive_tree(config, cfg.cap)
        tables = {k: DecisionTable.from_space(PointSpace(tree, k)) for k in cfg.exchanges}
        waste = WasteTable(PointSpace(tree, ExchangeKind.FULLINFO))
        leaf_of = np.fromiter((tree.locate(s) for s in enumerate_scenarios(config, cap=cfg.cap)),
                              dtype=np.int64)
        rows = _rows_from_tables(config, tables, range(len(leaf_of)), leaf_of, waste)
        scenarios = None
    else:
        scenarios, tables = _sampled_tables(cfg)
        rows = _rows_from_tables(config, tables, range(len(scenarios)))
    summary = compare_decision_times(tables).to_json() if len(tables) > 1 else {}
    resources = _resources(cfg, scenarios)
    if cfg.format == "json":
        _dump({"rows": [dict(zip(COLUMNS, r)) for r in rows], "comparison": summary,
               "resources": resources}, cfg.out)
    else:
        _emit(_csv(rows), cfg.out)
        res_rows = [[r[k] for k in r] for r in resources]
        header = tuple(resources[0]) if resources else ()
        if cfg.out is not None:
            cfg.out.with_suffix(".resources.csv").write_text(_csv(res_rows, header))
        else:
            sys.stderr.write(_csv(res_rows, header))
        if summary:
            print(json.dumps(summary["strictly_earlier"]), file=sys.stderr)
    return EXIT_OK


def cmd_simulate(cfg: CliConfig) -> int:
    config = cfg.system()
    scenarios, tables = _sampled_tables(cfg)
    audits = {k.value: audit_sba(t).to_json() for k, t in tables.items()}
    rows = _rows_from_tables(config, tables, range(len(scenarios)))
    ok = all(a["ok"] for a in audits.values())
    if cfg.format == "json":
        _dump({"rows": [dict(zip(COLUMNS, r)) for r in rows], "audit": audits, "ok": ok}, cfg.out)
    else:
        _emit(_csv(rows), cfg.out)
        print(json.dumps(audits), file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_trace(cfg: CliConfig) -> int:
    try:
        doc = json.loads(cfg.scenario.read_text())
    except OSError as exc:
        raise UsageError(f"cannot read scenario file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(f"scenario file is not JSON: {exc}") from None
    scenario = Scenario.from_json(doc)
    traces = [generate_run(scenario, kind).to_json() for kind in cfg.exchanges]
    _dump(traces[0] if len(traces) == 1 else traces, cfg.out)
    return EXIT_OK


COMMANDS = {"verify": cmd_verify, "compare": cmd_compare, "simulate": cmd_simulate,
            "trace": cmd_trace}


def main(argv: Sequence[str] | None = None) -> int:
    cfg, args = parse_config(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[cfg.subcommand](cfg)
    except SpaceTooLarge as exc:
        print(f"sba-lab: SpaceTooLarge: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, ScenarioFormatError, ConfigError) as exc:
        print(f"sba-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SBAError as exc:
        print(f"sba-lab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
