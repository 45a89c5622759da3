import csv
import json

import pytest

from sba_lab.cli import COLUMNS, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_verify_passes(capsys, tmp_path):
    out = tmp_path / "r.json"
    code, _, err = run(capsys, "verify", "--n", "3", "--t", "2", "--exchange", "all", "--out", str(out))
    assert code == 0
    report = json.loads(out.read_text())
    assert report["ok"] and set(report["configs"][0]["exchanges"]) == {
        "floodset", "counting", "counting_pr", "vectorized", "sendwaste"}
    assert "PASS" in err


def test_verify_t_not_below_n(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["verify", "--n", "3", "--t", "3"])
    assert exc.value.code == 2


def test_verify_space_too_large(capsys):
    code, _, err = run(capsys, "verify", "--n", "8", "--t", "7")
    assert code == 2 and "SpaceTooLarge" in err


def test_cap_env(capsys, monkeypatch):
    monkeypatch.setenv("SBA_LAB_CAP", "5")
    code, _, err = run(capsys, "verify", "--n", "2", "--t", "1")
    assert code == 2 and "SpaceTooLarge" in err


def test_unknown_exchange(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["verify", "--n", "3", "--t", "1", "--exchange", "raft"])
    assert exc.value.code == 2


def test_compare_exhaustive_rows(capsys, tmp_path):
    out = tmp_path / "cmp.csv"
    assert run(capsys, "compare", "--n", "3", "--t", "1", "--mode", "exhaustive", "--out", str(out))[0] == 0
    rows = list(csv.DictReader(out.open()))
    assert tuple(rows[0]) == COLUMNS
    assert len(rows) == 296 * 5
    by_id = {}
    for r in rows:
        by_id.setdefault(r["scenario_id"], {})[r["exchange"]] = int(r["first_decision_round"])
        assert r["simultaneous"] == "true" and r["waste"] != "" and r["fullinfo_ck_round"] != ""
    for firsts in by_id.values():
        assert all(firsts["floodset"] >= v for v in firsts.values())
    assert (tmp_path / "cmp.resources.csv").exists()


def test_compare_sampled_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert run(capsys, "compare", "--n", "6", "--t", "3", "--mode", "sampled",
                   "--samples", "200", "--seed", "7", "--out", str(p))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    rows = list(csv.DictReader(a.open()))
    assert len(rows) == 1000 and rows[0]["waste"] == ""


def test_compare_json(capsys):
    code, out, _ = run(capsys, "compare", "--n", "3", "--t", "1", "--mode", "sampled",
                       "--samples", "20", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and len(doc["rows"]) == 100 and doc["resources"]
    assert "strictly_earlier" in doc["comparison"]


def test_simulate(capsys):
    code, out, err = run(capsys, "simulate", "--n", "4", "--t", "2", "--mode", "sampled",
                         "--samples", "50", "--exchange", "sendwaste")
    assert code == 0 and out.startswith("scenario_id,")
    assert json.loads(err)["sendwaste"]["ok"]


def _scenario(tmp_path, doc):
    p = tmp_path / "sc.json"
    p.write_text(json.dumps(doc))
    return str(p)


EXAMPLE = {"n": 3, "t": 2, "init": [0, 1, 0], "crashes": [{"agent": 2, "round": 1, "delivered": [1]}]}


def test_trace_floodset(capsys, tmp_path):
    code, out, _ = run(capsys, "trace", _scenario(tmp_path, EXAMPLE))
    doc = json.loads(out)
    states = doc["times"][1]["states"]
    assert code == 0 and states[0]["W"] == [0, 1] and states[2]["W"] == [0] and states[1] == "crashed"


def test_trace_sendwaste(capsys, tmp_path):
    code, out, _ = run(capsys, "trace", _scenario(tmp_path, EXAMPLE), "--exchange", "sendwaste")
    assert json.loads(out)["times"][1]["states"][2]["d"] == 0


def test_trace_bad_agent(capsys, tmp_path):
    doc = dict(EXAMPLE, crashes=[{"agent": 9, "round": 1, "delivered": []}])
    code, _, err = run(capsys, "trace", _scenario(tmp_path, doc))
    assert code == 2 and "crashes" in err


def test_trace_not_json(capsys, tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{nope")
    assert run(capsys, "trace", str(p))[0] == 2
    assert run(capsys, "trace", str(tmp_path / "missing.json"))[0] == 2
