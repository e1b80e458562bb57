from __future__ import annotations

import csv
import io
import json
import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qnmlab.cli import RunConfig, UsageError, main


def _run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_verify_algebra(capsys):
    code, out, _ = _run(["verify-algebra", "--qubits", "1"], capsys)
    assert code == 0
    recs = [json.loads(line) for line in out.splitlines()]
    assert all(r["passed"] for r in recs)
    assert {"sc_size", "orbit_counts", "samp_distance"} <= {r["check"] for r in recs}


def test_rate_table_csv(capsys):
    code, out, _ = _run(["rate-table", "--deltas", "0.01,0.05,0.1"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [float(r["delta"]) for r in rows] == [0.01, 0.05, 0.1]
    rates = [float(r["rate"]) for r in rows]
    assert rates == sorted(rates, reverse=True) and abs(rates[0] - 1 / 11) < 0.01


@pytest.mark.parametrize("argv", [
    ["nmc-run"],                                   # seed missing
    ["bogus"],
    ["rate-table", "--deltas", "0.1,x"],
    ["rate-table", "--deltas", "0.7"],
    ["verify-algebra", "--qubits", "3"],
    ["nmc-run", "--seed", "-1"],
    ["nmc-run", "--seed", "1", "--mode", "nope"],
])
def test_usage_errors(argv, capsys):
    code, _, err = _run(argv, capsys)
    assert code == 1 and "error" in err


def test_bad_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "nmc-run", "seed": 1, "colour": "blue"}))
    assert _run(["nmc-run", "--config", str(cfg)], capsys)[0] == 1
    cfg.write_text("{not json")
    assert _run(["nmc-run", "--config", str(cfg)], capsys)[0] == 1
    cfg.write_text(json.dumps({"command": "rate-table"}))
    assert _run(["nmc-run", "--config", str(cfg), "--seed", "1"], capsys)[0] == 1


def test_check_failure_exit_code(tmp_path, capsys):
    cfg = {"command": "certify-nmext", "seed": 3, "params": {"kind": "ip", "k": 1, "N": 3, "tolerance": 0.0}}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    code, out, err = _run(["certify-nmext", "--config", str(path)], capsys)
    assert code == 2 and "certified" in err


def _write(tmp_path, obj):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(obj))
    return p


def test_nmc_run_deterministic_and_config_untouched(tmp_path, capsys):
    cfg = {"command": "nmc-run", "seed": 7, "mode": "ideal-key",
           "adversaries": ["identity", "random-classical", "haar_random"], "messages": ["epr", "random-pure"]}
    path = tmp_path / "demo.json"
    path.write_text(json.dumps(cfg, indent=1))
    before = path.read_bytes()
    outs = []
    for i in range(2):
        out = tmp_path / f"run{i}.jsonl"
        code, _, _ = _run(["nmc-run", "--config", str(path), "--out", str(out)], capsys)
        assert code == 0
        outs.append((out.read_bytes(), out.with_suffix(".csv").read_bytes()))
    assert outs[0] == outs[1]
    assert path.read_bytes() == before
    header = outs[0][1].decode().splitlines()[0].split(",")
    assert header == ["scheme", "adversary", "b", "ell", "delta", "p_same", "p_epr", "p_A", "epsilon_measured",
                      "wall_ms"]
    recs = [json.loads(line) for line in outs[0][0].decode().splitlines()]
    assert any(r.get("check") == "ideal_classical_residual" and r["passed"] for r in recs)


def test_seed_changes_seeded_strategies(tmp_path, capsys):
    res = []
    for seed in (1, 2):
        out = tmp_path / f"s{seed}.jsonl"
        assert _run(["nmc-run", "--seed", str(seed), "--mode", "ideal-key", "--out", str(out)], capsys)[0] == 0
        res.append(out.read_bytes())
    assert res[0] != res[1]


def test_nmss_and_lrss_runs(tmp_path, capsys):
    out = tmp_path / "n.jsonl"
    cfg = _write(tmp_path, {"command": "nmss-run", "seed": 4, "mode": "ideal-key", "adversaries": ["identity", "slot-swap:3"]})
    assert _run(["nmss-run", "--config", str(cfg), "--out", str(out)], capsys)[0] == 0
    recs = [json.loads(line) for line in out.read_text().splitlines()]
    assert any(r.get("check") == "identity_epsilon" and r["passed"] for r in recs)
    code, text, _ = _run(["lrss-run", "--seed", "5"], capsys)
    assert code == 0 and '"share_bound"' in text
    cfg = _write(tmp_path, {"command": "lrss-run", "seed": 5, "params": {"p": 3, "N": 2}})
    code, text, _ = _run(["lrss-run", "--config", str(cfg)], capsys)
    assert code == 0 and '"hybrid"' in text
    assert _run(["lrss-run", "--seed", "5", "--strict-params"], capsys)[0] == 1


def test_certify_search_runs(capsys):
    code, text, _ = _run(["certify-nmext", "--seed", "1"], capsys)
    assert code == 0
    assert json.loads(text.splitlines()[0])["kind"] == "certification"


def test_module_entry_point(tmp_path):
    out = tmp_path / "r.csv"
    proc = subprocess.run([sys.executable, "-m", "qnmlab.cli", "rate-table", "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and out.read_text().startswith("delta,rate")


def test_runconfig_validation():
    with pytest.raises(UsageError):
        RunConfig("nmss-run")
    with pytest.raises(UsageError):
        RunConfig("nmc-run", seed=1 << 64)
    assert RunConfig("rate-table").seed is None


_configs = st.builds(
    RunConfig,
    command=st.sampled_from(["verify-algebra", "nmc-run", "nmss-run", "lrss-run", "rate-table", "certify-nmext"]),
    params=st.dictionaries(st.sampled_from(["b", "ell", "N", "p"]), st.integers(1, 20), max_size=3),
    seed=st.integers(0, (1 << 64) - 1),
    out=st.one_of(st.none(), st.text("abc/._", min_size=1, max_size=10)),
    threads=st.integers(1, 8),
    mode=st.one_of(st.none(), st.sampled_from(["real", "ideal-key", "exact-uniform-clifford"])),
    strict_params=st.booleans(),
    timing=st.booleans(),
    adversaries=st.lists(st.sampled_from(["identity", "haar_random:3", "pauli:X@Z"]), max_size=3).map(tuple),
    messages=st.lists(st.sampled_from(["epr", "mixed"]), max_size=2).map(tuple),
    qubits=st.integers(1, 2),
    deltas=st.lists(st.floats(0.001, 0.49), max_size=3).map(tuple),
)


@settings(max_examples=50)
@given(_configs)
def test_runconfig_roundtrip(cfg):
    assert RunConfig.loads(cfg.dumps()) == cfg
    assert RunConfig.loads(RunConfig.loads(cfg.dumps()).dumps()).dumps() == cfg.dumps()
