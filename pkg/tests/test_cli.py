import csv
import io
import json
import subprocess
import sys

import pytest

from rkhs_wco.cli import EXIT_ERROR, EXIT_INCONCLUSIVE, EXIT_OK, EXIT_REFUTED, exit_code, run, to_jsonable
from rkhs_wco.config import bundled_config_path
from rkhs_wco.sampling import SEED_ENV_VAR

T41 = str(bundled_config_path("t41_hgamma.json"))
T12 = str(bundled_config_path("t12_rigidity.json"))


def _json(capsys, argv):
    code = run(argv)
    return code, json.loads(capsys.readouterr().out)


def _strip_timings(rep):
    rep = dict(rep)
    rep.pop("timings")
    return rep


def test_to_jsonable_encodes_complex_and_nan():
    assert to_jsonable({"z": 1 - 2j, "x": [float("nan"), 1.0]}) == {"z": [1.0, -2.0], "x": [None, 1.0]}


def test_exit_code_rules():
    ok = {"outcome": "pass", "expected": "pass"}
    exp_ref = {"outcome": "refute", "expected": "refute"}
    inc = {"outcome": "inconclusive", "expected": "pass"}
    bad = {"outcome": "refute", "expected": "pass"}
    assert exit_code([ok, exp_ref]) == EXIT_OK
    assert exit_code([ok, inc]) == EXIT_INCONCLUSIVE
    assert exit_code([inc, bad]) == EXIT_REFUTED


def test_classify_bundled_hgamma_config(capsys):
    code, rep = _json(capsys, ["classify", "--config", T41])
    assert code == EXIT_OK and rep["exit_code"] == 0
    assert rep["seed"] == 41 and rep["tolerances"] == {"pass": 1e-9, "refute": 1e-3}
    assert all(r["status"] == "Unitary" for r in rep["results"])
    assert "config" in rep and "version" in rep and rep["timings"]["total_s"] >= 0


def test_classify_bundled_rigidity_config(capsys):
    code, rep = _json(capsys, ["classify", "--config", T12])
    assert code == EXIT_OK
    assert [r["outcome"] for r in rep["results"]] == ["refute"] * 3 + ["pass"]


def test_rigidity_command(capsys):
    code, rep = _json(capsys, ["rigidity", "--config", T12])
    assert code == EXIT_OK and len(rep["results"]) == 10
    assert all(r["certificate"] for r in rep["results"])


def test_unexpected_refutation_exits_2(tmp_path, capsys):
    raw = json.loads(open(T12).read())
    raw["expected_refutation"] = False
    raw["symbols"] = raw["symbols"][:1]
    p = tmp_path / "c.json"
    p.write_text(json.dumps(raw))
    assert run(["classify", "--config", str(p)]) == EXIT_REFUTED


def test_inconclusive_exits_3(tmp_path, capsys):
    # a weight exponent 1e-7 away from the space's gamma leaves a residual near 4e-8
    raw = {"space": {"family": "hgamma", "dim": 2, "params": {"gamma": 1}},
           "symbols": [{"kind": "canonical_hgamma", "gamma": 1.0000001, "a": [0.4, 0]}]}
    p = tmp_path / "c.json"
    p.write_text(json.dumps(raw))
    code, rep = _json(capsys, ["classify", "--config", str(p)])
    assert code == EXIT_INCONCLUSIVE and rep["results"][0]["status"] == "Inconclusive"


@pytest.mark.parametrize("text", ['{"space": {"family": "hgamma", "dim"', "[]", '{"space": {"family": "nope", "dim": 1}}'])
def test_bad_configs_exit_1(tmp_path, text, capsys):
    p = tmp_path / "bad.json"
    p.write_text(text)
    assert run(["classify", "--config", str(p)]) == EXIT_ERROR
    assert "error" in capsys.readouterr().err


def test_usage_errors_exit_1():
    with pytest.raises(SystemExit) as exc:
        run(["suite", "T9_9"])
    assert exc.value.code == EXIT_ERROR
    assert run(["classify", "--config", "/nonexistent.json"]) == EXIT_ERROR


def test_dimension_mismatch_exits_1(tmp_path):
    raw = {"space": {"family": "hgamma", "dim": 2, "params": {"gamma": 1}},
           "symbols": [{"kind": "canonical_hgamma", "gamma": 1, "a": [0.1, 0, 0]}]}
    p = tmp_path / "c.json"
    p.write_text(json.dumps(raw))
    assert run(["classify", "--config", str(p)]) == EXIT_ERROR


@pytest.mark.parametrize(
    "desc, summary",
    [
        ({"family": "hgamma", "params": {"gamma": 1}, "dim": 2}, "IsHGamma(1), unbounded"),
        ({"family": "dirichlet_type", "dim": 2}, "NotHGamma(witness n=2), unbounded"),
        ({"family": "power", "params": {"p": 2}, "dim": 1}, "NotHGamma(witness n=2), bounded, sup = 1.644934"),
    ],
)
def test_describe_space(capsys, desc, summary):
    code = run(["describe-space", "--space", json.dumps(desc), "--format", "text"])
    out = capsys.readouterr().out
    assert code == EXIT_OK and summary in out
    assert "a_12 = " in out and "a_13" not in out


def test_describe_space_invalid_descriptor():
    assert run(["describe-space", "--space", '{"family": "hgamma", "dim": 2}']) == EXIT_ERROR
    assert run(["describe-space"]) == EXIT_ERROR


def test_csv_rows_are_per_sample_residuals(tmp_path):
    out = tmp_path / "r.csv"
    assert run(["classify", "--config", T41, "--format", "csv", "--out", str(out)]) == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert len(rows) == 6 * 50
    assert {"symbol", "pair", "residual", "flagged"} <= set(rows[0])
    assert max(float(r["residual"]) for r in rows) < 1e-9


def test_text_format(capsys):
    assert run(["classify", "--config", T41, "--format", "text"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "seed 41" in out and out.count("[ok]") == 6


def test_seed_precedence(monkeypatch, capsys):
    monkeypatch.setenv(SEED_ENV_VAR, "5")
    _, rep = _json(capsys, ["suite", "C4_2"])
    assert rep["seed"] == 5
    _, rep = _json(capsys, ["suite", "C4_2", "--seed", "6"])
    assert rep["seed"] == 6
    _, rep = _json(capsys, ["classify", "--config", T41])
    assert rep["seed"] == 41
    _, rep = _json(capsys, ["classify", "--config", T41, "--seed", "7"])
    assert rep["seed"] == 7


def test_reports_are_deterministic(capsys):
    _, a = _json(capsys, ["classify", "--config", T41, "--seed", "3"])
    _, b = _json(capsys, ["classify", "--config", T41, "--seed", "3"])
    assert _strip_timings(a) == _strip_timings(b)
    _, a = _json(capsys, ["suite", "P5_3", "--seed", "3"])
    _, b = _json(capsys, ["suite", "P5_3", "--seed", "3", "--workers", "3"])
    assert a["result"]["instances"] == b["result"]["instances"]


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "rkhs_wco.cli", "describe-space", "--space",
                           '{"family": "exponential", "dim": 1}', "--format", "text"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "NotHGamma" in proc.stdout
