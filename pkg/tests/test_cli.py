import json
from pathlib import Path

import pytest

from contingent_pricer.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(*argv):
    return main([str(a) for a in argv])


def test_check_market_sdf(tmp_path):
    out = tmp_path / "r.json"
    assert run("check-market", "--input", CONFIGS / "market_sdf.csv", "--output", out) == 0
    report = json.loads(out.read_text())
    assert report["verdict"] == "sdf"
    assert report["complete"] is True
    assert report["witness"]["sdf"] == pytest.approx([1 / 3, 2 / 3], abs=1e-12)


def test_check_market_arbitrage(tmp_path):
    out = tmp_path / "r.json"
    assert run("check-market", "--input", CONFIGS / "market_arbitrage.csv", "--output", out) == 2
    report = json.loads(out.read_text())
    assert report["verdict"] == "arbitrage"
    assert report["witness"]["cost"] <= 1e-12
    assert min(report["witness"]["state_payoffs"]) >= -1e-12


def test_check_market_risk_neutral(tmp_path):
    out = tmp_path / "r.json"
    assert run("check-market", "--input", CONFIGS / "market_risk_free.csv", "--output", out) == 0
    rn = json.loads(out.read_text())["risk_neutral"]
    assert sum(rn["probabilities"]) == pytest.approx(1.0, abs=1e-12)
    assert rn["discount"] == pytest.approx(1 / 1.05)


@pytest.mark.parametrize("text", ["", "asset,s1,cost\nx,1,oops\n"])
def test_check_market_bad_input(tmp_path, text, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text(text)
    assert run("check-market", "--input", bad) == 1
    assert "line" in capsys.readouterr().err


def test_missing_input_file(capsys):
    assert run("check-market", "--input", "/nonexistent.csv") == 1
    assert "not found" in capsys.readouterr().err


def test_bad_tolerance():
    assert run("check-market", "--input", CONFIGS / "market_sdf.csv", "--tolerance", "-1") == 1


def test_price_tree(tmp_path):
    out = tmp_path / "tree.csv"
    assert run("price-tree", "--input", CONFIGS / "tree_annuity_certain.json", "--output", out,
               "--format", "csv") == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "id,time,kernel,price"
    root = lines[1].split(",")
    assert float(root[3]) == pytest.approx(1 / 1.05 + 1 / 1.1025, abs=1e-14)


def test_price_tree_json(tmp_path):
    out = tmp_path / "tree.json"
    assert run("price-tree", "--input", CONFIGS / "tree_binomial.json", "--output", out) == 0
    report = json.loads(out.read_text())
    assert report["martingale"]["verdict"] == "martingale"
    assert report["root_price"] == pytest.approx(1.5 / 1.1025)


def test_value_whole_life(tmp_path):
    out = tmp_path / "path.csv"
    assert run("value", "--input", CONFIGS / "whole_life_constant.json", "--output", out) == 0
    summary = json.loads(Path(str(out) + ".summary.json").read_text())
    assert summary["p0_quadrature"] == pytest.approx(0.4, abs=1e-8)
    assert summary["p0_ode"] == pytest.approx(0.4, abs=1e-8)
    assert summary["methods_agree"] is True
    assert out.read_text().startswith("t,price\n0.0,")


def test_value_annuity_json(tmp_path):
    out = tmp_path / "v.json"
    assert run("value", "--input", CONFIGS / "annuity_constant.json", "--output", out, "--format", "json") == 0
    summary = json.loads(out.read_text())
    assert summary["p0_quadrature"] == pytest.approx(10.0, abs=1e-6)
    assert len(summary["path"]["t"]) == len(summary["path"]["price"])


def test_value_zero_benefit(tmp_path):
    cfg = json.loads((CONFIGS / "whole_life_de_moivre.json").read_text())
    cfg["contract"]["benefit"] = 0.0
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "p.csv"
    assert run("value", "--input", path, "--output", out, "--grid-step", 0.25) == 0
    prices = [float(line.split(",")[1]) for line in out.read_text().splitlines()[1:]]
    assert len(prices) == 41 and not any(prices)


def test_value_disagreement_exit_code(tmp_path):
    out = tmp_path / "p.csv"
    code = run("value", "--input", CONFIGS / "whole_life_gompertz.json", "--output", out,
               "--grid-step", 0.5, "--tolerance", 1e-9)
    assert code == 3


def test_value_life_table_relative_path(tmp_path):
    out = tmp_path / "p.csv"
    assert run("value", "--input", CONFIGS / "annuity_life_table.json", "--output", out) == 0


@pytest.mark.parametrize("cfg, message", [
    ({"contract": {"kind": "whole_life"}, "mortality": {"kind": "makeham"}, "foi": 0.05}, "unknown mortality"),
    ({"contract": {"kind": "whole_life"}, "mortality": {"kind": "de_moivre", "omega": 100},
      "issue_age": 100, "foi": 0.05}, "DeadCohort"),
])
def test_value_config_errors(tmp_path, cfg, message, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    assert run("value", "--input", path) == 1
    assert message in capsys.readouterr().err


def test_premium(tmp_path):
    out = tmp_path / "p.json"
    assert run("premium", "--input", CONFIGS / "premium_constant.json", "--output", out) == 0
    assert json.loads(out.read_text())["premium_rate"] == pytest.approx(0.04, abs=1e-8)


def test_output_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert run("value", "--input", CONFIGS / "whole_life_de_moivre.json", "--output", out) == 0
    assert a.read_bytes() == b.read_bytes()
    assert Path(str(a) + ".summary.json").read_bytes() == Path(str(b) + ".summary.json").read_bytes()


def test_atomic_write_leaves_no_temp_files(tmp_path):
    out = tmp_path / "r.json"
    run("check-market", "--input", CONFIGS / "market_sdf.csv", "--output", out)
    assert [p.name for p in tmp_path.iterdir()] == ["r.json"]


def test_verify_passes_and_is_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run("verify", "--output", a, "--seed", 7) == 0
    assert run("verify", "--output", b, "--seed", 7) == 0
    assert a.read_bytes() == b.read_bytes()
    err = capsys.readouterr().err
    assert "PASS farkas" in err and "FAIL" not in err


def test_verify_negative_controls(tmp_path, capsys):
    out = tmp_path / "v.json"
    assert run("verify", "--output", out, "--inject-dividend") == 1
    suites = {s["name"]: s for s in json.loads(out.read_text())["suites"]}
    assert not suites["martingale"]["passed"]
    assert suites["martingale"]["detail"]["max_residual"] == pytest.approx(1 / 1.05, abs=1e-10)

    assert run("verify", "--output", out, "--tolerance", 1e-15) == 1
    suites = {s["name"]: s for s in json.loads(out.read_text())["suites"]}
    assert not suites["ode_agreement"]["passed"]
    assert suites["ode_agreement"]["detail"]["failing"]
    assert "FAIL ode_agreement" in capsys.readouterr().err
