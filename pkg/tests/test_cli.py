"""Command-line driver: configs, subcommands, exit codes, output files."""

import csv
import json

import numpy as np
import pytest

from pwldp.cli import ConfigError, main, parse_number


def write_config(tmp_path, cfg, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def base_config(out_path, n=5, fmt="csv"):
    return {
        "market": {"model": "crr", "s0": 5.0, "sigma": "10%", "r": "1%",
                   "mu": "1.5%", "T": 1.0},
        "utility": {"family": "cara", "gamma": 0.6667, "w_min": -4.0,
                    "w_max": 8.0, "n_points": 12},
        "solver": {"n": n, "eps_step": 0.0},
        "output": {"format": fmt, "path": out_path,
                   "wealth_grid": {"min": 0.0, "max": 3.0, "points": 7}},
    }


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


# -- number parsing ---------------------------------------------------------


def test_percent_suffix_parsing():
    assert parse_number("1%") == pytest.approx(0.01)
    assert parse_number("1.5%") == pytest.approx(0.015)
    assert parse_number(" 10 %".replace(" ", "")) == pytest.approx(0.10)
    assert parse_number(0.25) == 0.25
    assert parse_number("0.25") == 0.25


def test_bad_number_raises_config_error():
    with pytest.raises(ConfigError):
        parse_number("abc")
    with pytest.raises(ConfigError):
        parse_number("x%")


# -- solve ------------------------------------------------------------------


def test_solve_writes_value_and_policy_curves(tmp_path):
    out = str(tmp_path / "solve.csv")
    cfg = write_config(tmp_path, base_config(out))
    assert main(["solve", "--config", cfg]) == 0
    header, rows = read_csv(out)
    assert header == ["wealth", "value_t0", "policy_t0_risky_investment"]
    assert len(rows) == 7
    values = [float(r[1]) for r in rows]
    assert values == sorted(values)  # value function increasing


def test_solve_json_output(tmp_path):
    out = str(tmp_path / "solve.json")
    cfg = write_config(tmp_path, base_config(out, fmt="json"))
    assert main(["solve", "--config", cfg]) == 0
    data = json.loads((tmp_path / "solve.json").read_text())
    assert data["columns"][0] == "wealth"
    assert len(data["rows"]) == 7


def test_malformed_config_exits_2(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    out = tmp_path / "solve.csv"
    assert main(["solve", "--config", str(path), "--out", str(out)]) == 2
    assert not out.exists()  # no partial output


def test_missing_section_exits_2(tmp_path):
    cfg = base_config(str(tmp_path / "x.csv"))
    del cfg["utility"]
    path = write_config(tmp_path, cfg)
    assert main(["solve", "--config", path]) == 2


def test_wealth_grid_outside_interval_exits_2(tmp_path):
    cfg = base_config(str(tmp_path / "x.csv"))
    cfg["output"]["wealth_grid"] = {"min": -10.0, "max": 3.0, "points": 5}
    path = write_config(tmp_path, cfg)
    assert main(["solve", "--config", path]) == 2


def test_identical_config_gives_byte_identical_output(tmp_path):
    out1 = str(tmp_path / "a.csv")
    out2 = str(tmp_path / "b.csv")
    cfg = write_config(tmp_path, base_config(out1))
    assert main(["solve", "--config", cfg]) == 0
    assert main(["solve", "--config", cfg, "--out", out2]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


# -- price ------------------------------------------------------------------


def test_price_puts_match_embedded_benchmark(tmp_path):
    out = str(tmp_path / "price.csv")
    cfg = base_config(out, n=6)
    cfg["claim"] = {"type": "put", "strikes": [4.0, 5.0], "on": "S"}
    path = write_config(tmp_path, cfg)
    assert main(["price", "--config", path]) == 0
    header, rows = read_csv(out)
    assert header[:4] == ["strike", "wealth", "indifference_price", "hedge_delta"]
    for r in rows:
        assert float(r[2]) == pytest.approx(float(r[4]), abs=1e-8)
        assert float(r[3]) == pytest.approx(float(r[5]), abs=1e-8)


def test_price_zero_payoff_gives_zero_prices(tmp_path):
    out = str(tmp_path / "price.csv")
    cfg = base_config(out, n=4)
    cfg["claim"] = {"type": "zero", "strike": 0.0}
    path = write_config(tmp_path, cfg)
    assert main(["price", "--config", path]) == 0
    _, rows = read_csv(out)
    assert all(abs(float(r[2])) < 1e-12 for r in rows)


def test_price_without_claim_section_exits_2(tmp_path):
    cfg = base_config(str(tmp_path / "x.csv"), n=4)
    path = write_config(tmp_path, cfg)
    assert main(["price", "--config", path]) == 2


# -- compare ----------------------------------------------------------------


def crra_compare_config(out, tol):
    return {
        "market": {"model": "crr", "s0": 5.0, "sigma": "10%", "r": "1%",
                   "mu": "1.5%", "T": 1.0},
        "utility": {"family": "crra", "gamma": 2.0 / 3.0, "w_min": 1.0,
                    "w_max": 9.0, "n_points": 50},
        "solver": {"n": 20, "eps_step": 1e-7},
        "compare": {"oracle": "merton_crra", "tolerance": tol, "metric": "rel"},
        "output": {"format": "csv", "path": out,
                   "wealth_grid": {"min": 3.0, "max": 7.0, "points": 21}},
    }


def test_compare_within_tolerance_exits_0(tmp_path):
    out = str(tmp_path / "cmp.csv")
    path = write_config(tmp_path, crra_compare_config(out, 0.01))
    assert main(["compare", "--config", path]) == 0
    header, rows = read_csv(out)
    assert "rel_deviation" in header
    assert len(rows) == 21


def test_compare_impossible_tolerance_exits_1(tmp_path):
    out = str(tmp_path / "cmp.csv")
    path = write_config(tmp_path, crra_compare_config(out, 1e-15))
    assert main(["compare", "--config", path]) == 1


def test_compare_unknown_benchmark_exits_2(tmp_path):
    out = str(tmp_path / "cmp.csv")
    cfg = crra_compare_config(out, 0.01)
    cfg["compare"]["oracle"] = "nonexistent"
    path = write_config(tmp_path, cfg)
    assert main(["compare", "--config", path]) == 2
