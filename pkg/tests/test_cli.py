import csv
import io
import json
import math
import subprocess
import sys

import pytest

from ivasymp.black_scholes import MarketQuote, bs_call_price
from ivasymp.cli import FORWARD_COLUMNS, TABLE_COLUMNS, main
from ivasymp.expansions import ExpansionRegime, small_parameter


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def price(spot, strike, maturity, sigma):
    return repr(bs_call_price(MarketQuote(spot, strike, maturity), sigma))


class TestImplied:
    def test_recovers_sigma(self, capsys):
        code, out, _ = run(capsys, "implied", "--spot", "100", "--strike", "110", "--maturity", "0.25",
                           "--price", price(100, 110, 0.25, 0.2))
        assert code == 0
        data = json.loads(out)
        assert list(data) == ["sigma", "regime", "lambda", "seed_sigma", "iterations", "residual"]
        assert data["sigma"] == pytest.approx(0.2, abs=1e-12)

    def test_unrefined_and_regimes(self, capsys):
        p = price(100, 110, 0.05, 0.2)
        for regime in ("short", "large-k", "exact", "auto"):
            code, out, _ = run(capsys, "implied", "--spot", "100", "--strike", "110", "--maturity", "0.05",
                               "--price", p, "--regime", regime)
            assert code == 0, regime
            assert json.loads(out)["sigma"] == pytest.approx(0.2, abs=1e-10)
        code, out, _ = run(capsys, "implied", "--spot", "100", "--strike", "110", "--maturity", "0.05",
                           "--price", p, "--no-refine", "--order", "3", "--regime", "short")
        data = json.loads(out)
        assert data["sigma"] == data["seed_sigma"] and data["iterations"] == 0

    def test_price_above_spot(self, capsys):
        code, _, err = run(capsys, "implied", "--spot", "100", "--strike", "110", "--maturity", "1", "--price", "101")
        assert code == 2
        assert "no-arbitrage" in err

    def test_atm_regime_off_the_money(self, capsys):
        code, _, err = run(capsys, "implied", "--spot", "100", "--strike", "110", "--maturity", "1",
                           "--price", "5", "--regime", "atm")
        assert code == 2
        assert err

    def test_missing_flags_are_usage_errors(self, capsys):
        code, _, err = run(capsys, "implied", "--spot", "100")
        assert code == 1
        assert "missing" in err

    def test_bad_flag_exits_one(self):
        with pytest.raises(SystemExit) as exc:
            main(["implied", "--bogus"])
        assert exc.value.code == 1
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 1


class TestQuoteFiles:
    def test_csv_with_bad_rows(self, capsys, tmp_path):
        f = tmp_path / "q.csv"
        good = price(100, 120, 0.5, 0.3)
        f.write_text(f"spot,strike,maturity,price\n100,120,0.5,{good}\n100,120,0.5,150\n-1,1,1,0.5\n")
        code, out, err = run(capsys, "implied", "--quotes", str(f))
        assert code == 2
        table = rows(out)
        assert [r["line"] for r in table] == ["2", "3", "4"]
        assert float(table[0]["sigma"]) == pytest.approx(0.3, abs=1e-12)
        assert table[1]["status"].startswith("error") and "no-arbitrage" in table[1]["status"]
        assert "line 3" in err and "line 4" in err

    def test_json_quotes(self, capsys, tmp_path):
        f = tmp_path / "q.json"
        f.write_text(json.dumps([{"spot": 1, "strike": 1, "maturity": 1, "price": 0.1},
                                 {"spot": 1, "strike": 1.2, "maturity": 2, "price": float(price(1, 1.2, 2, 0.4))}]))
        code, out, _ = run(capsys, "implied", "--quotes", str(f), "--format", "json")
        assert code == 0
        data = json.loads(out)
        assert data[1]["sigma"] == pytest.approx(0.4, abs=1e-12)
        assert data[0]["lambda"] is None

    def test_missing_header(self, capsys, tmp_path):
        f = tmp_path / "q.csv"
        f.write_text("a,b\n1,2\n")
        code, _, err = run(capsys, "implied", "--quotes", str(f))
        assert code == 1
        assert "header" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "implied", "--quotes", str(tmp_path / "nope.csv"))
        assert code == 1


class TestForward:
    def test_columns_and_values(self, capsys):
        code, out, _ = run(capsys, "forward", "--regime", "short", "--x", "0.5", "--theta", "0.1", "--order", "0", "2")
        assert code == 0
        assert out.splitlines()[0] == ",".join(FORWARD_COLUMNS)
        table = rows(out)
        assert len(table) == 2
        assert float(table[1]["abs_error"]) < float(table[0]["abs_error"])

    def test_round_trip_through_implied(self, capsys, tmp_path):
        specs = [
            ("short", ["0.5", "-0.5"], ["0.05", "0.1", "0.2"]),
            ("large-k", ["3", "-3"], ["0.1", "0.2", "0.5"]),
            ("large-t", ["0.3", "-0.3"], ["6", "8", "10"]),
            ("atm-small", ["0"], ["0.05", "0.5", "1"]),
            ("atm-large", ["0"], ["6", "8", "10"]),
        ]
        checked = 0
        for regime, xs, thetas in specs:
            code, out, _ = run(capsys, "forward", "--regime", regime, "--x", *xs, "--theta", *thetas, "--order", "2")
            assert code == 0
            f = tmp_path / f"{regime}.csv"
            f.write_text(out)
            code, back, _ = run(capsys, "implied", "--quotes", str(f))
            assert code == 0, back
            for src, res in zip(rows(out), rows(back)):
                lam = small_parameter(ExpansionRegime(regime), float(src["x"]), float(src["theta"]))
                if lam < 0.5:
                    assert abs(float(res["sigma"]) - float(src["theta"])) <= 1e-10, (src, res)
                    checked += 1
        assert checked >= 20

    def test_underflowed_row_is_reported(self, capsys, tmp_path):
        _, out, _ = run(capsys, "forward", "--regime", "large-k", "--x", "3", "--theta", "0.05", "0.2", "--order", "1")
        assert float(rows(out)[0]["exact_value"]) == 0.0
        f = tmp_path / "f.csv"
        f.write_text(out)
        code, back, err = run(capsys, "implied", "--quotes", str(f))
        assert code == 2
        assert "line 2" in err
        assert rows(back)[1]["status"] == "ok"

    def test_stdin_round_trip(self):
        fwd = subprocess.run([sys.executable, "-m", "ivasymp", "forward", "--regime", "short", "--x", "0.4",
                              "--theta", "0.1", "--order", "3"], capture_output=True, text=True, check=True)
        back = subprocess.run([sys.executable, "-m", "ivasymp", "implied", "--quotes", "-"], input=fwd.stdout,
                              capture_output=True, text=True)
        assert back.returncode == 0
        assert float(rows(back.stdout)[0]["sigma"]) == pytest.approx(0.1, abs=1e-12)


class TestTable:
    ARGS = ("table", "--regime", "short", "--x", "0.5", "--theta", "0.025", "0.2", "4",
            "--theta-spacing", "geometric", "--orders", "0", "1", "2", "3")

    def test_case_one_table(self, capsys):
        code, out, _ = run(capsys, *self.ARGS)
        assert code == 0
        assert out.splitlines()[0] == ",".join(TABLE_COLUMNS)
        table = rows(out)
        assert len(table) == 16
        for n in "0123":
            norm = [float(r["normalized_remainder"]) for r in table if r["N"] == n]
            assert max(norm) / min(norm) < 10
        assert {r["status"] for r in table} == {"ok"}

    def test_atm_table(self, capsys):
        code, out, _ = run(capsys, "table", "--regime", "atm-small", "--theta", "0.1", "0.4", "3", "--orders", "4")
        assert code == 0
        for r in rows(out):
            assert float(r["exact_value"]) == pytest.approx(math.erf(float(r["theta"]) / (2 * math.sqrt(2))), rel=1e-15)
            assert float(r["abs_error"]) < 1e-9

    def test_outside_regime_flag(self, capsys):
        code, out, _ = run(capsys, "table", "--regime", "short", "--x", "0.2", "0.4", "2", "--theta", "1", "2", "2")
        assert code == 0
        assert {r["status"] for r in rows(out)} == {"outside regime"}

    def test_bad_grids(self, capsys):
        for argv in (
            ("table", "--regime", "short", "--x", "0.5", "--theta", "0.1", "0.2", "1"),
            ("table", "--regime", "short", "--x", "0.5", "--theta", "0", "0.2", "3", "--theta-spacing", "geometric"),
            ("table", "--regime", "short", "--x", "0.5", "--theta", "0.1", "0.2"),
            ("table", "--regime", "short", "--x", "0", "--theta", "0.1"),
        ):
            code, _, _ = run(capsys, *argv)
            assert code == 1, argv

    def test_deterministic_files(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main([*self.ARGS, "--output", str(a)]) == 0
        assert main([*self.ARGS, "--output", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_json_mirrors_csv(self, capsys):
        _, out_csv, _ = run(capsys, *self.ARGS)
        _, out_json, _ = run(capsys, *self.ARGS, "--format", "json")
        data = json.loads(out_json)
        assert [list(d) for d in data] == [TABLE_COLUMNS] * 16
        assert [float(d["series_value"]) for d in data] == [float(r["series_value"]) for r in rows(out_csv)]

    def test_verbose_banner_on_stderr_only(self, capsys):
        _, quiet, _ = run(capsys, *self.ARGS)
        _, loud, err = run(capsys, *self.ARGS, "--verbose")
        assert quiet == loud
        assert "ivasymp" in err


class TestCoeffs:
    def test_eta(self, capsys):
        code, out, _ = run(capsys, "coeffs", "--family", "eta", "--order", "4")
        assert code == 0
        assert [r["exact"] for r in rows(out)][:4] == ["1", "1", "7/6", "127/90"]

    def test_a_at_zero(self, capsys):
        _, out, _ = run(capsys, "coeffs", "--family", "a", "--order", "2", "--z", "0")
        assert [r["exact"] for r in rows(out)] == ["1", "3", "15"]

    def test_rational_z(self, capsys):
        _, out, _ = run(capsys, "coeffs", "--family", "b", "--order", "1", "--z", "1/2")
        assert rows(out)[1]["exact"] == "5/2"

    def test_inversion_grid(self, capsys):
        code, out, _ = run(capsys, "coeffs", "--family", "inversion", "--beta", "1.5", "--gamma", "0",
                           "--alpha1", "0", "--order", "3")
        assert code == 0
        grid = [(r["i"], r["j"], r["position"], r["exact"]) for r in rows(out)]
        assert grid == [
            ("1", "0", "1", "1"),
            ("2", "1", "2", "-3/2"),
            ("2", "0", "3", "0"),
            ("3", "2", "4", "9/4"),
            ("3", "1", "5", "9/4"),
            ("3", "0", "6", "0"),
        ]

    def test_inversion_with_alpha_list(self, capsys):
        _, out, _ = run(capsys, "coeffs", "--family", "inversion", "--beta", "3/2", "--gamma", "7/10",
                        "--alpha=-19/10", "--order", "3")
        assert rows(out)[-1]["exact"] == "67/50"

    def test_usage_errors(self, capsys):
        for argv in (
            ("coeffs", "--family", "a", "--order", "31"),
            ("coeffs", "--family", "inversion", "--order", "3"),
            ("coeffs", "--family", "a", "--order", "2", "--z", "abc"),
        ):
            code, _, _ = run(capsys, *argv)
            assert code == 1, argv
