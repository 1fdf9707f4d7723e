"""Command-line front end: ``implied``, ``forward``, ``table`` and ``coeffs``.

Exit codes: 0 success, 1 usage error, 2 domain error (for example a price
outside the no-arbitrage band). Tabular output is CSV by default with the
column order fixed per subcommand; ``--format json`` emits the same rows as a
JSON array of objects. Floats are written with 17 significant digits so
every double survives a round trip through the text.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .black_scholes import MarketQuote
from .coefficients import CoefficientTable
from .errors import ImpliedVolError
from .expansions import (
    ExpansionRegime,
    exact_value,
    forward_series,
    remainder_scale,
    small_parameter,
    VALIDITY_CUTOFF,
)
from .inversion import implied_vol
from .transseries import solve_inversion, term_at

MAX_COEFF_ORDER = 30

IMPLIED_COLUMNS = ["sigma", "regime", "lambda", "seed_sigma", "iterations", "residual"]
BATCH_COLUMNS = ["line"] + IMPLIED_COLUMNS + ["status"]
FORWARD_COLUMNS = ["x", "theta", "regime", "N", "series_value", "exact_value", "abs_error", "last_term"]
TABLE_COLUMNS = [
    "regime", "x", "theta", "N", "small_param", "series_value", "exact_value",
    "abs_error", "rel_error", "normalized_remainder", "status",
]
COEFF_COLUMNS = ["k", "exact", "value"]
INVERSION_COLUMNS = ["i", "j", "position", "exact", "value"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; usage errors here exit with 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# formatting


def fmt(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, Fraction):
        return str(value)
    return str(value)


def _json_value(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, Fraction):
        return str(value)
    return value


def render(rows: list[dict], columns: list[str], kind: str) -> str:
    if kind == "json":
        data = [{c: _json_value(r.get(c)) for c in columns} for r in rows]
        return json.dumps(data, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([fmt(r.get(c, "")) for c in columns])
    return buf.getvalue()


def emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


# quote ingestion


@dataclass(frozen=True)
class QuoteRow:
    line: int
    quote: MarketQuote | None
    error: str | None = None


QUOTE_KEYS = ("spot", "strike", "maturity", "price")
FORWARD_KEYS = ("x", "theta", "regime", "exact_value")


def _quote_from_forward(rec: dict) -> MarketQuote:
    """Rebuild a unit-spot, unit-maturity quote from one ``forward`` row.

    The row's exact value is TV/S, CC/S or C/S depending on the regime, and
    with T = 1 the generating volatility is theta itself. For x < 0 adding
    the intrinsic value would round the time value away, so the quote is
    built with spot and strike swapped: at zero rates that call is the
    out-of-the-money put of the original, worth exactly TV, at the same sigma.
    """
    x = float(rec["x"])
    value = float(rec["exact_value"])
    regime = ExpansionRegime(rec["regime"])
    strike = math.exp(x)
    if regime in (ExpansionRegime.SHORT_MATURITY, ExpansionRegime.LARGE_STRIKE):
        if x < 0:
            return MarketQuote(strike, 1.0, 1.0, value)
        price = value
    elif regime in (ExpansionRegime.LARGE_MATURITY, ExpansionRegime.ATM_LARGE):
        price = 1.0 - value
    else:
        price = value
    return MarketQuote(1.0, strike, 1.0, price)


def _row_to_quote(rec: dict) -> MarketQuote:
    if all(k in rec for k in QUOTE_KEYS):
        return MarketQuote(*(float(rec[k]) for k in QUOTE_KEYS))
    if all(k in rec for k in FORWARD_KEYS):
        return _quote_from_forward(rec)
    raise ValueError(f"row needs keys {', '.join(QUOTE_KEYS)}")


def read_quotes(path: str) -> list[QuoteRow]:
    """Parse a CSV (header required) or JSON quote file; '-' reads stdin as CSV.

    Bad rows come back with their line number and the reason; for JSON the
    "line" is the 1-based index in the array.
    """
    if path == "-":
        text, is_json = sys.stdin.read(), False
    else:
        p = Path(path)
        if not p.exists():
            raise UsageError(f"quote file {path} not found")
        text, is_json = p.read_text(), p.suffix.lower() == ".json"
    if is_json:
        try:
            records = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(records, list):
            raise UsageError(f"{path}: expected a JSON array of objects")
        numbered = list(enumerate(records, start=1))
    else:
        reader = csv.DictReader(io.StringIO(text))
        header = reader.fieldnames or []
        if not (set(QUOTE_KEYS) <= set(header) or set(FORWARD_KEYS) <= set(header)):
            raise UsageError(f"{path}: CSV header must contain {','.join(QUOTE_KEYS)}")
        numbered = [(reader.line_num, rec) for rec in reader]

    rows = []
    for line, rec in numbered:
        try:
            if not isinstance(rec, dict):
                raise ValueError("row is not an object")
            rows.append(QuoteRow(line, _row_to_quote(rec)))
        except (ValueError, KeyError, TypeError) as exc:
            rows.append(QuoteRow(line, None, str(exc)))
    return rows


# implied


def cmd_implied(args) -> int:
    kwargs = dict(regime=args.regime, order=args.order, refine=not args.no_refine, tol=args.tol)
    if args.quotes is None:
        missing = [k for k in ("spot", "strike", "maturity", "price") if getattr(args, k) is None]
        if missing:
            raise UsageError("missing --" + ", --".join(missing) + " (or give --quotes)")
        quote = MarketQuote(args.spot, args.strike, args.maturity, args.price)
        sol = implied_vol(quote, **kwargs)
        # a single quote always prints as one JSON object
        out = {k: _json_value(v) for k, v in sol.to_dict().items()}
        emit(json.dumps(out) + "\n", args.output)
        return 0

    rows, failed = [], 0
    for qr in read_quotes(args.quotes):
        row = {"line": qr.line}
        if qr.quote is None:
            row["status"] = "error: " + qr.error
        else:
            try:
                row.update(implied_vol(qr.quote, **kwargs).to_dict())
                row["status"] = "ok"
            except (ImpliedVolError, ValueError) as exc:
                row["status"] = "error: " + str(exc)
        if row["status"] != "ok":
            failed += 1
            print(f"line {qr.line}: {row['status'][7:]}", file=sys.stderr)
        rows.append(row)
    emit(render(rows, BATCH_COLUMNS, args.format), args.output)
    return 2 if failed else 0


# forward


def cmd_forward(args) -> int:
    regime = ExpansionRegime(args.regime)
    xs = [0.0] if regime.is_atm else args.x
    rows = []
    for x in xs:
        for theta in args.theta:
            exact = exact_value(regime, x, theta)
            for n in args.order:
                est = forward_series(regime, x, theta, n)
                rows.append({
                    "x": x, "theta": theta, "regime": regime.value, "N": n,
                    "series_value": est.value, "exact_value": exact,
                    "abs_error": abs(est.value - exact), "last_term": est.last_term,
                })
    emit(render(rows, FORWARD_COLUMNS, args.format), args.output)
    return 0


# table


@dataclass(frozen=True)
class Grid:
    lo: float
    hi: float
    count: int
    spacing: str = "linear"

    def __post_init__(self):
        if self.count < 2:
            raise UsageError("grid count must be at least 2")
        if self.spacing not in ("linear", "geometric"):
            raise UsageError(f"unknown spacing {self.spacing!r}")
        if self.spacing == "geometric" and not (self.lo > 0 and self.hi > 0):
            raise UsageError("geometric spacing needs positive endpoints")

    def points(self) -> list[float]:
        make = np.geomspace if self.spacing == "geometric" else np.linspace
        return [float(p) for p in make(self.lo, self.hi, self.count)]


def _axis(values: list[float], spacing: str, name: str) -> list[float]:
    """One value is a fixed point; three are MIN MAX COUNT."""
    if len(values) == 1:
        return [values[0]]
    if len(values) == 3:
        count = values[2]
        if count != int(count):
            raise UsageError(f"--{name} COUNT must be an integer")
        return Grid(values[0], values[1], int(count), spacing).points()
    raise UsageError(f"--{name} takes one value or MIN MAX COUNT")


@dataclass(frozen=True)
class TableSpec:
    regime: ExpansionRegime
    xs: tuple[float, ...]
    thetas: tuple[float, ...]
    orders: tuple[int, ...]

    def __post_init__(self):
        if any(t <= 0 for t in self.thetas):
            raise UsageError("theta grid must be positive")
        if any(n < 0 for n in self.orders):
            raise UsageError("orders must be non-negative")
        if self.regime.needs_nonzero_x and any(x == 0 for x in self.xs):
            raise UsageError("x = 0 is not allowed in this regime; use atm-small or atm-large")


def table_rows(spec: TableSpec) -> list[dict]:
    rows = []
    xs = (0.0,) if spec.regime.is_atm else spec.xs
    for x in xs:
        for theta in spec.thetas:
            exact = exact_value(spec.regime, x, theta)
            lam = small_parameter(spec.regime, x, theta)
            for n in spec.orders:
                est = forward_series(spec.regime, x, theta, n)
                err = abs(est.value - exact)
                scale = remainder_scale(spec.regime, x, theta, n)
                rows.append({
                    "regime": spec.regime.value, "x": x, "theta": theta, "N": n,
                    "small_param": lam, "series_value": est.value, "exact_value": exact,
                    "abs_error": err,
                    "rel_error": err / abs(exact) if exact else math.nan,
                    "normalized_remainder": err / scale if scale > 0 else math.nan,
                    "status": "ok" if lam <= VALIDITY_CUTOFF else "outside regime",
                })
    return rows


def cmd_table(args) -> int:
    spec = TableSpec(
        regime=ExpansionRegime(args.regime),
        xs=tuple(_axis(args.x, args.x_spacing, "x")),
        thetas=tuple(_axis(args.theta, args.theta_spacing, "theta")),
        orders=tuple(args.orders),
    )
    emit(render(table_rows(spec), TABLE_COLUMNS, args.format), args.output)
    return 0


# coeffs


def _rational(text: str, name: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"--{name} must be a rational number such as 3/2 or 0.25") from None


def cmd_coeffs(args) -> int:
    if not 0 <= args.order <= MAX_COEFF_ORDER:
        raise UsageError(f"--order must lie in 0..{MAX_COEFF_ORDER}")
    if args.family != "inversion":
        z = _rational(args.z, "z")
        table = CoefficientTable.build(args.family, args.order, z)
        rows = [{"k": k, "exact": Fraction(v), "value": float(v)} for k, v in enumerate(table.values)]
        emit(render(rows, COEFF_COLUMNS, args.format), args.output)
        return 0

    if args.beta is None or args.gamma is None or (args.alpha1 is None and not args.alpha):
        raise UsageError("--family inversion needs --beta, --gamma and --alpha1 (or --alpha)")
    if args.order < 1:
        raise UsageError("--order must be at least 1 for the inversion grid")
    if args.alpha1 is not None and args.alpha:
        raise UsageError("give either --alpha1 or --alpha, not both")
    alpha_text = args.alpha.split(",") if args.alpha else [args.alpha1]
    alphas = [Fraction(1)] + [_rational(a, "alpha") for a in alpha_text]
    series = solve_inversion(_rational(args.beta, "beta"), _rational(args.gamma, "gamma"), alphas, args.order)
    # every grid slot through lambda^M, zeros included, in dominance order
    rows = []
    for pos in range(1, args.order * (args.order + 1) // 2 + 1):
        i, j = term_at(pos)
        c = Fraction(series[(i, j)])
        rows.append({"i": i, "j": j, "position": pos, "exact": c, "value": float(c)})
    emit(render(rows, INVERSION_COLUMNS, args.format), args.output)
    return 0


# parser


def _shared() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--format", choices=["csv", "json"], default="csv", help="output format (default csv)")
    p.add_argument("--output", metavar="PATH", help="write to PATH instead of stdout")
    p.add_argument("--verbose", action="store_true", help="print a version banner on stderr")
    return p


REGIME_NAMES = [r.value for r in ExpansionRegime]


def build_parser() -> argparse.ArgumentParser:
    shared = _shared()
    parser = _Parser(prog="ivasymp", description="Asymptotic implied volatility toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser(
        "implied", parents=[shared],
        help="invert a call price",
        description="Implied volatility of one quote, printed as a JSON object with keys "
        + ", ".join(IMPLIED_COLUMNS)
        + ". With --quotes the output is a table with columns " + ",".join(BATCH_COLUMNS) + ".",
    )
    p.add_argument("--spot", type=float)
    p.add_argument("--strike", type=float)
    p.add_argument("--maturity", type=float)
    p.add_argument("--price", type=float, help="call price")
    p.add_argument("--quotes", metavar="FILE",
                   help="CSV (header spot,strike,maturity,price) or .json quote file; '-' for stdin")
    p.add_argument("--regime", default="auto", choices=["auto", "short", "large-t", "large-k", "atm", "exact"])
    p.add_argument("--order", type=int, help="expansion order of the seed")
    p.add_argument("--no-refine", action="store_true", help="report the raw asymptotic seed")
    p.add_argument("--tol", type=float, help="price tolerance (default 1e-12 * spot)")
    p.set_defaults(func=cmd_implied)

    p = sub.add_parser(
        "forward", parents=[shared],
        help="evaluate a forward series against the exact value",
        description="Columns: " + ",".join(FORWARD_COLUMNS) + ".",
    )
    p.add_argument("--regime", required=True, choices=REGIME_NAMES)
    p.add_argument("--x", type=float, nargs="+", default=[0.0], help="log-moneyness ln(K/S)")
    p.add_argument("--theta", type=float, nargs="+", required=True, help="total volatility sigma*sqrt(T)")
    p.add_argument("--order", type=int, nargs="+", default=[3], help="truncation orders N")
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser(
        "table", parents=[shared],
        help="convergence table over an (x, theta) grid",
        description="Columns: " + ",".join(TABLE_COLUMNS)
        + ". Rows whose small parameter exceeds " + str(VALIDITY_CUTOFF) + " are flagged 'outside regime'.",
    )
    p.add_argument("--regime", required=True, choices=REGIME_NAMES)
    p.add_argument("--x", type=float, nargs="+", default=[0.0], metavar="X",
                   help="one value, or MIN MAX COUNT")
    p.add_argument("--x-spacing", choices=["linear", "geometric"], default="linear")
    p.add_argument("--theta", type=float, nargs="+", required=True, metavar="THETA",
                   help="one value, or MIN MAX COUNT")
    p.add_argument("--theta-spacing", choices=["linear", "geometric"], default="linear")
    p.add_argument("--orders", type=int, nargs="+", default=[0, 1, 2, 3])
    p.set_defaults(func=cmd_table)

    p = sub.add_parser(
        "coeffs", parents=[shared],
        help="dump a coefficient family exactly",
        description="Columns: " + ",".join(COEFF_COLUMNS) + "; for the inversion family "
        + ",".join(INVERSION_COLUMNS) + ". Exact values are num/den.",
    )
    p.add_argument("--family", required=True, choices=["a", "b", "c", "eta", "inversion"])
    p.add_argument("--order", type=int, required=True, help=f"highest order, at most {MAX_COEFF_ORDER}")
    p.add_argument("--z", default="0", help="argument of the a, b, c polynomials (rational)")
    p.add_argument("--beta")
    p.add_argument("--gamma")
    p.add_argument("--alpha1")
    p.add_argument("--alpha", help="comma-separated alpha_1,alpha_2,... (alpha_0 = 1 implied); "
                   "write negative fractions as --alpha=-19/10")
    p.set_defaults(func=cmd_coeffs)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        print(f"ivasymp {__version__}", file=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ivasymp {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (ImpliedVolError, ValueError) as exc:
        print(f"ivasymp {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
