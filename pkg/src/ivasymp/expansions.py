"""Forward asymptotic series for the time value and the covered call.

Every series has the shape ``prefactor * sum_k term_k``. The regimes and
their small parameters:

    SHORT_MATURITY   theta -> 0, x != 0        v = 2 theta^2 / x^2
    LARGE_STRIKE     |x| -> inf, theta fixed    v = 2 theta^2 / x^2
    LARGE_MATURITY   theta -> inf              w = 8 / theta^2
    ATM_SMALL        x = 0, theta -> 0         theta^2 / 4
    ATM_LARGE        x = 0, theta -> inf       w = 8 / theta^2

Values are ratios: TV/S for the first two, CC/S for LARGE_MATURITY and
ATM_LARGE, and C/S for ATM_SMALL (C = TV at the money).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from . import coefficients as co
from .black_scholes import (
    SQRT2PI,
    atm_call_closed_form,
    atm_covered_call_closed_form,
    covered_call,
    time_value_from_integral,
    MarketQuote,
)
from .errors import RegimeError

SQRTPI = math.sqrt(math.pi)

# Small-parameter level above which results are flagged as outside the regime.
VALIDITY_CUTOFF = 0.5


class ExpansionRegime(enum.Enum):
    SHORT_MATURITY = "short"
    LARGE_STRIKE = "large-k"
    LARGE_MATURITY = "large-t"
    ATM_SMALL = "atm-small"
    ATM_LARGE = "atm-large"

    @property
    def needs_nonzero_x(self) -> bool:
        return self in (ExpansionRegime.SHORT_MATURITY, ExpansionRegime.LARGE_STRIKE)

    @property
    def is_atm(self) -> bool:
        return self in (ExpansionRegime.ATM_SMALL, ExpansionRegime.ATM_LARGE)


@dataclass(frozen=True)
class SeriesEstimate:
    value: float
    last_term: float  # magnitude of the last retained term, prefactor included
    small_param: float
    regime: ExpansionRegime
    order: int

    @property
    def in_regime(self) -> bool:
        return self.small_param <= VALIDITY_CUTOFF


def _check(x: float, theta: float, order: int, regime: ExpansionRegime) -> None:
    if order < 0:
        raise ValueError("order must be non-negative")
    if not theta > 0:
        raise ValueError("total volatility must be positive")
    if regime.needs_nonzero_x and x == 0:
        raise RegimeError("x = 0: use the at-the-money expansions")


def _alternating(k: int) -> float:
    return (-0.5) ** k


def series_terms(regime: ExpansionRegime, x: float, theta: float, order: int):
    """Return (prefactor, [term_0, ..., term_N])."""
    if regime is ExpansionRegime.SHORT_MATURITY:
        v = 2.0 * theta * theta / (x * x)
        z = x * x / 8.0
        pre = abs(x) * math.exp(0.5 * x) / (4.0 * SQRTPI) * v**1.5 * math.exp(-1.0 / v)
        return pre, [_alternating(k) * co.a_coeff(k, z) * v**k for k in range(order + 1)]
    if regime is ExpansionRegime.LARGE_STRIKE:
        # Graded in v^k and carrying exp(-theta^2/8); see README "Large strike".
        v = 2.0 * theta * theta / (x * x)
        z = theta * theta / 4.0
        pre = (
            theta * math.exp(0.5 * x - theta * theta / 8.0) / (2.0 * SQRT2PI)
            * v * math.exp(-1.0 / v)
        )
        return pre, [_alternating(k) * co.b_coeff(k, z) * v**k for k in range(order + 1)]
    if regime is ExpansionRegime.LARGE_MATURITY:
        w = 8.0 / (theta * theta)
        z = x * x / 8.0
        pre = math.exp(0.5 * x) / SQRTPI * math.sqrt(w) * math.exp(-1.0 / w)
        return pre, [_alternating(k) * co.c_coeff(k, z) * w**k for k in range(order + 1)]
    if regime is ExpansionRegime.ATM_SMALL:
        q = theta * theta / 4.0
        pre = theta / SQRT2PI
        return pre, [
            _alternating(k) / ((2 * k + 1) * math.factorial(k)) * q**k for k in range(order + 1)
        ]
    if regime is ExpansionRegime.ATM_LARGE:
        w = 8.0 / (theta * theta)
        pre = math.sqrt(w) * math.exp(-1.0 / w) / SQRTPI
        return pre, [
            _alternating(k) * co.odd_double_factorial(k - 1) * w**k for k in range(order + 1)
        ]
    raise ValueError(f"unknown regime {regime!r}")


def small_parameter(regime: ExpansionRegime, x: float, theta: float) -> float:
    if regime.needs_nonzero_x:
        return 2.0 * theta * theta / (x * x)
    if regime is ExpansionRegime.ATM_SMALL:
        return theta * theta / 4.0
    return 8.0 / (theta * theta)


def forward_series(regime: ExpansionRegime | str, x: float, theta: float, order: int) -> SeriesEstimate:
    """Evaluate one regime's series with its diagnostics."""
    regime = ExpansionRegime(regime)
    if regime.is_atm:
        x = 0.0
    _check(x, theta, order, regime)
    pre, terms = series_terms(regime, x, theta, order)
    return SeriesEstimate(
        value=pre * math.fsum(terms),
        last_term=abs(pre * terms[-1]),
        small_param=small_parameter(regime, x, theta),
        regime=regime,
        order=order,
    )


def tv_series_small_theta(x: float, theta: float, order: int) -> float:
    return forward_series(ExpansionRegime.SHORT_MATURITY, x, theta, order).value


def tv_series_large_strike(x: float, theta: float, order: int) -> float:
    return forward_series(ExpansionRegime.LARGE_STRIKE, x, theta, order).value


def cc_series_large_theta(x: float, theta: float, order: int) -> float:
    return forward_series(ExpansionRegime.LARGE_MATURITY, x, theta, order).value


def atm_tv_series(theta: float, order: int) -> float:
    return forward_series(ExpansionRegime.ATM_SMALL, 0.0, theta, order).value


def atm_cc_series(theta: float, order: int) -> float:
    return forward_series(ExpansionRegime.ATM_LARGE, 0.0, theta, order).value


def exact_value(regime: ExpansionRegime | str, x: float, theta: float) -> float:
    """The ratio each series approximates, computed without any expansion."""
    regime = ExpansionRegime(regime)
    if regime.needs_nonzero_x:
        return time_value_from_integral(x, theta)
    if regime is ExpansionRegime.LARGE_MATURITY:
        return covered_call(MarketQuote(1.0, math.exp(x), 1.0), theta)
    if regime is ExpansionRegime.ATM_SMALL:
        return atm_call_closed_form(theta)
    return atm_covered_call_closed_form(theta)


def remainder_scale(regime: ExpansionRegime | str, x: float, theta: float, order: int) -> float:
    """Order of magnitude of the truncation error after ``order`` terms.

    The O(.) bound of each expansion, multiplied by the same prefactor that
    turns the normalized left-hand side back into a price ratio.
    """
    regime = ExpansionRegime(regime)
    n = order
    if regime is ExpansionRegime.SHORT_MATURITY:
        norm = abs(x) * math.exp(0.5 * x) / (4.0 * SQRTPI)
        return norm * theta ** (2 * n + 5) * math.exp(-x * x / (2.0 * theta * theta))
    if regime is ExpansionRegime.LARGE_STRIKE:
        norm = theta * math.exp(0.5 * x) / (2.0 * SQRT2PI)
        return norm * abs(x) ** (-2 * n - 4) * math.exp(-x * x / (2.0 * theta * theta))
    if regime is ExpansionRegime.LARGE_MATURITY:
        norm = math.exp(0.5 * x) / SQRTPI
        return norm * theta ** (-2 * n - 3) * math.exp(-theta * theta / 8.0)
    if regime is ExpansionRegime.ATM_SMALL:
        return theta ** (2 * n + 3) / SQRT2PI
    return theta ** (-2 * n - 3) * math.exp(-theta * theta / 8.0) / SQRTPI


def optimal_order(regime: ExpansionRegime | str, x: float, theta: float, max_order: int = 40):
    """Order with the smallest error against the exact value, and that error."""
    exact = exact_value(regime, x, theta)
    errors = [
        abs(forward_series(regime, x, theta, n).value - exact) for n in range(max_order + 1)
    ]
    best = min(range(len(errors)), key=errors.__getitem__)
    return best, errors[best]
