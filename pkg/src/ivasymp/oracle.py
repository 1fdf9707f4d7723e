"""Expansion-free implied volatility: bracketed Newton on the call price.

Used as ground truth by the test suites, so it shares nothing with the
asymptotic code beyond the pricer itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .black_scholes import MarketQuote, check_open_band, time_value, vega
from .errors import ConvergenceError

START_SIGMA = 0.5
MAX_EXPANSIONS = 200
MAX_ITER = 500


@dataclass(frozen=True)
class BracketState:
    lo: float
    hi: float
    f_lo: float
    f_hi: float

    def __post_init__(self):
        assert self.f_lo <= 0 <= self.f_hi, "bracket lost its sign change"

    def update(self, sigma: float, f: float) -> BracketState:
        if f <= 0:
            return BracketState(sigma, self.hi, f, self.f_hi)
        return BracketState(self.lo, sigma, self.f_lo, f)


def _bracket(price_error) -> BracketState:
    sigma = START_SIGMA
    f = price_error(sigma)
    if f <= 0:
        lo, f_lo = sigma, f
        for _ in range(MAX_EXPANSIONS):
            sigma *= 2.0
            f = price_error(sigma)
            if f >= 0:
                return BracketState(lo, sigma, f_lo, f)
            lo, f_lo = sigma, f
    else:
        hi, f_hi = sigma, f
        for _ in range(MAX_EXPANSIONS):
            sigma *= 0.5
            f = price_error(sigma)
            if f <= 0:
                return BracketState(sigma, hi, f, f_hi)
            hi, f_hi = sigma, f
    raise ConvergenceError("could not bracket the implied volatility", sigma)


def implied_vol_exact(quote: MarketQuote, tol: float | None = None) -> float:
    """The unique sigma with |C(sigma) - price| <= tol (default 1e-12 * S).

    The price error is evaluated as TV(sigma) - (price - intrinsic), which is
    the same function with the intrinsic value cancelled analytically. The
    iteration keeps going past ``tol`` until sigma itself stops moving, so the
    result is as accurate as the pricer allows.
    """
    price = check_open_band(quote)
    if quote.maturity <= 0:
        raise ValueError("maturity must be positive")
    if tol is None:
        tol = 1e-12 * quote.spot
    target_tv = price - quote.intrinsic

    def price_error(sigma):
        return time_value(quote, sigma) - target_tv

    br = _bracket(price_error)
    sigma = 0.5 * (br.lo + br.hi)
    last_f = math.inf
    for _ in range(MAX_ITER):
        f = price_error(sigma)
        if f == 0:
            return sigma
        br = br.update(sigma, f)
        if br.hi - br.lo <= 4.0 * math.ulp(br.hi):
            break
        slope = vega(quote, sigma)
        newton = sigma - f / slope if slope > 0 else math.nan
        if abs(f) <= tol and abs(newton - sigma) <= 4.0 * math.ulp(sigma):
            return sigma
        # Newton while it stays inside the bracket and keeps halving the error
        if br.lo < newton < br.hi and abs(f) <= 0.5 * abs(last_f):
            sigma = newton
        else:
            sigma = 0.5 * (br.lo + br.hi)
        last_f = f
    best = br.lo if -br.f_lo <= br.f_hi else br.hi
    if abs(price_error(best)) > tol:
        raise ConvergenceError("implied volatility iteration did not meet the tolerance", best)
    return best
