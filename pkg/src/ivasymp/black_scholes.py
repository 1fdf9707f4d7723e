"""Zero-rate Black-Scholes call pricing and the quantities the expansions act on.

Everything is expressed through the log-moneyness ``x = ln(K/S)`` and the
total volatility ``theta = sigma * sqrt(T)``:

    d_pm = -x / theta +/- theta / 2
    C    = S N(d_+) - K N(d_-)
    TV   = C - (S - K)_+          (time value)
    CC   = S - C                  (covered call)
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from scipy import integrate, special

from .errors import ArbitrageBandError

SQRT2 = math.sqrt(2.0)
SQRT2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class MarketQuote:
    spot: float
    strike: float
    maturity: float
    call_price: float | None = None

    def __post_init__(self):
        for name in ("spot", "strike", "maturity"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.spot <= 0 or self.strike <= 0:
            raise ValueError("spot and strike must be positive")
        if self.maturity < 0:
            raise ValueError("maturity must be non-negative")
        if self.call_price is not None:
            c = self.call_price
            if not math.isfinite(c) or c < self.intrinsic or c > self.spot:
                raise ArbitrageBandError(
                    f"call price {c!r} violates the no-arbitrage band "
                    f"[{self.intrinsic!r}, {self.spot!r}]"
                )

    @property
    def log_moneyness(self) -> float:
        return math.log(self.strike / self.spot)

    @property
    def intrinsic(self) -> float:
        return max(self.spot - self.strike, 0.0)

    def with_price(self, call_price: float) -> MarketQuote:
        return MarketQuote(self.spot, self.strike, self.maturity, call_price)


@dataclass(frozen=True)
class Moneyness:
    x: float
    theta: float

    def __post_init__(self):
        if not math.isfinite(self.x):
            raise ValueError("log-moneyness must be finite")
        if not self.theta >= 0:
            raise ValueError("total volatility must be non-negative")

    @classmethod
    def of(cls, quote: MarketQuote, sigma: float) -> Moneyness:
        return cls(quote.log_moneyness, total_vol(quote, sigma))


def total_vol(quote: MarketQuote, sigma: float) -> float:
    if sigma < 0:
        raise ValueError("volatility must be non-negative")
    if math.isinf(sigma):
        return math.inf if quote.maturity > 0 else 0.0
    return sigma * math.sqrt(quote.maturity)


def std_normal_cdf(u: float) -> float:
    """N(u) via erfc, which keeps relative accuracy in the lower tail."""
    return 0.5 * math.erfc(-u / SQRT2)


def std_normal_pdf(u: float) -> float:
    return math.exp(-0.5 * u * u) / SQRT2PI


def _mills(u: float) -> float:
    """Mills ratio N(-u)/phi(u), finite for all real u."""
    return math.sqrt(math.pi / 2.0) * float(special.erfcx(u / SQRT2))


def _otm_value(spot: float, strike: float, theta: float) -> float:
    """Value of the out-of-the-money option (call if K >= S, else put).

    With r = 0, S phi(d_+) = K phi(d_-), so the OTM value factors as
    S phi(d_+) (R(-d_+) - R(-d_-)) for the call and K phi(d_-) (R(d_-) - R(d_+))
    for the put, R the Mills ratio. In the tails this avoids evaluating two
    nearly equal N() values at perturbed arguments.
    """
    x = math.log(strike / spot)
    d_plus = -x / theta + 0.5 * theta
    d_minus = d_plus - theta
    if strike >= spot:
        near = -d_plus
        if near > 0:
            value = spot * std_normal_pdf(d_plus) * (_mills(near) - _mills(-d_minus))
        else:
            value = spot * std_normal_cdf(d_plus) - strike * std_normal_cdf(d_minus)
    else:
        near = d_minus
        if near > 0:
            value = strike * std_normal_pdf(d_minus) * (_mills(near) - _mills(d_plus))
        else:
            value = strike * std_normal_cdf(-d_minus) - spot * std_normal_cdf(-d_plus)
    return max(value, 0.0)


def time_value(quote: MarketQuote, sigma: float) -> float:
    """TV = C - (S-K)_+, computed from the OTM side by put-call parity."""
    theta = total_vol(quote, sigma)
    if theta == 0:
        return 0.0
    if math.isinf(theta):
        return min(quote.spot, quote.strike)
    return _otm_value(quote.spot, quote.strike, theta)


def bs_call_price(quote: MarketQuote, sigma: float) -> float:
    return quote.intrinsic + time_value(quote, sigma)


def covered_call(quote: MarketQuote, sigma: float) -> float:
    """CC = S - C = S N(-d_+) + K N(d_-); both terms positive, no cancellation."""
    theta = total_vol(quote, sigma)
    if theta == 0:
        return quote.spot - quote.intrinsic
    if math.isinf(theta):
        return 0.0
    x = quote.log_moneyness
    d_plus = -x / theta + 0.5 * theta
    d_minus = d_plus - theta
    return quote.spot * std_normal_cdf(-d_plus) + quote.strike * std_normal_cdf(d_minus)


def vega(quote: MarketQuote, sigma: float) -> float:
    """dC/dsigma = S sqrt(T) phi(d_+)."""
    theta = total_vol(quote, sigma)
    if theta == 0 or math.isinf(theta):
        return 0.0
    d_plus = -quote.log_moneyness / theta + 0.5 * theta
    return quote.spot * math.sqrt(quote.maturity) * std_normal_pdf(d_plus)


def atm_call_closed_form(theta: float) -> float:
    """C/S at the money: erf(theta / (2 sqrt 2))."""
    if theta < 0:
        raise ValueError("total volatility must be non-negative")
    return math.erf(theta / (2.0 * SQRT2))


def atm_covered_call_closed_form(theta: float) -> float:
    """CC/S at the money: erfc(theta / (2 sqrt 2))."""
    if theta < 0:
        raise ValueError("total volatility must be non-negative")
    return math.erfc(theta / (2.0 * SQRT2))


def _quad(f, a, b):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, _ = integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-13, limit=500)
    return value


def tv_integral(x: float, theta: float) -> float:
    """Integral of exp(-x^2/(2 xi^2) - xi^2/8) over xi in [0, theta].

    Equals sqrt(2 pi) exp(-x/2) TV/S. Near xi = 0 the integrand has an
    essential singularity; that piece is mapped to u = x^2/(2 xi^2) with the
    factor exp(-U) pulled out analytically, so what quad sees is smooth.
    """
    if theta < 0:
        raise ValueError("total volatility must be non-negative")
    if theta == 0:
        return 0.0
    if x == 0:
        return _quad(lambda xi: math.exp(-xi * xi / 8.0), 0.0, theta)

    x2 = x * x
    split = abs(x) / SQRT2  # xi where u = 1
    head_end = min(theta, split)
    u0 = x2 / (2.0 * head_end * head_end)
    shift = x2 / (16.0 * u0)

    def head(t):
        u = u0 + t
        return u ** -1.5 * math.exp(-t - (x2 / (16.0 * u) - shift))

    total = abs(x) / (2.0 * SQRT2) * math.exp(-u0 - shift) * _quad(head, 0.0, math.inf)
    if theta > split:
        total += _quad(lambda xi: math.exp(-x2 / (2.0 * xi * xi) - xi * xi / 8.0), split, theta)
    return total


def time_value_from_integral(x: float, theta: float, spot: float = 1.0) -> float:
    """TV computed by quadrature; independent of the erfc-based pricer."""
    return spot * math.exp(0.5 * x) * tv_integral(x, theta) / SQRT2PI


def check_open_band(quote: MarketQuote) -> float:
    """Return the call price, raising if it is not strictly inside the band."""
    c = quote.call_price
    if c is None:
        raise ValueError("quote carries no call price")
    if not (quote.intrinsic < c < quote.spot):
        raise ArbitrageBandError(
            f"call price {c!r} is not inside the open no-arbitrage band "
            f"({quote.intrinsic!r}, {quote.spot!r})"
        )
    return c
