"""High-precision reference implementations, independent of the package.

Everything here uses mpmath at 40 digits and shares no code with ivasymp.
"""

import math
from fractions import Fraction

import mpmath as mp

mp.mp.dps = 40


def call_price(spot, strike, maturity, sigma):
    spot, strike = mp.mpf(spot), mp.mpf(strike)
    theta = mp.mpf(sigma) * mp.sqrt(maturity)
    if theta == 0:
        return max(spot - strike, mp.mpf(0))
    x = mp.log(strike / spot)
    d_plus = -x / theta + theta / 2
    return spot * mp.ncdf(d_plus) - strike * mp.ncdf(d_plus - theta)


def time_value(spot, strike, maturity, sigma):
    """OTM option value: equal to TV by put-call parity, no cancellation."""
    spot, strike = mp.mpf(spot), mp.mpf(strike)
    theta = mp.mpf(sigma) * mp.sqrt(maturity)
    x = mp.log(strike / spot)
    d_plus = -x / theta + theta / 2
    d_minus = d_plus - theta
    if strike >= spot:
        return spot * mp.ncdf(d_plus) - strike * mp.ncdf(d_minus)
    return strike * mp.ncdf(-d_minus) - spot * mp.ncdf(-d_plus)


def tv_ratio(x, theta):
    """TV/S at unit spot for log-moneyness x and total volatility theta."""
    return time_value(1, mp.exp(mp.mpf(x)), 1, theta)


def cc_ratio(x, theta):
    return 1 - call_price(1, mp.exp(mp.mpf(x)), 1, theta)


def tv_integral(x, theta):
    """Quadrature in u = x^2/(2 xi^2), where the integrand is smooth."""
    x, theta = mp.mpf(x), mp.mpf(theta)
    if x == 0:
        return mp.quad(lambda xi: mp.exp(-xi * xi / 8), [0, theta])
    u_min = x * x / (2 * theta * theta)
    # shift u = u_min + s and take exp(-u_min) outside so quad sees O(1) values
    f = lambda s: (u_min + s) ** mp.mpf(-1.5) * mp.exp(-s - x * x / (16 * (u_min + s)))
    return abs(x) / (2 * mp.sqrt(2)) * mp.exp(-u_min) * mp.quad(f, [0, 1, 4, 16, 64, mp.inf])


def atm_sigma(price_ratio, maturity=1):
    """sqrt(8/T) erfinv(C/S)."""
    return mp.sqrt(8 / mp.mpf(maturity)) * mp.erfinv(mp.mpf(price_ratio))


def _mul(a, b, n):
    out = [Fraction(0)] * (n + 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b[: n + 1 - i]):
                out[i + j] += ai * bj
    return out


def erf_series_reversion(n_terms):
    """Coefficients of erfinv by reverting erf's Taylor series.

    Returns eta_k such that erfinv(y) = sum eta_k/(2k+1) (sqrt(pi) y/2)^(2k+1).
    With t = sqrt(pi) erf(s)/2 = sum (-1)^j s^(2j+1)/(j!(2j+1)), the inverse
    s(t) is found by the fixed-point s <- t - (fwd(s) - s) on truncated
    rational polynomials; each pass fixes one more coefficient.
    """
    n = 2 * n_terms - 1
    fwd = [Fraction(0)] * (n + 1)
    for j in range(n_terms):
        fwd[2 * j + 1] = Fraction((-1) ** j, math.factorial(j) * (2 * j + 1))
    inv = [Fraction(0)] * (n + 1)
    inv[1] = Fraction(1)
    for _ in range(n):
        comp = [Fraction(0)] * (n + 1)
        power = [Fraction(1)] + [Fraction(0)] * n
        for c in fwd[1:]:
            power = _mul(power, inv, n)
            comp = [u + c * p for u, p in zip(comp, power)]
        inv = [(1 if k == 1 else 0) - (comp[k] - inv[k]) for k in range(n + 1)]
    return [inv[2 * k + 1] * (2 * k + 1) for k in range(n_terms)]
