"""Implied volatility from the inverted expansions, plus Newton polishing.

Each wing regime reduces to the master equation

    v^beta exp(-1/v) (1 + alpha_1 v + ...) = exp(gamma) exp(-1/lambda)

with lambda = -1/ln(ratio) read off the quote. The short-expiry and
large-strike regimes map v back through theta^2 = (x^2/2) v, the
large-expiry regime through theta^2 = 8/v.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from . import coefficients as co
from .black_scholes import (
    SQRT2PI,
    MarketQuote,
    bs_call_price,
    check_open_band,
    covered_call,
    time_value,
    vega,
)
from .errors import ConvergenceError, RegimeError
from .expansions import VALIDITY_CUTOFF, ExpansionRegime
from .transseries import LogPowerSeries, eval_series, series_recip, solve_inversion

SQRTPI = math.sqrt(math.pi)
ATM_TOL = 1e-12
ATM_SWITCH = 1e-8
DEFAULT_ORDER = 3
DEFAULT_ATM_TERMS = 25
# seeds for dispatch: order 3 is too coarse once gamma * lambda is O(1)
AUTO_ORDER = 8


@dataclass(frozen=True)
class RegimeParams:
    beta: float
    gamma: float
    alphas: tuple[float, ...]  # alpha_0 = 1, alpha_1, ...
    lam: float
    scale: str  # "tv": theta^2 = x^2 v / 2, "cc": theta^2 = 8 / v

    def __post_init__(self):
        if not 0 < self.lam < 1:
            raise RegimeError(
                f"lambda = {self.lam!r} is outside (0, 1): price ratio not below exp(-1), "
                "outside asymptotic regime"
            )
        if self.scale not in ("tv", "cc"):
            raise ValueError("scale must be 'tv' or 'cc'")

    @property
    def alpha1(self) -> float:
        return self.alphas[1] if len(self.alphas) > 1 else 0.0


@dataclass(frozen=True)
class VolSolution:
    sigma: float
    theta_sq: float
    regime: ExpansionRegime | None  # None: exact inversion
    lam: float
    order_used: int
    refined: bool
    residual: float  # C(sigma) - quoted price
    iterations: int
    seed_sigma: float
    in_regime: bool = True

    def to_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "regime": self.regime.value if self.regime else "exact",
            "lambda": self.lam,
            "seed_sigma": self.seed_sigma,
            "iterations": self.iterations,
            "residual": self.residual,
        }


def lambda_of_ratio(r: float) -> float:
    """lambda = -1/ln(r); lies in (0, 1) iff r < e^-1."""
    if not 0 < r < 1:
        raise RegimeError(f"ratio {r!r} outside the no-arbitrage open band (0, 1)")
    return -1.0 / math.log(r)


def invert_fifth_order(lam: float, beta: float, gamma: float, alpha1: float) -> float:
    """v through lambda^3: the six leading terms of the master-equation inverse."""
    if not 0 < lam < 1:
        raise RegimeError("lambda must lie in (0, 1)")
    ln = math.log(lam)
    lam2 = lam * lam
    lam3 = lam2 * lam
    return (
        lam
        - beta * lam2 * ln
        + gamma * lam2
        + beta * beta * lam3 * ln * ln
        + (beta * beta - 2.0 * beta * gamma) * lam3 * ln
        + (gamma * gamma - beta * gamma - alpha1) * lam3
    )


def _alphas(poly, z: float, count: int) -> tuple[float, ...]:
    return tuple((-0.5) ** k * co.poly_eval(poly(k), z) for k in range(count))


def short_expiry_params(x: float, tv_ratio: float, order: int = DEFAULT_ORDER) -> RegimeParams:
    return RegimeParams(
        beta=1.5,
        gamma=math.log(4.0 * SQRTPI * math.exp(-0.5 * x) / abs(x)),
        alphas=_alphas(co.a_poly, x * x / 8.0, max(order - 1, 2)),
        lam=lambda_of_ratio(tv_ratio),
        scale="tv",
    )


def large_expiry_params(x: float, cc_ratio: float, order: int = DEFAULT_ORDER) -> RegimeParams:
    return RegimeParams(
        beta=0.5,
        gamma=math.log(SQRTPI * math.exp(-0.5 * x)),
        alphas=_alphas(co.c_poly, x * x / 8.0, max(order - 1, 2)),
        lam=lambda_of_ratio(cc_ratio),
        scale="cc",
    )


def large_strike_params(x: float, theta: float, tv_ratio: float, order: int = DEFAULT_ORDER) -> RegimeParams:
    # exp(-theta^2/8) of the forward series is absorbed into gamma
    return RegimeParams(
        beta=1.0,
        gamma=math.log(2.0 * SQRT2PI * math.exp(-0.5 * x) / theta) + theta * theta / 8.0,
        alphas=_alphas(co.b_poly, theta * theta / 4.0, max(order - 1, 2)),
        lam=lambda_of_ratio(tv_ratio),
        scale="tv",
    )


def solve_v(params: RegimeParams, order: int = DEFAULT_ORDER) -> float:
    """v(lambda) through lambda^order (closed form at the default order)."""
    if order == DEFAULT_ORDER:
        return invert_fifth_order(params.lam, params.beta, params.gamma, params.alpha1)
    series = solve_inversion(params.beta, params.gamma, params.alphas[: max(order - 1, 1)], order)
    return eval_series(series, params.lam)


def inverse_v_bracket(params: RegimeParams, order: int = DEFAULT_ORDER) -> float:
    """lambda / v expanded through lambda^(order-1); at order 3 this is
    1 + b ln(l) l - g l - b^2 l^2 ln(l) + (b g + alpha_1) l^2."""
    lam, b, g = params.lam, params.beta, params.gamma
    if order == DEFAULT_ORDER:
        ln = math.log(lam)
        return 1.0 + b * lam * ln - g * lam - b * b * lam * lam * ln + (b * g + params.alpha1) * lam * lam
    v = solve_inversion(b, g, params.alphas[: max(order - 1, 1)], order)
    inner = LogPowerSeries({(i - 1, j): c for (i, j), c in v.coeffs.items()}, order - 1)
    return eval_series(series_recip(inner), lam)


def _check_order(order: int) -> None:
    if order < 1:
        raise ValueError("order must be at least 1")


def _ratios(quote: MarketQuote):
    price = check_open_band(quote)
    if quote.maturity <= 0:
        raise ValueError("maturity must be positive")
    s = quote.spot
    return (price - quote.intrinsic) / s, (s - price) / s


def _solution(quote, theta_sq, regime, lam, order, iterations=0, in_regime=None):
    if not (theta_sq > 0 and math.isfinite(theta_sq)):
        raise RegimeError(f"expansion gave total variance {theta_sq!r}: outside asymptotic regime")
    sigma = math.sqrt(theta_sq / quote.maturity)
    if in_regime is None:
        in_regime = lam <= VALIDITY_CUTOFF
    return VolSolution(
        sigma=sigma,
        theta_sq=theta_sq,
        regime=regime,
        lam=lam,
        order_used=order,
        refined=False,
        residual=bs_call_price(quote, sigma) - quote.call_price,
        iterations=iterations,
        seed_sigma=sigma,
        in_regime=in_regime,
    )


def implied_vol_short_expiry(quote: MarketQuote, order: int = DEFAULT_ORDER) -> VolSolution:
    _check_order(order)
    tv_ratio, _ = _ratios(quote)
    x = quote.log_moneyness
    if x == 0:
        raise RegimeError("x = 0: route to the at-the-money inversion")
    params = short_expiry_params(x, tv_ratio, order)
    theta_sq = 0.5 * x * x * solve_v(params, order)
    return _solution(quote, theta_sq, ExpansionRegime.SHORT_MATURITY, params.lam, order)


def implied_vol_large_expiry(quote: MarketQuote, order: int = DEFAULT_ORDER) -> VolSolution:
    _check_order(order)
    _, cc_ratio = _ratios(quote)
    params = large_expiry_params(quote.log_moneyness, cc_ratio, order)
    theta_sq = 8.0 / params.lam * inverse_v_bracket(params, order)
    return _solution(quote, theta_sq, ExpansionRegime.LARGE_MATURITY, params.lam, order)


def implied_vol_large_strike(
    quote: MarketQuote,
    theta_seed: float | None = None,
    order: int = DEFAULT_ORDER,
    max_iter: int = 50,
    rtol: float = 1e-12,
) -> VolSolution:
    """Fixed point theta_{n+1}^2 = (x^2/2) v(lambda; gamma(theta_n), alpha(theta_n))."""
    _check_order(order)
    tv_ratio, _ = _ratios(quote)
    x = quote.log_moneyness
    if x == 0:
        raise RegimeError("x = 0: route to the at-the-money inversion")
    if theta_seed is None:
        theta_seed = math.sqrt(implied_vol_short_expiry(quote, order).theta_sq)
    theta = theta_seed
    for n in range(1, max_iter + 1):
        params = large_strike_params(x, theta, tv_ratio, order)
        v = solve_v(params, order)
        if not v > 0:
            raise ConvergenceError("large-strike iteration left the domain v > 0", theta)
        nxt = abs(x) * math.sqrt(0.5 * v)
        if abs(nxt - theta) <= rtol * theta:
            return _solution(quote, nxt * nxt, ExpansionRegime.LARGE_STRIKE, params.lam, order, n)
        theta = nxt
    raise ConvergenceError(f"large-strike fixed point did not converge in {max_iter} iterations", theta)


def atm_theta(price_ratio: float, n_terms: int = DEFAULT_ATM_TERMS) -> float:
    """sqrt(2 pi) r sum_k pi^k eta_k / (4^k (2k+1)) r^(2k), i.e. 2 sqrt(2) erf^-1(r)."""
    if not 0 < price_ratio < 1:
        raise RegimeError(f"ratio {price_ratio!r} outside the no-arbitrage open band (0, 1)")
    if n_terms < 1:
        raise ValueError("need at least one term")
    eta = co.eta_sequence(n_terms)
    q = math.pi * price_ratio * price_ratio / 4.0
    terms = [float(e) / (2 * k + 1) * q**k for k, e in enumerate(eta)]
    return SQRT2PI * price_ratio * math.fsum(terms)


def implied_vol_atm(quote: MarketQuote, n_terms: int = DEFAULT_ATM_TERMS) -> VolSolution:
    price = check_open_band(quote)
    if abs(quote.strike - quote.spot) > ATM_TOL * quote.spot:
        raise RegimeError("strike differs from spot: route to the wing inversions")
    r = price / quote.spot
    theta = atm_theta(r, n_terms)
    return _solution(quote, theta * theta, ExpansionRegime.ATM_SMALL, math.nan, n_terms,
                     in_regime=True)


# refinement


def _log_gap(quote: MarketQuote, price: float):
    """Monotone objective g(sigma) in log space plus its derivative.

    Works on ln TV when the time value is the smaller of TV and CC, else on
    -ln CC; both are increasing in sigma and keep full relative precision in
    the wing where the small quantity lives.
    """
    tv_target = price - quote.intrinsic
    cc_target = quote.spot - price
    if tv_target <= cc_target:
        log_target = math.log(tv_target)

        def g(sigma):
            tv = time_value(quote, sigma)
            if tv <= 0:
                return -math.inf, math.inf
            return math.log(tv) - log_target, vega(quote, sigma) / tv
    else:
        log_target = math.log(cc_target)

        def g(sigma):
            cc = covered_call(quote, sigma)
            if cc <= 0:
                return math.inf, math.inf
            return log_target - math.log(cc), vega(quote, sigma) / cc

    return g


def newton_refine(
    quote: MarketQuote,
    sigma_seed: float,
    tol: float | None = None,
    max_iter: int = 100,
) -> VolSolution:
    """Safeguarded Newton from ``sigma_seed``, bisection inside a kept bracket.

    Stops at the first iterate whose log-price gap is below 1e-13 or whose
    Newton step is below 2e-15 relative; that iterate is returned unchanged,
    so refining a refined result is a no-op.
    """
    price = check_open_band(quote)
    if quote.maturity <= 0:
        raise ValueError("maturity must be positive")
    if not sigma_seed > 0 or not math.isfinite(sigma_seed):
        raise ValueError("seed volatility must be positive and finite")
    if tol is None:
        tol = 1e-12 * quote.spot
    g = _log_gap(quote, price)
    lo, hi = 0.0, math.inf
    sigma = sigma_seed
    for it in range(max_iter + 1):
        gap, slope = g(sigma)
        if gap <= 0:
            lo = sigma
        else:
            hi = sigma
        step = -gap / slope if math.isfinite(gap) and slope > 0 else math.nan
        if abs(gap) <= 1e-13 or abs(step) <= 2e-15 * sigma:
            residual = bs_call_price(quote, sigma) - price
            if abs(residual) <= tol:
                return VolSolution(
                    sigma=sigma,
                    theta_sq=sigma * sigma * quote.maturity,
                    regime=None,
                    lam=math.nan,
                    order_used=0,
                    refined=True,
                    residual=residual,
                    iterations=it,
                    seed_sigma=sigma_seed,
                )
        candidate = sigma + step
        if not lo < candidate < hi:
            candidate = 0.5 * (lo + hi) if math.isfinite(hi) else 2.0 * sigma
        sigma = candidate
    raise ConvergenceError(f"Newton refinement did not converge in {max_iter} iterations", sigma)


def _refined(seed: VolSolution, quote: MarketQuote, tol: float | None) -> VolSolution:
    polished = newton_refine(quote, seed.sigma, tol)
    return replace(
        seed,
        sigma=polished.sigma,
        theta_sq=polished.theta_sq,
        refined=True,
        residual=polished.residual,
        iterations=polished.iterations,
        seed_sigma=seed.sigma,
    )


def _fallback_seed(quote: MarketQuote, tv_ratio: float) -> VolSolution:
    # Neither ratio is below e^-1: no expansion applies, seed from the ATM series.
    theta = atm_theta(min(tv_ratio, 0.99))
    return replace(
        _solution(quote, theta * theta, ExpansionRegime.ATM_SMALL, math.nan, DEFAULT_ATM_TERMS),
        in_regime=False,
    )


def _safe_lambda(r: float) -> float:
    """lambda for the regime comparison; inf when the ratio is not below 1."""
    return -1.0 / math.log(r) if r < 1.0 else math.inf


def select_seed(quote: MarketQuote, order: int = AUTO_ORDER) -> VolSolution:
    """Pick the expansion with the smaller lambda and evaluate it (no refinement)."""
    tv_ratio, cc_ratio = _ratios(quote)
    x = quote.log_moneyness
    if abs(x) <= ATM_SWITCH:
        theta = atm_theta(quote.call_price / quote.spot)
        return _solution(quote, theta * theta, ExpansionRegime.ATM_SMALL, math.nan,
                         DEFAULT_ATM_TERMS, in_regime=True)
    lam_tv = _safe_lambda(tv_ratio)
    lam_cc = _safe_lambda(cc_ratio)
    if min(lam_tv, lam_cc) >= 1.0:
        return _fallback_seed(quote, tv_ratio)
    path = implied_vol_large_expiry if lam_cc < lam_tv else implied_vol_short_expiry
    for m in dict.fromkeys((order, DEFAULT_ORDER)):
        try:
            return path(quote, m)
        except RegimeError:
            continue
    return _fallback_seed(quote, tv_ratio)


def implied_vol_auto(quote: MarketQuote, order: int = AUTO_ORDER, refine: bool = True,
                     tol: float | None = None) -> VolSolution:
    """ATM series near x = 0, else the wing expansion with the smaller lambda,
    then Newton. The time-value side always uses the short-expiry mapping,
    which seeds at least as well as the large-strike one for |x| <= 2."""
    seed = select_seed(quote, order)
    return _refined(seed, quote, tol) if refine else seed


def implied_vol(quote: MarketQuote, regime: str = "auto", order: int | None = None,
                refine: bool = True, tol: float | None = None) -> VolSolution:
    """Dispatch on a regime name: auto, short, large-t, large-k, atm, exact."""
    if regime == "exact":
        from .oracle import implied_vol_exact

        sigma = implied_vol_exact(quote, tol)
        return VolSolution(
            sigma=sigma,
            theta_sq=sigma * sigma * quote.maturity,
            regime=None,
            lam=math.nan,
            order_used=0,
            refined=True,
            residual=bs_call_price(quote, sigma) - quote.call_price,
            iterations=0,
            seed_sigma=sigma,
        )
    if regime == "auto":
        return implied_vol_auto(quote, order or AUTO_ORDER, refine, tol)
    order = order or DEFAULT_ORDER
    paths = {
        "short": lambda: implied_vol_short_expiry(quote, order),
        "large-t": lambda: implied_vol_large_expiry(quote, order),
        "large-k": lambda: implied_vol_large_strike(quote, None, order),
        "atm": lambda: implied_vol_atm(quote),
    }
    if regime not in paths:
        raise ValueError(f"unknown regime {regime!r}")
    seed = paths[regime]()
    return _refined(seed, quote, tol) if refine else seed
