"""Truncated series in lambda with polynomial-in-ln(lambda) coefficients.

A :class:`LogPowerSeries` stores ``sum c[i, j] lambda^i ln^j(lambda)`` for
``0 <= i <= trunc_order``. Coefficients may be floats or ``Fraction``; with
rational inputs every operation here is exact.

:func:`solve_inversion` uses this arithmetic to expand the solution ``v`` of

    v^beta exp(-1/v) (sum_k alpha_k v^k) = exp(gamma) exp(-1/lambda)

in the grid ``lambda^i ln^j(lambda)``, ``j < i``, to any order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from types import MappingProxyType
from typing import Mapping

from .errors import RegimeError


def _is_zero(c) -> bool:
    return c == 0


def _div(c, n: int):
    if isinstance(c, int):
        return Fraction(c, n)
    return c / n


@dataclass(frozen=True)
class LogPowerSeries:
    coeffs: Mapping[tuple[int, int], object]
    trunc_order: int

    def __post_init__(self):
        if self.trunc_order < 0:
            raise ValueError("truncation order must be non-negative")
        clean = {}
        for (i, j), c in dict(self.coeffs).items():
            if i < 0 or j < 0:
                raise ValueError(f"negative exponent in term {(i, j)}")
            if i <= self.trunc_order and not _is_zero(c):
                clean[(i, j)] = c
        object.__setattr__(self, "coeffs", MappingProxyType(clean))

    # constructors

    @classmethod
    def constant(cls, c, trunc_order: int) -> LogPowerSeries:
        return cls({(0, 0): c}, trunc_order)

    @classmethod
    def monomial(cls, i: int, j: int, trunc_order: int, c=1) -> LogPowerSeries:
        return cls({(i, j): c}, trunc_order)

    @classmethod
    def zero(cls, trunc_order: int) -> LogPowerSeries:
        return cls({}, trunc_order)

    # access

    def __getitem__(self, key: tuple[int, int]):
        return self.coeffs.get(key, 0)

    def terms(self):
        """(i, j, c) sorted by dominance: lambda first, then lambda^2 ln, ..."""
        return sorted(((i, j, c) for (i, j), c in self.coeffs.items()), key=lambda t: (t[0], -t[1]))

    def level(self, i: int) -> dict[int, object]:
        """Coefficients of lambda^i, keyed by the ln power."""
        return {j: c for (ii, j), c in self.coeffs.items() if ii == i}

    @property
    def min_lambda_power(self) -> int | None:
        return min((i for i, _ in self.coeffs), default=None)

    def truncate(self, trunc_order: int) -> LogPowerSeries:
        return LogPowerSeries(self.coeffs, trunc_order)

    def map_coeffs(self, fn) -> LogPowerSeries:
        return LogPowerSeries({k: fn(c) for k, c in self.coeffs.items()}, self.trunc_order)

    def __eq__(self, other):
        if not isinstance(other, LogPowerSeries):
            return NotImplemented
        return self.trunc_order == other.trunc_order and dict(self.coeffs) == dict(other.coeffs)

    def __hash__(self):
        return hash((self.trunc_order, frozenset(self.coeffs.items())))

    # arithmetic

    def _coerce(self, other) -> LogPowerSeries:
        if isinstance(other, LogPowerSeries):
            if other.trunc_order != self.trunc_order:
                raise ValueError("series have different truncation orders")
            return other
        return LogPowerSeries.constant(other, self.trunc_order)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            out[k] = out.get(k, 0) + c
        return LogPowerSeries(out, self.trunc_order)

    __radd__ = __add__

    def __neg__(self):
        return self.map_coeffs(lambda c: -c)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, LogPowerSeries):
            return self.map_coeffs(lambda c: c * other)
        return series_mul(self, other)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            return series_recip(self) ** (-n)
        out = LogPowerSeries.constant(1, self.trunc_order)
        for _ in range(n):
            out = out * self
        return out

    def __call__(self, lam: float) -> float:
        return eval_series(self, lam)

    def __repr__(self):
        if not self.coeffs:
            return f"LogPowerSeries(0, M={self.trunc_order})"
        parts = [f"{c}*L^{i}*ln^{j}" for i, j, c in self.terms()]
        return f"LogPowerSeries({' + '.join(parts)}, M={self.trunc_order})"


def series_mul(a: LogPowerSeries, b: LogPowerSeries) -> LogPowerSeries:
    """Cauchy product in lambda, polynomial product in ln(lambda), truncated."""
    if a.trunc_order != b.trunc_order:
        raise ValueError("series have different truncation orders")
    m = a.trunc_order
    out: dict[tuple[int, int], object] = {}
    for (i1, j1), c1 in a.coeffs.items():
        for (i2, j2), c2 in b.coeffs.items():
            i = i1 + i2
            if i <= m:
                key = (i, j1 + j2)
                out[key] = out.get(key, 0) + c1 * c2
    return LogPowerSeries(out, m)


def _split_constant(a: LogPowerSeries):
    c0 = a[(0, 0)]
    if any(i == 0 and j > 0 for i, j in a.coeffs):
        raise RegimeError("ln(lambda) terms at lambda^0 are not small; not invertible at this grading")
    return c0, a - c0


def _power_sum(u: LogPowerSeries, weights) -> LogPowerSeries:
    """sum_{n>=0} weights(n) u^n for u with no lambda^0 part; finite after truncation."""
    m = u.trunc_order
    out = LogPowerSeries.constant(weights(0), m)
    power = LogPowerSeries.constant(1, m)
    for n in range(1, m + 1):
        power = power * u
        if not power.coeffs:
            break
        out = out + power * weights(n)
    return out


def series_recip(a: LogPowerSeries) -> LogPowerSeries:
    """1/a for a series with a nonzero constant term: (1/c0) sum (-u/c0)^n."""
    c0, u = _split_constant(a)
    if _is_zero(c0):
        raise RegimeError("zero constant term: not invertible at this grading")
    inv0 = Fraction(1) / c0 if isinstance(c0, (int, Fraction)) else 1.0 / c0
    return _power_sum(u * (-inv0), lambda n: 1) * inv0


def series_log1p(u: LogPowerSeries) -> LogPowerSeries:
    """ln(1 + u) for u with zero constant term."""
    c0, _ = _split_constant(u)
    if not _is_zero(c0):
        raise RegimeError("log1p needs a series with zero constant term")
    return _power_sum(u, lambda n: 0 if n == 0 else _div((-1) ** (n + 1), n))


def series_exp(u: LogPowerSeries) -> LogPowerSeries:
    """exp(u) for u with zero constant term."""
    c0, _ = _split_constant(u)
    if not _is_zero(c0):
        raise RegimeError("exp needs a series with zero constant term")
    return _power_sum(u, lambda n: Fraction(1, math.factorial(n)))


def eval_series(s: LogPowerSeries, lam: float) -> float:
    """Numeric value at lam in (0, 1); Horner in lambda for each ln power."""
    if not 0 < lam < 1:
        raise RegimeError("lambda must lie in (0, 1)")
    by_log: dict[int, dict[int, object]] = {}
    for (i, j), c in s.coeffs.items():
        by_log.setdefault(j, {})[i] = c
    ln_lam = math.log(lam)
    total = 0.0
    for j in range(max(by_log, default=0), -1, -1):
        row = by_log.get(j, {})
        acc = 0.0
        for i in range(max(row, default=0), -1, -1):
            acc = acc * lam + float(row.get(i, 0))
        total = total * ln_lam + acc
    return total


# ordering of the grid lambda^i ln^j(lambda), 0 <= j < i


def term_position(i: int, j: int) -> int:
    """Position of lambda^i ln^j in the dominance order: i(i+1)/2 - j."""
    if not 0 <= j < i:
        raise ValueError(f"({i}, {j}) is not on the grid j < i")
    return i * (i + 1) // 2 - j


def term_at(position: int) -> tuple[int, int]:
    """Inverse of :func:`term_position`."""
    if position < 1:
        raise ValueError("positions start at 1")
    i = 1
    while i * (i + 1) // 2 < position:
        i += 1
    return i, i * (i + 1) // 2 - position


def dominance_order(count: int) -> list[tuple[int, int]]:
    return [term_at(p) for p in range(1, count + 1)]


# the inversion


def inversion_residual(v: LogPowerSeries, beta, gamma, alphas) -> LogPowerSeries:
    """lambda * (beta ln v - 1/v + ln(sum alpha_k v^k) - gamma + 1/lambda).

    ``v`` must start with the term lambda. ln v is split as
    ln(lambda) + ln(1 + w) with v = lambda (1 + w).
    """
    m = v.trunc_order
    if v[(1, 0)] != 1 or any(i < 1 for i, _ in v.coeffs):
        raise ValueError("v must have leading term exactly lambda")
    # w = v / lambda - 1, one level lower
    w = LogPowerSeries({(i - 1, j): c for (i, j), c in v.coeffs.items() if (i, j) != (1, 0)}, m)
    lam = LogPowerSeries.monomial(1, 0, m)
    lam_ln = LogPowerSeries.monomial(1, 1, m)

    poly = LogPowerSeries.zero(m)
    v_pow = LogPowerSeries.constant(1, m)
    for k, a in enumerate(alphas):
        if k:
            v_pow = v_pow * v
            poly = poly + v_pow * a

    out = lam_ln * beta + lam * series_log1p(w) * beta
    out = out - (series_recip(1 + w) - 1)
    out = out + lam * series_log1p(poly)
    out = out - lam * gamma
    return out


def _check_params(beta, alphas, trunc_order):
    if trunc_order < 1:
        raise ValueError("truncation order must be at least 1")
    if beta < 0:
        raise ValueError("beta must be non-negative")
    if not alphas or alphas[0] != 1:
        raise ValueError("alpha_0 must equal 1")


def solve_inversion(beta, gamma, alphas, trunc_order: int) -> LogPowerSeries:
    """Expand v(lambda) through lambda^trunc_order.

    Coefficients are fixed in dominance order. Shifting a_{m,n} by d moves the
    residual's lambda^(m-2) ln^n coefficient by exactly d and leaves every
    dominant term alone, so each coefficient is minus the residual
    coefficient it cancels. All ln powers of one lambda level are decoupled,
    so a level is solved from a single residual evaluation.
    """
    alphas = list(alphas)
    _check_params(beta, alphas, trunc_order)
    m = trunc_order
    coeffs = {(1, 0): 1 if not isinstance(beta, float) else 1.0}
    for level in range(2, m + 1):
        # a_{level,*} are still zero; truncating at level - 1 keeps every
        # contribution to the residual's lambda^(level-1) terms
        trial = LogPowerSeries(coeffs, level - 1)
        q = inversion_residual(trial, beta, gamma, alphas[: level - 1])
        for n, c in q.level(level - 1).items():
            if n >= level:
                raise ArithmeticError(f"off-grid residual term lambda^{level - 1} ln^{n}")
            coeffs[(level, n)] = -c
    return LogPowerSeries(coeffs, m)


def closed_form_coefficients(beta, gamma, alpha1) -> dict[tuple[int, int], object]:
    """The six closed-form coefficients of v through lambda^3."""
    return {
        (1, 0): 1,
        (2, 1): -beta,
        (2, 0): gamma,
        (3, 2): beta * beta,
        (3, 1): beta * beta - 2 * beta * gamma,
        (3, 0): gamma * gamma - beta * gamma - alpha1,
    }
