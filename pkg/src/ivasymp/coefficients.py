"""Coefficient families of the forward expansions and the erf^-1 series.

All polynomials are built in exact rational arithmetic. Evaluating at an
``int`` or ``Fraction`` argument stays exact; a ``float`` argument gives a
float.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial


def odd_double_factorial(j: int) -> int:
    """(2j+1)!! = 3 * 5 * ... * (2j+1), with the empty product equal to 1.

    Defined for j >= -1; j = -1 is how (2k-1)!! is read at k = 0.
    """
    if j < -1:
        raise ValueError(f"(2j+1)!! is undefined for j = {j}")
    out = 1
    for l in range(1, j + 1):
        out *= 2 * l + 1
    return out


def _odd_df_minus(j: int) -> int:
    """(2j-1)!!"""
    return odd_double_factorial(j - 1)


@lru_cache(maxsize=None)
def f_poly(k: int) -> tuple[Fraction, ...]:
    """Coefficients of f_k(z) = sum_j z^j / (j! (2j+1)!!), low degree first."""
    _check_order(k)
    return tuple(Fraction(1, factorial(j) * odd_double_factorial(j)) for j in range(k + 1))


@lru_cache(maxsize=None)
def g_poly(k: int) -> tuple[Fraction, ...]:
    """Coefficients of g_k(z) = sum_j z^j / (j! (2j-1)!!)."""
    _check_order(k)
    return tuple(Fraction(1, factorial(j) * _odd_df_minus(j)) for j in range(k + 1))


@lru_cache(maxsize=None)
def a_poly(k: int) -> tuple[Fraction, ...]:
    scale = odd_double_factorial(k)
    return tuple(scale * c for c in f_poly(k))


@lru_cache(maxsize=None)
def b_poly(k: int) -> tuple[Fraction, ...]:
    """b_k(z) = (2k+1)!! sum_j (-1)^j C(k,j) z^j / (2j+1)!!."""
    _check_order(k)
    scale = odd_double_factorial(k)
    return tuple(
        Fraction((-1) ** j * comb(k, j) * scale, odd_double_factorial(j)) for j in range(k + 1)
    )


@lru_cache(maxsize=None)
def c_poly(k: int) -> tuple[Fraction, ...]:
    scale = _odd_df_minus(k)
    return tuple(scale * c for c in g_poly(k))


def _check_order(k: int) -> None:
    if k < 0:
        raise ValueError(f"order must be non-negative, got {k}")


def poly_eval(coeffs, z):
    """Horner evaluation; exact for rational z.

    A float z is converted to the rational it represents and the result is
    rounded once at the end. The b_k alternate in sign, and plain float
    Horner loses most of its digits to cancellation once z is a few units.
    """
    if isinstance(z, float):
        if not math.isfinite(z):
            return float(sum(float(c) * z**j for j, c in enumerate(coeffs)))
        return float(poly_eval(coeffs, Fraction(z)))
    acc = 0
    for c in reversed(coeffs):
        acc = acc * z + c
    return acc


def poly_derivative(coeffs) -> tuple[Fraction, ...]:
    return tuple(j * c for j, c in enumerate(coeffs))[1:]


def f_coeff(k, z):
    return poly_eval(f_poly(k), z)


def g_coeff(k, z):
    return poly_eval(g_poly(k), z)


def a_coeff(k, z):
    return poly_eval(a_poly(k), z)


def b_coeff(k, z):
    return poly_eval(b_poly(k), z)


def c_coeff(k, z):
    return poly_eval(c_poly(k), z)


@lru_cache(maxsize=None)
def _eta_cached(n_terms: int) -> tuple[Fraction, ...]:
    eta = [Fraction(1)]
    for k in range(1, n_terms):
        eta.append(
            sum(
                (eta[j] * eta[k - 1 - j] / ((j + 1) * (2 * j + 1)) for j in range(k)),
                Fraction(0),
            )
        )
    return tuple(eta)


def eta_sequence(n_terms: int) -> list[Fraction]:
    """eta_0 .. eta_{n-1} of erf^-1(y) = sum_k eta_k/(2k+1) (sqrt(pi) y / 2)^(2k+1).

    eta_0 = 1, eta_k = sum_{j<k} eta_j eta_{k-1-j} / ((j+1)(2j+1)).
    """
    if n_terms < 1:
        raise ValueError("need at least one term")
    return list(_eta_cached(n_terms))


class CoefficientKind(enum.Enum):
    A = "a"
    B = "b"
    C = "c"
    ETA = "eta"


_POLYS = {CoefficientKind.A: a_poly, CoefficientKind.B: b_poly, CoefficientKind.C: c_poly}


@dataclass(frozen=True)
class CoefficientTable:
    """Values k = 0..order of one family, evaluated at ``z`` (unused for ETA)."""

    kind: CoefficientKind
    order: int
    values: tuple
    z: object = None

    @classmethod
    def build(cls, kind: CoefficientKind | str, order: int, z=Fraction(0)) -> CoefficientTable:
        kind = CoefficientKind(kind)
        _check_order(order)
        if kind is CoefficientKind.ETA:
            return cls(kind, order, tuple(eta_sequence(order + 1)))
        poly = _POLYS[kind]
        return cls(kind, order, tuple(poly_eval(poly(k), z) for k in range(order + 1)), z)

    def __post_init__(self):
        if len(self.values) != self.order + 1:
            raise ValueError("table length must be order + 1")

    def as_floats(self) -> list[float]:
        return [float(v) for v in self.values]
