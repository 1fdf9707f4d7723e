"""Implied volatility from model-free asymptotic expansions of Black-Scholes prices."""

__version__ = "0.1.0"
