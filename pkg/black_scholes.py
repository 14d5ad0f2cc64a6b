"""
black_scholes.py
Closed-form values and Gammas of binary options under driftless Black-Scholes.

These are the analytic anchors for the Monte-Carlo engine: zero interest
rate, no dividends, spot S0, volatility sigma and maturity T.
"""
import math
from typing import Callable

from scipy.stats import norm

from errors import ConfigError


def _check(s0: float, sigma: float, maturity: float) -> None:
    if s0 <= 0 or maturity <= 0 or sigma <= 0:
        raise ConfigError(f"closed forms need S0>0, sigma>0, T>0 (got {s0}, {sigma}, {maturity})")


def d1(s0: float, strike: float, sigma: float, maturity: float) -> float:
    _check(s0, sigma, maturity)
    vol = sigma * math.sqrt(maturity)
    return (math.log(s0 / strike) + 0.5 * sigma * sigma * maturity) / vol


def d2(s0: float, strike: float, sigma: float, maturity: float) -> float:
    return d1(s0, strike, sigma, maturity) - sigma * math.sqrt(maturity)


def asset_or_nothing_value(s0, strike, sigma, maturity, quantity=1.0) -> float:
    return quantity * s0 * norm.cdf(d1(s0, strike, sigma, maturity))


def asset_or_nothing_gamma(s0, strike, sigma, maturity, quantity=1.0) -> float:
    a = d1(s0, strike, sigma, maturity)
    b = a - sigma * math.sqrt(maturity)
    return -quantity * norm.pdf(a) * b / (s0 * sigma * sigma * maturity)


def cash_or_nothing_value(s0, strike, sigma, maturity, quantity=1.0, rebate=0.0) -> float:
    b = d2(s0, strike, sigma, maturity)
    return quantity * norm.cdf(b) + rebate * norm.cdf(-b)


def cash_or_nothing_gamma(s0, strike, sigma, maturity, quantity=1.0, rebate=0.0) -> float:
    a = d1(s0, strike, sigma, maturity)
    b = a - sigma * math.sqrt(maturity)
    return -(quantity - rebate) * norm.pdf(b) * a / (s0 * s0 * sigma * sigma * maturity)


def bump_gamma(value: Callable[[float], float], s0: float, epsilon: float) -> float:
    """Central second difference of a pricing function with relative bump epsilon."""
    if epsilon <= 0:
        raise ConfigError("epsilon must be > 0")
    h = epsilon * s0
    return (value(s0 + h) - 2.0 * value(s0) + value(s0 - h)) / (s0 * s0 * epsilon * epsilon)


def payoff_value(spec) -> float:
    """Analytic value for a ``mc_engine.PayoffSpec``."""
    if spec.kind.value == "asset-or-nothing":
        return asset_or_nothing_value(spec.s0, spec.strike, spec.sigma, spec.maturity, spec.quantity)
    return cash_or_nothing_value(spec.s0, spec.strike, spec.sigma, spec.maturity, spec.quantity, spec.rebate)


def payoff_gamma(spec) -> float:
    if spec.kind.value == "asset-or-nothing":
        return asset_or_nothing_gamma(spec.s0, spec.strike, spec.sigma, spec.maturity, spec.quantity)
    return cash_or_nothing_gamma(spec.s0, spec.strike, spec.sigma, spec.maturity, spec.quantity, spec.rebate)
