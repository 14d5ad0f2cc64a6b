"""
exact_oracle.py
Exact reference sums, means and variances for binary32/binary64 data.

Every finite float is a dyadic rational m * 2**e, so sums of values and of
squares are exact rationals. The accumulator splits each significand into
18-bit limbs and bins them by exponent with numpy; bin totals stay below 2**53
and are therefore exact in float64 before they are folded into Python ints.
"""
from dataclasses import dataclass
from fractions import Fraction
import math
from typing import Dict, Iterable, Tuple, Union

import numpy as np

from errors import OracleError
from float_utils import BINARY64, PrecisionLike, dtype_of
from logger_setup import get_logger

logger = get_logger(__name__)

LIMB_BITS = 18
LIMB_MASK = (1 << LIMB_BITS) - 1
MANTISSA_BITS = 53
CHUNK = 1 << 14

Number = Union[Fraction, int, float]


def _pow2(e: int) -> Fraction:
    return Fraction(1 << e) if e >= 0 else Fraction(1, 1 << -e)


def from_float(x) -> Fraction:
    value = float(x)
    if not math.isfinite(value):
        raise OracleError(f"non-finite value {value!r} has no exact rational")
    return Fraction(value)


def as_exact(value: Number) -> Fraction:
    """Fraction for ints and Fractions; floats of any numpy width go through from_float."""
    if isinstance(value, (Fraction, int)):
        return Fraction(value)
    return from_float(value)


def _fold_bins(terms: Dict[int, int]) -> Fraction:
    if not terms:
        return Fraction(0)
    base = min(terms)
    total = 0
    for exponent, value in terms.items():
        total += value << (exponent - base)
    return Fraction(total) * _pow2(base)


class ExactAccumulator:
    """Exact running Σx and Σx² over float arrays; merging is exact and associative."""

    def __init__(self):
        self.n = 0
        self._sum_terms: Dict[int, int] = {}
        self._square_terms: Dict[int, int] = {}

    @staticmethod
    def _add_bins(terms: Dict[int, int], exponents: np.ndarray, inverse: np.ndarray,
                  weights: np.ndarray, offset: int) -> None:
        totals = np.bincount(inverse, weights=weights, minlength=len(exponents))
        for exponent, total in zip(exponents.tolist(), totals.tolist()):
            if total:
                key = exponent + offset
                terms[key] = terms.get(key, 0) + int(total)

    def add_array(self, xs) -> "ExactAccumulator":
        arr = np.asarray(xs)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        arr = arr.ravel()
        if arr.size and not np.all(np.isfinite(arr)):
            raise OracleError("exact oracle requires finite input")
        for start in range(0, arr.size, CHUNK):
            self._add_chunk(arr[start:start + CHUNK].astype(np.float64))
        self.n += int(arr.size)
        return self

    def add(self, x) -> "ExactAccumulator":
        return self.add_array(np.array([x]))

    def _add_chunk(self, chunk: np.ndarray) -> None:
        mantissa, exponent = np.frexp(chunk)
        ints = np.ldexp(mantissa, MANTISSA_BITS).astype(np.int64)
        exps = exponent.astype(np.int64) - MANTISSA_BITS
        sign = np.sign(ints)
        mag = np.abs(ints)
        a = mag >> (2 * LIMB_BITS)
        b = (mag >> LIMB_BITS) & LIMB_MASK
        c = mag & LIMB_MASK

        uniq, inverse = np.unique(exps, return_inverse=True)
        inverse = inverse.ravel()
        for limb, offset in ((a, 2 * LIMB_BITS), (b, LIMB_BITS), (c, 0)):
            self._add_bins(self._sum_terms, uniq, inverse, (sign * limb).astype(np.float64), offset)

        # (a 2^36 + b 2^18 + c)^2 expanded; each coefficient stays below 2^38
        af, bf, cf = a.astype(np.float64), b.astype(np.float64), c.astype(np.float64)
        square_uniq = 2 * uniq
        for coefficient, offset in (
            (af * af, 4 * LIMB_BITS),
            (2.0 * af * bf, 3 * LIMB_BITS),
            (2.0 * af * cf + bf * bf, 2 * LIMB_BITS),
            (2.0 * bf * cf, LIMB_BITS),
            (cf * cf, 0),
        ):
            self._add_bins(self._square_terms, square_uniq, inverse, coefficient, offset)

    def merge(self, other: "ExactAccumulator") -> "ExactAccumulator":
        for mine, theirs in ((self._sum_terms, other._sum_terms), (self._square_terms, other._square_terms)):
            for key, value in theirs.items():
                mine[key] = mine.get(key, 0) + value
        self.n += other.n
        return self

    @property
    def sum(self) -> Fraction:
        return _fold_bins(self._sum_terms)

    @property
    def sum_squares(self) -> Fraction:
        return _fold_bins(self._square_terms)

    def moments(self) -> "ExactMoments":
        if self.n == 0:
            raise OracleError("exact mean/variance of an empty sequence is undefined")
        return ExactMoments(self.n, self.sum, self.sum_squares)


@dataclass(frozen=True)
class ExactMoments:
    n: int
    sum: Fraction
    sum_squares: Fraction

    @property
    def mean(self) -> Fraction:
        return self.sum / self.n

    @property
    def variance(self) -> Fraction:
        mean = self.mean
        return self.sum_squares / self.n - mean * mean

    def shifted_variance(self, shift: Number) -> Fraction:
        """Population variance of {x - shift}, from Σ(x-K)² = Σx² - 2KΣx + nK²."""
        k = as_exact(shift)
        centred_sum = self.sum - self.n * k
        centred_squares = self.sum_squares - 2 * k * self.sum + self.n * k * k
        centred_mean = centred_sum / self.n
        return centred_squares / self.n - centred_mean * centred_mean

    def rounded(self, precision: PrecisionLike = BINARY64):
        return round_to(self.mean, precision), round_to(self.variance, precision)


def exact_sum(xs: Iterable) -> Fraction:
    return ExactAccumulator().add_array(np.asarray(list(xs) if not hasattr(xs, "dtype") else xs)).sum


def exact_moments(xs) -> ExactMoments:
    arr = xs if hasattr(xs, "dtype") else np.asarray(list(xs), dtype=np.float64)
    return ExactAccumulator().add_array(arr).moments()


def exact_mean_variance(xs) -> Tuple[Fraction, Fraction]:
    moments = exact_moments(xs)
    return moments.mean, moments.variance


def _floor_log2(value: Fraction) -> int:
    e = value.numerator.bit_length() - value.denominator.bit_length()
    if value < _pow2(e):
        e -= 1
    return e


def _format(precision: PrecisionLike):
    info = np.finfo(dtype_of(precision))
    return info.nmant + 1, int(info.minexp), int(info.maxexp) - 1


def round_to(value: Number, precision: PrecisionLike = BINARY64):
    """Correctly rounded (ties-to-even) conversion of an exact value to precision P."""
    dtype = dtype_of(precision)
    v = as_exact(value)
    if v == 0:
        return dtype.type(0.0)
    p, emin, emax = _format(precision)
    sign = -1.0 if v < 0 else 1.0
    magnitude = abs(v)
    quantum = max(_floor_log2(magnitude), emin) - (p - 1)
    significand = round(magnitude / _pow2(quantum))
    if significand and quantum + significand.bit_length() - 1 > emax:
        return dtype.type(sign * math.inf)
    return dtype.type(sign * math.ldexp(significand, quantum))


def ulp_at(value: Number, precision: PrecisionLike = BINARY64) -> Fraction:
    """Spacing of precision-P floats in the binade of value (smallest subnormal at 0)."""
    p, emin, _ = _format(precision)
    v = abs(as_exact(value))
    exponent = emin if v == 0 else max(_floor_log2(v), emin)
    return _pow2(exponent - (p - 1))


@dataclass(frozen=True)
class ErrorReport:
    absolute: float
    relative: float
    ulps: float


def error_report(approx, exact: Number, precision: PrecisionLike = BINARY64) -> ErrorReport:
    exact = as_exact(exact)
    diff = abs(from_float(approx) - exact)
    relative = diff / abs(exact) if exact != 0 else diff
    return ErrorReport(
        absolute=float(diff),
        relative=float(relative),
        ulps=float(diff / ulp_at(exact, precision)),
    )
