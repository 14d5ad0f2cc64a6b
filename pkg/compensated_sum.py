"""
compensated_sum.py
Error-free transformations and running-sum kernels (naive, Kahan, Klein, Knuth)
for IEEE binary32 and binary64.

Kernels are compiled once per precision by ``sum_kernels``. Every literal and
temporary inside a kernel stays in that precision, so a binary32 fold never
touches double arithmetic. Kahan state follows the convention that the true
sum is approximately ``S - S*``.
"""
from functools import lru_cache
from types import SimpleNamespace
from typing import Iterable, NamedTuple

import numpy as np
from numba import njit

from errors import ConfigError
from float_utils import BINARY64, PrecisionLike, dtype_of, resolve_precision
from logger_setup import get_logger

logger = get_logger(__name__)

SUM_KINDS = ("naive", "kahan", "klein", "knuth")


@lru_cache(maxsize=None)
def sum_kernels(precision: PrecisionLike = BINARY64) -> SimpleNamespace:
    """Build the njit kernels specialised to one float precision."""
    dtype = dtype_of(precision)
    F = dtype.type
    nmant = np.finfo(dtype).nmant
    splitter = F(2 ** ((nmant + 2) // 2) + 1)
    logger.debug("building summation kernels for %s (splitter %d)", dtype, int(splitter))

    @njit(nogil=True)
    def two_sum(a, b):
        s = a + b
        bb = s - a
        err = (a - (s - bb)) + (b - bb)
        return s, err

    @njit(nogil=True)
    def fast_two_sum(a, b):
        s = a + b
        return s, b - (s - a)

    @njit(nogil=True)
    def magnitude_two_sum(a, b):
        t = a + b
        if abs(a) >= abs(b):
            return t, (a - t) + b
        return t, (b - t) + a

    @njit(nogil=True)
    def split(a):
        c = splitter * a
        hi = c - (c - a)
        return hi, a - hi

    @njit(nogil=True)
    def two_prod(a, b):
        p = a * b
        ah, al = split(a)
        bh, bl = split(b)
        err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
        return p, err

    @njit(nogil=True)
    def kahan_step(s, c, x):
        y = x - c
        t = s + y
        c = (t - s) - y
        return t, c

    @njit(nogil=True)
    def klein_step(s, cs, ccs, x):
        s, c = magnitude_two_sum(s, x)
        cs, cc = magnitude_two_sum(cs, c)
        return s, cs, ccs + cc

    @njit(nogil=True)
    def knuth_step(s, c, x):
        s, err = two_sum(s, x)
        return s, c + err

    @njit(nogil=True)
    def naive_fold(state, xs):
        s = state[0]
        for x in xs:
            s = s + x
        state[0] = s

    @njit(nogil=True)
    def kahan_fold(state, xs):
        s = state[0]
        c = state[1]
        for x in xs:
            s, c = kahan_step(s, c, x)
        state[0] = s
        state[1] = c

    @njit(nogil=True)
    def klein_fold(state, xs):
        s = state[0]
        cs = state[1]
        ccs = state[2]
        for x in xs:
            s, cs, ccs = klein_step(s, cs, ccs, x)
        state[0] = s
        state[1] = cs
        state[2] = ccs

    @njit(nogil=True)
    def knuth_fold(state, xs):
        s = state[0]
        c = state[1]
        for x in xs:
            s, c = knuth_step(s, c, x)
        state[0] = s
        state[1] = c

    return SimpleNamespace(
        dtype=dtype,
        F=F,
        two_sum=two_sum,
        fast_two_sum=fast_two_sum,
        magnitude_two_sum=magnitude_two_sum,
        two_prod=two_prod,
        kahan_step=kahan_step,
        klein_step=klein_step,
        knuth_step=knuth_step,
        folds={"naive": naive_fold, "kahan": kahan_fold, "klein": klein_fold, "knuth": knuth_fold},
    )


def _typed(precision, *values):
    F = dtype_of(precision).type
    return tuple(F(v) for v in values)


def two_sum(a, b, precision: PrecisionLike = BINARY64):
    """Branch-free Knuth two-sum: s = fl(a+b) and s + err == a + b exactly."""
    k = sum_kernels(resolve_precision(precision))
    s, err = k.two_sum(*_typed(precision, a, b))
    return k.F(s), k.F(err)


def fast_two_sum(a, b, precision: PrecisionLike = BINARY64):
    """Dekker two-sum; exact only when |a| >= |b|."""
    k = sum_kernels(resolve_precision(precision))
    s, err = k.fast_two_sum(*_typed(precision, a, b))
    return k.F(s), k.F(err)


def two_prod(a, b, precision: PrecisionLike = BINARY64):
    k = sum_kernels(resolve_precision(precision))
    p, err = k.two_prod(*_typed(precision, a, b))
    return k.F(p), k.F(err)


class KahanState(NamedTuple):
    S: np.floating
    Sstar: np.floating


class KleinState(NamedTuple):
    S: np.floating
    cs: np.floating
    ccs: np.floating


class KnuthState(NamedTuple):
    S: np.floating
    c: np.floating


def naive_add(state, x, precision: PrecisionLike = BINARY64):
    F = dtype_of(precision).type
    return F(F(state) + F(x))


def kahan_add(state: KahanState, x, precision: PrecisionLike = BINARY64) -> KahanState:
    k = sum_kernels(resolve_precision(precision))
    s, c = k.kahan_step(*_typed(precision, state.S, state.Sstar, x))
    return KahanState(k.F(s), k.F(c))


def kahan_finalize(state: KahanState):
    return state.S


def klein_add(state: KleinState, x, precision: PrecisionLike = BINARY64) -> KleinState:
    k = sum_kernels(resolve_precision(precision))
    s, cs, ccs = k.klein_step(*_typed(precision, state.S, state.cs, state.ccs, x))
    return KleinState(k.F(s), k.F(cs), k.F(ccs))


def klein_finalize(state: KleinState):
    return (state.S + state.cs) + state.ccs


def knuth_add(state: KnuthState, x, precision: PrecisionLike = BINARY64) -> KnuthState:
    k = sum_kernels(resolve_precision(precision))
    s, c = k.knuth_step(*_typed(precision, state.S, state.c, x))
    return KnuthState(k.F(s), k.F(c))


def knuth_finalize(state: KnuthState):
    return state.S + state.c


_STATE_WIDTH = {"naive": 1, "kahan": 2, "klein": 3, "knuth": 2}


class CompensatedSum:
    """Running sum of one kind, holding its terms in a small array of precision P."""

    def __init__(self, kind: str = "kahan", precision: PrecisionLike = BINARY64):
        kind = kind.lower()
        if kind not in SUM_KINDS:
            raise ConfigError(f"unknown summation kind {kind!r}; expected one of {', '.join(SUM_KINDS)}")
        self.kind = kind
        self.precision = resolve_precision(precision)
        self._kernels = sum_kernels(self.precision)
        self.state = np.zeros(_STATE_WIDTH[kind], dtype=self._kernels.dtype)

    def extend(self, xs: Iterable) -> "CompensatedSum":
        arr = np.ascontiguousarray(np.asarray(xs, dtype=self._kernels.dtype).ravel())
        if arr.size:
            self._kernels.folds[self.kind](self.state, arr)
        return self

    def add(self, x) -> "CompensatedSum":
        return self.extend(np.array([x], dtype=self._kernels.dtype))

    def finalize(self):
        F = self._kernels.F
        s = self.state
        if self.kind == "klein":
            return F((s[0] + s[1]) + s[2])
        if self.kind == "knuth":
            return F(s[0] + s[1])
        return F(s[0])

    def copy(self) -> "CompensatedSum":
        other = CompensatedSum(self.kind, self.precision)
        other.state[:] = self.state
        return other

    def __repr__(self) -> str:
        return f"CompensatedSum(kind={self.kind!r}, precision={self.precision!r}, value={self.finalize()!r})"


def fold(kind: str, xs: Iterable, precision: PrecisionLike = BINARY64):
    """Sum xs in order with the given kind and return the finalized value."""
    return CompensatedSum(kind, precision).extend(xs).finalize()
