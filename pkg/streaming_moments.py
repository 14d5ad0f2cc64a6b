"""
streaming_moments.py
Single-pass mean/variance accumulators and block merging.

Each algorithm tag is a literal transcription of its recurrence; the order of
floating-point operations is part of the contract. State lives in a numpy
array of the working precision with these slots:

    S, T        running sum and sum of squares (or centered squares)
    SSTAR, TSTAR  first correction terms of S and T
    M, MSTAR    running mean and its Kahan correction
    K           first observation (the shift of ShiftedNaiveKahan)
    SCCS, TCCS  second-order Klein corrections of S and T

Knuth correction keeps its accumulated two-sum errors in SSTAR and TSTAR.
"""
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from types import SimpleNamespace
from typing import Dict, Iterable, Optional, Sequence

import numpy as np
from numba import njit

from compensated_sum import sum_kernels
from errors import AccumulatorError, ConfigError
from float_utils import BINARY64, PrecisionLike, dtype_of, resolve_precision
from logger_setup import get_logger

logger = get_logger(__name__)

S, T, SSTAR, TSTAR, M, MSTAR, K, SCCS, TCCS = range(9)
STATE_SIZE = 9


class MomentAlgorithm(str, Enum):
    NAIVE = "Naive"
    NAIVE_KAHAN = "NaiveKahan"
    NAIVE_KLEIN = "NaiveKlein"
    NAIVE_KNUTH = "NaiveKnuth"
    SHIFTED_NAIVE_KAHAN = "ShiftedNaiveKahan"
    LING = "Ling"
    LING_KAHAN = "LingKahan"
    CHAN_LEWIS_KAHAN = "ChanLewisKahan"

    def __str__(self) -> str:
        return self.value

    @property
    def label(self) -> str:
        return _LABELS[self]

    @property
    def is_sum_based(self) -> bool:
        return self in _SUM_BASED

    @property
    def is_compensated(self) -> bool:
        return self not in (MomentAlgorithm.NAIVE, MomentAlgorithm.LING)


_LABELS = {
    MomentAlgorithm.NAIVE: "Naive",
    MomentAlgorithm.NAIVE_KAHAN: "Kahan correction",
    MomentAlgorithm.NAIVE_KLEIN: "Klein correction",
    MomentAlgorithm.NAIVE_KNUTH: "Knuth correction",
    MomentAlgorithm.SHIFTED_NAIVE_KAHAN: "Shifted Naive with Kahan correction",
    MomentAlgorithm.LING: "Ling",
    MomentAlgorithm.LING_KAHAN: "Ling with Kahan correction",
    MomentAlgorithm.CHAN_LEWIS_KAHAN: "Chan and Lewis with Kahan correction",
}

_SUM_BASED = frozenset({
    MomentAlgorithm.NAIVE,
    MomentAlgorithm.NAIVE_KAHAN,
    MomentAlgorithm.NAIVE_KLEIN,
    MomentAlgorithm.NAIVE_KNUTH,
    MomentAlgorithm.CHAN_LEWIS_KAHAN,
})

ALL_ALGORITHMS = tuple(MomentAlgorithm)
TABLE_ALGORITHMS = (
    MomentAlgorithm.NAIVE,
    MomentAlgorithm.NAIVE_KAHAN,
    MomentAlgorithm.NAIVE_KLEIN,
    MomentAlgorithm.SHIFTED_NAIVE_KAHAN,
    MomentAlgorithm.LING,
    MomentAlgorithm.LING_KAHAN,
    MomentAlgorithm.CHAN_LEWIS_KAHAN,
)

_ALIASES = {
    "naive": MomentAlgorithm.NAIVE,
    "kahan": MomentAlgorithm.NAIVE_KAHAN,
    "klein": MomentAlgorithm.NAIVE_KLEIN,
    "knuth": MomentAlgorithm.NAIVE_KNUTH,
    "shifted": MomentAlgorithm.SHIFTED_NAIVE_KAHAN,
    "chanlewis": MomentAlgorithm.CHAN_LEWIS_KAHAN,
}


def parse_algorithm(text) -> MomentAlgorithm:
    if isinstance(text, MomentAlgorithm):
        return text
    key = str(text).strip().replace("-", "").replace("_", "").lower()
    for algorithm in MomentAlgorithm:
        if algorithm.value.lower() == key:
            return algorithm
    if key in _ALIASES:
        return _ALIASES[key]
    choices = ", ".join(a.value for a in MomentAlgorithm)
    raise ConfigError(f"unknown algorithm {text!r}; expected one of {choices}")


def parse_algorithms(items: Iterable) -> tuple:
    seen = []
    for item in items:
        algorithm = parse_algorithm(item)
        if algorithm not in seen:
            seen.append(algorithm)
    if not seen:
        raise ConfigError("at least one algorithm is required")
    return tuple(seen)


@lru_cache(maxsize=None)
def moment_kernels(precision: PrecisionLike = BINARY64) -> SimpleNamespace:
    """Compile the per-tag fold kernels for one precision.

    Every kernel has the signature ``(state, k0, xs) -> k`` and advances the
    state over xs in order, starting from count k0.
    """
    sk = sum_kernels(resolve_precision(precision))
    F = sk.F
    kahan_step = sk.kahan_step
    klein_step = sk.klein_step
    knuth_step = sk.knuth_step
    logger.debug("building moment kernels for %s", sk.dtype)

    @njit(nogil=True)
    def naive(st, k0, xs):
        s = st[S]
        t = st[T]
        shift = st[K]
        k = k0
        for x in xs:
            k += 1
            if k == 1:
                shift = x
            s = s + x
            t = t + x * x
        st[S] = s
        st[T] = t
        st[K] = shift
        return k

    @njit(nogil=True)
    def naive_kahan(st, k0, xs):
        s = st[S]
        t = st[T]
        ss = st[SSTAR]
        ts = st[TSTAR]
        shift = st[K]
        k = k0
        for x in xs:
            k += 1
            if k == 1:
                shift = x
            s, ss = kahan_step(s, ss, x)
            t, ts = kahan_step(t, ts, x * x)
        st[S] = s
        st[T] = t
        st[SSTAR] = ss
        st[TSTAR] = ts
        st[K] = shift
        return k

    @njit(nogil=True)
    def naive_klein(st, k0, xs):
        s = st[S]
        t = st[T]
        scs = st[SSTAR]
        tcs = st[TSTAR]
        sccs = st[SCCS]
        tccs = st[TCCS]
        shift = st[K]
        k = k0
        for x in xs:
            k += 1
            if k == 1:
                shift = x
            s, scs, sccs = klein_step(s, scs, sccs, x)
            t, tcs, tccs = klein_step(t, tcs, tccs, x * x)
        st[S] = s
        st[T] = t
        st[SSTAR] = scs
        st[TSTAR] = tcs
        st[SCCS] = sccs
        st[TCCS] = tccs
        st[K] = shift
        return k

    @njit(nogil=True)
    def naive_knuth(st, k0, xs):
        s = st[S]
        t = st[T]
        sc = st[SSTAR]
        tc = st[TSTAR]
        shift = st[K]
        k = k0
        for x in xs:
            k += 1
            if k == 1:
                shift = x
            s, sc = knuth_step(s, sc, x)
            t, tc = knuth_step(t, tc, x * x)
        st[S] = s
        st[T] = t
        st[SSTAR] = sc
        st[TSTAR] = tc
        st[K] = shift
        return k

    @njit(nogil=True)
    def shifted_naive_kahan(st, k0, xs):
        s = st[S]
        t = st[T]
        ss = st[SSTAR]
        ts = st[TSTAR]
        shift = st[K]
        k = k0
        for x in xs:
            k += 1
            if k == 1:
                shift = x
            d = x - shift
            s, ss = kahan_step(s, ss, d)
            t, ts = kahan_step(t, ts, d * d)
        st[S] = s
        st[T] = t
        st[SSTAR] = ss
        st[TSTAR] = ts
        st[K] = shift
        return k

    @njit(nogil=True)
    def ling(st, k0, xs):
        t = st[T]
        m = st[M]
        shift = st[K]
        k = k0
        for x in xs:
            k += 1
            if k == 1:
                shift = x
            d = x - m
            z = (F(k - 1) * (d * d)) / F(k)
            t = t + z
            m = m + d / F(k)
        st[T] = t
        st[M] = m
        st[K] = shift
        return k

    @njit(nogil=True)
    def ling_kahan(st, k0, xs):
        t = st[T]
        ts = st[TSTAR]
        m = st[M]
        ms = st[MSTAR]
        shift = st[K]
        k = k0
        for x in xs:
            k += 1
            if k == 1:
                shift = x
            d = x - m
            z = (F(k - 1) * (d * d)) / F(k)
            t, ts = kahan_step(t, ts, z)
            z = d / F(k)
            m, ms = kahan_step(m, ms, z)
        st[T] = t
        st[TSTAR] = ts
        st[M] = m
        st[MSTAR] = ms
        st[K] = shift
        return k

    @njit(nogil=True)
    def chan_lewis_kahan(st, k0, xs):
        s = st[S]
        t = st[T]
        ss = st[SSTAR]
        ts = st[TSTAR]
        m = st[M]
        shift = st[K]
        k = k0
        for x in xs:
            k += 1
            if k == 1:
                shift = x
            d = x - m
            z = (F(k - 1) * (d * d)) / F(k)
            t, ts = kahan_step(t, ts, z)
            s, ss = kahan_step(s, ss, x)
            m = s / F(k)
        st[S] = s
        st[T] = t
        st[SSTAR] = ss
        st[TSTAR] = ts
        st[M] = m
        st[K] = shift
        return k

    return SimpleNamespace(
        sums=sk,
        folds={
            MomentAlgorithm.NAIVE: naive,
            MomentAlgorithm.NAIVE_KAHAN: naive_kahan,
            MomentAlgorithm.NAIVE_KLEIN: naive_klein,
            MomentAlgorithm.NAIVE_KNUTH: naive_knuth,
            MomentAlgorithm.SHIFTED_NAIVE_KAHAN: shifted_naive_kahan,
            MomentAlgorithm.LING: ling,
            MomentAlgorithm.LING_KAHAN: ling_kahan,
            MomentAlgorithm.CHAN_LEWIS_KAHAN: chan_lewis_kahan,
        },
    )


@dataclass(frozen=True)
class SummaryStats:
    """Population statistics (divisor n) in the accumulator's precision."""
    n: int
    mean: np.floating
    variance: np.floating
    sum: Optional[np.floating]
    algorithm: MomentAlgorithm
    precision: str = BINARY64


class MomentAccumulator:
    """Algorithm-tagged running state. Methods mutate in place and return self."""

    __slots__ = ("algorithm", "precision", "k", "state", "_kernels")

    def __init__(self, algorithm=MomentAlgorithm.CHAN_LEWIS_KAHAN, precision: PrecisionLike = BINARY64):
        self.algorithm = parse_algorithm(algorithm)
        self.precision = resolve_precision(precision)
        self._kernels = moment_kernels(self.precision)
        self.k = 0
        self.state = np.zeros(STATE_SIZE, dtype=dtype_of(self.precision))

    @property
    def dtype(self) -> np.dtype:
        return self.state.dtype

    def _F(self, value):
        return self.state.dtype.type(value)

    def extend(self, xs) -> "MomentAccumulator":
        arr = np.ascontiguousarray(np.asarray(xs, dtype=self.state.dtype).ravel())
        if arr.size:
            self.k = int(self._kernels.folds[self.algorithm](self.state, np.int64(self.k), arr))
        return self

    def update(self, x) -> "MomentAccumulator":
        return self.extend(np.array([x], dtype=self.state.dtype))

    def copy(self) -> "MomentAccumulator":
        other = MomentAccumulator(self.algorithm, self.precision)
        other.k = self.k
        other.state[:] = self.state
        return other

    @property
    def first(self):
        if self.k == 0:
            raise AccumulatorError("empty accumulator has no first observation")
        return self.state[K]

    def finalize(self, sample: bool = False) -> SummaryStats:
        if self.k == 0:
            raise AccumulatorError(f"cannot finalize an empty {self.algorithm} accumulator")
        F = self._F
        st = self.state
        n = F(self.k)
        alg = self.algorithm
        with np.errstate(all="ignore"):
            if alg in (MomentAlgorithm.NAIVE, MomentAlgorithm.NAIVE_KAHAN):
                total, squares = st[S], st[T]
            elif alg is MomentAlgorithm.NAIVE_KLEIN:
                total = (st[S] + st[SSTAR]) + st[SCCS]
                squares = (st[T] + st[TSTAR]) + st[TCCS]
            elif alg is MomentAlgorithm.NAIVE_KNUTH:
                total = st[S] + st[SSTAR]
                squares = st[T] + st[TSTAR]
            if alg.is_sum_based and alg is not MomentAlgorithm.CHAN_LEWIS_KAHAN:
                mean = total / n
                variance = squares / n - mean * mean
            elif alg is MomentAlgorithm.SHIFTED_NAIVE_KAHAN:
                mean = st[S] / n + st[K]
                centred = mean - st[K]
                variance = st[T] / n - centred * centred
                total = mean * n
            elif alg is MomentAlgorithm.CHAN_LEWIS_KAHAN:
                total = st[S]
                mean = st[M]
                variance = st[T] / n
            else:
                mean = st[M]
                variance = st[T] / n
                total = mean * n
            if sample:
                if self.k < 2:
                    raise AccumulatorError("sample variance needs at least two observations")
                variance = (variance * n) / F(self.k - 1)
        return SummaryStats(
            n=self.k,
            mean=F(mean),
            variance=F(variance),
            sum=F(total),
            algorithm=alg,
            precision=self.precision,
        )

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        """Fold another block's statistics into this one.

        A one-observation block is replayed through ``update`` so that block
        size 1 reproduces sequential accumulation exactly.
        """
        if other.algorithm is not self.algorithm:
            raise AccumulatorError(f"cannot merge {other.algorithm} into {self.algorithm}")
        if other.precision != self.precision:
            raise AccumulatorError(f"cannot merge {other.precision} into {self.precision}")
        if other.k == 0:
            return self
        if self.k == 0:
            self.k = other.k
            self.state[:] = other.state
            return self
        if other.k == 1:
            return self.update(other.state[K])
        with np.errstate(all="ignore"):
            _MERGERS[self.algorithm](self, other)
        self.k += other.k
        return self

    def __repr__(self) -> str:
        return f"MomentAccumulator({self.algorithm.value}, {self.precision}, k={self.k})"


def _kahan_into(acc: MomentAccumulator, slot: int, star: int, *values) -> None:
    step = acc._kernels.sums.kahan_step
    F = acc._F
    s, c = acc.state[slot], acc.state[star]
    for v in values:
        s, c = step(s, c, F(v))
        s, c = F(s), F(c)
    acc.state[slot] = s
    acc.state[star] = c


def _residual(value):
    # residual terms are folded only when they carry something
    return () if value == 0 else (-value,)


def _chan_term(acc: MomentAccumulator, delta, ka: int, kb: int):
    F = acc._F
    return ((F(ka) * (delta * delta)) * F(kb)) / F(ka + kb)


def _merge_naive(a: MomentAccumulator, b: MomentAccumulator) -> None:
    a.state[S] = a.state[S] + b.state[S]
    a.state[T] = a.state[T] + b.state[T]


def _merge_naive_kahan(a: MomentAccumulator, b: MomentAccumulator) -> None:
    _kahan_into(a, S, SSTAR, b.state[S], *_residual(b.state[SSTAR]))
    _kahan_into(a, T, TSTAR, b.state[T], *_residual(b.state[TSTAR]))


def _merge_naive_klein(a: MomentAccumulator, b: MomentAccumulator) -> None:
    step = a._kernels.sums.klein_step
    F = a._F
    for slot, cs, ccs in ((S, SSTAR, SCCS), (T, TSTAR, TCCS)):
        s, c1, c2 = a.state[slot], a.state[cs], a.state[ccs]
        terms = [b.state[slot]] + [v for v in (b.state[cs], b.state[ccs]) if v != 0]
        for v in terms:
            s, c1, c2 = (F(r) for r in step(s, c1, c2, F(v)))
        a.state[slot], a.state[cs], a.state[ccs] = s, c1, c2


def _merge_naive_knuth(a: MomentAccumulator, b: MomentAccumulator) -> None:
    two_sum = a._kernels.sums.two_sum
    F = a._F
    for slot, err in ((S, SSTAR), (T, TSTAR)):
        s, e = two_sum(a.state[slot], b.state[slot])
        a.state[slot] = F(s)
        a.state[err] = (a.state[err] + F(e)) + b.state[err]


def _merge_shifted(a: MomentAccumulator, b: MomentAccumulator) -> None:
    F = a._F
    shift = b.state[K] - a.state[K]
    sb = b.state[S]
    _kahan_into(a, S, SSTAR, sb, *_residual(b.state[SSTAR]), F(b.k) * shift)
    _kahan_into(a, T, TSTAR, b.state[T], *_residual(b.state[TSTAR]),
                (F(2) * shift) * sb, F(b.k) * (shift * shift))


def _merge_ling(a: MomentAccumulator, b: MomentAccumulator) -> None:
    F = a._F
    ka, kb = a.k, b.k
    delta = b.state[M] - a.state[M]
    a.state[T] = (a.state[T] + b.state[T]) + _chan_term(a, delta, ka, kb)
    a.state[M] = a.state[M] + (delta * F(kb)) / F(ka + kb)


def _merge_ling_kahan(a: MomentAccumulator, b: MomentAccumulator) -> None:
    sums = a._kernels.sums
    F = a._F
    ka, kb = a.k, b.k
    k = F(ka + kb)
    dh, dl = (F(v) for v in sums.two_sum(b.state[M], -a.state[M]))
    # true means are M - M*, so the delta carries the residual difference
    dl = dl - (b.state[MSTAR] - a.state[MSTAR])
    ph, pl = (F(v) for v in sums.two_prod(dh, F(kb)))
    pl = pl + dl * F(kb)
    qh = ph / k
    th, tl = (F(v) for v in sums.two_prod(qh, k))
    ql = (((ph - th) - tl) + pl) / k
    _kahan_into(a, T, TSTAR, b.state[T], *_residual(b.state[TSTAR]), _chan_term(a, dh, ka, kb))
    _kahan_into(a, M, MSTAR, qh, *(() if ql == 0 else (ql,)))


def _merge_chan_lewis_kahan(a: MomentAccumulator, b: MomentAccumulator) -> None:
    ka, kb = a.k, b.k
    delta = b.state[M] - a.state[M]
    _kahan_into(a, T, TSTAR, b.state[T], *_residual(b.state[TSTAR]), _chan_term(a, delta, ka, kb))
    _kahan_into(a, S, SSTAR, b.state[S], *_residual(b.state[SSTAR]))
    a.state[M] = a.state[S] / a._F(ka + kb)


_MERGERS = {
    MomentAlgorithm.NAIVE: _merge_naive,
    MomentAlgorithm.NAIVE_KAHAN: _merge_naive_kahan,
    MomentAlgorithm.NAIVE_KLEIN: _merge_naive_klein,
    MomentAlgorithm.NAIVE_KNUTH: _merge_naive_knuth,
    MomentAlgorithm.SHIFTED_NAIVE_KAHAN: _merge_shifted,
    MomentAlgorithm.LING: _merge_ling,
    MomentAlgorithm.LING_KAHAN: _merge_ling_kahan,
    MomentAlgorithm.CHAN_LEWIS_KAHAN: _merge_chan_lewis_kahan,
}


def empty(algorithm, precision: PrecisionLike = BINARY64) -> MomentAccumulator:
    return MomentAccumulator(algorithm, precision)


def update(acc: MomentAccumulator, x) -> MomentAccumulator:
    """Value-semantics update: ``acc`` is left untouched."""
    return acc.copy().update(x)


def finalize(acc: MomentAccumulator, sample: bool = False) -> SummaryStats:
    return acc.finalize(sample=sample)


def merge(a: MomentAccumulator, b: MomentAccumulator) -> MomentAccumulator:
    return a.copy().merge(b)


def accumulate(xs, algorithm, precision: PrecisionLike = BINARY64) -> MomentAccumulator:
    return MomentAccumulator(algorithm, precision).extend(xs)


def accumulate_all(
    xs, algorithms: Sequence = ALL_ALGORITHMS, precision: PrecisionLike = BINARY64
) -> Dict[MomentAlgorithm, MomentAccumulator]:
    arr = np.ascontiguousarray(np.asarray(xs, dtype=dtype_of(precision)).ravel())
    return {parse_algorithm(a): accumulate(arr, a, precision) for a in algorithms}
