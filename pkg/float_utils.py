"""
float_utils.py
Precision names, IEEE bit encodings and float formatting for ReproMC.
"""
from typing import Union

import numpy as np

from errors import ConfigError

BINARY32 = "binary32"
BINARY64 = "binary64"

_DTYPES = {
    BINARY32: np.dtype(np.float32),
    BINARY64: np.dtype(np.float64),
}
_ALIASES = {"float32": BINARY32, "single": BINARY32, "f32": BINARY32,
            "float64": BINARY64, "double": BINARY64, "f64": BINARY64}
_UINTS = {4: np.uint32, 8: np.uint64}

PrecisionLike = Union[str, np.dtype, type]


def resolve_precision(precision: PrecisionLike) -> str:
    """Normalise a precision name or numpy float dtype to ``binary32``/``binary64``."""
    if isinstance(precision, str):
        key = precision.strip().lower()
        key = _ALIASES.get(key, key)
        if key in _DTYPES:
            return key
        raise ConfigError(f"unknown precision {precision!r}; expected binary32 or binary64")
    try:
        dtype = np.dtype(precision)
    except TypeError as exc:
        raise ConfigError(f"unknown precision {precision!r}") from exc
    for name, candidate in _DTYPES.items():
        if dtype == candidate:
            return name
    raise ConfigError(f"unsupported float dtype {dtype}")


def dtype_of(precision: PrecisionLike) -> np.dtype:
    return _DTYPES[resolve_precision(precision)]


def machine_epsilon(precision: PrecisionLike) -> float:
    return float(np.finfo(dtype_of(precision)).eps)


def significant_digits(precision: PrecisionLike) -> int:
    # shortest count guaranteeing a decimal round-trip
    return 9 if resolve_precision(precision) == BINARY32 else 17


def format_float(x, precision: PrecisionLike = BINARY64) -> str:
    return f"{float(x):.{significant_digits(precision)}g}"


def to_bits(x, precision: PrecisionLike = BINARY64) -> int:
    dtype = dtype_of(precision)
    return int(np.asarray(x, dtype=dtype).view(_UINTS[dtype.itemsize]))


def to_bits_hex(x, precision: PrecisionLike = BINARY64) -> str:
    dtype = dtype_of(precision)
    return f"{to_bits(x, dtype):0{2 * dtype.itemsize}x}"


def from_bits_hex(text: str):
    """Decode a hex IEEE encoding; 8 digits is binary32, 16 is binary64."""
    text = text.strip().lower()
    width = {8: 4, 16: 8}.get(len(text))
    if width is None:
        raise ConfigError(f"bit pattern must have 8 or 16 hex digits, got {text!r}")
    raw = np.asarray(int(text, 16), dtype=_UINTS[width])
    return raw.view(np.float32 if width == 4 else np.float64)[()]


def precision_of_hex(text: str) -> str:
    return BINARY32 if len(text.strip()) == 8 else BINARY64


def same_bits(a, b, precision: PrecisionLike = BINARY64) -> bool:
    return to_bits(a, precision) == to_bits(b, precision)
