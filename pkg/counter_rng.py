"""
counter_rng.py
Counter-based uniforms (Philox4x32-10) addressed by a global 1-based index g.

Output g depends only on (seed, g): skipping to any position costs the same
as generating one number. One Philox block yields two 64-bit draws: odd g
takes output words (0, 1), even g takes words (2, 3), with the second word
as the high half. The block counter is (g - 1) // 2 split into two 32-bit
words; the 64-bit seed is the key.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from config import validate_seed
from errors import ConfigError, RngError
from logger_setup import get_logger

logger = get_logger(__name__)

PHILOX_M0 = np.uint64(0xD2511F53)
PHILOX_M1 = np.uint64(0xCD9E8D57)
PHILOX_W0 = 0x9E3779B9
PHILOX_W1 = 0xBB67AE85
PHILOX_ROUNDS = 10

MASK32 = np.uint64(0xFFFFFFFF)
SHIFT32 = np.uint64(32)
SHIFT11 = np.uint64(11)
SHIFT40 = np.uint64(40)
# Philox blocks generated per vectorised pass
BATCH_BLOCKS = 1 << 20


def philox4x32(counter, key, rounds: int = PHILOX_ROUNDS):
    """Philox4x32 bijection applied to arrays of 32-bit counter words.

    ``counter`` is a 4-sequence of uint64 arrays (or ints) holding 32-bit
    words; ``key`` is a pair of 32-bit ints. Returns four uint64 arrays.
    """
    c0, c1, c2, c3 = (np.asarray(w, dtype=np.uint64) & MASK32 for w in counter)
    k0, k1 = int(key[0]) & 0xFFFFFFFF, int(key[1]) & 0xFFFFFFFF
    for r in range(rounds):
        if r:
            k0 = (k0 + PHILOX_W0) & 0xFFFFFFFF
            k1 = (k1 + PHILOX_W1) & 0xFFFFFFFF
        p0 = PHILOX_M0 * c0
        p1 = PHILOX_M1 * c2
        c0, c1, c2, c3 = (
            (p1 >> SHIFT32) ^ c1 ^ np.uint64(k0),
            p1 & MASK32,
            (p0 >> SHIFT32) ^ c3 ^ np.uint64(k1),
            p0 & MASK32,
        )
    return c0, c1, c2, c3


def _key(seed: int):
    seed = validate_seed(seed)
    return seed & 0xFFFFFFFF, seed >> 32


def _check_index(g, name: str = "g") -> None:
    if np.any(np.asarray(g) < 1):
        raise RngError(f"{name} must be >= 1")


def _block_bits(seed: int, blocks: np.ndarray):
    blocks = np.asarray(blocks, dtype=np.uint64)
    zeros = np.zeros_like(blocks)
    w0, w1, w2, w3 = philox4x32((blocks & MASK32, blocks >> SHIFT32, zeros, zeros), _key(seed))
    return (w1 << SHIFT32) | w0, (w3 << SHIFT32) | w2


def random_bits(seed: int, g) -> np.ndarray:
    """64 random bits at arbitrary 1-based indices g (scalar or array)."""
    _check_index(g)
    index = np.asarray(g, dtype=np.uint64) - np.uint64(1)
    even, odd = _block_bits(seed, index >> np.uint64(1))
    return np.where((index & np.uint64(1)) == 0, even, odd)


def _contiguous_bits(seed: int, start: int, count: int) -> np.ndarray:
    _check_index(start, "start")
    if count < 0:
        raise RngError(f"count must be >= 0, got {count}")
    out = np.empty(count, dtype=np.uint64)
    first = start - 1
    written = 0
    while written < count:
        position = first + written
        block = position // 2
        lane = position % 2
        n_blocks = min(BATCH_BLOCKS, (count - written + lane + 1) // 2)
        lanes = np.empty((n_blocks, 2), dtype=np.uint64)
        lanes[:, 0], lanes[:, 1] = _block_bits(seed, np.arange(block, block + n_blocks, dtype=np.uint64))
        flat = lanes.ravel()[lane:]
        take = min(flat.size, count - written)
        out[written:written + take] = flat[:take]
        written += take
    return out


def bits_to_uniform(bits) -> np.ndarray:
    """53 top bits scaled into (0,1); an all-zero draw maps to 2**-54."""
    u = (np.asarray(bits, dtype=np.uint64) >> SHIFT11).astype(np.float64) * 2.0 ** -53
    return np.where(u == 0.0, 2.0 ** -54, u)


def bits_to_uniform32(bits) -> np.ndarray:
    """24 top bits scaled into binary32 (0,1); zero maps to 2**-25."""
    u = (np.asarray(bits, dtype=np.uint64) >> SHIFT40).astype(np.float32) * np.float32(2.0 ** -24)
    return np.where(u == 0, np.float32(2.0 ** -25), u).astype(np.float32)


def uniform_at(seed: int, g: int) -> float:
    return float(bits_to_uniform(random_bits(seed, g)))


def uniforms_at(seed: int, g) -> np.ndarray:
    return bits_to_uniform(random_bits(seed, g))


def uniforms(seed: int, start: int, count: int) -> np.ndarray:
    """Uniforms at indices start, start+1, ..., start+count-1."""
    return bits_to_uniform(_contiguous_bits(seed, start, count))


def uniforms32(seed: int, start: int, count: int) -> np.ndarray:
    return bits_to_uniform32(_contiguous_bits(seed, start, count))


def normal_inverse_cdf(u):
    """Standard normal quantile; u must lie strictly inside (0,1)."""
    arr = np.asarray(u, dtype=np.float64)
    if np.any(~((arr > 0.0) & (arr < 1.0))):
        raise RngError("normal_inverse_cdf needs 0 < u < 1")
    z = ndtri(arr)
    return float(z) if np.ndim(u) == 0 else z


def normals(seed: int, start: int, count: int) -> np.ndarray:
    return ndtri(uniforms(seed, start, count))


def stream_index(path: int, coordinate: int, d: int = 1, steps: int = 1) -> int:
    """Global index of coordinate j of path i: (i-1)*M*d + j."""
    width = d * steps
    if d < 1 or steps < 1:
        raise RngError(f"d and M must be >= 1, got d={d}, M={steps}")
    if path < 1:
        raise RngError(f"path must be >= 1, got {path}")
    if not 1 <= coordinate <= width:
        raise RngError(f"coordinate must lie in [1, {width}], got {coordinate}")
    return (path - 1) * width + coordinate


@dataclass
class StreamCursor:
    """Per-worker position in the stream; ``position`` is the next index drawn."""
    seed: int
    position: int = 1

    def draw(self, count: int) -> np.ndarray:
        out = uniforms(self.seed, self.position, count)
        self.position += count
        return out

    def draw32(self, count: int) -> np.ndarray:
        out = uniforms32(self.seed, self.position, count)
        self.position += count
        return out

    def normals(self, count: int) -> np.ndarray:
        return ndtri(self.draw(count))


def skip_to(seed: int, path: int, d: int = 1, steps: int = 1) -> StreamCursor:
    return StreamCursor(seed=seed, position=stream_index(path, 1, d, steps))


def seeded_permutation(n: int, seed: int) -> np.ndarray:
    if n < 0:
        raise ConfigError(f"permutation length must be >= 0, got {n}")
    generator = np.random.Generator(np.random.Philox(validate_seed(seed)))
    return generator.permutation(n)
