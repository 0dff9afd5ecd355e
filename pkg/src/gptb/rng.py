"""Counter-based random streams.

Every draw is addressed by ``(seed, stream, sample index)``: sample ``i`` of a
stream with ``width`` values per sample reads Philox blocks
``[i * blocks, (i + 1) * blocks)`` where ``blocks = ceil(width / 4)``.  A
sample's values therefore never depend on how the index range is chunked or
how many workers process it.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

STREAM_GAUSS = 0
STREAM_RADEMACHER = 1
STREAM_TWIN_GAUSS = 2
STREAM_SUITE = 3

_U64 = (1 << 64) - 1
_WORDS_PER_BLOCK = 4


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= _U64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def raw_block(seed: int, stream: int, start: int, count: int, width: int) -> np.ndarray:
    """Raw uint64 words for samples ``start .. start+count-1``, shape (count, width)."""
    seed = _check_seed(seed)
    if count <= 0:
        return np.empty((0, width), dtype=np.uint64)
    blocks = -(-width // _WORDS_PER_BLOCK)
    bitgen = np.random.Philox(key=[seed, int(stream)], counter=int(start) * blocks)
    words = bitgen.random_raw(count * blocks * _WORDS_PER_BLOCK)
    return words.reshape(count, blocks * _WORDS_PER_BLOCK)[:, :width]


def uniforms(seed: int, stream: int, start: int, count: int, width: int) -> np.ndarray:
    """Uniforms on the open interval (0, 1) with 53-bit resolution."""
    words = raw_block(seed, stream, start, count, width)
    return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def normals(seed: int, stream: int, start: int, count: int, width: int) -> np.ndarray:
    """Standard normals by inversion, shape (count, width)."""
    return ndtri(uniforms(seed, stream, start, count, width))


def signs(seed: int, stream: int, start: int, count: int, width: int,
          dtype=np.float64) -> np.ndarray:
    """Rademacher (+1/-1) values, shape (count, width); 64 signs per word."""
    nwords = -(-width // 64)
    words = raw_block(seed, stream, start, count, nwords)
    bits = np.unpackbits(words.view(np.uint8), axis=1, bitorder="little")[:, :width]
    return (1 - 2 * bits.astype(np.int8)).astype(dtype)


def chunk_ranges(n_samples: int, chunk: int):
    """Yield (start, count) pairs covering ``range(n_samples)`` in order."""
    for start in range(0, n_samples, chunk):
        yield start, min(chunk, n_samples - start)
