"""Counter-based noise streams.

Draw ``i`` of a stream keyed by ``seed`` always comes from the same Philox
block, so splitting a sampling job across workers or chunks never changes
the numbers that come out.
"""

from __future__ import annotations

import hashlib
import os

import numpy as np

CHUNK = 16384
SEED_ENV = "CERTSMOOTH_SEED"


def derive_seed(seed: int, *parts: object) -> int:
    """Deterministic 63-bit child seed for ``(seed, *parts)``.

    Stable across processes and Python versions (unlike ``hash``).
    """
    payload = repr((int(seed),) + tuple(parts)).encode()
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little") >> 1


def seed_from_env(default: int = 0) -> int:
    value = os.environ.get(SEED_ENV)
    return default if value in (None, "") else int(value)


def _key(seed: int) -> np.ndarray:
    return np.random.SeedSequence(int(seed)).generate_state(2, np.uint64)


def chunk_generator(seed: int, chunk: int) -> np.random.Generator:
    # high counter word carries the chunk index; each chunk owns 2**192 blocks
    return np.random.Generator(np.random.Philox(key=_key(seed), counter=int(chunk) << 192))


def gaussian_chunks(seed: int, n: int, dim: int):
    """Yield standard-normal blocks covering draws ``0 .. n-1`` of a stream.

    Each block is ``(m, dim)`` with ``m <= CHUNK``; draw ``i`` sits in chunk
    ``i // CHUNK`` at row ``i % CHUNK``.
    """
    for c, start in enumerate(range(0, n, CHUNK)):
        m = min(CHUNK, n - start)
        yield chunk_generator(seed, c).standard_normal((m, dim))
