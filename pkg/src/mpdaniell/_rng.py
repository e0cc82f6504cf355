"""Counter-based random streams.

Innovation vectors are addressed by ``(seed, t)``: the value of ``eta_t`` does
not depend on which window ``[t_start, t_stop)`` is requested, so every
simulator fed the same seed sees the same innovations.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray
from scipy.special import ndtri

INNOVATION_LAWS = ("gaussian", "rademacher", "centered_uniform")

# Columns per Philox block; a block is one counter window.
_BLOCK = 256
# Shifts block indices so that negative time indices map to valid counters.
_BLOCK_OFFSET = 1 << 40

INNOVATION_STREAM = 0
AUXILIARY_STREAM = 1

_U64 = (1 << 64) - 1


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if seed < 0 or seed > _U64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def _raw_block(seed: int, stream: int, block: int, d: int) -> NDArray[np.uint64]:
    bg = np.random.Philox(key=seed, counter=[0, block + _BLOCK_OFFSET, stream, 0])
    return bg.random_raw(_BLOCK * d).reshape(_BLOCK, d)


def raw_words(seed: int, d: int, t_start: int, t_stop: int, stream: int = INNOVATION_STREAM) -> NDArray[np.uint64]:
    """Raw 64-bit words for columns ``t_start <= t < t_stop``; shape ``(d, t_stop - t_start)``."""
    seed = _check_seed(seed)
    if t_stop < t_start:
        raise ValueError("t_stop must be >= t_start")
    out = np.empty((d, t_stop - t_start), dtype=np.uint64)
    if t_stop == t_start:
        return out
    first, last = t_start // _BLOCK, (t_stop - 1) // _BLOCK
    for block in range(first, last + 1):
        lo = max(t_start, block * _BLOCK)
        hi = min(t_stop, (block + 1) * _BLOCK)
        words = _raw_block(seed, stream, block, d)
        out[:, lo - t_start:hi - t_start] = words[lo - block * _BLOCK:hi - block * _BLOCK].T
    return out


def _to_unit_interval(words: NDArray[np.uint64]) -> NDArray[np.float64]:
    # Midpoints of a 2**-53 grid: strictly inside (0, 1).
    return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def innovation_block(
    seed: int,
    law: str,
    d: int,
    t_start: int,
    t_stop: int,
    stream: int = INNOVATION_STREAM,
) -> NDArray[np.float64]:
    """Innovations ``[eta_{t_start}, ..., eta_{t_stop - 1}]`` as a ``d x T`` array.

    Every law has mean zero and unit variance per component.
    """
    if law not in INNOVATION_LAWS:
        raise ValueError(f"unknown innovation law {law!r}; expected one of {INNOVATION_LAWS}")
    words = raw_words(seed, d, t_start, t_stop, stream)
    if law == "rademacher":
        return np.where(words >> np.uint64(63), 1.0, -1.0)
    u = _to_unit_interval(words)
    if law == "gaussian":
        return ndtri(u)
    return np.sqrt(3.0) * (2.0 * u - 1.0)


def task_seed(master: int, *keys: int) -> int:
    """Order-independent per-task seed derived from a master seed and integer keys."""
    ss = np.random.SeedSequence(_check_seed(master), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0])
