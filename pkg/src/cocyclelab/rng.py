"""Deterministic randomness plumbing.

Two distinct needs are served here:

* **Task streams.**  Every logical task (an estimation run, an instance
  generator, a sampler) draws from its own ``numpy`` generator derived from
  the root seed and a stable string label, so adding tasks never shifts the
  streams of existing ones.

* **Per-index symbol noise.**  Lazy bi-infinite symbolic words need the
  symbol at index ``i`` to depend only on ``(seed, i)``, never on the order
  in which the word was extended.  A counter-based splitmix64 hash provides
  that; it is exactly reproducible across platforms.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One splitmix64 scrambling round (public-domain constants)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def label_to_int(label: str) -> int:
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream(root_seed: int, label: str) -> np.random.Generator:
    """Independent generator for the task `label` under `root_seed`."""
    return np.random.default_rng(np.random.SeedSequence([root_seed & _MASK64, label_to_int(label)]))


def substream_seed(root_seed: int, label: str, k: int = 0) -> int:
    """64-bit child seed for task `label`, replica `k`."""
    return splitmix64(splitmix64(root_seed & _MASK64) ^ label_to_int(label) ^ (k & _MASK64))


def index_uniform(seed: int, index: int) -> float:
    """Uniform in [0, 1) that depends only on (seed, index).

    Negative indices are zigzag-encoded so left and right extensions of a
    word never collide.
    """
    zig = (index << 1) ^ (index >> 63) if index >= 0 else ((-index) << 1) - 1
    h = splitmix64((seed & _MASK64) ^ splitmix64(zig & _MASK64))
    return h / float(1 << 64)


def draw_category(u: float, cumweights: np.ndarray) -> int:
    """Inverse-CDF draw: first index whose cumulative weight exceeds u."""
    return min(int(np.searchsorted(cumweights, u, side="right")), len(cumweights) - 1)
