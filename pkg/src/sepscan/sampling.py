"""Seeded sample generation and the per-batch evaluation cache.

Coordinates come from a counter-based generator (splitmix64 finalizer over a
per-seed key), so the value at (seed, sample, coordinate, stream) is
addressable directly instead of through sequential generator state. Identical
``(s, n, seed)`` always reproduces the batch bit for bit, and growing ``n``
extends a batch without disturbing earlier samples.
"""

from __future__ import annotations

import numpy as np

from .errors import SubsetError
from .functions import BlackBoxFunction, mixed_batch
from .subsets import Subset

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_TO_UNIT = 2.0 ** -53


def _finalize(state: np.ndarray) -> np.ndarray:
    """splitmix64 output function: a bijective full-avalanche mix of uint64."""
    z = state
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def uniform_field(seed: int, counters: np.ndarray) -> np.ndarray:
    """Uniform [0,1) doubles addressed by counter, keyed by ``seed``."""
    with np.errstate(over="ignore"):
        key = _finalize(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
        state = key + (counters.astype(np.uint64) + np.uint64(1)) * _GOLDEN
        bits = _finalize(state & _U64)
    return (bits >> np.uint64(11)).astype(np.float64) * _TO_UNIT


class SampleBatch:
    """Paired uniform samples (x_i, z_i) plus a per-function value cache.

    Cache keys are subset masks: the full mask holds f(x_i), the empty mask
    holds f(z_i), and any other mask u holds f at the spliced points taking
    x-coordinates on u and z-coordinates elsewhere. Entries are written once
    and never change.
    """

    def __init__(self, x: np.ndarray, z: np.ndarray, seed: int):
        if x.shape != z.shape or x.ndim != 2:
            raise ValueError("x and z must be matching (n, s) arrays")
        # frozen so nothing can drift out of sync with cached values
        x.setflags(write=False)
        z.setflags(write=False)
        self.x = x
        self.z = z
        self.seed = seed
        self._caches: dict[int, dict[int, np.ndarray]] = {}
        self._scales: dict[int, float] = {}
        self._owners: dict[int, BlackBoxFunction] = {}

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dimension(self) -> int:
        return self.x.shape[1]

    def _cache_for(self, f: BlackBoxFunction) -> dict[int, np.ndarray]:
        fid = id(f)
        if fid not in self._caches:
            self._caches[fid] = {}
            self._scales[fid] = 0.0
            self._owners[fid] = f  # keep f alive so ids stay unique
        return self._caches[fid]

    def values(self, f: BlackBoxFunction, u: Subset) -> np.ndarray:
        """Cached f-values for subset mask ``u``, evaluating on first use."""
        if f.dimension != self.dimension:
            raise ValueError(
                f"function dimension {f.dimension} does not match batch "
                f"dimension {self.dimension}"
            )
        if not u.within(self.dimension):
            raise SubsetError(f"subset {u} exceeds batch dimension {self.dimension}")
        cache = self._cache_for(f)
        entry = cache.get(u.mask)
        if entry is None:
            full = (1 << self.dimension) - 1
            if u.mask == full:
                pts = self.x
            elif u.mask == 0:
                pts = self.z
            else:
                pts = mixed_batch(self.x, self.z, u)
            entry = f.evaluate_batch(pts)
            entry.setflags(write=False)
            cache[u.mask] = entry
            peak = float(np.max(np.abs(entry))) if entry.size else 0.0
            self._scales[id(f)] = max(self._scales[id(f)], peak)
        return entry

    def cached_masks(self, f: BlackBoxFunction) -> list[int]:
        return sorted(self._caches.get(id(f), {}))

    def scale(self, f: BlackBoxFunction) -> float:
        """Largest |f| seen in this batch's cache so far."""
        return self._scales.get(id(f), 0.0)


def generate_samples(s: int, n: int, seed: int) -> SampleBatch:
    """Deterministic batch of n sample pairs in [0,1)^s.

    Coordinate (i, j) of stream x uses counter ``(2i)*s + j`` and stream z
    uses ``(2i+1)*s + j``, all keyed by the seed.
    """
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    if s < 1:
        raise ValueError(f"dimension must be >= 1, got {s}")
    counters = np.arange(2 * n * s, dtype=np.uint64).reshape(n, 2, s)
    coords = uniform_field(seed, counters)
    return SampleBatch(x=coords[:, 0, :].copy(), z=coords[:, 1, :].copy(), seed=seed)
