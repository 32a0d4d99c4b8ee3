"""Black-box function model: evaluation contract, domain transform, counting.

All callers address points in the unit cube ``[0,1]^s``. A function may
declare a box domain ``[a_j, b_j]`` per coordinate; evaluation then applies
the affine map ``x -> a + (b - a) * x`` before calling the underlying
implementation, so the rest of the package never sees domain coordinates.

Evaluations are counted on the function object (one per point, batches count
their length). NaN or Inf results abort with the offending point rather than
being skipped: silently dropping samples would bias every estimator built on
top of this module.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import EvaluationError, NumericError
from .subsets import Subset

# Chunk length for batch evaluation. Fixed regardless of the worker count so
# that results are assembled identically whether or not a pool is used.
_CHUNK = 1 << 16


class BlackBoxFunction:
    """Evaluatable real-valued function on the unit cube.

    Subclasses implement :meth:`_raw`, which receives points already mapped
    into the declared domain. ``threads`` caps the number of evaluation
    workers for large batches; it never changes results because chunk
    boundaries and assembly order are fixed by index.
    """

    def __init__(self, dimension: int, label: str, domain=None):
        if dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {dimension}")
        self.dimension = int(dimension)
        self.label = label
        self.threads = 1
        self._lock = threading.Lock()
        self._eval_count = 0
        if domain is None:
            self._lower = None
            self._upper = None
        else:
            lower, upper = domain
            lower = np.asarray(lower, dtype=float).reshape(-1)
            upper = np.asarray(upper, dtype=float).reshape(-1)
            if lower.size == 1:
                lower = np.repeat(lower, dimension)
            if upper.size == 1:
                upper = np.repeat(upper, dimension)
            if lower.size != dimension or upper.size != dimension:
                raise ValueError("domain bounds must match the dimension")
            if not np.all(lower < upper):
                raise ValueError("domain requires a_j < b_j for every coordinate")
            self._lower = lower
            self._upper = upper

    @property
    def eval_count(self) -> int:
        """Total raw evaluations performed so far (monotone)."""
        return self._eval_count

    @property
    def domain(self):
        if self._lower is None:
            return None
        return self._lower.copy(), self._upper.copy()

    def _raw(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, point) -> float:
        """Evaluate at one unit-cube point."""
        p = np.asarray(point, dtype=float).reshape(1, -1)
        return float(self.evaluate_batch(p)[0])

    def evaluate_batch(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at an (n, s) array of unit-cube points, preserving order."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.dimension:
            raise ValueError(
                f"expected points of shape (n, {self.dimension}), got {pts.shape}"
            )
        if pts.size and (pts.min() < -1e-12 or pts.max() > 1 + 1e-12):
            raise ValueError("points must lie in the unit cube [0,1]^s")
        if self._lower is not None:
            pts = self._lower + (self._upper - self._lower) * pts
        values = self._dispatch(pts)
        values = np.asarray(values, dtype=float).reshape(-1)
        if values.shape[0] != pts.shape[0]:
            raise EvaluationError(
                f"{self.label}: produced {values.shape[0]} values for {pts.shape[0]} points"
            )
        bad = ~np.isfinite(values)
        if bad.any():
            i = int(np.argmax(bad))
            raise NumericError(
                f"{self.label}: evaluation returned {values[i]!r}", point=points[i]
            )
        with self._lock:
            self._eval_count += pts.shape[0]
        return values

    def _dispatch(self, pts: np.ndarray) -> np.ndarray:
        n = pts.shape[0]
        if n <= _CHUNK:
            return self._raw(pts)
        spans = [(lo, min(lo + _CHUNK, n)) for lo in range(0, n, _CHUNK)]
        out = np.empty(n, dtype=float)
        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                chunks = list(pool.map(lambda sp: self._raw(pts[sp[0]:sp[1]]), spans))
        else:
            chunks = [self._raw(pts[lo:hi]) for lo, hi in spans]
        for (lo, hi), chunk in zip(spans, chunks):
            out[lo:hi] = np.asarray(chunk, dtype=float).reshape(-1)
        return out


class CallableFunction(BlackBoxFunction):
    """Adapter for a vectorized callable ``(n, s) array -> (n,) array``."""

    def __init__(self, fn, dimension: int, label: str, domain=None):
        super().__init__(dimension, label, domain=domain)
        self._fn = fn

    def _raw(self, points: np.ndarray) -> np.ndarray:
        return self._fn(points)


def mixed_point(x, z, u: Subset) -> np.ndarray:
    """Splice a point: coordinates from ``x`` on ``u``, from ``z`` elsewhere."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape != z.shape:
        raise ValueError(f"point shapes differ: {x.shape} vs {z.shape}")
    return np.where(_column_mask(u, x.shape[-1]), x, z)


def mixed_batch(x: np.ndarray, z: np.ndarray, u: Subset) -> np.ndarray:
    """Row-wise :func:`mixed_point` for (n, s) sample arrays."""
    if x.shape != z.shape:
        raise ValueError(f"batch shapes differ: {x.shape} vs {z.shape}")
    return np.where(_column_mask(u, x.shape[1]), x, z)


def _column_mask(u: Subset, s: int) -> np.ndarray:
    mask = np.zeros(s, dtype=bool)
    for j in u.indices:
        if j > s:
            raise ValueError(f"subset index {j} exceeds dimension {s}")
        mask[j - 1] = True
    return mask


def parse_domain(text: str, dimension: int):
    """Parse the CLI domain syntax ``a1:b1,a2:b2,...``.

    A single pair is broadcast to every coordinate.
    """
    pairs = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(":")
        if len(parts) != 2:
            raise ValueError(f"bad domain interval {chunk!r}; expected a:b")
        try:
            a, b = float(parts[0]), float(parts[1])
        except ValueError as exc:
            raise ValueError(f"bad domain interval {chunk!r}: {exc}") from None
        pairs.append((a, b))
    if len(pairs) == 1:
        pairs = pairs * dimension
    if len(pairs) != dimension:
        raise ValueError(
            f"domain lists {len(pairs)} intervals for dimension {dimension}"
        )
    lower = np.array([p[0] for p in pairs])
    upper = np.array([p[1] for p in pairs])
    return lower, upper
