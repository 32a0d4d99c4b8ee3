"""Exact quadrature engine: projections, component functions and variances,
lower/upper sensitivity indices, and the pointwise separability residual.

Only usable at small dimension (the tensor grid has n_q^s points), where it
serves as ground truth for the Monte Carlo estimators. Two layers:

* composable function objects (``project_anova``, ``project_anchored``,
  ``anova_term``) that evaluate at arbitrary points by nested quadrature;
* :class:`AnovaOracle`, a grid engine that evaluates the function once on the
  tensor grid and derives every projection, moment, and component variance by
  weight contractions, which is the layer the tests and the CLI lean on.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from weakref import WeakKeyDictionary

import numpy as np

from .errors import FeasibilityError, SubsetError
from .functions import BlackBoxFunction, mixed_batch
from .subsets import Partition, Subset, complement

DEFAULT_NODES = 32
DEFAULT_BUDGET = 10**8

# Largest point batch materialized at once by the quadrature loops.
_BATCH_CAP = 1 << 18


class GaussLegendreRule:
    """One-dimensional Gauss-Legendre rule mapped to [0, 1].

    Exact for polynomials of degree up to 2*count - 1; weights are positive
    and sum to one.
    """

    def __init__(self, count: int = DEFAULT_NODES):
        if count < 1:
            raise ValueError(f"node count must be >= 1, got {count}")
        nodes, weights = np.polynomial.legendre.leggauss(count)
        self.nodes = (nodes + 1.0) / 2.0
        self.weights = weights / 2.0
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)
        if abs(float(self.weights.sum()) - 1.0) > 1e-14:
            raise RuntimeError("quadrature weights failed to normalize")

    @property
    def count(self) -> int:
        return self.nodes.size

    def __repr__(self) -> str:
        return f"GaussLegendreRule(count={self.count})"


def default_anchor(s: int) -> np.ndarray:
    """Centre of the cube; interior, so anchored cuts avoid boundary blowups."""
    return np.full(s, 0.5)


def _check_anchor(t, s: int) -> np.ndarray:
    t = np.asarray(t, dtype=float).reshape(-1)
    if t.size != s:
        raise ValueError(f"anchor has {t.size} coordinates, expected {s}")
    if t.size and (t.min() < 0.0 or t.max() > 1.0):
        raise ValueError("anchor must lie in the unit cube")
    return t


def integrate_out(
    f: BlackBoxFunction,
    out: Subset,
    rule: GaussLegendreRule,
    points: np.ndarray,
    budget: int = DEFAULT_BUDGET,
) -> np.ndarray:
    """Integrate ``f`` over the coordinates in ``out`` at each given point.

    Tensor-product quadrature: every point costs count(rule)^|out| raw
    evaluations. Chunked so neither the combination grid nor the tiled batch
    exceeds a fixed size, with fixed chunk boundaries for reproducibility.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != f.dimension:
        raise ValueError(f"expected points of shape (n, {f.dimension})")
    if not out:
        return f.evaluate_batch(pts)
    if not out.within(f.dimension):
        raise SubsetError(f"subset {out} exceeds dimension {f.dimension}")
    axes = np.array([j - 1 for j in out.indices])
    k = axes.size
    combos_total = rule.count**k
    if combos_total > budget:
        raise FeasibilityError(
            f"integrating out {k} coordinates needs {rule.count}^{k} = "
            f"{combos_total} evaluations per point, over the budget of {budget}"
        )
    combo_shape = (rule.count,) * k
    res = np.zeros(pts.shape[0])
    for cstart in range(0, combos_total, _BATCH_CAP):
        cstop = min(cstart + _BATCH_CAP, combos_total)
        coords = np.unravel_index(np.arange(cstart, cstop), combo_shape)
        span = cstop - cstart
        combos = np.empty((span, k))
        wprod = np.ones(span)
        for a in range(k):
            combos[:, a] = rule.nodes[coords[a]]
            wprod *= rule.weights[coords[a]]
        rows = max(1, _BATCH_CAP // span)
        for rstart in range(0, pts.shape[0], rows):
            block = pts[rstart : rstart + rows]
            tiled = np.repeat(block, span, axis=0)
            tiled[:, axes] = np.tile(combos, (block.shape[0], 1))
            vals = f.evaluate_batch(tiled).reshape(block.shape[0], span)
            res[rstart : rstart + rows] += vals @ wprod
    return res


class _AxisProjection(BlackBoxFunction):
    """f with one coordinate integrated out; the result ignores that input."""

    def __init__(self, base: BlackBoxFunction, j: int, rule: GaussLegendreRule):
        super().__init__(base.dimension, f"avg[x{j}]({base.label})")
        self._base = base
        self._j = j
        self._rule = rule

    def _raw(self, points: np.ndarray) -> np.ndarray:
        return integrate_out(self._base, Subset.of(self._j), self._rule, points)


class _AxisAnchor(BlackBoxFunction):
    """f with one coordinate pinned to the anchor value."""

    def __init__(self, base: BlackBoxFunction, j: int, value: float):
        super().__init__(base.dimension, f"fix[x{j}]({base.label})")
        self._base = base
        self._j = j
        self._value = value

    def _raw(self, points: np.ndarray) -> np.ndarray:
        pinned = np.array(points, copy=True)
        pinned[:, self._j - 1] = self._value
        return self._base.evaluate_batch(pinned)


def project_anova(
    f: BlackBoxFunction, j: int, rule: GaussLegendreRule | None = None
) -> BlackBoxFunction:
    """Averaging projection: x -> integral of f over x_j."""
    if not 1 <= j <= f.dimension:
        raise ValueError(f"coordinate {j} out of range [1, {f.dimension}]")
    return _AxisProjection(f, j, rule or GaussLegendreRule())


def project_anchored(f: BlackBoxFunction, j: int, t) -> BlackBoxFunction:
    """Substitution projection: x -> f(x with x_j := t_j). Idempotent."""
    if not 1 <= j <= f.dimension:
        raise ValueError(f"coordinate {j} out of range [1, {f.dimension}]")
    anchor = _check_anchor(t, f.dimension)
    return _AxisAnchor(f, j, float(anchor[j - 1]))


# Shared projection caches, one per (function, node count). Keyed weakly so a
# dropped function releases its cache.
_PROJECTION_TABLES: "WeakKeyDictionary[BlackBoxFunction, dict]" = WeakKeyDictionary()


class _ProjectionTable:
    """Memoized values of the keep-only-u projections of one function.

    Keys are (kept mask, bytes of the kept coordinates), so a point revisited
    by any recursion level reuses the old quadrature instead of redoing it.
    """

    def __init__(self, f: BlackBoxFunction, rule: GaussLegendreRule):
        self.f = f
        self.rule = rule
        self._memo: dict = {}

    def project(self, keep: Subset, points: np.ndarray) -> np.ndarray:
        s = self.f.dimension
        kept_axes = [j - 1 for j in keep.indices]
        out = complement(keep, s)
        res = np.empty(points.shape[0])
        keys = []
        missing = []
        for i in range(points.shape[0]):
            key = (keep.mask, points[i, kept_axes].tobytes())
            keys.append(key)
            known = self._memo.get(key)
            if known is None:
                missing.append(i)
            else:
                res[i] = known
        if missing:
            fresh = integrate_out(self.f, out, self.rule, points[missing])
            for i, value in zip(missing, fresh):
                self._memo[keys[i]] = float(value)
                res[i] = value
        return res


def _table_for(f: BlackBoxFunction, rule: GaussLegendreRule) -> _ProjectionTable:
    per_function = _PROJECTION_TABLES.get(f)
    if per_function is None:
        per_function = {}
        _PROJECTION_TABLES[f] = per_function
    table = per_function.get(rule.count)
    if table is None:
        table = _ProjectionTable(f, rule)
        per_function[rule.count] = table
    return table


class _AnovaTerm(BlackBoxFunction):
    """The component function f_u, evaluated by the subtractive recursion.

    f_u(x) = (keep-only-u projection of f)(x) minus every strictly smaller
    term, down to the constant f_empty = full integral. Projection values are
    memoized across calls and across sibling terms of the same function.
    """

    def __init__(self, base: BlackBoxFunction, u: Subset, rule: GaussLegendreRule):
        super().__init__(base.dimension, f"term[{u}]({base.label})")
        self._u = u
        self._table = _table_for(base, rule)

    def _raw(self, points: np.ndarray) -> np.ndarray:
        return self._term(self._u.mask, points, {})

    def _term(self, mask: int, points: np.ndarray, memo: dict) -> np.ndarray:
        known = memo.get(mask)
        if known is not None:
            return known
        vals = self._table.project(Subset(mask), points)
        if mask:
            v = (mask - 1) & mask
            while True:
                vals = vals - self._term(v, points, memo)
                if not v:
                    break
                v = (v - 1) & mask
        memo[mask] = vals
        return vals


def anova_term(
    f: BlackBoxFunction, u: Subset, rule: GaussLegendreRule | None = None
) -> BlackBoxFunction:
    """Component function f_u of the variance decomposition of ``f``."""
    if not u.within(f.dimension):
        raise SubsetError(f"subset {u} exceeds dimension {f.dimension}")
    return _AnovaTerm(f, u, rule or GaussLegendreRule())


@dataclass
class AnovaReport:
    """Exact decomposition summary: mean, component variances, total."""

    f0: float
    sigma2: float
    variances: dict
    dimension: int
    order_cap: int | None = None

    def lower_index(self, u: Subset) -> float:
        if self.order_cap is not None and self.order_cap < len(u):
            raise ValueError(
                f"report capped at order {self.order_cap}, need order {len(u)}"
            )
        return sum(var for v, var in self.variances.items() if v.issubset(u))

    def upper_index(self, u: Subset) -> float:
        if self.order_cap is not None and self.order_cap < self.dimension:
            raise ValueError("upper index needs the uncapped variance map")
        return sum(var for v, var in self.variances.items() if not v.isdisjoint(u))


class AnovaOracle:
    """Grid engine for one function: f is evaluated once on the tensor grid,
    all quantities are then weight contractions of that grid.

    Refuses to build when count(rule)^s exceeds the evaluation budget.
    """

    def __init__(
        self,
        f: BlackBoxFunction,
        rule: GaussLegendreRule | None = None,
        budget: int = DEFAULT_BUDGET,
    ):
        self.f = f
        self.rule = rule or GaussLegendreRule()
        s = f.dimension
        total = self.rule.count**s
        if total > budget:
            raise FeasibilityError(
                f"oracle grid needs {self.rule.count}^{s} = {total} evaluations, "
                f"over the budget of {budget}; reduce the dimension or the node count"
            )
        self._full_mask = (1 << s) - 1
        self._grids = {self._full_mask: self._evaluate_grid()}
        self._moments: dict[int, float] = {}
        self._sigmas: dict[int, float] = {}

    def _evaluate_grid(self) -> np.ndarray:
        s, n_q = self.f.dimension, self.rule.count
        shape = (n_q,) * s
        total = n_q**s
        out = np.empty(total)
        for start in range(0, total, _BATCH_CAP):
            stop = min(start + _BATCH_CAP, total)
            coords = np.unravel_index(np.arange(start, stop), shape)
            pts = np.empty((stop - start, s))
            for j in range(s):
                pts[:, j] = self.rule.nodes[coords[j]]
            out[start:stop] = self.f.evaluate_batch(pts)
        return out.reshape(shape)

    def _projection(self, mask: int) -> np.ndarray:
        """Grid of the keep-only-``mask`` projection, axes in index order.

        Contracts from the smallest cached superset grid, so filling the
        cache large-to-small (as variance_map does) costs one axis
        contraction per subset instead of a full-grid pass each.
        """
        grid = self._grids.get(mask)
        if grid is not None:
            return grid
        base_mask, extra = self._full_mask, self.f.dimension - mask.bit_count()
        for m, g in self._grids.items():
            if m & mask == mask and m.bit_count() - mask.bit_count() < extra:
                base_mask, extra = m, m.bit_count() - mask.bit_count()
        grid = self._grids[base_mask]
        w = self.rule.weights
        base_indices = Subset(base_mask).indices
        for pos in reversed(range(len(base_indices))):
            if not (mask >> (base_indices[pos] - 1)) & 1:
                grid = np.tensordot(grid, w, axes=([pos], [0]))
        self._grids[mask] = grid
        return grid

    def _second_moment(self, mask: int) -> float:
        got = self._moments.get(mask)
        if got is None:
            sq = np.asarray(self._projection(mask)) ** 2
            w = self.rule.weights
            for axis in reversed(range(sq.ndim)):
                sq = np.tensordot(sq, w, axes=([axis], [0]))
            got = float(sq)
            self._moments[mask] = got
        return got

    @staticmethod
    def _clip(value: float, what: str) -> float:
        if value < 0.0:
            warnings.warn(
                f"clipped a tiny negative {what} to zero (quadrature roundoff)",
                RuntimeWarning,
                stacklevel=3,
            )
            return 0.0
        return value

    def mean(self) -> float:
        return float(self._projection(0))

    def sigma2(self) -> float:
        raw = self._second_moment(self._full_mask) - self._second_moment(0)
        return self._clip(raw, "variance")

    def lower_index(self, u: Subset) -> float:
        """Variance explained by ``u`` alone: second moment of the kept
        projection minus the squared mean."""
        self._check_subset(u)
        raw = self._second_moment(u.mask) - self._second_moment(0)
        return self._clip(raw, "lower index")

    def upper_index(self, u: Subset) -> float:
        """Variance touching ``u`` in any way: sum of component variances over
        every subset intersecting ``u``. Deliberately not computed by
        subtraction from sigma2, so the complementarity identity stays a real
        cross-check between two routes."""
        self._check_subset(u)
        if u.mask == self._full_mask:
            return self.sigma2()
        self.variance_map()
        total = 0.0
        for mask in range(1, self._full_mask + 1):
            if mask & u.mask:
                total += self._sigmas[mask]
        return total

    def component_variance(self, u: Subset) -> float:
        """sigma^2_u by inclusion-exclusion over kept-projection moments."""
        if not u.within(self.f.dimension):
            raise SubsetError(f"subset {u} exceeds dimension {self.f.dimension}")
        if not u:
            return 0.0
        got = self._sigmas.get(u.mask)
        if got is None:
            size = len(u)
            total = 0.0
            v = u.mask
            while True:
                if (size - v.bit_count()) % 2:
                    total -= self._second_moment(v)
                else:
                    total += self._second_moment(v)
                if not v:
                    break
                v = (v - 1) & u.mask
            got = self._clip(total, "component variance")
            self._sigmas[u.mask] = got
        return got

    def variance_map(self, max_order: int | None = None) -> dict:
        """All component variances up to ``max_order`` (default: all orders),
        keyed by subset in mask order."""
        s = self.f.dimension
        wanted = [
            m
            for m in range(1, 1 << s)
            if max_order is None or m.bit_count() <= max_order
        ]
        # warm the projection cache large-to-small; see _projection
        for m in sorted(wanted, key=lambda m: (-m.bit_count(), m)):
            self._second_moment(m)
        return {Subset(m): self.component_variance(Subset(m)) for m in wanted}

    def report(self, max_order: int | None = None) -> AnovaReport:
        return AnovaReport(
            f0=self.mean(),
            sigma2=self.sigma2(),
            variances=self.variance_map(max_order),
            dimension=self.f.dimension,
            order_cap=max_order,
        )

    def gamma2(self, partition: Partition) -> float:
        """Exact separability index: sigma2 minus each block's lower index."""
        if partition.dimension != self.f.dimension:
            raise ValueError("partition dimension does not match the function")
        total = self.sigma2()
        for block in partition.blocks:
            total -= self.lower_index(block)
        return total

    def term_grid(self, u: Subset) -> np.ndarray:
        """Values of the component function f_u on the grid over u's axes."""
        if not u.within(self.f.dimension):
            raise SubsetError(f"subset {u} exceeds dimension {self.f.dimension}")
        out = np.zeros((self.rule.count,) * len(u))
        size = len(u)
        v = u.mask
        while True:
            embedded = self._embed(self._projection(v), Subset(v), u)
            if (size - v.bit_count()) % 2:
                out = out - embedded
            else:
                out = out + embedded
            if not v:
                break
            v = (v - 1) & u.mask
        return out

    def _embed(self, grid, sub: Subset, into: Subset) -> np.ndarray:
        shape = tuple(self.rule.count if j in sub else 1 for j in into.indices)
        return np.asarray(grid).reshape(shape)

    def zero_mean_defect(self, u: Subset) -> float:
        """Largest |integral of f_u over any one of its own coordinates|."""
        self._check_subset(u)
        grid = self.term_grid(u)
        w = self.rule.weights
        worst = 0.0
        for pos in range(len(u)):
            contracted = np.tensordot(grid, w, axes=([pos], [0]))
            worst = max(worst, float(np.max(np.abs(np.atleast_1d(contracted)))))
        return worst

    def orthogonality_defect(self, u: Subset, v: Subset) -> float:
        """|inner product of f_u and f_v| for distinct subsets."""
        if u.mask == v.mask:
            raise ValueError("orthogonality defect needs two distinct subsets")
        union = u.union(v)
        prod = self._embed(self.term_grid(u), u, union) * self._embed(
            self.term_grid(v), v, union
        )
        w = self.rule.weights
        for axis in reversed(range(prod.ndim)):
            prod = np.tensordot(prod, w, axes=([axis], [0]))
        return abs(float(prod))

    def _check_subset(self, u: Subset) -> None:
        if not u:
            raise SubsetError("subset must be nonempty")
        if not u.within(self.f.dimension):
            raise SubsetError(f"subset {u} exceeds dimension {self.f.dimension}")


def oracle_sigma2(
    f: BlackBoxFunction,
    rule: GaussLegendreRule | None = None,
    budget: int = DEFAULT_BUDGET,
    oracle: AnovaOracle | None = None,
) -> float:
    engine = oracle if oracle is not None else AnovaOracle(f, rule, budget)
    return engine.sigma2()


def oracle_tau_lower(
    f: BlackBoxFunction,
    u: Subset,
    rule: GaussLegendreRule | None = None,
    budget: int = DEFAULT_BUDGET,
    oracle: AnovaOracle | None = None,
) -> float:
    engine = oracle if oracle is not None else AnovaOracle(f, rule, budget)
    return engine.lower_index(u)


def oracle_tau_upper(
    f: BlackBoxFunction,
    u: Subset,
    rule: GaussLegendreRule | None = None,
    budget: int = DEFAULT_BUDGET,
    oracle: AnovaOracle | None = None,
) -> float:
    engine = oracle if oracle is not None else AnovaOracle(f, rule, budget)
    return engine.upper_index(u)


def separability_residual(
    f: BlackBoxFunction,
    partition: Partition,
    points,
    mode: str = "anchored",
    anchor=None,
    rule: GaussLegendreRule | None = None,
    budget: int = DEFAULT_BUDGET,
):
    """Pointwise residual of the block-separability identity.

    anchored mode: f(x) + (m-1) f(t) - sum_j f(x on u_j, t elsewhere), with
    t the anchor (cube centre by default). Costs m+1 evaluations per point
    and vanishes everywhere exactly when f splits along the blocks.

    anova mode: the same combination with averaging projections in place of
    the anchored cuts; each block costs count^(s - |block|) evaluations per
    point, so this is strictly a small-s verification tool.

    Accepts one point or an (n, s) batch; returns a float or an array to
    match.
    """
    if partition.dimension != f.dimension:
        raise ValueError("partition dimension does not match the function")
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    m = partition.block_count
    s = f.dimension
    res = f.evaluate_batch(pts)
    if mode == "anchored":
        t = default_anchor(s) if anchor is None else _check_anchor(anchor, s)
        if m > 1:
            res = res + (m - 1) * f.evaluate(t)
        anchored = np.broadcast_to(t, pts.shape)
        for block in partition.blocks:
            res = res - f.evaluate_batch(mixed_batch(pts, anchored, block))
    elif mode == "anova":
        quad = rule or GaussLegendreRule()
        if m > 1:
            f0 = integrate_out(f, Subset.full(s), quad, pts[:1], budget)[0]
            res = res + (m - 1) * f0
        for block in partition.blocks:
            res = res - integrate_out(f, complement(block, s), quad, pts, budget)
    else:
        raise ValueError(f"unknown residual mode {mode!r}")
    return float(res[0]) if single else res
