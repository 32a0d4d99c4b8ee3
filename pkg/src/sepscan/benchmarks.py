"""Built-in benchmark functions with known separability structure.

Each entry records the ground-truth partition so that tests (and users) can
check discovery output against a known answer. Fully separable entries map to
all-singleton partitions; entries whose interactions chain every variable
together map to the single trivial block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .functions import BlackBoxFunction, CallableFunction
from .subsets import Partition, Subset, validate_partition

TWO_PI = 2.0 * np.pi


def _sphere(x):
    return np.sum(x * x, axis=1)


def _sumsin(x):
    return np.sum(np.sin(TWO_PI * x), axis=1)


def _paper5(x):
    # Three additive groups: a 1-d term, a bilinear pair, and an oscillatory
    # pair; both pairs carry genuine (non-additive) interactions.
    return x[:, 0] ** 2 + x[:, 1] * x[:, 3] + np.sin(TWO_PI * x[:, 2]) * x[:, 4]


def _bilinear(x):
    return x[:, 0] * x[:, 1]


def _product(x):
    return np.prod(x, axis=1)


def _chain(x):
    return np.sum(x[:, :-1] * x[:, 1:], axis=1)


def _singletons(s: int) -> Partition:
    return validate_partition([Subset.of(j) for j in range(1, s + 1)], s)


def _one_block(s: int) -> Partition:
    return validate_partition([Subset.full(s)], s)


@dataclass(frozen=True)
class Benchmark:
    name: str
    fn: object
    fixed_dimension: int | None
    min_dimension: int
    blocks: object  # callable s -> ground-truth Partition
    summary: str


REGISTRY: dict[str, Benchmark] = {
    "sphere": Benchmark("sphere", _sphere, None, 1, _singletons,
                        "sum of squares; separable into singletons"),
    "sumsin": Benchmark("sumsin", _sumsin, None, 1, _singletons,
                        "sum of sin(2*pi*x_j); separable into singletons"),
    "paper5": Benchmark("paper5", _paper5, 5, 5,
                        lambda s: validate_partition(
                            [Subset.of(1), Subset.of(2, 4), Subset.of(3, 5)], 5),
                        "five variables in blocks {1}, {2,4}, {3,5}"),
    "bilinear": Benchmark("bilinear", _bilinear, 2, 2, _one_block,
                          "x1*x2; not separable"),
    "product": Benchmark("product", _product, None, 1, _one_block,
                         "product of all coordinates; not separable"),
    "chain": Benchmark("chain", _chain, None, 2, _one_block,
                       "sum of x_j*x_{j+1}; no disjoint split exists"),
}


def builtin_names() -> list[str]:
    return sorted(REGISTRY)


def make_builtin(name: str, dimension: int | None = None, domain=None) -> BlackBoxFunction:
    """Instantiate a registered benchmark at the requested dimension."""
    try:
        bench = REGISTRY[name]
    except KeyError:
        raise KeyError(
            f"unknown builtin {name!r}; available: {', '.join(builtin_names())}"
        ) from None
    if bench.fixed_dimension is not None:
        if dimension is not None and dimension != bench.fixed_dimension:
            raise ValueError(
                f"builtin {name!r} is fixed at dimension {bench.fixed_dimension}"
            )
        dimension = bench.fixed_dimension
    if dimension is None:
        raise ValueError(f"builtin {name!r} needs an explicit dimension")
    if dimension < bench.min_dimension:
        raise ValueError(
            f"builtin {name!r} needs dimension >= {bench.min_dimension}"
        )
    return CallableFunction(bench.fn, dimension, f"builtin:{name}", domain=domain)


def true_partition(name: str, dimension: int) -> Partition:
    """Ground-truth block structure of a benchmark at the given dimension."""
    return REGISTRY[name].blocks(dimension)
