"""Variable subsets and partitions of {1, ..., s}.

Subsets are stored as fixed-width bitmasks, which keeps membership and
disjointness tests O(1) and makes enumeration order trivially reproducible.
Variable indices are 1-based everywhere on the public surface (``x1`` is the
first coordinate); bit ``j - 1`` of the mask represents index ``j``.

The hard limit is ``s <= 64``. The subset search over candidates is
exponential in ``s`` and becomes infeasible far below that, so a wider
representation would buy nothing.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import total_ordering

from .errors import PartitionError, SubsetError

MAX_DIMENSION = 64


def _check_dimension(s: int) -> None:
    if not 1 <= s <= MAX_DIMENSION:
        raise SubsetError(f"dimension must be in [1, {MAX_DIMENSION}], got {s}")


@total_ordering
@dataclass(frozen=True)
class Subset:
    """An immutable set of 1-based variable indices, backed by a bitmask."""

    mask: int

    def __post_init__(self):
        if self.mask < 0 or self.mask >> MAX_DIMENSION:
            raise SubsetError(f"subset mask out of range: {self.mask:#x}")

    @classmethod
    def of(cls, *indices: int) -> "Subset":
        return cls.from_indices(indices)

    @classmethod
    def from_indices(cls, indices) -> "Subset":
        mask = 0
        for j in indices:
            if not 1 <= j <= MAX_DIMENSION:
                raise SubsetError(f"variable index {j} out of range [1, {MAX_DIMENSION}]")
            mask |= 1 << (j - 1)
        return cls(mask)

    @classmethod
    def full(cls, s: int) -> "Subset":
        _check_dimension(s)
        return cls((1 << s) - 1)

    @classmethod
    def empty(cls) -> "Subset":
        return cls(0)

    @property
    def indices(self) -> tuple[int, ...]:
        """Member indices in strictly increasing order."""
        m, out, j = self.mask, [], 1
        while m:
            if m & 1:
                out.append(j)
            m >>= 1
            j += 1
        return tuple(out)

    def __len__(self) -> int:
        return self.mask.bit_count()

    def __contains__(self, j: int) -> bool:
        return 1 <= j <= MAX_DIMENSION and bool(self.mask >> (j - 1) & 1)

    def __iter__(self):
        return iter(self.indices)

    def __bool__(self) -> bool:
        return self.mask != 0

    def __lt__(self, other: "Subset") -> bool:
        # Orders by smallest element first, then lexicographically; used only
        # for stable presentation of block lists.
        return self.mask != other.mask and (self.indices < other.indices)

    def union(self, other: "Subset") -> "Subset":
        return Subset(self.mask | other.mask)

    def intersection(self, other: "Subset") -> "Subset":
        return Subset(self.mask & other.mask)

    def difference(self, other: "Subset") -> "Subset":
        return Subset(self.mask & ~other.mask)

    def isdisjoint(self, other: "Subset") -> bool:
        return not self.mask & other.mask

    def issubset(self, other: "Subset") -> bool:
        return not self.mask & ~other.mask

    def within(self, s: int) -> bool:
        _check_dimension(s)
        return not self.mask >> s

    def __str__(self) -> str:
        return "{" + ",".join(str(j) for j in self.indices) + "}"


def complement(u: Subset, s: int) -> Subset:
    """Return {1, ..., s} minus ``u``.

    Raises SubsetError if ``u`` contains an index above ``s``.
    """
    _check_dimension(s)
    if not u.within(s):
        bad = [j for j in u.indices if j > s]
        raise SubsetError(f"subset indices {bad} exceed dimension {s}")
    return Subset(((1 << s) - 1) & ~u.mask)


@dataclass(frozen=True)
class Partition:
    """Disjoint nonempty blocks covering {1, ..., s}, sorted by smallest element.

    Construct through :func:`validate_partition`; direct construction skips
    validation and is reserved for internal callers that already hold a
    validated block list.
    """

    blocks: tuple[Subset, ...]
    dimension: int

    @property
    def block_count(self) -> int:
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    def __str__(self) -> str:
        return "|".join(str(b) for b in self.blocks)


def validate_partition(blocks, s: int) -> Partition:
    """Check the three partition properties and return the canonical Partition.

    Blocks must be nonempty, pairwise disjoint, and jointly cover {1, ..., s}.
    The returned partition stores blocks sorted by their smallest element.
    """
    _check_dimension(s)
    blocks = [b if isinstance(b, Subset) else Subset.from_indices(b) for b in blocks]
    if not blocks:
        raise PartitionError("a partition needs at least one block")
    for b in blocks:
        if not b:
            raise PartitionError("empty block is not allowed")
        if not b.within(s):
            bad = [j for j in b.indices if j > s]
            raise PartitionError(f"block {b} has indices {bad} beyond dimension {s}")
    seen = 0
    for b in blocks:
        dup = seen & b.mask
        if dup:
            offenders = [other for other in blocks if other is not b and other.mask & b.mask]
            raise PartitionError(
                f"block {b} overlaps {', '.join(str(o) for o in offenders)} "
                f"on index {Subset(dup).indices[0]}"
            )
        seen |= b.mask
    missing = Subset(((1 << s) - 1) & ~seen)
    if missing:
        raise PartitionError(f"indices {missing} are covered by no block")
    ordered = tuple(sorted(blocks, key=lambda b: b.indices[0]))
    return Partition(blocks=ordered, dimension=s)


def enumerate_candidates(r: int, excluded: Subset) -> list[Subset]:
    """Candidate subsets ``v + {r}`` for every v drawn from {1,...,r-1} minus ``excluded``.

    ``v`` runs in binary-counting order over the allowed indices taken
    ascending, so the empty set comes first and the order is a pure function
    of ``(r, excluded)``. With nothing excluded this yields ``2^(r-1)``
    candidates.
    """
    if r < 1:
        raise SubsetError(f"rank must be >= 1, got {r}")
    below = Subset((1 << (r - 1)) - 1)
    if not excluded.issubset(below):
        raise SubsetError(f"excluded set {excluded} must lie within {{1,...,{r - 1}}}")
    allowed = below.difference(excluded).indices
    out = []
    for counter in range(1 << len(allowed)):
        mask = 1 << (r - 1)
        for bit, j in enumerate(allowed):
            if counter >> bit & 1:
                mask |= 1 << (j - 1)
        out.append(Subset(mask))
    return out


# --- textual syntax used by the CLI -----------------------------------------
#
# subset:    {2,4}
# partition: {1}|{2,4}|{3,5}


def parse_subset(text: str) -> Subset:
    t = text.strip()
    if not (t.startswith("{") and t.endswith("}")):
        raise SubsetError(f"subset must be written in braces, e.g. {{2,4}}; got {text!r}")
    body = t[1:-1].strip()
    if not body:
        return Subset.empty()
    indices = []
    for part in body.split(","):
        part = part.strip()
        if not part.isdigit():
            raise SubsetError(f"bad index {part!r} in subset {text!r}")
        indices.append(int(part))
    if len(set(indices)) != len(indices):
        raise SubsetError(f"duplicate index in subset {text!r}")
    return Subset.from_indices(indices)


def parse_partition(text: str, s: int) -> Partition:
    parts = [p for p in text.split("|")]
    blocks = [parse_subset(p) for p in parts]
    return validate_partition(blocks, s)
