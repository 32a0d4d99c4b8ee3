"""Block-structure discovery: find the finest additive split of a black-box
function from separability tests on candidate subsets.

The search walks ranks r = 1..s-1. At each rank it proposes candidates
u = v + {r}, with v running in binary-counting order over the unconsumed
indices below r, and tests each with the two-block index estimate for
(u, complement). The first accepted candidate consumes r and every index in
it; whatever is left at the end forms the final block. Fully separable
functions cost s - 1 tests, inseparable ones 2^(s-1) - 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .estimator import (
    DEFAULT_RULE,
    DecisionRule,
    SeparabilityEstimate,
    estimate_gamma,
)
from .functions import BlackBoxFunction
from .sampling import SampleBatch
from .subsets import (
    Partition,
    Subset,
    complement,
    enumerate_candidates,
    validate_partition,
)

DEFAULT_CANDIDATE_BUDGET = 100_000


@dataclass
class TraceEntry:
    """One tested candidate and the verdict on it."""

    candidate: Subset
    gamma2: float
    residual_max: float
    stderr: float
    decision: str

    def to_dict(self) -> dict:
        return {
            "candidate": str(self.candidate),
            "gamma2": self.gamma2,
            "residual_max": self.residual_max,
            "stderr": self.stderr,
            "decision": self.decision,
        }


@dataclass
class SearchTrace:
    entries: list[TraceEntry] = field(default_factory=list)
    candidates_tested: int = 0
    evaluations: int = 0
    partition: Partition | None = None
    truncated: bool = False
    invalid_blocks: tuple[Subset, ...] = ()
    verification: SeparabilityEstimate | None = None

    def to_dict(self) -> dict:
        return {
            "entries": [e.to_dict() for e in self.entries],
            "candidates_tested": self.candidates_tested,
            "evaluations": self.evaluations,
            "partition": None if self.partition is None else str(self.partition),
            "truncated": self.truncated,
            "invalid_blocks": [str(b) for b in self.invalid_blocks],
            "verification": None
            if self.verification is None
            else self.verification.to_dict(),
        }


class _Budget:
    def __init__(self, limit: int):
        self.limit = limit
        self.spent = 0

    def exhausted(self) -> bool:
        return self.spent >= self.limit

    def charge(self) -> None:
        self.spent += 1


def _test_candidate(
    f: BlackBoxFunction,
    u: Subset,
    batch: SampleBatch,
    rule: DecisionRule,
    entries: list[TraceEntry],
) -> bool:
    """Two-block separability test for u against everything else."""
    pair = validate_partition([u, complement(u, f.dimension)], f.dimension)
    est = estimate_gamma(f, pair, batch, rule)
    entries.append(
        TraceEntry(u, est.gamma2, est.residual_max, est.stderr, est.decision)
    )
    return est.decision == "separable"


def discover_partition(
    f: BlackBoxFunction,
    batch: SampleBatch,
    rule: DecisionRule = DEFAULT_RULE,
    candidate_budget: int = DEFAULT_CANDIDATE_BUDGET,
    verify: bool = False,
) -> tuple[Partition, SearchTrace]:
    """Estimate the block count and the blocks themselves.

    Returns the partition and a full trace of every candidate tested, in
    order, with the per-candidate statistics. If the candidate budget runs
    out the trace is flagged truncated and the partition lumps everything
    not yet split off into the final block.

    With ``verify`` set, the returned partition is re-checked with one full
    m-block estimate on the same batch and the result attached to the trace;
    off by default so the evaluation count stays exactly
    2n + 2n * candidates_tested on a fresh batch.
    """
    s = f.dimension
    start = f.eval_count
    entries: list[TraceEntry] = []
    budget = _Budget(candidate_budget)
    accepted: list[Subset] = []
    accepted_mask = 0
    truncated = False

    for r in range(1, s):
        if (accepted_mask >> (r - 1)) & 1:
            continue  # r already sits inside an accepted block
        excluded = Subset(accepted_mask & ((1 << (r - 1)) - 1))
        for u in enumerate_candidates(r, excluded):
            if budget.exhausted():
                truncated = True
                break
            budget.charge()
            if _test_candidate(f, u, batch, rule, entries):
                accepted.append(u)
                accepted_mask |= u.mask
                break
        if truncated:
            break

    remainder = Subset(((1 << s) - 1) & ~accepted_mask)
    blocks = accepted + ([remainder] if remainder else [])
    partition = validate_partition(blocks, s)
    trace = SearchTrace(
        entries=entries,
        candidates_tested=len(entries),
        evaluations=f.eval_count - start,
        partition=partition,
        truncated=truncated,
    )
    if verify:
        trace.verification = estimate_gamma(f, partition, batch, rule)
        trace.evaluations = f.eval_count - start
    return partition, trace


def refine_partition(
    f: BlackBoxFunction,
    batch: SampleBatch,
    rule: DecisionRule = DEFAULT_RULE,
    prior: Partition | None = None,
    candidate_budget: int = DEFAULT_CANDIDATE_BUDGET,
    verify: bool = False,
) -> tuple[Partition, SearchTrace]:
    """Re-check a claimed partition and split its blocks further if possible.

    Phase 1 tests every prior block with the two-block estimate (each
    unordered pair only once, so a two-block prior is one test). Any failure
    flags the offending blocks and returns the prior unchanged. Phase 2 then
    reruns the discovery loop inside each multi-index block, testing
    sub-candidates against the full complement. A trivial one-block prior
    reduces to plain discovery.
    """
    s = f.dimension
    if prior is None:
        prior = validate_partition([Subset.full(s)], s)
    if prior.dimension != s:
        raise ValueError("prior partition dimension does not match the function")
    start = f.eval_count
    entries: list[TraceEntry] = []
    budget = _Budget(candidate_budget)
    full_mask = (1 << s) - 1

    pair_verdicts: dict[tuple[int, int], bool] = {}
    invalid: list[Subset] = []
    truncated = False
    for block in prior.blocks:
        if block.mask == full_mask:
            continue  # a single all-variable block constrains nothing
        rest = complement(block, s)
        key = (min(block.mask, rest.mask), max(block.mask, rest.mask))
        if key not in pair_verdicts:
            if budget.exhausted():
                truncated = True
                break
            budget.charge()
            pair_verdicts[key] = _test_candidate(f, block, batch, rule, entries)
        if not pair_verdicts[key]:
            invalid.append(block)

    if invalid or truncated:
        return prior, SearchTrace(
            entries=entries,
            candidates_tested=len(entries),
            evaluations=f.eval_count - start,
            partition=prior,
            truncated=truncated,
            invalid_blocks=tuple(invalid),
        )

    refined: list[Subset] = []
    for position, block in enumerate(prior.blocks):
        members = block.indices
        if len(members) == 1:
            refined.append(block)
            continue
        sub_mask = 0
        for r in members[:-1]:
            if (sub_mask >> (r - 1)) & 1:
                continue
            below = (1 << (r - 1)) - 1
            allowed = block.mask & below & ~sub_mask
            excluded = Subset(below & ~allowed)
            for u in enumerate_candidates(r, excluded):
                if budget.exhausted():
                    truncated = True
                    break
                budget.charge()
                if _test_candidate(f, u, batch, rule, entries):
                    refined.append(u)
                    sub_mask |= u.mask
                    break
            if truncated:
                break
        leftover = Subset(block.mask & ~sub_mask)
        if leftover:
            refined.append(leftover)
        if truncated:
            # keep the prior blocks the budget never reached
            refined.extend(prior.blocks[position + 1 :])
            break

    partition = validate_partition(refined, s)
    trace = SearchTrace(
        entries=entries,
        candidates_tested=len(entries),
        evaluations=f.eval_count - start,
        partition=partition,
        truncated=truncated,
    )
    if verify:
        trace.verification = estimate_gamma(f, partition, batch, rule)
        trace.evaluations = f.eval_count - start
    return partition, trace
