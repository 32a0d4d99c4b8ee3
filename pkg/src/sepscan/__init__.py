"""sepscan: estimate whether a black-box function on the unit cube splits
into an additive sum over disjoint variable blocks, and discover the blocks.

Core workflow: wrap the function (builtin benchmark, expression, callable, or
external process), draw a seeded sample batch, then screen, estimate indices
for chosen partitions, or run the full block discovery. At small dimension
the quadrature oracle cross-checks every Monte Carlo quantity exactly.
"""

__version__ = "0.1.0"

from .benchmarks import builtin_names, make_builtin, true_partition
from .errors import (
    EvaluationError,
    ExpressionError,
    FeasibilityError,
    NumericError,
    PartitionError,
    SepscanError,
    SubsetError,
)
from .estimator import (
    DEFAULT_RULE,
    DecisionRule,
    SeparabilityEstimate,
    decide_zero,
    estimate_gamma,
    estimate_sigma2,
    estimate_tau_lower,
    estimate_tau_upper,
    full_separability_screen,
    pairwise_mean,
    pairwise_sum,
    singleton_partition,
)
from .expressions import ExpressionFunction, parse_expression, pretty_print
from .external import ExternalFunction
from .functions import (
    BlackBoxFunction,
    CallableFunction,
    mixed_batch,
    mixed_point,
    parse_domain,
)
from .oracle import (
    AnovaOracle,
    AnovaReport,
    GaussLegendreRule,
    anova_term,
    default_anchor,
    integrate_out,
    oracle_sigma2,
    oracle_tau_lower,
    oracle_tau_upper,
    project_anchored,
    project_anova,
    separability_residual,
)
from .sampling import SampleBatch, generate_samples, uniform_field
from .search import (
    SearchTrace,
    TraceEntry,
    discover_partition,
    refine_partition,
)
from .subsets import (
    MAX_DIMENSION,
    Partition,
    Subset,
    complement,
    enumerate_candidates,
    parse_partition,
    parse_subset,
    validate_partition,
)

__all__ = [
    "__version__",
    "AnovaOracle",
    "AnovaReport",
    "BlackBoxFunction",
    "CallableFunction",
    "DecisionRule",
    "DEFAULT_RULE",
    "EvaluationError",
    "ExpressionError",
    "ExpressionFunction",
    "ExternalFunction",
    "FeasibilityError",
    "GaussLegendreRule",
    "MAX_DIMENSION",
    "NumericError",
    "Partition",
    "PartitionError",
    "SampleBatch",
    "SearchTrace",
    "SepscanError",
    "SeparabilityEstimate",
    "Subset",
    "SubsetError",
    "TraceEntry",
    "anova_term",
    "builtin_names",
    "complement",
    "decide_zero",
    "default_anchor",
    "discover_partition",
    "enumerate_candidates",
    "estimate_gamma",
    "estimate_sigma2",
    "estimate_tau_lower",
    "estimate_tau_upper",
    "full_separability_screen",
    "generate_samples",
    "integrate_out",
    "make_builtin",
    "mixed_batch",
    "mixed_point",
    "oracle_sigma2",
    "oracle_tau_lower",
    "oracle_tau_upper",
    "pairwise_mean",
    "pairwise_sum",
    "parse_domain",
    "parse_expression",
    "parse_partition",
    "parse_subset",
    "pretty_print",
    "project_anchored",
    "project_anova",
    "refine_partition",
    "separability_residual",
    "singleton_partition",
    "true_partition",
    "uniform_field",
    "validate_partition",
]
