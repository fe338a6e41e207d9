"""Lower-tail bounds for sums of dependent indicators over binomial random subsets."""

from .bounds import (
    BoundResult,
    HolderReport,
    all_bounds,
    harris_lower,
    holder_report,
    janson_upper,
    laplace_lower,
    laplace_ratio_lower,
    lt2,
    lt3,
    lt4,
    lt_main,
)
from .core import (
    EnumerationCapError,
    ExactDistribution,
    FamilyStats,
    GroundSet,
    IndicatorFamily,
    MCEstimate,
    compute_stats,
    exact_distribution,
    exact_laplace,
    exact_lower_tail,
    exact_variance,
    expect_indicator,
    mc_lower_tail,
    read_family,
    write_family,
)
from .decomposition import SymmetricDecomposition
from .phi import phi, phi_neg, varphi2_check, varphi3_factor, varphi_bounds_check

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
