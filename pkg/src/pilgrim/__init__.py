"""Pilgrim-process laboratory.

Sequential simulation, exact densities, predictive survival curves, and
exact equivalence checks linking the toll-and-tax survival process to the
Ewens sampling formula, the Indian buffet process, and beta-splitting
cladograms.
"""

from .exponent import (
    CharacteristicExponent,
    ContinuityReport,
    ForwardDifferenceTable,
    ModelParams,
    SignedLog,
    continuity_check,
    forward_difference,
    forward_difference_alternating,
    forward_difference_signed,
    index_from_continuity,
    levy_density,
    splitting_normalization,
    splitting_prob,
    splitting_prob_from_index,
    zeta_continuous,
    zeta_discrete,
)
from .events import TieProfile, tie_profile
from .monopoly import (
    HotelLedger,
    PredictiveCurve,
    StepFunction,
    advance_one_pilgrim,
    predictive_survival,
    replicate_rng,
    simulate,
    simulate_from_funds,
    taxes_only_survival,
    toll_total,
    wealth_report,
)
from .density import (
    conditional_hazard,
    log_density_general,
    log_density_pilgrim,
    voyage_log_density,
)
from .partitions import (
    OrderedPartition,
    Partition,
    crp_sample,
    esf_logprob,
    esf_prob,
    extract_ordered_partition,
    induced_partition_prob,
    ordered_partition_logprob,
    ordered_partition_total_prob,
    size_biased_order,
    stick_breaking_sample,
    tv_distance_to_esf,
    two_param_crp_sample,
)
from .voyage import (
    FeatureAllocation,
    ibp_sample,
    ibp_pattern_probs,
    simulate_voyage,
    voyage_ibp_distance,
    voyage_pattern_probs,
)
from .cladogram import (
    Cladogram,
    beta_split_prob,
    branch_prob_consecutive,
    branch_prob_right,
    continuity_equality_check,
    holding_rates,
    parse_newick,
    sample_cladogram,
    to_newick,
)
from .stats import (
    block_count_normality,
    expected_blocks_exact,
    expected_blocks_recursion,
    growth_diagnostics,
    occupancy_spectrum,
    power_law_tail,
    sqrt_growth_fit,
)

__version__ = "0.1.0"
