"""Bounds and simulators for two-decoder variable-length stop-feedback coding.

The public API mirrors the pipeline: define channels and the shared optimal
input (:mod:`vlsf.channel`), bound tail probabilities of the accumulated
information density over input types (:mod:`vlsf.tailprob`), evaluate and
invert the converse blocklength bound (:mod:`vlsf.converse`), simulate and
design achievable points (:mod:`vlsf.achieve`), compute second-order
expansion coefficients (:mod:`vlsf.asym`), and study the underlying
max-of-two-walks stopping problem (:mod:`vlsf.walks`).
"""

from ._backend import BACKEND, available_backends
from .achieve import (
    DesignPoint,
    SimConfig,
    StoppingEstimate,
    design_achievable_point,
    simulate_stopping,
    stop_error_bound,
)
from .asym import (
    coupled_gauss_quantile,
    critical_epsilon_symmetric,
    expected_min_gauss,
    expected_min_max_gauss,
    second_order_curves,
    sqrt_coeff_achievability,
    sqrt_coeff_converse,
    symmetric_converse_bracket,
)
from .channel import (
    BroadcastPair,
    ChannelStatistics,
    DMChannel,
    InputDistribution,
    bec,
    bsc,
    channel_statistics,
    info_density,
    mutual_information,
    optimize_common_input,
    output_marginal,
    parse_channel,
    zchannel,
)
from .converse import (
    BoundPoint,
    ConverseBound,
    ConverseConfig,
    InversionResult,
    log_threshold,
    max_log_codebook,
    min_avg_blocklength,
    stop_prob_bound,
)
from .errors import (
    BracketFailure,
    CommonMaximizerViolation,
    GridOverflow,
    NonpositiveDrift,
    RecipeInfeasible,
    TypeEnumerationOverflow,
    VlsfError,
)
from .tailprob import (
    CompositionType,
    QuantizedPMF,
    TailProbability,
    composition_count,
    compositions,
    max_tail_over_types,
    symbol_density_pmf,
    type_density_pmf,
    type_tail_prob,
)
from .walks import (
    SlopeFit,
    StoppingStats,
    WalkSpec,
    expansion_upper_bound,
    folded_normal_excess,
    simulate_walk_pair,
    sqrt_slope_regression,
)

__version__ = "0.1.0"
