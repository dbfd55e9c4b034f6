"""Generalized Polya (HLS) urns with increments in {0..K} and their
candidate sample-path large deviations."""

from .kron_embedding import (
    INDETERMINATE,
    DiscretePath,
    embed_path,
    kron_delta,
    path_distance,
    scaled_action,
    scaled_lagrangian,
)
from .mogulskii import (
    XiSolution,
    dzeta0,
    iid_action,
    mogulskii_lagrangian,
    xi_invert,
    zeta0,
)
from .urn_model import (
    MarketHistory,
    PolyCurve,
    PwlCurve,
    SpecValidationError,
    UrnSpec,
    action,
    enumerate_distribution,
    eval_pi,
    exact_distribution,
    exact_log_distribution,
    fixed_points,
    mean_step,
    path_weight,
    simulate,
    simulate_batch,
    step_weight,
    validate_spec,
)
from .variational import (
    EndpointEvent,
    OptimizerOptions,
    RateResult,
    cramer_local_rate,
    local_rate,
    optimize_endpoint,
    rate_functional,
    zero_cost_flow,
)

__version__ = "0.1.0"
