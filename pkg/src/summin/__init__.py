"""Sum-of-minimum optimization: careful seeding, generalized Lloyd and momentum Lloyd."""

from .core import (
    DegenerateInstanceError,
    InvalidConfigurationError,
    InvalidInputError,
    OracleProblem,
    Partition,
    Problem,
    RunTrace,
    SubFunctionOracle,
    SumMinError,
    UnsupportedConfigurationError,
    UnsupportedOracleError,
    averaged_optimality_gap,
    evaluate_objective,
    group_objective,
    reclassify,
)
from .lloyd import LloydConfig, lloyd_run
from .models import (
    DiagQuadraticProblem,
    GpcaProblem,
    MlpProblem,
    QuadraticProblem,
    RidgeProblem,
)
from .momentum import MomentumConfig, controlled_reclassify, gamma_bar, momentum_run
from .rng import Rng
from .seeding import (
    AdditiveNoisy,
    ExactGap,
    GradNorm,
    ScaledOracle,
    careful_seed,
    init_random,
    init_uniform_seeding,
)

__version__ = "0.1.0"
