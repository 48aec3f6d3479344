"""Byzantine-robust federated learning simulator with verified convergence envelopes."""

from .aggregation import (
    AggregateResult,
    RobustnessCert,
    WeiszfeldConfig,
    ball_robustness_check,
    coordinate_median,
    geomed_objective,
    geometric_median,
    mean,
    trimmed_mean,
)
from .clients import (
    ClientSpec,
    FixedVector,
    GaussianNoise,
    Schedule,
    SignFlip,
    ZeroVector,
    byzantine_message,
    honest_local_update,
)
from .config import ConfigError, ExperimentConfig, load_config
from .problems import (
    Dataset,
    FullGradient,
    Logistic,
    Minibatch,
    Problem,
    RelativeNoise,
    Ridge,
    SmoothnessConstants,
    constants,
    global_gradient,
    global_loss,
    local_gradient,
    local_loss,
    local_stoch_grad,
    make_synthetic,
    optimum,
    problem_from_csv,
    test_accuracy,
)
from .rng import substream
from .server import (
    CoordinateMedianAgg,
    GeometricMedianAgg,
    MeanAgg,
    TraceRecord,
    TrimmedMeanAgg,
    prepare,
    run_experiment,
    run_prepared,
    run_round,
)
from .theory import (
    BoundSeries,
    TheoryParams,
    c_beta,
    classify_gamma,
    gamma,
    min_K,
    stable_eta_range,
    theorem1_bound,
    theorem1_series,
    theorem2_bound,
    theorem2_round_multiplier,
    zero_gap_condition,
)

__version__ = "0.1.0"
