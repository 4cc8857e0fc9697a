"""Monte Carlo unpredictability analysis for delay-based PUF designs."""

__version__ = "0.1.0"

from .models import (  # noqa: E402
    ARCHES,
    Architecture,
    ArbiterModel,
    CtModel,
    FeedForwardModel,
    FeedForwardXorModel,
    PufBatch,
    ResponseMatrix,
    XorModel,
    batch_eval,
    from_features,
    load_batch,
    sample_batch,
    save_batch,
    to_features,
)
from .engine import (  # noqa: E402
    AdvantageEstimate,
    CrpSet,
    FeasibilityError,
    GroupTable,
    MAX_CONDITIONING_CRPS,
    condition_population,
    estimate_advantage,
    estimate_standard_error,
    evaluate_transcript,
    run_game,
)
from .closedform import (  # noqa: E402
    normal_cdf,
    orthant_three,
    orthant_two,
    worked_example,
)

__all__ = [
    "ARCHES",
    "Architecture",
    "ArbiterModel",
    "XorModel",
    "FeedForwardModel",
    "FeedForwardXorModel",
    "CtModel",
    "PufBatch",
    "ResponseMatrix",
    "batch_eval",
    "sample_batch",
    "save_batch",
    "load_batch",
    "to_features",
    "from_features",
    "AdvantageEstimate",
    "CrpSet",
    "FeasibilityError",
    "GroupTable",
    "MAX_CONDITIONING_CRPS",
    "condition_population",
    "estimate_advantage",
    "estimate_standard_error",
    "evaluate_transcript",
    "run_game",
    "normal_cdf",
    "orthant_two",
    "orthant_three",
    "worked_example",
    "__version__",
]
