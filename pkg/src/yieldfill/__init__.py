"""Yield-surface completion: thin plate splines and denoising autoencoders.

Reconstructs complete corporate-bond yield surfaces (13 ratings x 15
tenors) from sparse observations, either with a closed-form thin plate
spline fitted point-in-time or with autoencoders trained on historical
surfaces to denoise zero-masked inputs.
"""

__version__ = "0.1.0"

from .surface import (  # noqa: F401
    MaskedSurface,
    MonotonicityReport,
    Rating,
    ScalingTransform,
    Tenor,
    YieldSurface,
    fit_scaling,
    monotonicity_report,
    scale,
    unscale,
)
from .corruption import AugmentedDataset, CorruptionSpec, augment, corrupt  # noqa: F401
from .data_io import (  # noqa: F401
    SplitSpec,
    SurfaceDataset,
    SyntheticConfig,
    generate_synthetic,
    load_csv,
    load_fixture,
    save_csv,
    split,
)
from .evaluate import (  # noqa: F401
    ComparisonReport,
    MetricsReport,
    TpsEvalConfig,
    compute_metrics,
    run_comparison,
    violation_rate,
)
from .dae import (  # noqa: F401
    CnnConfig,
    FcnnConfig,
    TrainedModel,
    build_cnn,
    build_fcnn,
    load_model,
    random_search,
    reconstruct,
    save_model,
    train,
)
