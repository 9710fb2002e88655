"""Learned finite-difference stencils for the 1-D heat equation.

Submodules: ``heat_data`` (reference simulations and the dataset file
format), ``model`` (the FD-Net stencil model), ``diff`` (exact gradients and
Hessian-vector products), ``optim`` (ADAM and trust-region Newton-CG),
``evalsuite`` (Euler baseline and rollout metrics), ``config`` and ``cli``.
"""

from .diff import Batch, BatchObjective, LossConfig, batch_gradient, batch_hvp, batch_loss
from .errors import (
    ConfigError,
    DatasetFormatError,
    DivergenceError,
    FDNetError,
    ManifestError,
    ShapeMismatchError,
    TruncatedPayloadError,
)
from .evalsuite import (
    RolloutReport,
    euler_rollout,
    evaluate_euler,
    evaluate_model,
    rollout_rmse,
    stability_alpha,
)
from .heat_data import (
    Dataset,
    Grid1D,
    PhysicsConfig,
    SampleSpec,
    analytic_solution,
    generate_dataset,
    load_dataset,
    save_dataset,
)
from .model import (
    DerivativeFilter,
    FDNetParams,
    euler_params,
    init_params,
    load_params,
    rollout,
    save_params,
)
from .optim import (
    AdamConfig,
    MiniBatchSampler,
    TrainingDivergedError,
    TrustRegionConfig,
    adam_train,
    steihaug_cg,
    trcg_train,
)

__version__ = "0.1.0"
