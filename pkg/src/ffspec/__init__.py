"""Online spectral density estimation with forgetting factors."""

from .adaptive import AdaptiveState, adaptive_update, dS_dlambda, lambda_step
from .errors import (
    DomainError,
    EvaluationError,
    FFSpecError,
    InputError,
    NumericalError,
    ParameterError,
    StateError,
)
from .models import ArModel, ArParams, OceanModel, OceanParams, ar2_from_polar, ar_sdf, ar_sdf_grad, ocean_sdf, ocean_sdf_grad
from .online import EstimatorSpec, OnlineEstimator
from .spectral import (
    ForgettingState,
    FrequencyGrid,
    SpectralEstimate,
    batch_weighted_dft,
    classical_periodogram,
    new_state,
    spectral_window,
)
from .whittle import FfweState, ffwe_step, likelihood_surface, whittle_loglik

__version__ = "0.1.0"
