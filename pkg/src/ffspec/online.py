"""Per-sample estimation pipeline: periodogram, Whittle ascent, adaptive factor.

Each call to :meth:`OnlineEstimator.step` does, in order:

1. update the periodogram accumulators (and lambda-derivatives when adaptive),
2. after burn-in, one gradient step on the model parameters,
3. when adaptive, one gradient step on the forgetting factor using the new
   parameters.

During burn-in only step 1 runs; at the end of burn-in the model parameters
are initialised from the periodogram (white noise for AR models).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Literal

import numpy as np

from .adaptive import DEFAULT_BOUNDS, AdaptiveState, adaptive_update, lambda_step
from .errors import ParameterError
from .models import SdfModel, make_model
from .spectral import ForgettingState, FrequencyGrid, SpectralEstimate
from .whittle import FfweState, ffwe_step, fisher_diagonal

EstimatorKind = Literal["ffp", "ffwe", "affwe"]


@dataclass
class EstimatorSpec:
    """Settings for one online estimator.

    ``lam`` is the fixed factor for ``ffp``/``ffwe`` and the starting factor
    for ``affwe``.  ``r_phi`` may be a list with one rate per parameter.
    """

    kind: EstimatorKind = "ffwe"
    model: str = "ar:2"
    lam: float = 0.99
    r_phi: float | list[float] = 0.05
    r_lambda: float = 0.01
    alpha: float | None = None
    prior_weight: float | None = None
    bounds: tuple[float, float] = DEFAULT_BOUNDS
    burn_in: int = 500
    projection: str = "stationarity"
    centering: str = "none"
    init: dict | None = None
    precondition: str = "none"
    frozen: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("ffp", "ffwe", "affwe"):
            raise ParameterError(f"unknown estimator kind {self.kind!r}")
        if self.precondition not in ("none", "fisher"):
            raise ParameterError(f"unknown precondition {self.precondition!r}")
        if self.burn_in < 1:
            raise ParameterError("burn_in must be >= 1")
        self.bounds = tuple(self.bounds)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "EstimatorSpec":
        known = cls.__dataclass_fields__
        extra = set(obj) - set(known)
        if extra:
            raise ParameterError(f"unknown estimator fields: {sorted(extra)}")
        return cls(**obj)


@dataclass(eq=False)
class OnlineEstimator:
    spec: EstimatorSpec
    grid: FrequencyGrid
    batch_shape: tuple[int, ...] = ()
    model: SdfModel | None = field(default=None)
    fstate: ForgettingState = field(init=False, repr=False)
    adaptive: AdaptiveState | None = field(init=False, default=None, repr=False)
    ffwe: FfweState | None = field(init=False, default=None, repr=False)

    def __post_init__(self):
        spec = self.spec
        if self.model is None and spec.kind != "ffp":
            self.model = make_model(spec.model)
        self.fstate = ForgettingState(self.grid, spec.lam, spec.centering, batch_shape=self.batch_shape)
        if spec.kind == "affwe":
            self.adaptive = AdaptiveState(
                self.fstate, spec.r_lambda, spec.bounds, spec.alpha, spec.prior_weight
            )

    @property
    def T(self) -> int:
        return self.fstate.T

    @property
    def lam(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.fstate.lam, dtype=float), self.batch_shape)

    @property
    def params(self) -> np.ndarray | None:
        return None if self.ffwe is None else self.ffwe.params

    def ffp(self) -> SpectralEstimate:
        return self.fstate.ffp()

    def _initial_params(self, est: SpectralEstimate) -> np.ndarray:
        if self.spec.init is not None:
            theta = self.model.from_json(self.spec.init)
            return np.broadcast_to(theta, self.batch_shape + theta.shape).copy()
        return self.model.initial_params(est.values, self.grid.freqs)

    def _learn_rates(self, theta: np.ndarray) -> np.ndarray:
        """Per-coordinate rates; with Fisher preconditioning ``r / F_ii(theta_0)``."""
        rates = np.broadcast_to(np.asarray(self.spec.r_phi, dtype=float), theta.shape).copy()
        if self.spec.precondition == "fisher":
            rates = rates / np.maximum(fisher_diagonal(self.model, theta, self.grid.freqs), 1e-300)
        names = list(self.model.param_names)
        for name in self.spec.frozen:
            if name not in names:
                raise ParameterError(f"cannot freeze unknown parameter {name!r}")
            rates[..., names.index(name)] = 0.0
        return rates

    def step(self, x) -> None:
        if self.adaptive is not None:
            adaptive_update(self.adaptive, x)
        else:
            self.fstate.update(x)
        if self.spec.kind == "ffp" or self.T < self.spec.burn_in:
            return
        est = self.fstate.ffp()
        if self.ffwe is None:
            theta = self._initial_params(est)
            self.ffwe = FfweState(theta, self._learn_rates(theta), self.spec.projection)
            return
        ffwe_step(self.ffwe, est, self.model)
        if self.adaptive is not None:
            lambda_step(self.adaptive, self.model, self.ffwe.params)
