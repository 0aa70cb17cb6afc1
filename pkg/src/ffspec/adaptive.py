r"""Adaptive forgetting factor: derivative recursions and the one-step update.

The forgetting factor becomes a sequence :math:`\lambda_1, \lambda_2, \dots`
and the taper is :math:`h_t = \prod_{s=t}^{T-1} \lambda_s`.  Derivatives are
taken with respect to a common perturbation of every past factor
(:math:`\lambda_s \to \lambda_s + \epsilon` for all s), which gives the
recursions

.. math::

    \partial J_{T+1} = \lambda_T \, \partial J_T + J_T, \qquad
    \partial C_{T+1} = \lambda_T^2 \, \partial C_T + 2 \lambda_T C_T .

The second one follows from :math:`C_{T+1} = \lambda_T^2 C_T + 1`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, StateError
from .models import SdfModel
from .spectral import ForgettingState
from .whittle import _check_positive

DEFAULT_BOUNDS = (0.5, 1.0 - 1e-6)


@dataclass(eq=False)
class AdaptiveState:
    """A forgetting-factor state whose factor is tuned online.

    ``base.lam`` is held as an array with the batch shape.  ``prior_alpha``
    enables a Beta(alpha, 1) prior on the factor; ``prior_weight`` scales its
    log-density gradient (defaults to 1/M, the likelihood's normalisation).
    """

    base: ForgettingState
    learn_rate: float = 0.01
    bounds: tuple[float, float] = DEFAULT_BOUNDS
    prior_alpha: float | None = None
    prior_weight: float | None = None
    dJ: np.ndarray = field(init=False, repr=False)
    dC: np.ndarray = field(init=False, repr=False)
    last_gradient: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        lo, hi = self.bounds
        if not 0.0 < lo <= hi < 1.0:
            raise ParameterError(f"lambda bounds must satisfy 0 < lo <= hi < 1, got {self.bounds}")
        if self.learn_rate < 0:
            raise ParameterError("lambda learning rate must be >= 0")
        if self.prior_alpha is not None and self.prior_alpha < 1:
            raise ParameterError("Beta prior alpha must be >= 1")
        if self.prior_weight is None:
            self.prior_weight = 1.0 / self.base.grid.M
        base = self.base
        base.lam = np.broadcast_to(np.asarray(base.lam, dtype=float), base.batch_shape).copy()
        self.dJ = np.zeros_like(base.J)
        self.dC = np.zeros_like(base.C)
        self.last_gradient = np.zeros_like(base.C)

    @property
    def lam(self) -> np.ndarray:
        return self.base.lam

    @property
    def T(self) -> int:
        return self.base.T


def adaptive_update(state: AdaptiveState, x) -> AdaptiveState:
    """Advance derivatives (from the pre-update J, C) and then the state."""
    base = state.base
    x = base._coerce_sample(x)
    lam = base.lam
    dJ = lam[..., None] * state.dJ + base.J
    dC = lam * lam * state.dC + 2.0 * lam * base.C
    base.update(x)
    state.dJ, state.dC = dJ, dC
    return state


def dS_dlambda(state: AdaptiveState) -> np.ndarray:
    """Derivative of the periodogram w.r.t. the forgetting-factor perturbation."""
    base = state.base
    if base.T == 0:
        raise StateError("derivative undefined before the first sample")
    J = base.centered_dft()
    C = base.C[..., None]
    num = 2.0 * (J.real * state.dJ.real + J.imag * state.dJ.imag) * C - (J.real**2 + J.imag**2) * state.dC[..., None]
    return num / (C * C)


def lambda_gradient(state: AdaptiveState, model: SdfModel, theta) -> np.ndarray:
    """Ascent direction for the factor: likelihood slope plus prior slope."""
    S = model.sdf(theta, state.base.grid.freqs)
    _check_positive(S, state.base.grid.freqs)
    total = -np.mean(dS_dlambda(state) / S, axis=-1)
    if state.prior_alpha is not None:
        total = total + state.prior_weight * (state.prior_alpha - 1.0) / state.lam
    return total


def lambda_step(state: AdaptiveState, model: SdfModel, theta) -> AdaptiveState:
    """``lam <- clip(lam + r * d/dlam [loglik + log prior], lo, hi)``, in place."""
    g = lambda_gradient(state, model, theta)
    g = np.where(np.isfinite(g), g, 0.0)
    lo, hi = state.bounds
    state.base.lam = np.clip(state.lam + state.learn_rate * g, lo, hi)
    state.last_gradient = g
    return state
