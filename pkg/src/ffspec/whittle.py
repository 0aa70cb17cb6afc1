"""Whittle likelihood over a forgetting-factor periodogram and its online maximiser.

The per-frequency normalised log-likelihood is

    loglik(theta) = -(1/M) * sum_k [ log S(f_k) + S_hat(f_k) / S(f_k) ]

with gradient ``-(1/M) sum_k (1/S - S_hat/S^2) dS/dtheta``.  Dividing by the
(fixed) grid size rather than the sample count keeps step sizes independent
of how long the stream has been running; the argmax is unchanged.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import EvaluationError, NumericalError, ParameterError
from .models import SdfModel
from .spectral import SpectralEstimate

Projection = Literal["none", "stationarity"]


@dataclass
class WhittleEval:
    loglik: np.ndarray | float
    grad_params: np.ndarray


def _check_positive(S: np.ndarray, freqs: np.ndarray) -> None:
    bad = ~(np.isfinite(S) & (S > 0))
    if np.any(bad):
        k = int(np.argwhere(bad)[0][-1])
        raise EvaluationError(f"model spectrum is non-positive or non-finite at f = {freqs[k]:.6g}")


def whittle_loglik(est: SpectralEstimate, model: SdfModel, theta, check: bool = True) -> WhittleEval:
    """Whittle log-likelihood and its gradient, batched over leading axes."""
    freqs = est.grid.freqs
    theta = np.asarray(theta, dtype=float)
    S = model.sdf(theta, freqs)
    if check:
        _check_positive(S, freqs)
    ratio = est.values / S
    loglik = -np.mean(np.log(S) + ratio, axis=-1)
    w = (1.0 - ratio) / S
    grad = -np.einsum("...m,...mp->...p", w, model.grad(theta, freqs)) / freqs.size
    if loglik.ndim == 0:
        loglik = float(loglik)
    return WhittleEval(loglik, grad)


def fisher_diagonal(model: SdfModel, theta, freqs) -> np.ndarray:
    """Diagonal of the Whittle Fisher information, ``mean_k (dS/dtheta / S)^2``."""
    S = model.sdf(theta, freqs)
    G = model.grad(theta, freqs)
    return np.mean((G / S[..., None]) ** 2, axis=-2)


@dataclass(eq=False)
class FfweState:
    """Parameters tracked by one-step gradient ascent.

    ``learn_rate`` may be a scalar or one rate per parameter coordinate.
    ``rejected`` counts, per batch row, steps discarded because the gradient
    was not finite or no halving restored validity.
    """

    params: np.ndarray
    learn_rate: float | np.ndarray = 0.05
    projection: Projection = "stationarity"
    max_halvings: int = 30
    strict: bool = False
    rejected: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.params = np.array(self.params, dtype=float)
        lr = np.asarray(self.learn_rate, dtype=float)
        # per-coordinate zeros freeze that coordinate
        if np.any(lr < 0) or not np.any(lr > 0) or not np.all(np.isfinite(lr)):
            raise ParameterError("learning rate must be positive and finite")
        if self.projection not in ("none", "stationarity"):
            raise ParameterError(f"unknown projection {self.projection!r}")
        self.rejected = np.zeros(self.params.shape[:-1], dtype=np.int64)


def ffwe_step(state: FfweState, est: SpectralEstimate, model: SdfModel) -> FfweState:
    """One gradient-ascent step on the Whittle likelihood, in place.

    With stationarity projection, rows whose step leaves the valid region
    have their step halved until it is valid (at most ``max_halvings`` times);
    rows that never become valid keep their previous parameters.
    """
    theta = state.params
    grad = whittle_loglik(est, model, theta, check=False).grad_params
    bad = ~np.all(np.isfinite(grad), axis=-1)
    step = np.where(bad[..., None], 0.0, np.asarray(state.learn_rate) * grad)
    new = theta + step
    if state.projection == "stationarity":
        valid = model.is_valid(new)
        halvings = 0
        while not np.all(valid) and halvings < state.max_halvings:
            step = np.where(valid[..., None], step, 0.5 * step)
            new = theta + step
            valid = model.is_valid(new)
            halvings += 1
        stuck = ~valid
        new = np.where(stuck[..., None], theta, new)
        bad = bad | stuck
    else:
        bad = bad | ~np.all(np.isfinite(new), axis=-1)
        new = np.where(bad[..., None], theta, new)
    state.rejected = state.rejected + bad
    state.params = new
    if state.strict and np.any(bad):
        raise NumericalError("gradient step rejected: non-finite gradient or no valid step found")
    return state


@dataclass
class Axis:
    """One axis of a likelihood surface: parameter index and its values."""

    index: int
    values: np.ndarray
    name: str = ""

    @classmethod
    def parse(cls, text: str, param_names) -> "Axis":
        """Parse ``name:lo:hi:steps`` (e.g. ``phi1:-2:2:81``)."""
        try:
            name, lo, hi, steps = text.split(":")
            lo, hi, steps = float(lo), float(hi), int(steps)
        except ValueError:
            raise ParameterError(f"axis must look like name:lo:hi:steps, got {text!r}") from None
        names = list(param_names)
        if name not in names:
            raise ParameterError(f"unknown parameter {name!r}; model has {names}")
        return cls.linspace(names.index(name), lo, hi, steps, name)

    @classmethod
    def linspace(cls, index: int, lo: float, hi: float, steps: int, name: str = "") -> "Axis":
        if steps < 1 or hi < lo:
            raise ParameterError("axis range is empty")
        return cls(index, np.linspace(lo, hi, steps), name)


@dataclass
class Surface:
    axis1: Axis
    axis2: Axis
    loglik: np.ndarray  # (n1, n2); NaN where parameters are invalid
    valid: np.ndarray

    def argmax(self) -> tuple[float, float]:
        i, j = np.unravel_index(np.nanargmax(self.loglik), self.loglik.shape)
        return float(self.axis1.values[i]), float(self.axis2.values[j])

    def to_csv(self, path) -> None:
        """Matrix CSV: axis-2 values across the first row, axis-1 down the first column."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"{self.axis1.name or self.axis1.index}\\{self.axis2.name or self.axis2.index}"]
                       + [repr(float(v)) for v in self.axis2.values])
            for a, row in zip(self.axis1.values, self.loglik):
                w.writerow([repr(float(a))] + ["nan" if not np.isfinite(v) else repr(float(v)) for v in row])


def likelihood_surface(est: SpectralEstimate, model: SdfModel, axis1: Axis, axis2: Axis, fixed) -> Surface:
    """Whittle log-likelihood over a 2-d slice of parameter space."""
    fixed = np.asarray(fixed, dtype=float)
    if fixed.shape != (model.n_params,):
        raise ParameterError(f"fixed parameter vector must have length {model.n_params}")
    if axis1.index == axis2.index:
        raise ParameterError("surface axes must refer to different parameters")
    if est.values.ndim != 1:
        raise ParameterError("surface needs a single (unbatched) spectral estimate")
    n1, n2 = axis1.values.size, axis2.values.size
    if n1 == 0 or n2 == 0:
        raise ParameterError("axis range is empty")
    theta = np.broadcast_to(fixed, (n1, n2, fixed.size)).copy()
    theta[..., axis1.index] = axis1.values[:, None]
    theta[..., axis2.index] = axis2.values[None, :]
    valid = model.is_valid(theta)
    with np.errstate(all="ignore"):
        S = model.sdf(theta, est.grid.freqs)
        ll = -np.mean(np.log(S) + est.values / S, axis=-1)
    ok = valid & np.isfinite(ll)
    return Surface(axis1, axis2, np.where(ok, ll, np.nan), ok)
