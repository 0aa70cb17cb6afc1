"""Parametric spectral density families with analytic parameter gradients.

Every model works on flat parameter vectors ``theta`` with an arbitrary
leading batch shape, so the same code evaluates one parameter set or a few
hundred Monte Carlo replications at once:

* ``sdf(theta, freqs)``  -> ``(..., M)``
* ``grad(theta, freqs)`` -> ``(..., M, P)``
* ``is_valid(theta)``    -> ``(...)`` booleans

The named-parameter dataclasses (:class:`ArParams`, :class:`OceanParams`)
convert to and from these vectors and to JSON.
"""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import asdict, dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .errors import DomainError, ParameterError


# ---------------------------------------------------------------- AR(p)


def ar_is_stationary(phi) -> np.ndarray:
    """Batched stationarity test for AR coefficient vectors ``(..., p)``.

    Closed-form regions for p <= 2, companion-matrix eigenvalues otherwise.
    """
    phi = np.asarray(phi, dtype=float)
    p = phi.shape[-1]
    finite = np.all(np.isfinite(phi), axis=-1)
    if p == 0:
        return finite
    if p == 1:
        return finite & (np.abs(phi[..., 0]) < 1.0)
    if p == 2:
        a, b = phi[..., 0], phi[..., 1]
        return finite & (np.abs(b) < 1.0) & (a + b < 1.0) & (b - a < 1.0)
    return finite & (ar_root_moduli(np.where(finite[..., None], phi, 0.0)).max(axis=-1) < 1.0)


def companion(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    p = phi.shape[-1]
    comp = np.zeros(phi.shape[:-1] + (p, p))
    comp[..., 0, :] = phi
    if p > 1:
        comp[..., np.arange(1, p), np.arange(p - 1)] = 1.0
    return comp


def ar_root_moduli(phi) -> np.ndarray:
    """Moduli of the companion-matrix eigenvalues (inverse characteristic roots)."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape[-1] == 0:
        return np.zeros(phi.shape[:-1] + (0,))
    return np.abs(np.linalg.eigvals(companion(phi)))


@dataclass(frozen=True)
class ArParams:
    """AR(p) coefficients and log innovation variance."""

    phi: tuple[float, ...]
    log_sigma2: float = 0.0

    def __post_init__(self):
        phi = tuple(float(v) for v in np.ravel(np.asarray(self.phi, dtype=float)))
        object.__setattr__(self, "phi", phi)
        if phi and phi[-1] == 0.0:
            raise ParameterError("the last AR coefficient must be nonzero (use a lower order instead)")
        if not math.isfinite(self.log_sigma2) or not all(map(math.isfinite, phi)):
            raise ParameterError("AR parameters must be finite")

    @classmethod
    def from_sigma2(cls, phi: Sequence[float], sigma2: float = 1.0) -> "ArParams":
        if sigma2 <= 0:
            raise ParameterError("innovation variance must be positive")
        return cls(tuple(phi), math.log(sigma2))

    @property
    def p(self) -> int:
        return len(self.phi)

    @property
    def sigma2(self) -> float:
        return math.exp(self.log_sigma2)

    @property
    def stationary(self) -> bool:
        return bool(ar_is_stationary(np.array(self.phi)))

    def max_root_modulus(self) -> float:
        m = ar_root_moduli(np.array(self.phi))
        return float(m.max()) if m.size else 0.0

    def vector(self) -> np.ndarray:
        return np.array(self.phi + (self.log_sigma2,))

    def to_json(self) -> dict:
        return {"phi": list(self.phi), "log_sigma2": self.log_sigma2}

    @classmethod
    def from_json(cls, obj: dict) -> "ArParams":
        if "log_sigma2" in obj:
            return cls(tuple(obj["phi"]), float(obj["log_sigma2"]))
        return cls.from_sigma2(obj["phi"], float(obj.get("sigma2", 1.0)))


@lru_cache(maxsize=32)
def _ar_basis_cached(p: int, key: bytes) -> np.ndarray:
    f = np.frombuffer(key, dtype=float)
    j = np.arange(1, p + 1)
    E = np.exp(-2j * np.pi * j[:, None] * f[None, :])  # (p, M)
    E.setflags(write=False)
    return E


def _ar_basis(p: int, freqs) -> np.ndarray:
    # the grid is fixed for a whole stream, so the basis is computed once
    return _ar_basis_cached(p, np.ascontiguousarray(freqs, dtype=float).tobytes())


def _ar_transfer(phi, E) -> np.ndarray:
    # A(f) = 1 - sum_j phi_j exp(-2 pi i j f)
    return 1.0 - np.einsum("...j,jm->...m", phi, E)


def ar_sdf(params: ArParams, f) -> float | np.ndarray:
    """AR spectral density ``sigma^2 / |1 - sum phi_j e^{-2 pi i j f}|^2``."""
    if not params.stationary:
        raise DomainError(f"AR coefficients {params.phi} are not stationary")
    out = ArModel(params.p).sdf(params.vector(), np.atleast_1d(f))
    return float(out[0]) if np.ndim(f) == 0 else out


def ar_sdf_grad(params: ArParams, f) -> np.ndarray:
    """Gradient of :func:`ar_sdf` w.r.t. ``(phi_1..phi_p, log sigma^2)``."""
    if not params.stationary:
        raise DomainError(f"AR coefficients {params.phi} are not stationary")
    out = ArModel(params.p).grad(params.vector(), np.atleast_1d(f))
    return out[0] if np.ndim(f) == 0 else out


def ar2_from_polar(r: float, f_prime: float) -> tuple[float, float]:
    """AR(2) coefficients whose characteristic roots are ``(1/r) e^{+-2 pi i f'}``."""
    if not 0.0 < r < 1.0:
        raise ParameterError(f"r must lie in (0, 1), got {r}")
    if not 0.0 < f_prime < 0.5:
        raise ParameterError(f"f_prime must lie in (0, 1/2), got {f_prime}")
    return 2.0 * r * math.cos(2.0 * math.pi * f_prime), -r * r


def ar2_to_polar(phi1: float, phi2: float) -> tuple[float, float]:
    """Inverse of :func:`ar2_from_polar` for complex-root AR(2) pairs."""
    eig = np.linalg.eigvals(companion([phi1, phi2]))
    if abs(eig[0].imag) == 0.0:
        raise DomainError("AR(2) coefficients have real characteristic roots")
    z = eig[np.argmax(eig.imag)]
    return float(abs(z)), float(np.angle(z) / (2 * np.pi))


def ar_variance(params: ArParams) -> float:
    """Process variance from the Yule-Walker equations."""
    p = params.p
    if p == 0:
        return params.sigma2
    if not params.stationary:
        raise DomainError("variance undefined for a nonstationary AR process")
    phi = np.array(params.phi)
    # unknowns gamma_0..gamma_p; gamma_k - sum_j phi_j gamma_|k-j| = sigma2 * [k == 0]
    A = np.zeros((p + 1, p + 1))
    for k in range(p + 1):
        A[k, k] += 1.0
        for j in range(1, p + 1):
            A[k, abs(k - j)] -= phi[j - 1]
    rhs = np.zeros(p + 1)
    rhs[0] = params.sigma2
    return float(np.linalg.solve(A, rhs)[0])


class SdfModel(Protocol):
    name: str
    n_params: int
    param_names: tuple[str, ...]

    def sdf(self, theta, freqs) -> np.ndarray: ...

    def grad(self, theta, freqs) -> np.ndarray: ...

    def is_valid(self, theta) -> np.ndarray: ...

    def initial_params(self, values: np.ndarray, freqs: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class ArModel:
    """AR(p) family over ``theta = (phi_1, ..., phi_p, log sigma^2)``."""

    p: int
    name: str = field(default="ar", init=False)

    def __post_init__(self):
        if self.p < 0:
            raise ParameterError("AR order must be >= 0")

    @property
    def n_params(self) -> int:
        return self.p + 1

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(f"phi{j}" for j in range(1, self.p + 1)) + ("log_sigma2",)

    def sdf(self, theta, freqs) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        E = _ar_basis(self.p, freqs)
        A = _ar_transfer(theta[..., :-1], E)
        return np.exp(theta[..., -1:]) / (A.real**2 + A.imag**2)

    def grad(self, theta, freqs) -> np.ndarray:
        return self.sdf_grad(theta, freqs)[1]

    def sdf_grad(self, theta, freqs) -> tuple[np.ndarray, np.ndarray]:
        """Spectrum and gradient from one evaluation of the transfer function."""
        theta = np.asarray(theta, dtype=float)
        E = _ar_basis(self.p, freqs)
        A = _ar_transfer(theta[..., :-1], E)
        mod2 = A.real**2 + A.imag**2
        S = np.exp(theta[..., -1:]) / mod2
        out = np.empty(S.shape + (self.p + 1,))
        # dS/dphi_j = 2 S Re(conj(A) E_j) / |A|^2
        w = 2.0 * S / mod2
        for j in range(self.p):
            out[..., j] = w * (A.real * E[j].real + A.imag * E[j].imag)
        out[..., -1] = S
        return S, out

    def is_valid(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return ar_is_stationary(theta[..., :-1]) & np.isfinite(theta[..., -1])

    def initial_params(self, values, freqs) -> np.ndarray:
        """White-noise start: zero coefficients, variance = mean ordinate."""
        values = np.asarray(values, dtype=float)
        theta = np.zeros(values.shape[:-1] + (self.p + 1,))
        theta[..., -1] = np.log(np.maximum(values.mean(axis=-1), 1e-300))
        return theta

    def to_json(self, theta) -> dict:
        theta = np.asarray(theta, dtype=float)
        return {"phi": theta[:-1].tolist(), "log_sigma2": float(theta[-1])}

    def from_json(self, obj: dict) -> np.ndarray:
        phi = [float(v) for v in obj.get("phi", [])]
        if len(phi) != self.p:
            raise ParameterError(f"expected {self.p} AR coefficients, got {len(phi)}")
        if "log_sigma2" in obj:
            ls = float(obj["log_sigma2"])
        else:
            ls = math.log(float(obj.get("sigma2", 1.0)))
        return np.array(phi + [ls])


# ---------------------------------------------------------------- ocean


@dataclass(frozen=True)
class OceanParams:
    """Parameters of the modulated-AR(1) (inertial oscillation) spectrum.

    ``damp`` is the Lorentzian half-width; ``omega`` the inertial frequency in
    cycles per sample.
    """

    amp_A: float
    damp: float
    back_B: float
    back_h: float
    slope_alpha: float
    omega: float

    def __post_init__(self):
        vals = self.vector()
        if not np.all(np.isfinite(vals)):
            raise ParameterError("ocean parameters must be finite")
        if self.amp_A <= 0:
            raise ParameterError("amp_A must be > 0")
        if self.damp <= 0:
            raise ParameterError("damp must be > 0")
        if self.back_B < 0:
            raise ParameterError("back_B must be >= 0")
        if self.back_h <= 0:
            raise ParameterError("back_h must be > 0")
        if self.slope_alpha <= 0:
            raise ParameterError("slope_alpha must be > 0")
        if not -0.5 < self.omega < 0.5:
            raise ParameterError("omega must lie in (-1/2, 1/2)")

    def vector(self) -> np.ndarray:
        return np.array([self.amp_A, self.damp, self.back_B, self.back_h, self.slope_alpha, self.omega], dtype=float)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "OceanParams":
        return cls(**{k: float(obj[k]) for k in OCEAN_FIELDS})


OCEAN_FIELDS = ("amp_A", "damp", "back_B", "back_h", "slope_alpha", "omega")


@dataclass(frozen=True)
class OceanModel:
    """``A^2 / ((f - w)^2 + damp^2) + B / ((w^2 + h^2)^alpha)``.

    The background term depends on ``omega`` rather than ``f``, exactly as
    the model is usually written; ``background_in_f=True`` substitutes ``f``.
    """

    background_in_f: bool = False
    name: str = field(default="ocean", init=False)
    n_params: int = field(default=6, init=False)
    param_names: tuple[str, ...] = field(default=OCEAN_FIELDS, init=False)

    def _parts(self, theta, freqs):
        theta = np.asarray(theta, dtype=float)
        f = np.asarray(freqs, dtype=float)
        A, d, B, h, al, w = (theta[..., i : i + 1] for i in range(6))
        L = (f - w) ** 2 + d**2
        base = f if self.background_in_f else w
        Q = base**2 + h**2
        Qa = Q ** (-al)
        return A, d, B, h, al, w, f, L, Q, Qa

    def sdf(self, theta, freqs) -> np.ndarray:
        A, d, B, h, al, w, f, L, Q, Qa = self._parts(theta, freqs)
        return A**2 / L + B * Qa

    def grad(self, theta, freqs) -> np.ndarray:
        A, d, B, h, al, w, f, L, Q, Qa = self._parts(theta, freqs)
        shape = np.broadcast_shapes(L.shape, Qa.shape)
        out = np.empty(shape + (6,))
        out[..., 0] = 2 * A / L
        out[..., 1] = -2 * A**2 * d / L**2
        out[..., 2] = Qa
        out[..., 3] = -2 * B * al * h * Qa / Q
        out[..., 4] = -B * Qa * np.log(Q)
        dw = 2 * A**2 * (f - w) / L**2
        if not self.background_in_f:
            dw = dw - 2 * B * al * w * Qa / Q
        out[..., 5] = dw
        return out

    def is_valid(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        A, d, B, h, al, w = (theta[..., i] for i in range(6))
        ok = np.all(np.isfinite(theta), axis=-1)
        return ok & (A > 0) & (d > 0) & (B >= 0) & (h > 0) & (al > 0) & (np.abs(w) < 0.5)

    def initial_params(self, values, freqs, h: float = 0.1, alpha: float = 1.0) -> np.ndarray:
        """Moment-matched start.

        omega sits at the largest ordinate and the floor is the lower quartile.
        The Lorentzian's height ``A^2/damp^2`` matches the peak excess and its
        integral ``pi A^2/damp`` matches the mean excess over the floor.
        """
        values = np.asarray(values, dtype=float)
        f = np.asarray(freqs, dtype=float)
        k = np.argmax(values, axis=-1)
        w = f[k]
        floor = np.quantile(values, 0.25, axis=-1)
        peak = np.take_along_axis(values, k[..., None], axis=-1)[..., 0]
        excess_peak = np.maximum(peak - floor, 1e-12)
        excess_mean = np.maximum(values.mean(axis=-1) - floor, 1e-12)
        damp = np.clip(excess_mean / (np.pi * excess_peak), 1e-4, 0.25)
        A = np.sqrt(excess_peak) * damp
        B = floor * (w**2 + h**2) ** alpha
        return np.stack([A, damp, B, np.full_like(A, h), np.full_like(A, alpha), w], axis=-1)

    def to_json(self, theta) -> dict:
        return dict(zip(OCEAN_FIELDS, map(float, theta)))

    def from_json(self, obj: dict) -> np.ndarray:
        return OceanParams.from_json(obj).vector()


def ocean_sdf(params: OceanParams, f, background_in_f: bool = False):
    out = OceanModel(background_in_f).sdf(params.vector(), np.atleast_1d(f))
    return float(out[0]) if np.ndim(f) == 0 else out


def ocean_sdf_grad(params: OceanParams, f, background_in_f: bool = False) -> np.ndarray:
    out = OceanModel(background_in_f).grad(params.vector(), np.atleast_1d(f))
    return out[0] if np.ndim(f) == 0 else out


def make_model(spec: str) -> SdfModel:
    """Parse ``"ar:2"``, ``"white"``, ``"ocean"`` or ``"ocean:f"``."""
    kind, _, arg = spec.strip().lower().partition(":")
    if kind == "white":
        return ArModel(0)
    if kind == "ar":
        try:
            return ArModel(int(arg or 1))
        except ValueError:
            raise ParameterError(f"bad AR order in model spec {spec!r}") from None
    if kind == "ocean":
        if arg not in ("", "f", "omega"):
            raise ParameterError(f"unknown ocean variant {arg!r}")
        return OceanModel(background_in_f=(arg == "f"))
    raise ParameterError(f"unknown model {spec!r}; expected ar:<p>, white or ocean")


def model_spec(model: SdfModel) -> str:
    if isinstance(model, ArModel):
        return f"ar:{model.p}"
    if isinstance(model, OceanModel):
        return "ocean:f" if model.background_in_f else "ocean"
    return getattr(model, "name", type(model).__name__)
