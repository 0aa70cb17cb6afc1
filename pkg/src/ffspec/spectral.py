r"""Forgetting-factor periodogram with O(1)-per-sample updates.

For a stream :math:`X_1, X_2, \dots` and forgetting factor :math:`\lambda`,

.. math::

    J_T(f) = \sum_{t=1}^T \lambda^{T-t} X_t e^{-i 2\pi f t}, \qquad
    C_T = \sum_{t=1}^T \lambda^{2(T-t)}, \qquad
    \hat S_T(f) = |J_T(f)|^2 / C_T,

maintained recursively as ``J <- lam * J + x * exp(-2j*pi*f*(T+1))`` and
``C <- lam**2 * C + 1``.  Only ``M`` complex accumulators and a few scalars
are stored, whatever the stream length.

All accumulators carry an optional leading *batch* shape so that many
independent streams (Monte Carlo replications, several forgetting factors)
advance in lock-step with a single numpy operation per sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Literal, Sequence

import numpy as np

from .errors import InputError, ParameterError, StateError

Centering = Literal["none", "sequential"]

DEFAULT_M = 256
RENORMALIZE_EVERY = 1 << 16
MAX_TABLE = 1 << 20  # largest common denominator served by the exact phase table


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Fixed, strictly increasing set of evaluation frequencies.

    Frequencies are in cycles per sample and lie strictly inside
    ``(-1/2, 1/2)`` with 0 excluded.  When the grid is rational with a common
    denominator (the default grids are), ``numerators`` and ``denominator``
    are set and phases are computed exactly from integer arithmetic.
    """

    freqs: np.ndarray
    real: bool = True
    numerators: np.ndarray | None = None
    denominator: int | None = None

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=float)
        if f.ndim != 1 or f.size == 0:
            raise ParameterError("frequency grid must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(f)):
            raise ParameterError("frequency grid contains non-finite values")
        if np.any(np.diff(f) <= 0):
            raise ParameterError("frequency grid must be strictly increasing")
        if np.any(f == 0.0) or np.any(np.abs(f) >= 0.5):
            raise ParameterError("grid frequencies must lie in (-1/2, 1/2) excluding 0")
        if self.real and np.any(f <= 0.0):
            raise ParameterError("real-stream grids must lie in (0, 1/2)")
        f.setflags(write=False)
        object.__setattr__(self, "freqs", f)
        if self.numerators is not None:
            num = np.asarray(self.numerators, dtype=np.int64)
            if self.denominator is None or not np.allclose(num / self.denominator, f, rtol=0, atol=1e-15):
                raise ParameterError("numerators/denominator do not reproduce freqs")
            num.setflags(write=False)
            object.__setattr__(self, "numerators", num)

    def __len__(self) -> int:
        return self.freqs.size

    @property
    def M(self) -> int:
        return self.freqs.size

    @property
    def step(self) -> float:
        """Smallest spacing between neighbouring grid points."""
        return float(np.min(np.diff(self.freqs))) if self.M > 1 else 1.0

    @classmethod
    def default(cls, M: int = DEFAULT_M, real: bool = True) -> "FrequencyGrid":
        """Equally spaced interior grid.

        Real streams use ``k / (2(M+1))`` for ``k = 1..M``; complex streams use
        ``k/(M+1) - 1/2`` with any point landing on 0 dropped.
        """
        if M < 1:
            raise ParameterError("grid size M must be >= 1")
        q = 2 * (M + 1)
        k = np.arange(1, M + 1, dtype=np.int64)
        num = k if real else 2 * k - (M + 1)
        num = num[num != 0]
        if num.size == 0:
            raise ParameterError("a complex grid needs M >= 2 (the only point would be f = 0)")
        return cls(num / q, real=real, numerators=num, denominator=q)

    @classmethod
    def from_values(cls, freqs: Sequence[float], real: bool = True) -> "FrequencyGrid":
        """Grid from explicit values; rational forms are detected when small."""
        f = np.asarray(freqs, dtype=float)
        fracs = [Fraction(float(v)).limit_denominator(1 << 20) for v in f]
        if fracs and all(float(fr) == v for fr, v in zip(fracs, f)):
            q = math.lcm(*(fr.denominator for fr in fracs))
            if q <= MAX_TABLE:
                num = np.array([fr.numerator * (q // fr.denominator) for fr in fracs], dtype=np.int64)
                return cls(f, real=real, numerators=num, denominator=q)
        return cls(f, real=real)

    def nearest_index(self, f: float) -> int:
        return int(np.argmin(np.abs(self.freqs - f)))


class PhaseClock:
    """Produces ``exp(-2j*pi*f*t)`` for t = 1, 2, ... without phase drift.

    Rational grids use an integer ``(num * t) mod q`` lookup into a table of
    roots of unity, so every phase is exact to table precision at any ``t``.
    Other grids advance a unit rotor by complex multiplication and reset it
    from an exact rational reduction every ``RENORMALIZE_EVERY`` steps.
    """

    __slots__ = ("grid", "t", "_table", "_rotor", "_step")

    def __init__(self, grid: FrequencyGrid):
        self.grid = grid
        self.t = 0
        if grid.numerators is not None:
            q = grid.denominator
            self._table = np.exp(-2j * np.pi * np.arange(q) / q)
            self._rotor = None
            self._step = None
        else:
            self._table = None
            self._step = np.exp(-2j * np.pi * grid.freqs)
            self._rotor = np.ones(grid.M, dtype=complex)

    def _exact(self, t: int) -> np.ndarray:
        cycles = np.array([float((Fraction(f) * t) % 1) for f in self.grid.freqs])
        return np.exp(-2j * np.pi * cycles)

    def advance(self) -> np.ndarray:
        """Move to the next time index and return its phase vector."""
        self.t += 1
        if self._table is not None:
            idx = (self.grid.numerators * self.t) % self.grid.denominator
            return self._table[idx]
        if self.t % RENORMALIZE_EVERY == 0:
            self._rotor = self._exact(self.t)
        else:
            self._rotor = self._rotor * self._step
        return self._rotor

    def copy(self) -> "PhaseClock":
        out = PhaseClock.__new__(PhaseClock)
        out.grid, out.t, out._table, out._step = self.grid, self.t, self._table, self._step
        out._rotor = None if self._rotor is None else self._rotor.copy()
        return out


@dataclass(eq=False)
class SpectralEstimate:
    """Nonnegative spectral values on a grid, possibly with a batch shape."""

    grid: FrequencyGrid
    values: np.ndarray
    T: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[-1:] != (self.grid.M,):
            raise ParameterError(
                f"estimate has trailing length {self.values.shape[-1:]} but grid has {self.grid.M} points"
            )

    def __getitem__(self, idx) -> "SpectralEstimate":
        return SpectralEstimate(self.grid, self.values[idx], self.T)


def _check_lambda(lam, what: str = "lambda") -> None:
    arr = np.asarray(lam, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0) or np.any(arr > 1.0):
        raise ParameterError(f"{what} must lie in (0, 1], got {lam!r}")


@dataclass(eq=False)
class ForgettingState:
    """Recursive forgetting-factor DFT accumulators.

    ``lam`` may be a scalar or an array of the batch shape (one forgetting
    factor per stream).  ``update`` mutates in place and returns ``self``.
    """

    grid: FrequencyGrid
    lam: float | np.ndarray
    centering: Centering = "none"
    mean_lam: float | np.ndarray | None = None
    batch_shape: tuple[int, ...] = ()
    T: int = field(default=0, init=False)
    J: np.ndarray = field(init=False, repr=False)
    C: np.ndarray = field(init=False, repr=False)
    D: np.ndarray = field(init=False, repr=False)
    mean_bar: np.ndarray = field(init=False, repr=False)
    J_mean: np.ndarray = field(init=False, repr=False)
    clock: PhaseClock = field(init=False, repr=False)

    def __post_init__(self):
        if not isinstance(self.grid, FrequencyGrid) or self.grid.M == 0:
            raise ParameterError("a non-empty FrequencyGrid is required")
        _check_lambda(self.lam)
        if self.centering not in ("none", "sequential"):
            raise ParameterError(f"unknown centering mode {self.centering!r}")
        if self.mean_lam is not None:
            _check_lambda(self.mean_lam, "mean forgetting factor")
        self.batch_shape = tuple(int(b) for b in self.batch_shape)
        self.reset()

    def reset(self) -> None:
        b, M = self.batch_shape, self.grid.M
        self.T = 0
        self.J = np.zeros(b + (M,), dtype=complex)
        self.C = np.zeros(b, dtype=float)
        self.D = np.zeros(b, dtype=float)
        self.mean_bar = np.zeros(b, dtype=complex)
        self.J_mean = np.zeros(b + (M,), dtype=complex)
        self.clock = PhaseClock(self.grid)

    @property
    def effective_mean_lam(self):
        return self.lam if self.mean_lam is None else self.mean_lam

    def _coerce_sample(self, x) -> np.ndarray:
        arr = np.asarray(x)
        if arr.shape != self.batch_shape:
            try:
                arr = np.broadcast_to(arr, self.batch_shape)
            except ValueError:
                raise InputError(f"sample shape {arr.shape} does not match batch shape {self.batch_shape}") from None
        if not np.all(np.isfinite(arr)):
            raise InputError("non-finite sample")
        return arr

    def update(self, x) -> "ForgettingState":
        """Absorb one sample (or one sample per batch member)."""
        x = self._coerce_sample(x)
        phase = self.clock.advance()
        lam = np.asarray(self.lam, dtype=float)
        self.J = lam[..., None] * self.J + x[..., None] * phase
        self.C = lam * lam * self.C + 1.0
        if self.centering == "sequential":
            mlam = np.asarray(self.effective_mean_lam, dtype=float)
            self.D = mlam * self.D + 1.0
            # same as (mlam*D_old/D_new)*mean + x/D_new; this form keeps constant streams exact
            self.mean_bar = self.mean_bar + (x - self.mean_bar) / self.D
            self.J_mean = lam[..., None] * self.J_mean + self.mean_bar[..., None] * phase
        self.T += 1
        return self

    def centered_dft(self) -> np.ndarray:
        if self.centering == "sequential":
            return self.J - self.J_mean
        return self.J

    def ffp(self) -> SpectralEstimate:
        """Current forgetting-factor periodogram."""
        if self.T == 0:
            raise StateError("periodogram undefined before the first sample (C = 0)")
        Jc = self.centered_dft()
        vals = (Jc.real**2 + Jc.imag**2) / self.C[..., None]
        return SpectralEstimate(self.grid, vals, self.T)

    def nbytes(self) -> int:
        """Bytes held by the per-stream accumulators."""
        return sum(a.nbytes for a in (self.J, self.C, self.D, self.mean_bar, self.J_mean))

    def copy(self) -> "ForgettingState":
        out = ForgettingState.__new__(ForgettingState)
        out.__dict__.update(self.__dict__)
        for name in ("J", "C", "D", "mean_bar", "J_mean"):
            setattr(out, name, getattr(self, name).copy())
        out.lam = np.copy(self.lam) if isinstance(self.lam, np.ndarray) else self.lam
        out.clock = self.clock.copy()
        return out


def new_state(grid: FrequencyGrid, lam: float = 0.99, centering: Centering = "none", **kw) -> ForgettingState:
    return ForgettingState(grid, lam, centering, **kw)


def taper_weights(lambda_seq, T: int) -> np.ndarray:
    """Unnormalised taper ``h_t = prod_{s=t}^{T-1} lam_s`` with ``h_T = 1``."""
    if T < 1:
        raise ParameterError("T must be >= 1")
    lam = np.asarray(lambda_seq, dtype=float)
    if lam.ndim == 0:
        lam = np.full(T - 1, float(lam))
    if lam.shape != (T - 1,):
        raise ParameterError(f"lambda sequence must have length T-1 = {T - 1}, got {lam.shape[0]}")
    _check_lambda(lam if lam.size else 1.0)
    # h_t for t = T, T-1, ..., 1 is the running product of lam_{T-1}, lam_{T-2}, ...
    h_rev = np.concatenate(([1.0], np.cumprod(lam[::-1])))
    return h_rev[::-1]


def batch_weighted_dft(samples, lambda_seq, grid: FrequencyGrid) -> tuple[np.ndarray, float]:
    """Direct O(T*M) evaluation of the tapered DFT and its normaliser.

    Used as an independent oracle for the recursive accumulators.
    """
    x = np.asarray(samples)
    T = x.shape[0]
    if T == 0:
        raise ParameterError("at least one sample is required")
    lam = np.asarray(lambda_seq, dtype=float)
    if lam.ndim != 1 or lam.shape[0] != T - 1:
        raise ParameterError(f"lambda_seq must have length T-1 = {T - 1}")
    h = taper_weights(lam, T)
    t = np.arange(1, T + 1, dtype=float)
    E = np.exp(-2j * np.pi * np.outer(t, grid.freqs))
    J = (h * x) @ E
    return J, float(np.sum(h * h))


def spectral_window(lambda_seq, T: int, grid: FrequencyGrid) -> np.ndarray:
    """Squared modulus of the unnormalised taper's Fourier transform."""
    h = taper_weights(lambda_seq, T)
    t = np.arange(1, T + 1, dtype=float)
    H = h @ np.exp(-2j * np.pi * np.outer(t, grid.freqs))
    return np.abs(H) ** 2


def classical_periodogram(samples, grid: FrequencyGrid) -> np.ndarray:
    """``(1/T) |sum_t x_t exp(-2j*pi*f*t)|^2`` by direct summation."""
    x = np.asarray(samples)
    T = x.shape[0]
    t = np.arange(1, T + 1, dtype=float)
    return np.abs(x @ np.exp(-2j * np.pi * np.outer(t, grid.freqs))) ** 2 / T
