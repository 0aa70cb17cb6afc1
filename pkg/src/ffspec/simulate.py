"""Seeded generators for the test processes.

* drifting-frequency sinusoid in Gaussian noise,
* AR(p) with parameter change-points (state carries across a change),
* modulated complex AR(1) (inertial-oscillation model for drifter velocities).

Every generator is a pure function of its spec; replications draw from
``replication_rng(seed, i)`` so any subset can be regenerated independently.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.signal import lfilter, lfiltic

from .errors import ParameterError
from .models import ArParams

BURN_IN_CAP = 5000


def replication_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for replication ``index`` of experiment ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


# ---------------------------------------------------------------- sinusoid


@dataclass(frozen=True)
class SinusoidDriftSpec:
    T: int
    gamma: float = 1e-3
    noise_sd: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.T < 1:
            raise ParameterError("T must be >= 1")
        if not self.gamma > 0:
            raise ParameterError("gamma must be > 0")
        if self.noise_sd < 0:
            raise ParameterError("noise_sd must be >= 0")


def instantaneous_frequency(t, gamma: float) -> np.ndarray:
    """``g'(t) = (1 + 0.6 sin(gamma t)) / 4`` in cycles per sample."""
    return (1.0 + 0.6 * np.sin(gamma * np.asarray(t, dtype=float))) / 4.0


def phase_function(t, gamma: float) -> np.ndarray:
    """``g(t) = t/4 + 3/(20 gamma) (1 - cos(gamma t))``, in cycles."""
    t = np.asarray(t, dtype=float)
    return t / 4.0 + 3.0 / (20.0 * gamma) * (1.0 - np.cos(gamma * t))


def gen_sinusoid_drift(spec: SinusoidDriftSpec, rng: np.random.Generator | None = None):
    """Return ``(x, g_prime)`` for ``x_t = sin(2 pi g(t) + zeta) + noise``.

    ``g`` is measured in cycles so that ``g'`` is directly comparable with
    grid frequencies.  ``zeta ~ U[-pi, pi]`` is drawn once per series.
    """
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    t = np.arange(1, spec.T + 1)
    zeta = rng.uniform(-math.pi, math.pi)
    noise = rng.standard_normal(spec.T)
    x = np.sin(2.0 * math.pi * phase_function(t, spec.gamma) + zeta) + spec.noise_sd * noise
    return x, instantaneous_frequency(t, spec.gamma)


# ---------------------------------------------------------------- AR(p)


@dataclass(frozen=True)
class ArSegmentSpec:
    """Piecewise-constant AR process; ``segments`` is ``[(start_t, ArParams), ...]``."""

    segments: tuple[tuple[int, ArParams], ...]
    T: int
    burn_in: int | None = None
    seed: int = 0

    def __post_init__(self):
        segs = tuple((int(s), p if isinstance(p, ArParams) else ArParams.from_json(p)) for s, p in self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise ParameterError("at least one segment is required")
        if segs[0][0] != 1:
            raise ParameterError("the first segment must start at t = 1")
        starts = [s for s, _ in segs]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ParameterError("segment starts must be strictly increasing")
        for s, p in segs:
            if not p.stationary:
                raise ParameterError(f"segment starting at t={s} has nonstationary coefficients {p.phi}")
        if self.T < 1:
            raise ParameterError("T must be >= 1")
        if self.burn_in is not None and self.burn_in < 0:
            raise ParameterError("burn_in must be >= 0")

    @property
    def effective_burn_in(self) -> int:
        if self.burn_in is not None:
            return self.burn_in
        return default_burn_in(self.segments[0][1])

    def truth(self) -> np.ndarray:
        """``(T, p_max + 1)`` array of true ``(phi..., log sigma2)`` per time step."""
        pmax = max(p.p for _, p in self.segments)
        out = np.zeros((self.T, pmax + 1))
        bounds = [s for s, _ in self.segments] + [self.T + 1]
        for (s, p), e in zip(self.segments, bounds[1:]):
            out[s - 1 : e - 1, : p.p] = p.phi
            out[s - 1 : e - 1, -1] = p.log_sigma2
        return out


def default_burn_in(params: ArParams) -> int:
    if params.p == 0:
        return 0
    rho = params.max_root_modulus()
    return min(BURN_IN_CAP, math.ceil(10 * params.p / (1.0 - rho)))


def parse_segments(text: str) -> list[tuple[int, ArParams]]:
    """Parse ``'1:1.46,-0.81,1;10000:-1.46,-0.81,1'`` (coefficients then sigma^2)."""
    out = []
    for part in filter(None, (p.strip() for p in text.split(";"))):
        try:
            start, vals = part.split(":")
            start = int(start)
            nums = [float(v) for v in vals.split(",")]
        except ValueError:
            raise ParameterError(f"bad segment {part!r}; expected start:phi1,...,phip,sigma2") from None
        out.append((start, ArParams.from_sigma2(nums[:-1], nums[-1])))
    return out


def gen_ar(spec: ArSegmentSpec, rng: np.random.Generator | None = None) -> np.ndarray:
    """Simulate the segmented AR process; burn-in samples are discarded."""
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    burn = spec.effective_burn_in
    eps = rng.standard_normal(burn + spec.T)
    out = np.empty(burn + spec.T)
    bounds = [burn + s - 1 for s, _ in spec.segments] + [burn + spec.T]
    bounds[0] = 0
    for (_, prm), lo, hi in zip(spec.segments, bounds[:-1], bounds[1:]):
        a = np.concatenate(([1.0], -np.asarray(prm.phi)))
        e = math.sqrt(prm.sigma2) * eps[lo:hi]
        if prm.p == 0:
            out[lo:hi] = e
            continue
        past = out[max(0, lo - prm.p) : lo][::-1]
        zi = lfiltic([1.0], a, past) if past.size else np.zeros(prm.p)
        out[lo:hi], _ = lfilter([1.0], a, e, zi=zi)
    return out[burn:]


# ---------------------------------------------------------------- modulated complex AR(1)


def omega_from_latitude(lat_deg, k: float) -> np.ndarray:
    """Inertial frequency ``-k sin(latitude)``; latitude in degrees."""
    return -k * np.sin(np.deg2rad(np.asarray(lat_deg, dtype=float)))


@dataclass(frozen=True, eq=False)
class ModulatedCar1Spec:
    """``Z_t = r e^{i beta_t} Z_{t-1} + eps_t`` with ``eps ~ CN(0, sigma2)``.

    Give either ``beta`` (radians per step) or ``omega`` (cycles per step,
    converted as ``beta = 2 pi omega``).
    """

    T: int
    r: float
    sigma2: float = 1.0
    beta: np.ndarray | None = None
    omega: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.r < 1.0:
            raise ParameterError(f"r must lie in (0, 1), got {self.r}")
        if not self.sigma2 > 0:
            raise ParameterError("sigma2 must be > 0")
        if (self.beta is None) == (self.omega is None):
            raise ParameterError("give exactly one of beta or omega")
        seq = self.beta if self.beta is not None else self.omega
        seq = np.broadcast_to(np.asarray(seq, dtype=float), (self.T,))
        if not np.all(np.isfinite(seq)):
            raise ParameterError("modulation sequence must be finite")
        object.__setattr__(self, "beta" if self.beta is not None else "omega", seq)

    @property
    def beta_seq(self) -> np.ndarray:
        return self.beta if self.beta is not None else 2.0 * math.pi * self.omega

    @property
    def omega_seq(self) -> np.ndarray:
        return self.omega if self.omega is not None else self.beta / (2.0 * math.pi)


def complex_normal(rng: np.random.Generator, size, var: float) -> np.ndarray:
    """Circularly symmetric CN(0, var): independent parts of variance var/2."""
    s = math.sqrt(var / 2.0)
    return s * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def gen_modulated_car1(spec: ModulatedCar1Spec, rng: np.random.Generator | None = None):
    """Return ``(z, omega)``; the recursion is solved in a demodulated frame.

    With ``B_t = sum_{s<=t} beta_s`` and ``W_t = Z_t e^{-i B_t}``,
    ``W_t = r W_{t-1} + eps_t e^{-i B_t}`` is a plain AR(1) filter.
    """
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    z0 = complex_normal(rng, (), spec.sigma2 / (1.0 - spec.r**2))
    eps = complex_normal(rng, spec.T, spec.sigma2)
    B = np.cumsum(spec.beta_seq)
    rot = np.exp(1j * B)
    w, _ = lfilter([1.0], [1.0, -spec.r], eps * np.conj(rot), zi=[spec.r * z0])
    return w * rot, spec.omega_seq


# ---------------------------------------------------------------- CSV export


def write_series_csv(path_or_file, x, extra: dict[str, Sequence[float]] | None = None) -> None:
    """Write ``t,x`` (real) or ``t,x_re,x_im`` (complex) plus extra columns."""
    x = np.asarray(x)
    extra = extra or {}
    cols = ["t"] + (["x_re", "x_im"] if np.iscomplexobj(x) else ["x"]) + list(extra)
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh)
        w.writerow(cols)
        extra_vals = [np.asarray(v) for v in extra.values()]
        for i, xi in enumerate(x):
            row = [i + 1] + ([repr(float(xi.real)), repr(float(xi.imag))] if np.iscomplexobj(x) else [repr(float(xi))])
            row += [repr(float(v[i])) for v in extra_vals]
            w.writerow(row)
    finally:
        if own:
            fh.close()
