"""Monte Carlo orchestration and scoring.

Replications are processed in fixed-size chunks; within a chunk every
replication advances in lock-step through one batched estimator.  Chunk
statistics are merged with the parallel (Chan et al.) mean/variance update,
always in chunk order, so results do not depend on the worker count.
"""

from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, NamedTuple

import numpy as np
from scipy import stats

from .errors import ParameterError
from .models import ArParams
from .online import EstimatorSpec, OnlineEstimator
from .simulate import (
    ArSegmentSpec,
    ModulatedCar1Spec,
    SinusoidDriftSpec,
    gen_ar,
    gen_modulated_car1,
    gen_sinusoid_drift,
    omega_from_latitude,
    replication_rng,
)
from .spectral import ForgettingState, FrequencyGrid, SpectralEstimate

log = logging.getLogger(__name__)


# ---------------------------------------------------------------- statistics


@dataclass
class RunningStats:
    """Count, mean and sum of squared deviations; mergeable."""

    n: np.ndarray
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def empty(cls, shape=()) -> "RunningStats":
        return cls(np.zeros(shape, dtype=np.int64), np.zeros(shape), np.zeros(shape))

    @classmethod
    def from_samples(cls, values: np.ndarray) -> "RunningStats":
        """Stats over axis 0, ignoring non-finite entries."""
        v = np.asarray(values, dtype=float)
        ok = np.isfinite(v)
        n = ok.sum(axis=0)
        vz = np.where(ok, v, 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = np.where(n > 0, vz.sum(axis=0) / np.maximum(n, 1), 0.0)
        m2 = np.where(ok, (v - mean) ** 2, 0.0).sum(axis=0)
        return cls(n.astype(np.int64), mean, m2)

    def merge(self, other: "RunningStats") -> "RunningStats":
        n = self.n + other.n
        safe = np.maximum(n, 1)
        delta = other.mean - self.mean
        mean = self.mean + delta * other.n / safe
        m2 = self.m2 + other.m2 + delta**2 * self.n * other.n / safe
        return RunningStats(n, np.where(n > 0, mean, 0.0), m2)

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(np.where(self.n > 1, self.m2 / np.maximum(self.n - 1, 1), 0.0))


@dataclass
class TrajectorySummary:
    """Per-recorded-time statistics of tracked quantities plus per-run scalars."""

    times: np.ndarray
    series: dict[str, RunningStats] = field(default_factory=dict)
    scalars: dict[str, RunningStats] = field(default_factory=dict)
    failures: list[dict] = field(default_factory=list)

    def mean(self, name: str) -> np.ndarray:
        return self.series[name].mean

    def std(self, name: str) -> np.ndarray:
        return self.series[name].std

    def at(self, name: str, t: int) -> float:
        i = int(np.searchsorted(self.times, t))
        if i >= self.times.size or self.times[i] != t:
            raise ParameterError(f"time {t} was not recorded")
        return float(self.series[name].mean[i])

    def window_mean(self, name: str, lo: int, hi: int) -> float:
        """Average of the mean trajectory over recorded times in ``[lo, hi)``."""
        sel = (self.times >= lo) & (self.times < hi)
        return float(np.mean(self.series[name].mean[sel]))

    def merge(self, other: "TrajectorySummary") -> "TrajectorySummary":
        if self.times.size == 0 and not self.series:
            return other
        series = {k: self.series[k].merge(other.series[k]) for k in self.series}
        scalars = {k: self.scalars[k].merge(other.scalars[k]) for k in self.scalars}
        return TrajectorySummary(self.times, series, scalars, self.failures + other.failures)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "quantity", "mean", "std", "n"])
            for name, st in self.series.items():
                sd = st.std
                for i, t in enumerate(self.times):
                    if st.n[i] == 0:  # nothing recorded yet, e.g. during burn-in
                        w.writerow([int(t), name, "", "", 0])
                    else:
                        w.writerow([int(t), name, repr(float(st.mean[i])), repr(float(sd[i])), int(st.n[i])])

    def scalar_table(self) -> dict:
        return {
            k: {"mean": float(v.mean), "std": float(v.std), "n": int(v.n)} for k, v in self.scalars.items()
        }


# ---------------------------------------------------------------- scoring


class ArgmaxResult(NamedTuple):
    freq: float | np.ndarray
    all_zero: bool | np.ndarray


def argmax_freq(est: SpectralEstimate) -> ArgmaxResult:
    """Grid frequency of the largest ordinate; ties go to the lowest frequency.

    ``np.argmax`` returns the first maximum and grids are increasing, which
    gives the tie-break.  An all-zero estimate yields the first grid point
    with ``all_zero`` set.
    """
    v = est.values
    if v.shape[-1] == 0:
        raise ParameterError("empty estimate")
    f = est.grid.freqs[np.argmax(v, axis=-1)]
    flag = ~np.any(v != 0, axis=-1)
    if np.ndim(f) == 0:
        return ArgmaxResult(float(f), bool(flag))
    return ArgmaxResult(f, flag)


def ise(ghat, gtrue) -> float:
    """Integrated squared error ``sum_t (ghat_t - gtrue_t)^2``."""
    a, b = np.asarray(ghat, dtype=float), np.asarray(gtrue, dtype=float)
    if a.shape != b.shape:
        raise ParameterError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.sum((a - b) ** 2))


# ---------------------------------------------------------------- configuration


GENERATORS = ("sine", "ar", "car1")


@dataclass
class ExperimentConfig:
    """A seeded Monte Carlo experiment.

    ``generator`` is a dict with ``kind`` in ``{"sine", "ar", "car1"}`` plus the
    generator's fields (``T`` included).  ``score`` names an estimate to
    compare against the generator's ground truth each step, e.g.
    ``{"estimate": "ghat", "truth": "g_prime", "from_t": 1}``.
    """

    generator: dict
    estimator: EstimatorSpec = field(default_factory=EstimatorSpec)
    M: int = 256
    R: int = 200
    record_stride: int = 10
    seed: int = 0
    chunk_size: int = 200
    workers: int = 1
    track: list[str] | None = None
    score: dict | None = None
    name: str = "experiment"

    def __post_init__(self):
        if isinstance(self.estimator, dict):
            self.estimator = EstimatorSpec.from_json(self.estimator)
        if self.R < 1:
            raise ParameterError("R must be >= 1")
        if self.record_stride < 1:
            raise ParameterError("record_stride must be >= 1")
        if self.chunk_size < 1 or self.workers < 1:
            raise ParameterError("chunk_size and workers must be >= 1")
        if self.generator.get("kind") not in GENERATORS:
            raise ParameterError(f"generator.kind must be one of {GENERATORS}")
        if int(self.generator.get("T", 0)) < 1:
            raise ParameterError("generator.T must be >= 1")

    @property
    def T(self) -> int:
        return int(self.generator["T"])

    @property
    def is_complex(self) -> bool:
        return self.generator["kind"] == "car1"

    def grid(self) -> FrequencyGrid:
        return FrequencyGrid.default(self.M, real=not self.is_complex)

    def to_json(self) -> dict:
        d = asdict(self)
        d["estimator"] = self.estimator.to_json()
        return d

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        known = cls.__dataclass_fields__
        extra = set(obj) - set(known)
        if extra:
            raise ParameterError(f"unknown experiment fields: {sorted(extra)}")
        return cls(**obj)


def generate(gen: dict, rng: np.random.Generator) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """One replication of the configured generator: ``(series, truths)``."""
    kind = gen["kind"]
    T = int(gen["T"])
    if kind == "sine":
        spec = SinusoidDriftSpec(T, gen.get("gamma", 1e-3), gen.get("noise_sd", 1.0))
        x, gp = gen_sinusoid_drift(spec, rng)
        return x, {"g_prime": gp}
    if kind == "ar":
        segs = tuple((int(s), ArParams.from_json(p)) for s, p in gen["segments"])
        spec = ArSegmentSpec(segs, T, gen.get("burn_in"))
        return gen_ar(spec, rng), {}
    if kind == "car1":
        if "latitude" in gen:
            lat = np.asarray(gen["latitude"], dtype=float)
            if lat.size == 2:
                lat = np.linspace(lat[0], lat[1], T)
            omega = omega_from_latitude(lat, gen["coriolis_k"])
        else:
            omega = np.broadcast_to(np.asarray(gen.get("omega", 0.0), dtype=float), (T,))
        spec = ModulatedCar1Spec(T, gen["r"], gen.get("sigma2", 1.0), omega=omega)
        z, om = gen_modulated_car1(spec, rng)
        return z, {"omega": om}
    raise ParameterError(f"unknown generator {kind!r}")


# ---------------------------------------------------------------- Monte Carlo


def _tracked_names(cfg: ExperimentConfig, est: OnlineEstimator) -> list[str]:
    if cfg.track is not None:
        return list(cfg.track)
    names = [] if est.model is None else list(est.model.param_names)
    if cfg.estimator.kind == "affwe":
        names.append("lambda")
    if cfg.estimator.kind == "ffp":
        names.append("ghat")
    return names


def _current(est: OnlineEstimator, name: str, n: int) -> np.ndarray:
    if name == "lambda":
        return est.lam.astype(float)
    if name == "ghat":
        return argmax_freq(est.ffp()).freq
    if est.params is None:
        return np.full(n, np.nan)
    idx = list(est.model.param_names).index(name)
    return est.params[:, idx]


def run_chunk(cfg: ExperimentConfig, indices: Iterable[int]) -> TrajectorySummary:
    """Run the replications in ``indices`` as one batch."""
    indices = list(indices)
    n = len(indices)
    data, truths = [], []
    for i in indices:
        x, tr = generate(cfg.generator, replication_rng(cfg.seed, i))
        data.append(x)
        truths.append(tr)
    X = np.stack(data)
    truth = {k: np.stack([tr[k] for tr in truths]) for k in truths[0]}
    grid = cfg.grid()
    est = OnlineEstimator(cfg.estimator, grid, (n,))
    names = _tracked_names(cfg, est)
    times = np.arange(cfg.record_stride, cfg.T + 1, cfg.record_stride)
    rec = {k: np.full((times.size, n), np.nan) for k in names}
    score = cfg.score
    sq = np.zeros(n)
    ab = np.zeros(n)
    count = 0
    j = 0
    for t in range(1, cfg.T + 1):
        est.step(X[:, t - 1])
        if score is not None and t >= score.get("from_t", 1):
            target = _current(est, score["estimate"], n)
            err = target - truth[score["truth"]][:, t - 1]
            sq += err**2
            ab += np.abs(err)
            count += 1
        if j < times.size and t == times[j]:
            for k in names:
                rec[k][j] = _current(est, k, n)
            j += 1
    series = {k: RunningStats.from_samples(rec[k].T) for k in names}
    scalars = {}
    if score is not None:
        scalars["ise"] = RunningStats.from_samples(sq)
        scalars["mae"] = RunningStats.from_samples(ab / max(count, 1))
    failures = []
    if est.ffwe is not None:
        for row, i in enumerate(indices):
            if est.ffwe.rejected[row]:
                failures.append({"replication": i, "seed": cfg.seed, "rejected_steps": int(est.ffwe.rejected[row])})
    return TrajectorySummary(times, series, scalars, failures)


def _chunks(R: int, size: int) -> list[range]:
    return [range(a, min(a + size, R)) for a in range(0, R, size)]


def run_monte_carlo(cfg: ExperimentConfig) -> TrajectorySummary:
    """All replications of ``cfg``, merged in chunk order."""
    chunks = _chunks(cfg.R, cfg.chunk_size)
    if cfg.workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            parts = list(pool.map(run_chunk, [cfg] * len(chunks), chunks))
    else:
        parts = [run_chunk(cfg, c) for c in chunks]
    out = parts[0]
    for p in parts[1:]:
        out = out.merge(p)
    if out.failures:
        log.warning("%d replications had rejected steps", len(out.failures))
    return out


def run_manifest(cfg: ExperimentConfig, start: float, runtime: float, version: str) -> dict:
    return {
        "config": cfg.to_json(),
        "seed": cfg.seed,
        "start_time": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(start)),
        "runtime_seconds": runtime,
        "version": version,
    }


# ---------------------------------------------------------------- sweeps


def mise_sweep(
    gammas, lams, R: int = 200, T: int = 20000, M: int = 256, seed: int = 0, noise_sd: float = 1.0
) -> np.ndarray:
    """MISE of the argmax-frequency tracker, shape ``(len(gammas), len(lams))``.

    All forgetting factors share the same simulated series per replication.
    """
    grid = FrequencyGrid.default(M)
    lams = np.asarray(lams, dtype=float)
    out = np.zeros((len(gammas), lams.size))
    for gi, gamma in enumerate(gammas):
        X = np.empty((R, T))
        G = None
        for i in range(R):
            X[i], G = gen_sinusoid_drift(SinusoidDriftSpec(T, gamma, noise_sd), replication_rng(seed + gi, i))
        st = ForgettingState(grid, np.broadcast_to(lams[:, None], (lams.size, R)).copy(), batch_shape=(lams.size, R))
        sq = np.zeros((lams.size, R))
        for t in range(T):
            st.update(np.broadcast_to(X[:, t], (lams.size, R)))
            J = st.J
            k = np.argmax(J.real**2 + J.imag**2, axis=-1)  # C is common per row; argmax unaffected
            sq += (grid.freqs[k] - G[t]) ** 2
        out[gi] = sq.mean(axis=1)
    return out


# ---------------------------------------------------------------- distribution check


@dataclass
class OrdinateTest:
    freqs: np.ndarray
    ks: np.ndarray
    corr: np.ndarray

    def max_abs_corr(self, min_sep: int = 5) -> float:
        idx = np.arange(self.freqs.size)
        far = np.abs(idx[:, None] - idx[None, :]) >= min_sep
        return float(np.max(np.abs(self.corr[far]))) if np.any(far) else 0.0


MIN_REPLICATIONS = 100


def chi2_ordinate_test(sdf_values, ffp_values) -> OrdinateTest:
    """Compare ``2 S_hat / S`` with chi-squared(2) per frequency.

    ``ffp_values`` is ``(R, M)`` across replications; returns Kolmogorov-Smirnov
    distances and the cross-frequency correlation matrix of the ordinates.
    """
    S = np.asarray(sdf_values, dtype=float)
    V = np.asarray(ffp_values, dtype=float)
    if V.ndim != 2 or V.shape[1] != S.shape[-1]:
        raise ParameterError("ffp_values must be (R, M) matching the SDF values")
    if V.shape[0] < MIN_REPLICATIONS:
        raise ParameterError(f"need at least {MIN_REPLICATIONS} replications, got {V.shape[0]}")
    Z = 2.0 * V / S
    ks = np.array([stats.kstest(Z[:, k], "chi2", args=(2,)).statistic for k in range(Z.shape[1])])
    return OrdinateTest(np.arange(Z.shape[1]), ks, np.corrcoef(Z, rowvar=False))


LambdaSchedule = float | Callable[[int], float]


def assumption_schedule(lam0: float = 0.99, gamma: float = 1.5) -> Callable[[int], float]:
    """Increasing factors with ``1 - lam_t^2 = (1 - lam0^2) t^{-gamma}``."""
    return lambda t: float(np.sqrt(1.0 - (1.0 - lam0**2) * t ** (-gamma)))


def simulate_ordinates(
    sample: Callable[[np.random.Generator, int], np.ndarray],
    grid: FrequencyGrid,
    T: int,
    schedule: LambdaSchedule,
    R: int,
    seed: int = 0,
) -> np.ndarray:
    """FFP values ``(R, M)`` at time ``T`` for ``R`` independent series.

    ``sample(rng, T)`` draws one series; ``schedule`` is a constant factor or a
    function of ``t`` giving the factor applied when moving from ``t`` to ``t+1``.
    """
    X = np.stack([sample(replication_rng(seed, i), T) for i in range(R)])
    const = not callable(schedule)
    st = ForgettingState(grid, float(schedule) if const else schedule(1), batch_shape=(R,))
    for t in range(T):
        if not const and t > 0:
            st.lam = schedule(t)
        st.update(X[:, t])
    return st.ffp().values
