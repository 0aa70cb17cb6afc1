"""Command-line front end.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import math
import os
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DomainError, EvaluationError, InputError, NumericalError, ParameterError, StateError
from .harness import ExperimentConfig, argmax_freq, mise_sweep, run_manifest, run_monte_carlo
from .models import make_model
from .online import EstimatorSpec, OnlineEstimator
from .simulate import (
    ArSegmentSpec,
    ModulatedCar1Spec,
    SinusoidDriftSpec,
    gen_ar,
    gen_modulated_car1,
    gen_sinusoid_drift,
    omega_from_latitude,
    parse_segments,
    write_series_csv,
)
from .spectral import FrequencyGrid, SpectralEstimate
from .whittle import Axis, likelihood_surface

log = logging.getLogger("ffspec")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for data errors here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- helpers


class _LazyWriter:
    """CSV writer that creates its file on the first row only."""

    def __init__(self, path: str | None):
        self.path = path
        self._fh = None
        self._w = None

    def writerow(self, row):
        if self._w is None:
            if self.path in (None, "-"):
                self._fh = sys.stdout
            else:
                self._fh = open(self.path, "w", newline="")
            self._w = csv.writer(self._fh)
        self._w.writerow(row)

    def close(self):
        if self._fh is not None and self._fh is not sys.stdout:
            self._fh.close()
        elif self._fh is sys.stdout:
            sys.stdout.flush()


def _fmt(v) -> str:
    v = float(v)
    return "" if math.isnan(v) else repr(v)


def _open_out(path: str | None):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _read_latitudes(path: str) -> np.ndarray:
    """One latitude per row: a ``lat`` column if present, else the last column."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise InputError(f"cannot read latitude file {path}: {exc.strerror}") from None
    if not rows:
        raise InputError(f"latitude file {path} is empty")
    head = [h.strip().lower() for h in rows[0]]
    try:
        float(head[-1])
        col, body = len(head) - 1, rows
    except ValueError:
        col = head.index("lat") if "lat" in head else len(head) - 1
        body = rows[1:]
    try:
        return np.array([float(r[col]) for r in body])
    except (ValueError, IndexError) as exc:
        raise InputError(f"bad latitude value in {path}: {exc}") from None


def _parse_times(text: str | None) -> set[int]:
    if not text:
        return set()
    try:
        out = {int(v) for v in text.split(",") if v.strip()}
    except ValueError:
        raise ParameterError(f"--dump-sdf-at expects comma-separated integers, got {text!r}") from None
    if any(t < 1 for t in out):
        raise ParameterError("--dump-sdf-at times must be >= 1")
    return out


# ---------------------------------------------------------------- simulate


def cmd_simulate(args) -> int:
    if args.T is None and not (args.kind == "car1" and args.omega_path):
        raise ParameterError("--T is required")
    if args.kind == "ar":
        if not args.segments:
            raise ParameterError("--segments is required for ar")
        spec = ArSegmentSpec(tuple(parse_segments(args.segments)), args.T, args.burn_in, args.seed)
        x, extra = gen_ar(spec), {}
    elif args.kind == "sine":
        spec = SinusoidDriftSpec(args.T, args.gamma, args.noise_sd, args.seed)
        x, gp = gen_sinusoid_drift(spec)
        extra = {"g_prime": gp}
    else:
        if args.omega_path:
            if args.coriolis_k is None:
                raise ParameterError("--coriolis-k is required with --omega-path")
            lat = _read_latitudes(args.omega_path)
            T = args.T if args.T is not None else lat.size
            if lat.size < T:
                raise InputError(f"latitude file has {lat.size} rows, fewer than T={T}")
            lat = lat[:T]
            omega = omega_from_latitude(lat, args.coriolis_k)
            extra_lat = {"lat": lat}
        elif args.omega is not None:
            T = args.T
            omega = np.full(T, args.omega)
            extra_lat = {}
        else:
            raise ParameterError("car1 needs --omega-path (with --coriolis-k) or --omega")
        spec = ModulatedCar1Spec(T, args.r, args.sigma2, omega=omega, seed=args.seed)
        x, om = gen_modulated_car1(spec)
        extra = {**extra_lat, "omega": om}
    fh, own = _open_out(args.output)
    try:
        write_series_csv(fh, x, extra)
    finally:
        if own:
            fh.close()
    return EXIT_OK


# ---------------------------------------------------------------- estimate


def _estimator_spec(args) -> EstimatorSpec:
    base = {}
    if args.config:
        base = json.loads(Path(args.config).read_text())
    flags = {
        "kind": args.kind,
        "model": args.model,
        "lam": args.lam,
        "r_phi": args.r_phi,
        "r_lambda": args.r_lambda,
        "alpha": args.alpha,
        "prior_weight": args.prior_weight,
        "burn_in": args.burn_in,
        "centering": args.centering,
        "precondition": args.precondition,
        "frozen": args.freeze.split(",") if args.freeze else None,
        "init": json.loads(args.init) if args.init else None,
    }
    base.update({k: v for k, v in flags.items() if v is not None})
    return EstimatorSpec.from_json(base)


class _RowReader:
    """Iterates ``(t, x, lat)`` from a header-required CSV stream."""

    def __init__(self, fh, on_error: str):
        self.reader = csv.reader(fh)
        self.on_error = on_error
        self.skipped = 0
        try:
            header = next(self.reader)
        except StopIteration:
            raise InputError("no samples: input is empty") from None
        cols = [h.strip().lower() for h in header]
        if "x" in cols:
            self.complex = False
            self.idx = (cols.index("x"),)
        elif "x_re" in cols and "x_im" in cols:
            self.complex = True
            self.idx = (cols.index("x_re"), cols.index("x_im"))
        else:
            raise InputError(f"header must contain x or x_re,x_im; got {header}")
        self.t_idx = cols.index("t") if "t" in cols else None
        self.lat_idx = cols.index("lat") if "lat" in cols else None

    def __iter__(self):
        for lineno, row in enumerate(self.reader, start=2):
            if not row:
                continue
            try:
                vals = [float(row[i]) for i in self.idx]
                lat = float(row[self.lat_idx]) if self.lat_idx is not None else math.nan
                if not all(math.isfinite(v) for v in vals):
                    raise ValueError("non-finite value")
            except (ValueError, IndexError) as exc:
                if self.on_error == "abort":
                    raise InputError(f"line {lineno}: malformed row {row!r} ({exc})") from None
                self.skipped += 1
                log.warning("line %d: skipping malformed row %r", lineno, row)
                continue
            x = complex(vals[0], vals[1]) if self.complex else vals[0]
            yield x, lat


def cmd_estimate(args) -> int:
    spec = _estimator_spec(args)
    dump_at = _parse_times(args.dump_sdf_at)
    if dump_at and not args.sdf_out:
        raise ParameterError("--dump-sdf-at needs --sdf-out")
    if args.record_stride < 1:
        raise ParameterError("--record-stride must be >= 1")

    src = sys.stdin if args.input in (None, "-") else None
    if src is None:
        try:
            src = open(args.input, newline="")
        except OSError as exc:
            raise InputError(f"cannot open {args.input}: {exc.strerror}") from None
    try:
        rows = _RowReader(src, args.on_error)
        if rows.lat_idx is not None and args.coriolis_k is None:
            raise ParameterError("input has a lat column; pass --coriolis-k to derive omega")
        grid = FrequencyGrid.default(args.M, real=not rows.complex)
        model = make_model(spec.model) if spec.kind != "ffp" else None
        if model is not None and rows.complex != (model.name == "ocean"):
            # AR models are real-valued; the ocean model needs a two-sided grid
            raise ParameterError(f"model {spec.model!r} does not match a {'complex' if rows.complex else 'real'} series")
        est = OnlineEstimator(spec, grid, (), model)

        names = ["t"] + (list(model.param_names) if model is not None else [])
        if spec.kind == "affwe":
            names.append("lambda")
        want_ghat = spec.kind == "ffp" or args.ghat
        if want_ghat:
            names.append("ghat")
        with_truth = rows.lat_idx is not None
        if with_truth:
            names.append("omega_true")

        out = _LazyWriter(args.output)
        sdf = _LazyWriter(args.sdf_out) if dump_at else None
        header_done = False
        t = 0
        try:
            for x, lat in rows:
                est.step(x)
                t += 1
                if not header_done:
                    out.writerow(names)
                    if sdf is not None:
                        sdf.writerow(["t", "f", "S"])
                    header_done = True
                if t % args.record_stride == 0:
                    row = [t]
                    if model is not None:
                        p = est.params
                        row += [_fmt(v) for v in (p if p is not None else [math.nan] * model.n_params)]
                    if spec.kind == "affwe":
                        row.append(_fmt(est.lam))
                    if want_ghat:
                        row.append(_fmt(argmax_freq(est.ffp()).freq))
                    if with_truth:
                        row.append(_fmt(omega_from_latitude(lat, args.coriolis_k)))
                    out.writerow(row)
                if sdf is not None and t in dump_at:
                    for f, s in zip(grid.freqs, est.ffp().values):
                        sdf.writerow([t, repr(float(f)), repr(float(s))])
        finally:
            out.close()
            if sdf is not None:
                sdf.close()
        if t == 0:
            raise InputError("no samples: input has a header but no usable rows")
        if rows.skipped:
            log.warning("skipped %d malformed rows", rows.skipped)
        if est.ffwe is not None and est.ffwe.rejected.sum():
            log.warning("%d gradient steps were rejected", int(est.ffwe.rejected.sum()))
    finally:
        if src is not sys.stdin:
            src.close()
    return EXIT_OK


# ---------------------------------------------------------------- surface


def _read_snapshot(path: str, t_sel: int | None) -> SpectralEstimate:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            rows = list(reader)
    except OSError as exc:
        raise InputError(f"cannot read snapshot {path}: {exc.strerror}") from None
    if not rows or not {"t", "f", "S"} <= set(rows[0]):
        raise InputError(f"snapshot {path} must have columns t,f,S")
    try:
        ts = np.array([int(r["t"]) for r in rows])
        fs = np.array([float(r["f"]) for r in rows])
        ss = np.array([float(r["S"]) for r in rows])
    except ValueError as exc:
        raise InputError(f"bad value in snapshot {path}: {exc}") from None
    t = int(ts.max()) if t_sel is None else t_sel
    keep = ts == t
    if not np.any(keep):
        raise InputError(f"snapshot has no rows for t={t}")
    real = bool(np.all(fs[keep] > 0))
    grid = FrequencyGrid.from_values(fs[keep], real=real)
    return SpectralEstimate(grid, ss[keep], t)


def cmd_surface(args) -> int:
    model = make_model(args.model)
    names = list(model.param_names)
    a1 = Axis.parse(args.axis1, names)
    a2 = Axis.parse(args.axis2, names)
    fixed = np.zeros(model.n_params)
    if args.fixed:
        for part in args.fixed.split(","):
            try:
                k, v = part.split("=")
                fixed[names.index(k.strip())] = float(v)
            except ValueError:
                raise ParameterError(f"--fixed expects name=value pairs from {names}, got {part!r}") from None
    est = _read_snapshot(args.snapshot, args.t)
    surf = likelihood_surface(est, model, a1, a2, fixed)
    surf.to_csv(args.output)
    best = surf.argmax()
    log.info("argmax %s=%g %s=%g", a1.name, best[0], a2.name, best[1])
    return EXIT_OK


# ---------------------------------------------------------------- experiment


def load_config(path: str) -> dict:
    """Read a JSON config from ``path`` or, failing that, from the bundled set."""
    p = Path(path)
    if p.exists():
        text = p.read_text()
    else:
        res = resources.files("ffspec.configs").joinpath(p.name)
        if not res.is_file():
            raise ParameterError(f"config {path} not found (bundled: {', '.join(bundled_configs())})")
        text = res.read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{path}: invalid JSON ({exc})") from None


def bundled_configs() -> list[str]:
    return sorted(r.name for r in resources.files("ffspec.configs").iterdir() if r.name.endswith(".json"))


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def expand_variants(cfg: dict) -> list[tuple[str, ExperimentConfig]]:
    """``{"base": {...}, "variants": [{"label": ..., ...overrides}]}`` into configs."""
    base = cfg.get("base", {k: v for k, v in cfg.items() if k not in ("variants", "sweep")})
    variants = cfg.get("variants") or [{"label": base.get("name", "run")}]
    out = []
    for v in variants:
        v = dict(v)
        label = str(v.pop("label", base.get("name", "run")))
        merged = _merge(base, v)
        merged["name"] = label
        out.append((label, ExperimentConfig.from_json(merged)))
    return out


def run_sweep(sweep: dict, out_dir: Path) -> dict:
    known = {"gammas", "lams", "R", "T", "M", "seed", "noise_sd"}
    extra = set(sweep) - known
    if extra:
        raise ParameterError(f"unknown sweep fields: {sorted(extra)}")
    mise = mise_sweep(**sweep)
    with open(out_dir / "mise.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["gamma", "lambda", "mise"])
        for g, row in zip(sweep["gammas"], mise):
            for lam, v in zip(sweep["lams"], row):
                w.writerow([g, lam, repr(float(v))])
    return {"mise": mise.tolist()}


def cmd_experiment(args) -> int:
    cfg = load_config(args.config)
    out_dir = Path(args.out_dir)
    start = time.time()
    if "sweep" in cfg:
        sweep = dict(cfg["sweep"])
        for k in ("R", "seed"):
            if getattr(args, k) is not None:
                sweep[k] = getattr(args, k)
        out_dir.mkdir(parents=True, exist_ok=True)
        run_sweep(sweep, out_dir)
        manifest = {"config": {"sweep": sweep}, "seed": sweep.get("seed", 0),
                    "start_time": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(start)),
                    "runtime_seconds": time.time() - start, "version": __version__}
    else:
        runs = expand_variants(cfg)
        for _, ec in runs:
            if args.R is not None:
                ec.R = args.R
                ec.chunk_size = min(ec.chunk_size, ec.R)
            if args.seed is not None:
                ec.seed = args.seed
            if args.workers is not None:
                ec.workers = args.workers
        out_dir.mkdir(parents=True, exist_ok=True)
        entries = []
        for label, ec in runs:
            t0 = time.time()
            summary = run_monte_carlo(ec)
            summary.to_csv(out_dir / f"{label}.csv")
            if summary.scalars:
                (out_dir / f"{label}_scalars.json").write_text(json.dumps(summary.scalar_table(), indent=2))
            entries.append(run_manifest(ec, t0, time.time() - t0, __version__) | {"failures": summary.failures})
            log.info("%s done in %.1fs", label, time.time() - t0)
        manifest = {"config": cfg, "seed": runs[0][1].seed,
                    "start_time": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(start)),
                    "runtime_seconds": time.time() - start, "version": __version__, "runs": entries}
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ffspec", description="Online spectral estimation with forgetting factors.",
                epilog="exit codes: 0 ok, 1 usage/config error, 2 data error, 3 numerical failure")
    p.add_argument("--version", action="version", version=f"ffspec {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", parents=[common], help="write a simulated series as CSV")
    s.add_argument("kind", choices=["ar", "sine", "car1"])
    s.add_argument("--T", type=int, default=None, help="series length (car1 defaults to the latitude file length)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--output", default="-")
    s.add_argument("--segments", help="ar: 'start:phi1,...,phip,sigma2;...'")
    s.add_argument("--burn-in", type=int, default=None, help="ar: discarded warm-up samples")
    s.add_argument("--gamma", type=float, default=1e-3, help="sine: drift rate")
    s.add_argument("--noise-sd", type=float, default=1.0, help="sine: noise standard deviation")
    s.add_argument("--r", type=float, default=0.97, help="car1: damping")
    s.add_argument("--sigma2", type=float, default=1.0, help="car1: innovation variance")
    s.add_argument("--omega-path", help="car1: CSV of latitudes in degrees")
    s.add_argument("--coriolis-k", type=float, default=None, help="car1: omega = -k sin(lat), cycles per sample")
    s.add_argument("--omega", type=float, default=None, help="car1: constant rotation, cycles per sample")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", parents=[common], help="run an online estimator over a CSV stream")
    e.add_argument("input", nargs="?", default="-", help="CSV file with t,x or t,x_re,x_im (default stdin)")
    e.add_argument("-o", "--output", default="-")
    e.add_argument("--config", help="JSON estimator spec; flags override its values")
    e.add_argument("--kind", choices=["ffp", "ffwe", "affwe"], default=None)
    e.add_argument("--model", default=None, help="ar:<p>, white, ocean or ocean:f")
    e.add_argument("--lam", type=float, default=None)
    e.add_argument("--r-phi", type=json.loads, default=None, help="rate or JSON list of per-parameter rates")
    e.add_argument("--r-lambda", type=float, default=None)
    e.add_argument("--alpha", type=float, default=None, help="Beta(alpha, 1) prior on lambda")
    e.add_argument("--prior-weight", type=float, default=None)
    e.add_argument("--burn-in", type=int, default=None)
    e.add_argument("--centering", choices=["none", "sequential"], default=None)
    e.add_argument("--precondition", choices=["none", "fisher"], default=None)
    e.add_argument("--freeze", default=None, help="comma-separated parameter names held fixed")
    e.add_argument("--init", default=None, help="JSON initial parameters")
    e.add_argument("--M", type=int, default=256, help="grid size")
    e.add_argument("--record-stride", type=int, default=1)
    e.add_argument("--ghat", action="store_true", help="also emit the argmax frequency")
    e.add_argument("--dump-sdf-at", default=None, help="comma-separated times for full spectrum snapshots")
    e.add_argument("--sdf-out", default=None, help="snapshot CSV (t,f,S)")
    e.add_argument("--coriolis-k", type=float, default=None, help="derive omega_true from a lat column")
    e.add_argument("--on-error", choices=["skip", "abort"], default="abort")
    e.set_defaults(func=cmd_estimate)

    x = sub.add_parser("experiment", parents=[common], help="run a Monte Carlo experiment config")
    x.add_argument("config", help="JSON path or bundled name (e.g. fig3.json)")
    x.add_argument("--out-dir", default="results")
    x.add_argument("--R", type=int, default=None, help="override replications")
    x.add_argument("--seed", type=int, default=None)
    x.add_argument("--workers", type=int, default=None)
    x.set_defaults(func=cmd_experiment)

    f = sub.add_parser("surface", parents=[common], help="Whittle log-likelihood over a parameter grid")
    f.add_argument("snapshot", help="CSV with t,f,S")
    f.add_argument("--t", type=int, default=None, help="snapshot time (default latest)")
    f.add_argument("--model", default="ar:2")
    f.add_argument("--axis1", required=True, help="name:lo:hi:steps")
    f.add_argument("--axis2", required=True, help="name:lo:hi:steps")
    f.add_argument("--fixed", default=None, help="values for other parameters, name=value,...")
    f.add_argument("-o", "--output", default="surface.csv")
    f.set_defaults(func=cmd_surface)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ParameterError, UsageError, json.JSONDecodeError) as exc:
        print(f"ffspec {args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InputError, StateError) as exc:
        print(f"ffspec {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, EvaluationError, DomainError, FloatingPointError) as exc:
        print(f"ffspec {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except BrokenPipeError:
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
