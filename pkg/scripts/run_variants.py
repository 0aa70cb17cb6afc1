"""Run every variant of an experiment config and print the chosen summaries.

Shared by the per-figure scripts; also usable directly:

    python scripts/run_variants.py fig3.json --R 50
"""

import argparse
import json
import time
from pathlib import Path

from ffspec.cli import expand_variants, load_config
from ffspec.harness import run_monte_carlo


def run(name: str, R: int | None = None, seed: int | None = None, out_dir: Path | None = None) -> dict:
    runs = {}
    for label, cfg in expand_variants(load_config(name)):
        if R is not None:
            cfg.R = R
        if seed is not None:
            cfg.seed = seed
        t0 = time.perf_counter()
        runs[label] = summary = run_monte_carlo(cfg)
        print(f"{label}: R={cfg.R} in {time.perf_counter() - t0:.1f}s", flush=True)
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            summary.to_csv(out_dir / f"{label}.csv")
            if summary.scalars:
                (out_dir / f"{label}_scalars.json").write_text(json.dumps(summary.scalar_table(), indent=2))
    return runs


def parser(doc: str, out: str) -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(description=doc.splitlines()[0])
    ap.add_argument("--R", type=int, default=None, help="replications (config default if omitted)")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out-dir", type=Path, default=Path(out))
    return ap


if __name__ == "__main__":
    ap = parser(__doc__, "results/variants")
    ap.add_argument("config")
    a = ap.parse_args()
    run(a.config, a.R, a.seed, a.out_dir)
