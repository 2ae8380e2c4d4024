"""Shared ensemble-truth cache for the acceptance suite.

Ground-truth spectra are expensive (hundreds of pipeline runs), so they are
computed once per (n, levels, runs, seed) signature and stored as a
container under tests/_cache.  Delete the directory to force recomputation.
"""

import os
from pathlib import Path

import numpy as np

from qfa.container import read_container, write_container
from qfa.simulate import SimConfig, ensemble_truth

CACHE_DIR = Path(os.environ.get("QFA_CACHE_DIR", Path(__file__).parent / "_cache"))


def truth_signature(cfg, levels, runs):
    return (
        f"truth_n{cfg.n}_L{levels.size}_lo{levels[0]:.3f}_hi{levels[-1]:.3f}"
        f"_runs{runs}_seed{cfg.seed}.qfa"
    )


def cached_truth(cfg, levels, runs, workers=None):
    levels = np.asarray(levels, dtype=float)
    path = CACHE_DIR / truth_signature(cfg, levels, runs)
    if path.exists():
        spec = read_container(path)
        if spec.kind == "truth" and spec.levels.size == levels.size:
            return spec
    CACHE_DIR.mkdir(parents=True, exist_ok=True)
    spec = ensemble_truth(cfg, levels, runs, workers=workers)
    write_container(path, spec)
    return spec


if __name__ == "__main__":
    import argparse
    import sys

    sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
    ap = argparse.ArgumentParser()
    ap.add_argument("--runs", type=int, required=True)
    ap.add_argument("--workers", type=int, default=2)
    args = ap.parse_args()
    cfg = SimConfig()
    levels = np.linspace(0.1, 0.9, 81)
    spec = cached_truth(cfg, levels, args.runs, workers=args.workers)
    print(f"truth ready: runs={args.runs} shape={spec.s.shape}")
