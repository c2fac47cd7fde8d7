"""Inference speed of a trained model vs the mesh-based reference solver.

Usage::

    python3 scripts/speedup_benchmark.py -c CONFIG --checkpoint CKPT [-n 10000]

Times N random space-time stress queries through the trained network
against a fresh mesh solve of the same tree, and prints the speedup.
The mesh solve is charged its full wall time because each new query time
outside the stored output grid requires stepping the solver there.
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from emstress.cli import _load_field, _run_fdm
from emstress.config import load_config


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("-c", "--config", required=True)
    ap.add_argument("--checkpoint", required=True)
    ap.add_argument("-n", "--points", type=int, default=10000)
    ap.add_argument("--set", dest="overrides", action="append", default=[])
    args = ap.parse_args()

    cfg = load_config(args.config, args.overrides)
    field = _load_field(cfg, args.checkpoint)

    rng = np.random.default_rng(cfg["run.seed"])
    segs = cfg.tree.segments
    t_end = cfg["run.t_end"]
    seg_ids = rng.integers(0, len(segs), args.points)
    xs = rng.random(args.points)
    ts = rng.random(args.points) * t_end

    t0 = time.perf_counter()
    for sid, u, t in zip(seg_ids, xs, ts):
        seg = segs[sid]
        field.stress(seg.id, u * seg.length, t)
    model_wall = time.perf_counter() - t0

    t0 = time.perf_counter()
    _run_fdm(cfg)
    fdm_wall = time.perf_counter() - t0

    print(f"model: {args.points} pointwise queries in {model_wall:.3f} s")
    print(f"fdm:   full solve in {fdm_wall:.3f} s")
    print(f"speedup {fdm_wall / model_wall:.1f}x")


if __name__ == "__main__":
    main()
