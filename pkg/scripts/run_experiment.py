"""Train a model for one run configuration and report its accuracy.

Usage::

    python3 scripts/run_experiment.py -c scripts/configs/two_segment_case1.cfg \
        [--checkpoint out.ckpt] [--set section.key=value ...]

Trains the configured model, solves the same tree with the mesh-based
reference solver, and prints the whole-stress (W.S.) and junction-stress
(J.S.) relative L2 errors plus wall times.
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from emstress.cli import _make_model, _run_fdm, _sample, compare_fields
from emstress.config import load_config
from emstress.stpinn import StpinnField, save_checkpoint, train


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("-c", "--config", required=True)
    ap.add_argument("--checkpoint", default=None)
    ap.add_argument("--set", dest="overrides", action="append", default=[])
    args = ap.parse_args()

    cfg = load_config(args.config, args.overrides)
    model = _make_model(cfg)
    colloc = _sample(cfg)
    tr = cfg.values["training"]

    def log(it, phase, total, parts, gn):
        if it % 500 == 0:
            detail = " ".join(f"{k}={v:.3e}" for k, v in sorted(parts.items()))
            print(f"[{phase} {it:6d}] loss={total:.6e} |g|={gn:.3e} {detail}",
                  flush=True)

    adam_res, lbfgs_res, wall = train(
        model, colloc, cfg.training, tt_weight=tr["tt_weight"], log=log)
    print(f"training done: loss={lbfgs_res.loss:.6e} "
          f"({adam_res.iterations} adam + {lbfgs_res.iterations} lbfgs, "
          f"{wall:.1f} s, status={lbfgs_res.status})")
    if args.checkpoint:
        save_checkpoint(model, args.checkpoint)
        print(f"checkpoint written to {args.checkpoint}")

    t0 = time.perf_counter()
    sol = _run_fdm(cfg)
    fdm_wall = time.perf_counter() - t0
    field = StpinnField(model, cfg.domain, cfg.material)
    ws, js = compare_fields(field, sol, cfg)
    print(f"W.S. error {100 * ws:.3f} %")
    print(f"J.S. error {100 * js:.3f} %")
    print(f"fdm wall time {fdm_wall:.1f} s, train wall time {wall:.1f} s")


if __name__ == "__main__":
    main()
