"""Reuse of a trained model after a change of atomic diffusivity.

Usage::

    python3 scripts/rescale_demo.py -c CONFIG --checkpoint CKPT --ratio 2.0

For constant (Case I) or purely time-varying (Case II) temperature, a
model trained at diffusivity D_a can be re-used for a wire with
diffusivity ratio * D_a without retraining.  This script rescales a
trained checkpoint and compares it against a fresh mesh solve of the
modified problem (implemented by scaling the prefactor d0).
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from dataclasses import replace

from emstress.cli import _load_field, _run_fdm, compare_fields
from emstress.config import load_config
from emstress.stpinn import rescale_diffusivity


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("-c", "--config", required=True)
    ap.add_argument("--checkpoint", required=True)
    ap.add_argument("--ratio", type=float, default=2.0)
    ap.add_argument("--set", dest="overrides", action="append", default=[])
    args = ap.parse_args()

    cfg = load_config(args.config, args.overrides)
    field = _load_field(cfg, args.checkpoint)
    fast = rescale_diffusivity(field, args.ratio, cfg.thermal.case)

    cfg.material = replace(cfg.material, d0=cfg.material.d0 * args.ratio)
    sol = _run_fdm(cfg)
    ws, js = compare_fields(fast, sol, cfg)
    print(f"diffusivity ratio {args.ratio:g} (case {cfg.thermal.case})")
    print(f"W.S. error {100 * ws:.3f} %")
    print(f"J.S. error {100 * js:.3f} %")


if __name__ == "__main__":
    main()
