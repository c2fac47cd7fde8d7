"""Command-line front end.

Subcommands:

* ``solve-fdm``  reference mesh solve, stress CSV + nucleation report
* ``train``      sample, Adam + L-BFGS, checkpoint + loss-history CSV
* ``eval``       query a trained checkpoint on a grid or point list
* ``compare``    W.S. / J.S. error report of a checkpoint vs the mesh solver

``--threads N`` (or EMSTRESS_THREADS) caps the BLAS worker pool; it must
be handled before numpy is imported, so the heavy imports live inside
``main``.
"""

from __future__ import annotations

import argparse
import os
import sys
import time


FDM_CSV_SCHEMA = "segment_id,x_m,t_s,sigma_pa"
HISTORY_CSV_SCHEMA = "iter,phase,total,mse_f,mse_b,mse_i,mse_c,grad_norm"


def _build_parser():
    p = argparse.ArgumentParser(
        prog="emstress",
        description="Electromigration stress evolution in interconnect trees",
    )
    p.add_argument("--threads", type=int, default=None,
                   help="cap BLAS worker threads (also: EMSTRESS_THREADS)")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("-c", "--config", required=True, help="run configuration file")
        sp.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="SECTION.KEY=VALUE", help="override a config value")
        sp.add_argument("--seed", type=int, default=None, help="override run.seed")
        sp.add_argument("--format", choices=["csv", "header"], default="csv",
                        help="'header' prints the CSV schema and exits")

    sp = sub.add_parser("solve-fdm", help="mesh-based reference solve")
    common(sp)
    sp.add_argument("-o", "--output", required=True, help="stress CSV path")

    sp = sub.add_parser("train", help="train the neural model")
    common(sp)
    sp.add_argument("--checkpoint", required=True, help="checkpoint output path")
    sp.add_argument("--history", default=None, help="loss-history CSV path")

    sp = sub.add_parser("eval", help="evaluate a trained checkpoint")
    common(sp)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("-o", "--output", required=True, help="stress CSV path")
    sp.add_argument("--rescale-ratio", type=float, default=None,
                    help="diffusivity ratio D_a*/D_a (Cases I/II only)")

    sp = sub.add_parser("compare", help="error report vs the mesh solver")
    common(sp)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("-o", "--output", default=None, help="report file (default stdout)")
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    threads = args.threads
    if threads is None and os.environ.get("EMSTRESS_THREADS"):
        threads = int(os.environ["EMSTRESS_THREADS"])
    if threads is not None:
        if threads < 1:
            print("emstress: --threads must be >= 1", file=sys.stderr)
            return 2
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(threads)

    try:
        return _dispatch(args)
    except FileNotFoundError as exc:
        print(f"emstress: {exc}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError) as exc:
        print(f"emstress: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    from .config import load_config

    if args.format == "header":
        schema = HISTORY_CSV_SCHEMA if args.command == "train" else FDM_CSV_SCHEMA
        print(schema)
        return 0

    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    cfg = load_config(args.config, overrides)

    if args.command == "solve-fdm":
        return cmd_solve_fdm(cfg, args.output)
    if args.command == "train":
        return cmd_train(cfg, args.checkpoint, args.history)
    if args.command == "eval":
        return cmd_eval(cfg, args.checkpoint, args.output, args.rescale_ratio)
    if args.command == "compare":
        return cmd_compare(cfg, args.checkpoint, args.output)
    raise AssertionError(args.command)


# ---------------------------------------------------------------------------


def _run_fdm(cfg, output_times=None):
    from .fdm import fdm_solve

    f = cfg.values["fdm"]
    return fdm_solve(
        cfg.tree,
        cfg.thermal,
        cfg.material,
        mesh_points_per_segment=f["mesh_points_per_segment"],
        dt=f["dt"],
        t_end=cfg["run.t_end"],
        scheme=f["scheme"],
        time_grid=f["time_grid"],
        output_times=output_times,
    )


def _write_stress_csv(path, field, cfg, provenance):
    import numpy as np

    times = cfg["run.eval_times"]
    npts = cfg["run.points_per_segment"]
    with open(path, "w") as fh:
        fh.write(f"# {provenance}\n")
        fh.write(FDM_CSV_SCHEMA + "\n")
        for t in times:
            for seg in cfg.tree.segments:
                xs = np.linspace(0.0, seg.length, npts)
                sig = np.atleast_1d(field.stress(seg.id, xs, t))
                for x, s in zip(xs, sig):
                    fh.write(f"{seg.id},{float(x)!r},{float(t)!r},{float(s)!r}\n")


def cmd_solve_fdm(cfg, output) -> int:
    from .analytic import nucleation_time

    sol = _run_fdm(cfg, output_times=cfg["run.eval_times"])
    meta = sol.meta
    provenance = (
        f"emstress solve-fdm scheme={meta['scheme']} "
        f"mesh={meta['mesh_points_per_segment']} dt={meta['dt']:g}"
    )
    _write_stress_csv(output, sol, cfg, provenance)
    t_nuc = nucleation_time(sol, cfg.tree, cfg.material, cfg["run.t_end"])
    if t_nuc is None:
        print("nucleation immortal")
    else:
        print(f"nucleation_time_s {t_nuc:.6g}")
    print(f"fdm_wall_time_s {meta['wall_time_s']:.3f}")
    print(f"output {output}")
    return 0


def _make_model(cfg):
    from .stpinn import make_model

    m = cfg.values["model"]
    return make_model(
        channels=m["channels"],
        f_hidden=m["f_hidden"],
        ft_hidden=m["ft_hidden"],
        g_input=m["g_input"],
        spatial_dim=cfg.domain.dim,
        scaling=cfg.scaling,
        seed=cfg["run.seed"],
    )


def _sample(cfg):
    from .stpinn import sample_collocation

    s = cfg.values["sampling"]
    return sample_collocation(
        cfg.domain,
        cfg.thermal,
        cfg.material,
        cfg["run.t_end"],
        counts=(s["n_f"], s["n_b"], s["n_c"], s["n_0"]),
        seed=cfg["run.seed"],
        scaling=cfg.scaling,
        time_transform_targets=s["time_transform_targets"],
    )


def cmd_train(cfg, checkpoint, history) -> int:
    from .stpinn import save_checkpoint, train

    model = _make_model(cfg)
    colloc = _sample(cfg)
    tr = cfg.values["training"]
    weights = {
        "mse_f": tr["weight_f"],
        "mse_b": tr["weight_b"],
        "mse_i": tr["weight_i"],
        "mse_c": tr["weight_c"],
    }
    rows = []

    def log(it, phase, total, parts, gn):
        rows.append(
            (it, phase, total, parts.get("mse_f", 0.0), parts.get("mse_b", 0.0),
             parts.get("mse_i", 0.0), parts.get("mse_c", 0.0), gn)
        )

    try:
        adam_res, lbfgs_res, wall = train(
            model, colloc, cfg.training,
            tt_weight=tr["tt_weight"], term_weights=weights, log=log,
        )
    finally:
        if history:
            with open(history, "w") as fh:
                fh.write(HISTORY_CSV_SCHEMA + "\n")
                for it, phase, total, f, b, i, c, gn in rows:
                    fh.write(f"{it},{phase},{total!r},{f!r},{b!r},{i!r},{c!r},{gn!r}\n")

    save_checkpoint(model, checkpoint)
    fun_parts = rows[-1] if rows else None
    print(f"final_loss {lbfgs_res.loss!r}")
    if fun_parts:
        _, _, _, f, b, i, c, _ = fun_parts
        print(f"mse_f {f!r}")
        print(f"mse_b {b!r}")
        print(f"mse_i {i!r}")
        print(f"mse_c {c!r}")
    print(f"adam_iters {adam_res.iterations}")
    print(f"lbfgs_iters {lbfgs_res.iterations}")
    print(f"lbfgs_status {lbfgs_res.status}")
    print(f"train_wall_time_s {wall:.3f}")
    print(f"checkpoint {checkpoint}")
    return 0


def _load_field(cfg, checkpoint):
    from .stpinn import StpinnField, load_checkpoint

    model = load_checkpoint(checkpoint)
    expect_dim = cfg.domain.dim
    if model.spatial_dim != expect_dim:
        raise ValueError(
            f"checkpoint is {model.spatial_dim}-D but the configured tree "
            f"unfolds to {expect_dim}-D"
        )
    if model.g_input != cfg.values["model"]["g_input"]:
        raise ValueError("checkpoint g_input flag does not match the config")
    return StpinnField(model, cfg.domain, cfg.material)


def cmd_eval(cfg, checkpoint, output, rescale_ratio) -> int:
    from .stpinn import rescale_diffusivity

    field = _load_field(cfg, checkpoint)
    provenance = f"emstress eval checkpoint={checkpoint}"
    if rescale_ratio is not None and rescale_ratio != 1.0:
        field = rescale_diffusivity(field, rescale_ratio, cfg.thermal.case)
        provenance += f" rescale_ratio={rescale_ratio:g}"
    _write_stress_csv(output, field, cfg, provenance)
    print(f"output {output}")
    return 0


def compare_fields(model_field, fdm_sol, cfg):
    """Whole-stress and junction-stress error metrics.

    W.S.: mean over 10 log-spaced times in [1e5, 1e8] s of the relative
    L2 error over the spatial grid.  J.S.: relative L2 error of the
    junction stress over [0, t_end].
    """
    import numpy as np

    t_end = cfg["run.t_end"]
    npts = cfg["run.points_per_segment"]
    ws_times = np.geomspace(1e5, min(1e8, t_end), 10)
    ws = []
    for t in ws_times:
        num = den = 0.0
        for seg in cfg.tree.segments:
            xs = np.linspace(0.0, seg.length, npts)
            a = np.atleast_1d(model_field.stress(seg.id, xs, t))
            b = np.atleast_1d(fdm_sol.stress(seg.id, xs, t))
            num += float(np.sum((a - b) ** 2))
            den += float(np.sum(b**2))
        ws.append(np.sqrt(num / den))
    ws_err = float(np.mean(ws))

    ts = np.linspace(0.0, t_end, 201)
    js_num = js_den = 0.0
    for node in cfg.tree.junctions:
        a = model_field.junction_stress(node.id, ts)
        b = fdm_sol.junction_stress(node.id, ts)
        js_num += float(np.sum((a - b) ** 2))
        js_den += float(np.sum(b**2))
    js_err = float(np.sqrt(js_num / js_den)) if js_den > 0 else 0.0
    return ws_err, js_err


def cmd_compare(cfg, checkpoint, output) -> int:
    import numpy as np

    field = _load_field(cfg, checkpoint)
    t0 = time.perf_counter()
    sol = _run_fdm(cfg)
    fdm_wall = time.perf_counter() - t0

    t0 = time.perf_counter()
    ws_err, js_err = compare_fields(field, sol, cfg)
    eval_wall = time.perf_counter() - t0

    lines = [
        f"ws_error {ws_err!r}",
        f"js_error {js_err!r}",
        f"ws_error_pct {100 * ws_err:.4f}",
        f"js_error_pct {100 * js_err:.4f}",
        f"fdm_wall_time_s {fdm_wall:.3f}",
        f"eval_wall_time_s {eval_wall:.3f}",
    ]
    text = "\n".join(lines) + "\n"
    if output:
        with open(output, "w") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
