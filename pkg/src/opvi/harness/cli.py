"""Command-line driver.

Exit codes: 0 success, 2 configuration error, 3 numeric abort.
OPVI_NUM_THREADS caps the BLAS thread pool for the run loop (default 1,
which keeps traces byte-identical across hosts).
"""
from __future__ import annotations

import argparse
import os
import sys

from opvi.core import ConfigError, NumericError, ParticleEnsemble, RngStream


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opvi", description="online particle-based samplers")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one experiment config")
    run.add_argument("config")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--out", default=None, help="output directory (default: config output_dir)")

    cmp_ = sub.add_parser("compare", help="final-metric table across trace CSVs")
    cmp_.add_argument("traces", nargs="*")

    fpc = sub.add_parser("validate-fpc", help="finite-population variance check")
    fpc.add_argument("config")
    fpc.add_argument("--seed", type=int, default=None)
    fpc.add_argument("--draws", type=int, default=20000)

    plot = sub.add_parser("plot", help="contour + particle SVG from a run directory")
    plot.add_argument("run_dir")
    plot.add_argument("--out", default=None, help="output SVG path (default: <run_dir>/scatter.svg)")
    return parser


def _cmd_run(args) -> int:
    from opvi.harness.config import load_config
    from opvi.harness.runner import run_experiment

    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    out = args.out if args.out is not None else cfg.output_dir
    result = run_experiment(cfg, out_dir=out)
    for key in sorted(result.summary):
        print(f"{key} = {result.summary[key]}")
    if result.out_dir:
        print(f"run written to {result.out_dir}")
    return 0


def _cmd_compare(args) -> int:
    from opvi.harness.compare import compare_runs, format_comparison

    rows = compare_runs(args.traces)
    print(format_comparison(rows))
    return 0


def _cmd_validate_fpc(args) -> int:
    from opvi.harness.config import load_config
    from opvi.harness.runner import build_model
    from opvi.metrics import validate_fpc_variance

    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    model, _ = build_model(cfg)
    rng = RngStream(cfg.seed)
    w = rng.generator("fpc-probe").standard_normal(model.dim)
    report = validate_fpc_variance(model, w, cfg.batch_size, args.draws, rng)
    print(f"empirical = {report.empirical!r}")
    print(f"predicted = {report.predicted!r}")
    print(f"rel_err = {report.rel_err!r}")
    return 0


def _cmd_plot(args) -> int:
    import numpy as np

    from opvi.harness.config import load_config
    from opvi.harness.plotting import emit_scatter_svg
    from opvi.harness.runner import build_model
    from opvi.models import mixture_posterior_grid

    cfg_path = os.path.join(args.run_dir, "resolved_config.txt")
    ens_path = os.path.join(args.run_dir, "ensemble.csv")
    for path in (cfg_path, ens_path):
        if not os.path.isfile(path):
            raise ConfigError(f"{args.run_dir} is not a run directory (missing {path})")
    cfg = load_config(cfg_path)
    if cfg.model != "mixture":
        raise ConfigError("plot needs a mixture-model run (2-d posterior grid)")
    positions = np.loadtxt(ens_path, delimiter=",", ndmin=2)
    ensemble = ParticleEnsemble(positions=positions, round=cfg.rounds)
    model, _ = build_model(cfg)
    grid = mixture_posterior_grid(
        model, resolution=cfg.grid_resolution,
        window=((cfg.grid_min, cfg.grid_max), (cfg.grid_min, cfg.grid_max)),
    )
    out = args.out if args.out is not None else os.path.join(args.run_dir, "scatter.svg")
    emit_scatter_svg(ensemble, grid, out)
    print(f"wrote {out}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "compare": _cmd_compare,
    "validate-fpc": _cmd_validate_fpc,
    "plot": _cmd_plot,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
