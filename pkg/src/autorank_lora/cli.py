"""Command-line driver.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 training
diverged (or, for ``sweep``, any seed failed).
"""

import argparse
import os
import sys

from .config import OUTPUT_ROOT_ENV, apply_overrides, load_config
from .errors import ConfigError, TrainingDiverged
from .experiment import run_experiment, run_sweep, run_theory, write_plots


def _int_list(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("list must not be empty")
    return values


def _load(args):
    config = load_config(args.config)
    overrides = list(args.set or [])
    if getattr(args, "seed", None) is not None:
        overrides += [f"task.seed={args.seed}", f"train.seed={args.seed}"]
    if args.out:
        overrides.append(f"output.dir={args.out}")
    if getattr(args, "plots", False):
        overrides.append("output.emit_plots=true")
    return apply_overrides(config, overrides) if overrides else config


def _log(message):
    print(message, file=sys.stderr)


def cmd_run(args):
    config = _load(args)
    summary = run_experiment(config, log=None if args.quiet else _log)
    print(f"final eval loss {summary['final_eval_loss']:.6g}  "
          f"final I {summary['final_I']}  restarts {summary['restart_count']}")
    return 0


def cmd_sweep(args):
    config = _load(args)
    rows, ok = run_sweep(config, args.seeds, jobs=args.jobs)
    for row in rows:
        if row[0] == "median":
            print(f"{row[1]:>20}: median eval {row[2]}  median I {row[3]}  median recovery {row[4]}")
    return 0 if ok else 3


def cmd_theory(args):
    if args.trials < 1:
        raise ConfigError("--trials must be at least 1")
    out = args.out or os.path.join(os.environ.get(OUTPUT_ROOT_ENV, "."), "theory")
    grid = run_theory(args.dims, args.samples, args.trials, args.seed, out)
    print(f"{'R':>5} {'lambda':>7} {'mean':>9} {'median':>9} {'predicted':>9}")
    for (R, lam), s in sorted(grid.items()):
        print(f"{R:>5} {lam:>7} {s.mean:>9.5f} {s.median:>9.5f} {s.predicted_mean:>9.5f}")
    return 0


def cmd_plot(args):
    with open(os.path.join(args.run_dir, "epochs.csv"), encoding="utf-8") as fh:
        epochs_text = fh.read()
    with open(os.path.join(args.run_dir, "spectrum.csv"), encoding="utf-8") as fh:
        spectrum_text = fh.read()
    write_plots(args.run_dir, epochs_text, spectrum_text)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="autorank-lora",
        description="Automatic rank search for low-rank adapters on synthetic tasks.",
        epilog=f"Relative output directories are resolved against ${OUTPUT_ROOT_ENV} if set.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def config_args(p):
        p.add_argument("config", help="key-value or JSON config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        p.add_argument("--out", help="output directory (overrides output.dir)")

    p = sub.add_parser("run", help="train once and write outputs")
    config_args(p)
    p.add_argument("--seed", type=int, help="sets task.seed and train.seed")
    p.add_argument("--plots", action="store_true", help="also write SVG plots")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="compare AC-LoRA with the fixed-rank baseline over seeds")
    config_args(p)
    p.add_argument("--seeds", type=_int_list, required=True, help="comma-separated seeds")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("theory", help="hypersphere ratio Monte Carlo grid")
    p.add_argument("--dims", type=_int_list, default=[4, 16, 64])
    p.add_argument("--samples", type=_int_list, default=[16, 64, 256])
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("plot", help="redraw SVG plots of a finished run")
    p.add_argument("run_dir")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TrainingDiverged as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
