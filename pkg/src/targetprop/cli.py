"""Command-line entry point: ``targetprop {run,gradcheck,search,autoencode,plot}``."""
import argparse
import sys

from . import gradcheck as gc
from .errors import TargetPropError
from .experiment import load_config, run_autoencode, run_experiment, run_search


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        fail("E_USAGE", message, 2)


def fail(code, message, status=1):
    print(f"{code}: {' '.join(str(message).split())}", file=sys.stderr)
    sys.exit(status)


def _progress(row):
    err = "" if row["test_err"] is None else f" test_err={row['test_err']:.2f}%"
    print(f"epoch {row['epoch']:4d} train_loss={row['train_loss']:.5f} test_loss={row['test_loss']:.5f}{err}", flush=True)


def cmd_run(args):
    cfg = load_config(args.config, args.seed, args.epochs, args.out)
    result = run_experiment(cfg, log=None if args.quiet else _progress)
    s = result.summary
    if s["best_test_err"] is not None:
        print(f"best test error {s['best_test_err']:.2f}% at epoch {s['best_epoch']} -> {cfg.output_dir}")
    else:
        print(f"best test loss {s['best_test_loss']:.5f} at epoch {s['best_epoch']} -> {cfg.output_dir}")
    return 0


def cmd_gradcheck(args):
    names = gc.CHECKS if args.rule == "all" else (args.rule,)
    seeds = range(args.seed, args.seed + args.seeds)
    status = 0
    for name in names:
        worst = 0.0
        for seed in seeds:
            report = gc.run_check(name, seed)
            for block, err in sorted(report.items()):
                if args.verbose:
                    print(f"{name} seed={seed} {block}: {err:.3e}")
                worst = max(worst, err)
        limit = gc.threshold_for(name)
        ok = worst <= limit
        print(f"{name}: max relative error {worst:.3e} (limit {limit:.0e}) {'ok' if ok else 'FAIL'}")
        status |= not ok
    return status


def cmd_search(args):
    cfg = load_config(args.config, args.seed, None, args.out)
    epochs = args.epochs if args.epochs is not None else cfg.epochs
    results = run_search(cfg, args.n, epochs, cfg.output_dir, jobs=args.jobs)
    best = results[0]
    print(f"{len(results)} trials; best trial {best.trial}: test error {best.best_test_err:.2f}% -> {cfg.output_dir}")
    return 0


def cmd_autoencode(args):
    cfg = load_config(args.config, args.seed, args.epochs, args.out)
    summaries = run_autoencode(cfg, log=None if args.quiet else _progress)
    for rule, s in summaries.items():
        print(f"{rule}: test reconstruction error {s['initial_test_loss']:.4f} -> {s['final_test_loss']:.4f} ({100 * s['reduction']:.1f}% lower)")
    return 0


def cmd_plot(args):
    from .plot import plot_metrics

    plot_metrics(args.metrics, args.out, args.title)
    print(f"wrote {args.out}")
    return 0


def build_parser():
    p = _Parser(prog="targetprop", description="Target propagation and feedback-alignment experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="train one configuration")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--epochs", type=int)
    r.add_argument("--out", help="output directory (overrides output_dir)")
    r.add_argument("--quiet", action="store_true")
    r.set_defaults(fn=cmd_run)

    g = sub.add_parser("gradcheck", help="finite-difference check of analytic updates")
    g.add_argument("--rule", default="all", choices=gc.CHECKS + ("all",))
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--seeds", type=int, default=5, help="number of consecutive seeds")
    g.add_argument("--verbose", action="store_true")
    g.set_defaults(fn=cmd_gradcheck)

    s = sub.add_parser("search", help="random hyperparameter search")
    s.add_argument("--config", required=True)
    s.add_argument("--n", type=int, default=60, help="number of configurations")
    s.add_argument("--epochs", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_search)

    a = sub.add_parser("autoencode", help="MNIST autoencoder under bp, dtp and sdtp")
    a.add_argument("--config", required=True)
    a.add_argument("--seed", type=int)
    a.add_argument("--epochs", type=int)
    a.add_argument("--out")
    a.add_argument("--quiet", action="store_true")
    a.set_defaults(fn=cmd_autoencode)

    pl = sub.add_parser("plot", help="learning curves from metrics.csv files")
    pl.add_argument("metrics", nargs="+")
    pl.add_argument("--out", required=True)
    pl.add_argument("--title", default="")
    pl.set_defaults(fn=cmd_plot)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except TargetPropError as exc:
        fail(exc.code, exc, 2)
    except FileNotFoundError as exc:
        fail("E_DATA", f"{exc.filename or exc}: file not found", 3)
    except OSError as exc:
        fail("E_IO", exc, 3)


if __name__ == "__main__":
    sys.exit(main())
