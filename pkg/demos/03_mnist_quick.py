"""A quick MNIST comparison of BP, FA, DTP and SDTP on a 10k subset, with
learning curves written to an SVG.

    python demos/03_mnist_quick.py [--epochs 5] [--out runs/quick]

The full-length runs use the JSON files in demos/configs with
``targetprop run --config ...``.
"""
import argparse
from pathlib import Path

from targetprop.config import tuned_config
from targetprop.experiment import run_experiment
from targetprop.plot import plot_metrics

p = argparse.ArgumentParser()
p.add_argument("--epochs", type=int, default=5)
p.add_argument("--train", type=int, default=10000)
p.add_argument("--out", default="runs/quick")
args = p.parse_args()

out = Path(args.out)
paths = []
for rule, schedule in (("bp", "parallel"), ("fa", "parallel"), ("dtp", "alternating"), ("sdtp", "parallel")):
    cfg = tuned_config("mnist", "fc", rule, schedule, epochs=args.epochs, train_subset=args.train)
    name = f"{rule}_{schedule}" if rule in ("dtp", "sdtp") else rule
    s = run_experiment(cfg, out / name).summary
    print(f"{name:18s} best test error {s['best_test_err']:5.2f}% (epoch {s['best_epoch']})", flush=True)
    paths.append(out / name / "metrics.csv")

plot_metrics(paths, out / "curves.svg", "MNIST fc, tuned hyperparameters")
print(f"learning curves: {out / 'curves.svg'}")
