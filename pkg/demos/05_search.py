"""Random hyperparameter search for SDTP on a small MNIST subset, then the
accuracy histogram of the trials.

    python demos/05_search.py [--n 8] [--jobs 2]
"""
import argparse
import csv
from pathlib import Path

from targetprop.config import ExperimentConfig
from targetprop.experiment import run_search

p = argparse.ArgumentParser()
p.add_argument("--n", type=int, default=8)
p.add_argument("--epochs", type=int, default=2)
p.add_argument("--jobs", type=int, default=1)
p.add_argument("--out", default="runs/search_demo")
args = p.parse_args()

template = ExperimentConfig.load(Path(__file__).parent / "configs" / "search_mnist_sdtp.json")
template = template.replace(train_subset=5000, test_subset=2000)
results = run_search(template, args.n, args.epochs, args.out, jobs=args.jobs)
for r in results[:3]:
    print(f"trial {r.trial}: {r.best_test_err:.2f}%  lr={r.params['model_lr']:.2e} sigma={r.params['sigma']:.3f}")
with open(Path(args.out) / "histogram.csv") as fh:
    for row in list(csv.reader(fh))[1:]:
        if int(row[2]):
            print(f"accuracy {float(row[0]):5.1f}-{float(row[1]):5.1f}%  {'#' * int(row[2])}")
