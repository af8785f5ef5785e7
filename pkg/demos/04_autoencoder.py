"""Train the 784-512-64-512-784 autoencoder with BP, DTP and SDTP and save
reconstructions as PGM images (top row originals, bottom row outputs).

    python demos/04_autoencoder.py [--epochs 3] [--out runs/ae]

``targetprop autoencode --config demos/configs/autoencode.json`` runs the
full 50-epoch version.
"""
import argparse
import json
from pathlib import Path

from targetprop.config import ExperimentConfig
from targetprop.experiment import run_autoencode

p = argparse.ArgumentParser()
p.add_argument("--epochs", type=int, default=3)
p.add_argument("--train", type=int, default=10000)
p.add_argument("--out", default="runs/ae")
args = p.parse_args()

cfg = ExperimentConfig.load(Path(__file__).parent / "configs" / "autoencode.json")
cfg = cfg.replace(epochs=args.epochs, train_subset=args.train)
summaries = run_autoencode(cfg, args.out)
print(json.dumps(summaries, indent=2))
for rule in summaries:
    print(f"{rule}: {Path(args.out) / rule / 'reconstructions.pgm'}")
