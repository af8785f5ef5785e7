"""Experiment drivers: single runs, search trials and the autoencoder study."""
import copy
import csv
import json
import time
from pathlib import Path

import numpy as np

from .checkpoint import save_checkpoint
from .config import ExperimentConfig
from .errors import ConfigError
from .data import default_data_dir, load_cifar10_dir, load_mnist_dir
from .layers import build_network, plan_network
from .optim import (
    AdamConfig,
    TrialResult,
    accuracy_histogram,
    evaluate,
    forward_optimizer,
    inverse_optimizer,
    random_search,
    train_epoch,
)
from .tensor import SeededRng

METRICS_HEADER = ["epoch", "train_err", "test_err", "train_loss", "test_loss", "inv_loss", "wall_s"]
AUTOENCODE_RULES = ("bp", "dtp", "sdtp")

_DATA_CACHE = {}


def data_dir_for(cfg):
    if cfg.dataset in cfg.data_paths:
        return Path(cfg.data_paths[cfg.dataset])
    return default_data_dir() / cfg.dataset


def load_data(cfg):
    """``(train, test)`` for ``cfg``, cached per process (and inherited by forked workers)."""
    directory = data_dir_for(cfg)
    key = (cfg.dataset, str(directory), cfg.train_subset, cfg.test_subset)
    if key not in _DATA_CACHE:
        loader = load_mnist_dir if cfg.dataset == "mnist" else load_cifar10_dir
        train = loader(directory, "train").subset(cfg.train_subset)
        test = loader(directory, "test").subset(cfg.test_subset)
        _DATA_CACHE[key] = (train, test)
    return _DATA_CACHE[key]


def build_for(cfg, rng):
    rule = cfg.learning_rule()
    return build_network(
        cfg.architecture,
        rng,
        inverses=rule.uses_targets,
        feedback=rule.feedback,
        aux_size=rule.aux_size,
    )


def _fmt(v):
    return "" if v is None else repr(float(v))


class RunResult:
    def __init__(self, net, history, summary):
        self.net = net
        self.history = history
        self.summary = summary


def train_run(cfg, train=None, test=None, on_epoch=None):
    """Train ``cfg`` in memory; returns a :class:`RunResult`.

    The network is built from ``rng.child(0)``; epoch ``e`` draws its
    shuffling and noise from ``rng.child(1).child(e)``.
    """
    cfg.validate()
    if train is None or test is None:
        train, test = load_data(cfg)
    rule = cfg.learning_rule()
    rng = SeededRng(cfg.seed)
    net = build_for(cfg, rng.child(0))
    opt_f = forward_optimizer(net, cfg.forward_adam)
    opt_i = inverse_optimizer(net, cfg.inverse_adam) if rule.uses_targets else None
    train_err0, train_loss0 = evaluate(net, train)
    test_err0, test_loss0 = evaluate(net, test)
    history = []
    for epoch in range(1, cfg.epochs + 1):
        start = time.perf_counter()
        stats = train_epoch(
            net, train, rule, cfg.schedule, opt_f, opt_i, rng.child(1).child(epoch), cfg.batch_size, cfg.augment
        )
        train_err, train_loss = evaluate(net, train)
        test_err, test_loss = evaluate(net, test)
        row = {
            "epoch": epoch,
            "train_err": train_err,
            "test_err": test_err,
            "train_loss": train_loss,
            "test_loss": test_loss,
            "inv_loss": stats.inverse_loss,
            "wall_s": time.perf_counter() - start if cfg.record_wall_time else None,
        }
        history.append(row)
        if on_epoch is not None:
            on_epoch(row)
    summary = {
        "rule": rule.kind,
        "dataset": cfg.dataset,
        "architecture": cfg.architecture,
        "schedule": cfg.schedule,
        "seed": cfg.seed,
        "epochs": cfg.epochs,
        "initial": {"train_err": train_err0, "test_err": test_err0, "train_loss": train_loss0, "test_loss": test_loss0},
        "final": history[-1] if history else None,
    }
    key = "test_err" if net.task == "classify" else "test_loss"
    best = min(history, key=lambda r: (r[key], r["epoch"])) if history else None
    summary["best_test_err"] = best["test_err"] if best else test_err0
    summary["best_test_loss"] = best["test_loss"] if best else test_loss0
    summary["best_epoch"] = best["epoch"] if best else 0
    if history and net.task == "classify":
        summary["best_train_err"] = min(r["train_err"] for r in history)
    else:
        summary["best_train_err"] = train_err0
    return RunResult(net, history, summary)


def run_experiment(cfg, out_dir=None, train=None, test=None, log=None):
    """Train and write ``metrics.csv``, ``final_summary.json``, ``weights.ckpt`` and ``config.json``."""
    cfg.validate()
    if train is None or test is None:
        train, test = load_data(cfg)  # fail before anything is written
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.json")
    with open(out / "metrics.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        fh.flush()

        def on_epoch(row):
            writer.writerow([row["epoch"]] + [_fmt(row[k]) for k in METRICS_HEADER[1:]])
            fh.flush()
            if log:
                log(row)

        result = train_run(cfg, train, test, on_epoch)
    with open(out / "final_summary.json", "w") as fh:
        json.dump(result.summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    save_checkpoint(out / "weights.ckpt", result.net.state_dict(), meta={"rule": cfg.rule.name, "seed": cfg.seed})
    return result


# ----------------------------------------------------------------------------
# Search


def apply_params(template, params, epochs, seed):
    cfg = copy.deepcopy(template)
    cfg.forward_adam = AdamConfig(params["model_lr"], params["model_beta1"], params["model_beta2"], params["model_eps"])
    cfg.inverse_adam = AdamConfig(params["inverse_lr"], params["inverse_beta1"], params["inverse_beta2"], params["inverse_eps"])
    cfg.rule.alpha = params["alpha"]
    cfg.rule.sigma = params["sigma"]
    cfg.epochs = epochs
    cfg.seed = seed
    cfg.record_wall_time = False
    return cfg


def run_trial(template, trial, params, epochs, seed):
    cfg = apply_params(template, params, epochs, seed)
    result = train_run(cfg)
    s = result.summary
    return TrialResult(trial, params, s["best_test_err"], s["best_train_err"], s["best_epoch"], result.history)


SEARCH_COLUMNS = [
    "trial",
    "model_lr",
    "model_beta1",
    "model_beta2",
    "model_eps",
    "inverse_lr",
    "inverse_beta1",
    "inverse_beta2",
    "inverse_eps",
    "alpha",
    "sigma",
    "best_train_err",
    "best_test_err",
    "best_epoch",
]


def run_search(template, n_configs, epochs, out_dir, seed=None, jobs=1, space=None):
    """Random search around ``template``; writes ``trials.csv`` and ``histogram.csv``."""
    template.validate()
    if plan_network(template.architecture)[-1].activation != "softmax":
        raise ConfigError("architecture: search ranks trials by test error and needs a classifier")
    load_data(template)  # load once so forked workers share it
    rng = SeededRng(template.seed if seed is None else seed)
    results = random_search(n_configs, epochs, template, rng, run_trial, space=space, jobs=jobs)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "trials.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SEARCH_COLUMNS)
        for r in results:
            p = r.params
            w.writerow(
                [r.trial]
                + [repr(p[k]) for k in SEARCH_COLUMNS[1:11]]
                + [_fmt(r.best_train_err), _fmt(r.best_test_err), r.best_epoch]
            )
    edges, counts = accuracy_histogram(results)
    with open(out / "histogram.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["acc_lo", "acc_hi", "count"])
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            w.writerow([repr(float(lo)), repr(float(hi)), int(c)])
    return results


# ----------------------------------------------------------------------------
# Autoencoder study


def write_pgm(path, image):
    """Binary (P5) graymap of a 2-D array with values in [0, 1]."""
    img = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(np.round(img * 255.0).astype(np.uint8).tobytes())


def read_pgm(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    parts = buf.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    data = np.frombuffer(parts[4][: w * h], dtype=np.uint8)
    return data.reshape(h, w).astype(np.float64) / maxval


def reconstruction_grid(net, images, n=10, pad=2):
    """Originals on the top row, reconstructions underneath."""
    x = images[:n]
    rec = net.predict(x).reshape(x.shape)
    H, W = x.shape[1:3]
    grid = np.ones((2 * H + 3 * pad, n * W + (n + 1) * pad))
    for i in range(len(x)):
        c = pad + i * (W + pad)
        grid[pad : pad + H, c : c + W] = x[i, :, :, 0]
        grid[2 * pad + H : 2 * pad + 2 * H, c : c + W] = rec[i, :, :, 0]
    return grid


def autoencoder_config(template, rule):
    cfg = copy.deepcopy(template)
    cfg.architecture = "autoencoder_mnist"
    cfg.rule.name = rule
    cfg.rule.z_size = 0
    if rule == "bp":
        cfg.schedule = "parallel"
    return cfg


def run_autoencode(template, out_dir=None, rules=AUTOENCODE_RULES, train=None, test=None, log=None):
    """Train the MNIST autoencoder under each rule; one subdirectory per rule."""
    if template.dataset != "mnist":
        raise ConfigError("dataset: the autoencoder study runs on mnist only")
    out = Path(out_dir or template.output_dir)
    summaries = {}
    for rule in rules:
        cfg = autoencoder_config(template, rule)
        cfg.validate()
        if train is None or test is None:
            train, test = load_data(cfg)
        result = run_experiment(cfg, out / rule, train, test, log=log)
        write_pgm(out / rule / "reconstructions.pgm", reconstruction_grid(result.net, test.images))
        s = result.summary
        init = s["initial"]["test_loss"]
        final = s["final"]["test_loss"] if s["final"] else init
        summaries[rule] = {"initial_test_loss": init, "final_test_loss": final, "reduction": 1.0 - final / init}
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "autoencode_summary.json", "w") as fh:
        json.dump(summaries, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summaries


def load_config(path, seed=None, epochs=None, out=None):
    cfg = ExperimentConfig.load(path)
    if seed is not None:
        cfg.seed = seed
    if epochs is not None:
        cfg.epochs = epochs
    if out is not None:
        cfg.output_dir = str(out)
    cfg.validate()
    return cfg
