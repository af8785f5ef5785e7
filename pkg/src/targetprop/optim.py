"""Adam, training schedules, evaluation and random hyperparameter search."""
import math
from dataclasses import dataclass, field

import numpy as np

from .data import augment_batch, batches, one_hot
from .errors import ContractError, ParameterError
from .rules import (
    gradient_rule_grads,
    inverse_grads,
    target_rule_forward_grads,
    task_loss,
)
from .tensor import DTYPE

SCHEDULES = ("parallel", "alternating")


@dataclass
class AdamConfig:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.lr > 0:
            raise ParameterError(f"Adam lr must be positive, got {self.lr}")
        for name in ("beta1", "beta2"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ParameterError(f"Adam {name} must lie in [0, 1), got {v}")
        if not self.eps > 0:
            raise ParameterError(f"Adam eps must be positive, got {self.eps}")


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def zeros_like(cls, params):
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0)


def adam_step(state, cfg, params, grads):
    """One in-place Adam update of ``params``; returns ``(params, state)``."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ContractError("adam_step: params, grads and state differ in length")
    state.t += 1
    c1 = 1.0 - cfg.beta1**state.t
    c2 = 1.0 - cfg.beta2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ContractError(f"adam_step: parameter {p.shape} vs gradient {g.shape}")
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * (g * g)
        p -= cfg.lr * (m / c1) / (np.sqrt(v / c2) + cfg.eps)
    return params, state


class Adam:
    """Adam bound to a fixed, ordered list of parameter arrays."""

    def __init__(self, params, cfg):
        self.params = list(params)
        self.cfg = cfg
        self.state = AdamState.zeros_like(self.params)

    def step(self, grads):
        adam_step(self.state, self.cfg, self.params, grads)


def forward_optimizer(net, cfg):
    return Adam([arr for _, _, arr in net.forward_params()], cfg)


def inverse_optimizer(net, cfg):
    return Adam([arr for _, _, arr in net.inverse_params()], cfg)


def _flatten(blocks):
    return [arr for block in blocks if block is not None for arr in block.values()]


# ----------------------------------------------------------------------------
# Training


def batch_target(net, dataset, idx):
    if net.task == "classify":
        return one_hot(dataset.labels[idx], dataset.num_classes)
    return dataset.images[idx].reshape(len(idx), -1)


def train_step(net, rule, x, target, opt_forward=None, opt_inverse=None, rng=None, update_forward=True, update_inverse=True):
    """Forward pass plus (up to) both updates computed from the same tape.

    Returns ``(task_loss, inverse_loss_or_None)``.
    """
    tape = net.forward(x)
    loss = task_loss(net, tape.activations[-1], target)
    inv_loss = None
    fwd = inv = None
    if rule.uses_targets:
        if update_inverse:
            inv, inv_loss = inverse_grads(net, rule, tape, rng)
        if update_forward:
            fwd, _ = target_rule_forward_grads(net, rule, tape, target)
    elif update_forward:
        fwd = gradient_rule_grads(net, rule, tape, target)
    if inv is not None:
        opt_inverse.step(_flatten(inv))
    if fwd is not None:
        opt_forward.step(_flatten(fwd))
    return loss, inv_loss


@dataclass
class EpochStats:
    train_loss: float
    inverse_loss: float = None
    steps: int = 0


def _run_pass(net, data, rule, opt_forward, opt_inverse, rng, batch_size, augment, update_forward, update_inverse):
    losses, inv_losses, weights = [], [], []
    order = batches(data, batch_size, rng.child(0))
    for b, idx in enumerate(order):
        x = data.images[idx]
        if augment is not None and augment.enabled:
            x = augment_batch(x, augment, rng.child(1).child(b))
        target = batch_target(net, data, idx) if net.task == "classify" else x.reshape(len(idx), -1)
        loss, inv_loss = train_step(
            net, rule, x, target, opt_forward, opt_inverse, rng.child(2).child(b), update_forward, update_inverse
        )
        losses.append(loss)
        weights.append(len(idx))
        if inv_loss is not None:
            inv_losses.append(inv_loss)
    w = np.asarray(weights, dtype=DTYPE)
    mean_loss = float(np.dot(losses, w) / w.sum())
    mean_inv = float(np.mean(inv_losses)) if inv_losses else None
    return EpochStats(mean_loss, mean_inv, len(order))


def train_epoch(net, data, rule, schedule, opt_forward, opt_inverse, rng, batch_size=128, augment=None):
    """Train for one reported epoch.

    ``parallel`` applies inverse and forward updates from the same forward
    pass on every minibatch. ``alternating`` spends one full pass on inverse
    updates only, then one full pass on forward updates only. Gradient-style
    rules ignore the schedule and the inverse optimizer.
    """
    if schedule not in SCHEDULES:
        raise ParameterError(f"schedule must be one of {SCHEDULES}, got {schedule!r}")
    if len(data) == 0:
        raise ParameterError("cannot train on an empty dataset")
    if batch_size < 1:
        raise ParameterError("batch_size must be >= 1")
    if not rule.uses_targets or schedule == "parallel":
        return _run_pass(net, data, rule, opt_forward, opt_inverse, rng, batch_size, augment, True, rule.uses_targets)
    inv = _run_pass(net, data, rule, opt_forward, opt_inverse, rng.child(10), batch_size, augment, False, True)
    fwd = _run_pass(net, data, rule, opt_forward, opt_inverse, rng.child(11), batch_size, augment, True, False)
    return EpochStats(fwd.train_loss, inv.inverse_loss, inv.steps + fwd.steps)


def evaluate(net, data, batch_size=1000):
    """Return ``(error_percent, mean_loss)``; error is ``None`` for autoencoders."""
    n = len(data)
    wrong = 0
    loss_sum = 0.0
    for start in range(0, n, batch_size):
        idx = np.arange(start, min(n, start + batch_size))
        out = net.forward(data.images[idx]).activations[-1]
        target = batch_target(net, data, idx)
        loss_sum += task_loss(net, out, target) * len(idx)
        if net.task == "classify":
            pred = np.argmax(out[:, : net.n_classes], axis=1)
            wrong += int(np.sum(pred != data.labels[idx]))
    err = 100.0 * wrong / n if net.task == "classify" else None
    return err, loss_sum / n


# ----------------------------------------------------------------------------
# Random search


@dataclass
class HyperparamSpace:
    model_lr: tuple = (1e-5, 3e-4)
    inverse_lr: tuple = (1e-5, 3e-4)
    beta1: float = 0.9
    beta2: tuple = (0.99, 0.999)
    eps: tuple = (1e-4, 1e-6, 1e-8)
    alpha: tuple = (0.01, 0.2)
    sigma: tuple = (0.01, 0.3)


def _log_uniform(rng, lo, hi):
    u = rng.uniform(())
    return float(math.exp(math.log(lo) + float(u) * (math.log(hi) - math.log(lo))))


def _uniform(rng, lo, hi):
    return float(lo + float(rng.uniform(())) * (hi - lo))


def _choice(rng, options):
    return options[int(rng.integers(len(options)))]


def sample_config(space, rng):
    """Draw one assignment; every field is drawn, in a fixed order."""
    return {
        "model_lr": _log_uniform(rng, *space.model_lr),
        "model_beta1": space.beta1,
        "model_beta2": _choice(rng, space.beta2),
        "model_eps": _choice(rng, space.eps),
        "inverse_lr": _log_uniform(rng, *space.inverse_lr),
        "inverse_beta1": space.beta1,
        "inverse_beta2": _choice(rng, space.beta2),
        "inverse_eps": _choice(rng, space.eps),
        "alpha": _uniform(rng, *space.alpha),
        "sigma": _uniform(rng, *space.sigma),
    }


@dataclass
class TrialResult:
    trial: int
    params: dict
    best_test_err: float
    best_train_err: float
    best_epoch: int
    history: list = field(default_factory=list)


def _trial_worker(args):
    runner, template, trial, params, epochs, seed = args
    return runner(template, trial, params, epochs, seed)


def random_search(n_configs, epochs, template, rng, runner, space=None, jobs=1):
    """Run ``n_configs`` independent trials and return them sorted by best test error.

    Trial ``i`` samples its hyperparameters from ``rng.child(i)`` and trains
    with seed derived from the same child, so results do not depend on
    execution order, on ``jobs`` or on which other trials exist.
    ``runner(template, trial, params, epochs, seed) -> TrialResult``.
    """
    if n_configs < 1:
        raise ParameterError("n_configs must be >= 1")
    space = space or HyperparamSpace()
    work = []
    for i in range(n_configs):
        child = rng.child(i)
        params = sample_config(space, child.child(0))
        seed = int(child.child(1).raw(1)[0] >> np.uint64(1))
        work.append((runner, template, i, params, epochs, seed))
    if jobs > 1:
        import multiprocessing as mp

        with mp.get_context("fork").Pool(jobs) as pool:
            results = pool.map(_trial_worker, work, chunksize=1)
    else:
        results = [_trial_worker(w) for w in work]
    return sorted(results, key=lambda r: (r.best_test_err, r.trial))


def accuracy_histogram(results, bin_width=1.0):
    """Counts of best test accuracy (percent) in fixed bins over [0, 100]."""
    edges = np.arange(0.0, 100.0 + bin_width, bin_width)
    acc = np.array([100.0 - r.best_test_err for r in results], dtype=DTYPE)
    counts, edges = np.histogram(acc, bins=edges)
    return edges, counts
