"""Finite-difference checks of the analytic updates on a tiny network.

Every check returns ``{block_name: relative_error}`` where the error of a
block is ``max|analytic - numeric| / max(max|analytic|, max|numeric|)``.
"""
import numpy as np

from .layers import build_network
from .rules import (
    INVERSE_LOSS_MODES,
    LearningRule,
    bp_backward,
    forward_loss,
    forward_loss_grad,
    gradient_rule_grads,
    inverse_loss,
    inverse_loss_grad,
    penultimate_gradient,
    target_rule_forward_grads,
    task_delta,
    task_loss,
)
from .tensor import SeededRng, sample_gaussian

STEP = 1e-5
THRESHOLD = 1e-6
HYBRID_THRESHOLD = 1e-9
CHECKS = ("bp", "forward_loss", "inverse_loss", "dtp_penultimate", "hybrid")


def tiny_arch(sizes=(4, 6, 3)):
    layers = [{"type": "dense", "units": n} for n in sizes[1:-1]]
    layers.append({"type": "dense", "units": sizes[-1], "activation": "softmax"})
    return {"input_shape": (sizes[0],), "layers": layers}


def tiny_problem(seed, sizes=(4, 6, 3), batch=5):
    rng = SeededRng(seed)
    net = build_network(tiny_arch(sizes), rng.child(0), inverses=True)
    # non-zero biases so every block gets exercised
    for i, (_, _, arr) in enumerate(net.forward_params() + net.inverse_params()):
        arr += 0.1 * rng.child(1).child(i).standard_normal(arr.shape)
    x = rng.child(2).standard_normal((batch, sizes[0]))
    labels = rng.child(3).integers(sizes[-1], (batch,))
    q = np.eye(sizes[-1])[labels]
    return net, x, q, rng.child(4)


def numeric_grad(f, arr, step=STEP):
    """Central differences of scalar ``f()`` with respect to ``arr`` (perturbed in place)."""
    g = np.zeros_like(arr)
    for idx in np.ndindex(arr.shape):
        old = arr[idx]
        arr[idx] = old + step
        fp = f()
        arr[idx] = old - step
        fm = f()
        arr[idx] = old
        g[idx] = (fp - fm) / (2.0 * step)
    return g


def relative_error(a, n):
    scale = max(np.max(np.abs(a)), np.max(np.abs(n)))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(a - n)) / scale)


def check_bp(seed):
    net, x, q, _ = tiny_problem(seed)
    tape = net.forward(x)
    grads = bp_backward(net, tape, task_delta(net, tape.output, q))

    def loss():
        return task_loss(net, net.predict(x), q)

    return {f"layer{i}.{k}": relative_error(grads[i][k], numeric_grad(loss, arr)) for i, k, arr in net.forward_params()}


def check_forward_loss(seed):
    net, x, _, rng = tiny_problem(seed)
    tape = net.forward(x)
    report = {}
    for i, layer in enumerate(net.layers):
        if layer.activation != "tanh":
            continue
        h = tape.activations[i]
        target = np.tanh(rng.child(i).standard_normal(tape.activations[i + 1].shape))
        grads = forward_loss_grad(layer, h, target)
        for k, arr in layer.params().items():
            num = numeric_grad(lambda: forward_loss(layer, h, target), arr)
            report[f"layer{i}.{k}"] = relative_error(grads[k], num)
    return report


def check_inverse_loss(seed, sigma=0.3):
    net, x, _, rng = tiny_problem(seed)
    tape = net.forward(x)
    report = {}
    for mode in INVERSE_LOSS_MODES:
        for i in range(1, len(net.layers)):
            layer, inv, h = net.layers[i], net.inverses[i], tape.activations[i]
            noise = sample_gaussian(rng.child(i), h.shape, sigma)
            grads, _ = inverse_loss_grad(layer, inv, h, sigma, mode, noise=noise)
            for k, arr in inv.params().items():
                num = numeric_grad(lambda: inverse_loss(layer, inv, h, sigma, mode, noise=noise), arr)
                report[f"{mode}.inverse{i}.{k}"] = relative_error(grads[k], num)
    return report


def check_dtp_penultimate(seed):
    """Per-sample dL/dh_{L-1} against differences of the summed task loss."""
    net, x, q, _ = tiny_problem(seed)
    tape = net.forward(x)
    analytic = penultimate_gradient(net, tape, q)
    h = tape.activations[-2].copy()
    out_layer = net.output_layer

    def loss():
        return task_loss(net, out_layer.forward(h)[1], q) * h.shape[0]

    return {"h_penultimate": relative_error(analytic, numeric_grad(loss, h))}


def check_hybrid(seed, sizes=(4, 6, 5, 3)):
    """Local forward-loss gradients at alpha_mix = 1 against BP gradients."""
    net, x, q, _ = tiny_problem(seed, sizes)
    tape = net.forward(x)
    bp = gradient_rule_grads(net, LearningRule("bp"), tape, q)
    local, _ = target_rule_forward_grads(net, LearningRule("hybrid", alpha_mix=1.0), tape, q)
    return {f"layer{i}.{k}": relative_error(local[i][k], bp[i][k]) for i in range(len(bp)) for k in bp[i]}


def run_check(name, seed):
    fn = {
        "bp": check_bp,
        "forward_loss": check_forward_loss,
        "inverse_loss": check_inverse_loss,
        "dtp_penultimate": check_dtp_penultimate,
        "hybrid": check_hybrid,
    }[name]
    return fn(seed)


def threshold_for(name):
    return HYBRID_THRESHOLD if name == "hybrid" else THRESHOLD
