"""Credit-assignment rules: BP, FA, DFA and the target-propagation family.

Gradient-style rules (``bp``, ``fa``, ``dfa``) return parameter gradients of
the batch-mean task loss (or their feedback-alignment surrogates).
Target-propagation rules (``tp``, ``dtp``, ``sdtp``, ``ao_sdtp``,
``hybrid``) produce a :class:`TargetStack` and train every hidden layer on a
local squared-error loss against its target, while the output layer is
trained on the task loss. Inverses are trained on a local reconstruction
loss.

Targets are stored with network indexing: ``targets[l]`` pairs with
``tape.activations[l]``; ``targets[0]`` is unused.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError, DimensionError, ParameterError
from .layers import activation_deriv
from .tensor import DTYPE, matmul, sample_gaussian

GRADIENT_RULES = ("bp", "fa", "dfa")
TARGET_RULES = ("tp", "dtp", "sdtp", "ao_sdtp", "hybrid")
RULES = GRADIENT_RULES + TARGET_RULES
INVERSE_LOSS_MODES = ("noise_preserving", "denoising")

# DTP keeps the original noise-preserving inverse loss; the gradient-free
# variants train inverses as denoising autoencoders.
DEFAULT_INVERSE_MODE = {
    "tp": "noise_preserving",
    "dtp": "noise_preserving",
    "sdtp": "denoising",
    "ao_sdtp": "denoising",
    "hybrid": "denoising",
}

P_FLOOR = 1e-12


@dataclass
class LearningRule:
    kind: str
    alpha: float = 0.1
    sigma: float = 0.1
    inverse_loss_mode: str = None
    alpha_mix: float = 1.0
    z_size: int = 0

    def __post_init__(self):
        if self.kind not in RULES:
            raise ConfigError(f"unknown learning rule {self.kind!r}; choose from {', '.join(RULES)}")
        if self.inverse_loss_mode is None and self.kind in DEFAULT_INVERSE_MODE:
            self.inverse_loss_mode = DEFAULT_INVERSE_MODE[self.kind]
        if self.kind == "dtp" and not self.alpha > 0:
            raise ParameterError(f"dtp needs alpha > 0, got {self.alpha}")
        if self.uses_targets:
            if self.sigma < 0:
                raise ParameterError(f"sigma must be >= 0, got {self.sigma}")
            if self.inverse_loss_mode not in INVERSE_LOSS_MODES:
                raise ConfigError(f"inverse_loss_mode must be one of {INVERSE_LOSS_MODES}")
        if self.kind == "hybrid" and not 0.0 <= self.alpha_mix <= 1.0:
            raise ParameterError(f"alpha_mix must lie in [0, 1], got {self.alpha_mix}")
        if self.z_size < 0:
            raise ParameterError("z_size must be >= 0")

    @property
    def uses_targets(self):
        return self.kind in TARGET_RULES

    @property
    def feedback(self):
        return self.kind if self.kind in ("fa", "dfa") else None

    @property
    def aux_size(self):
        return self.z_size if self.kind == "ao_sdtp" else 0


@dataclass
class TargetStack:
    targets: list

    def __getitem__(self, l):
        return self.targets[l]

    def __len__(self):
        return len(self.targets)


# ----------------------------------------------------------------------------
# Task losses


def cross_entropy(p, q):
    """Mean over the batch of ``-sum q log p``, with ``p`` clamped at 1e-12."""
    p = np.asarray(p, dtype=DTYPE)
    q = np.asarray(q, dtype=DTYPE)
    if p.shape != q.shape:
        raise DimensionError(f"cross_entropy: p{p.shape} vs q{q.shape}")
    sums = p.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > 1e-6) or np.any(p < 0):
        raise ContractError("cross_entropy: p is not a probability distribution")
    per_sample = -(q * np.log(np.maximum(p, P_FLOOR))).sum(axis=-1)
    return float(np.mean(per_sample))


def output_delta(p, q):
    """Gradient of softmax + cross-entropy with respect to the logits."""
    return np.asarray(p, dtype=DTYPE) - np.asarray(q, dtype=DTYPE)


def _split_output(net, out):
    if net.aux_size:
        return out[:, : -net.aux_size], out[:, -net.aux_size :]
    return out, None


def task_loss(net, out, target):
    """Batch-mean task loss: cross-entropy for classifiers, squared error otherwise."""
    if net.task == "classify":
        o, _ = _split_output(net, out)
        return cross_entropy(o, target)
    n = out.shape[0]
    r = out.reshape(n, -1) - np.asarray(target, dtype=DTYPE).reshape(n, -1)
    return float(np.sum(r * r) / n)


def task_delta(net, out, target):
    """Per-sample derivative of the task loss with respect to the output pre-activation.

    Auxiliary outputs receive a zero delta.
    """
    n = out.shape[0]
    if net.task == "classify":
        o, z = _split_output(net, out)
        e = output_delta(o, target)
        if z is not None:
            e = np.concatenate([e, np.zeros_like(z)], axis=1)
        return e
    target = np.asarray(target, dtype=DTYPE).reshape(out.shape)
    e = 2.0 * (out - target)
    return e * activation_deriv(net.output_layer.activation, out)


def _freeze_aux(net, grads):
    # weights producing the auxiliary features stay at their initial values
    if net.aux_size:
        g = grads[-1]
        g["W"][-net.aux_size :] = 0.0
        g["b"][-net.aux_size :] = 0.0
    return grads


# ----------------------------------------------------------------------------
# Gradient-transport rules


def _check_tape(net, tape):
    if len(tape.activations) != len(net.layers) + 1:
        raise ContractError(f"tape has {len(tape.activations)} activations for a {len(net.layers)}-layer network")


def _backward(net, tape, e_L, transport):
    _check_tape(net, tape)
    L = len(net.layers)
    grads = [None] * L
    delta = np.asarray(e_L, dtype=DTYPE)
    for i in reversed(range(L)):
        grads[i] = net.layers[i].param_grads(delta, tape.activations[i])
        if i > 0:
            back = transport(i, delta)
            delta = back * activation_deriv(net.layers[i - 1].activation, tape.activations[i])
    return grads


def bp_backward(net, tape, e_L):
    return _backward(net, tape, e_L, lambda i, d: net.layers[i].transport(d))


def _feedback_weights(net, kind):
    fb = net.feedback
    if fb is None or fb.get("kind") != kind:
        raise ConfigError(f"{kind} needs {kind} feedback weights on the network")
    return fb["B"]


def _fa_transport_weights(layer, B):
    # dense feedback is stored like W.T; transport expects the W layout
    return np.ascontiguousarray(B.T) if layer.kind == "dense" else B


def fa_backward(net, tape, e_L, feedback=None):
    B = feedback if feedback is not None else _feedback_weights(net, "fa")
    return _backward(net, tape, e_L, lambda i, d: net.layers[i].transport(d, _fa_transport_weights(net.layers[i], B[i])))


def dfa_backward(net, tape, e_L, feedback=None):
    B = feedback if feedback is not None else _feedback_weights(net, "dfa")
    _check_tape(net, tape)
    e_L = np.asarray(e_L, dtype=DTYPE)
    L = len(net.layers)
    grads = [None] * L
    grads[-1] = net.layers[-1].param_grads(e_L, tape.activations[L - 1])
    for i in range(L - 1):
        h = tape.activations[i + 1]
        if B[i] is None:
            raise ConfigError(f"dfa feedback missing for hidden layer {i + 1}")
        back = matmul(e_L, np.ascontiguousarray(B[i].T)).reshape(h.shape)
        delta = back * activation_deriv(net.layers[i].activation, h)
        grads[i] = net.layers[i].param_grads(delta, tape.activations[i])
    return grads


# ----------------------------------------------------------------------------
# Target-propagation family


def _require_inverses(net):
    if not net.has_inverses:
        raise ConfigError("target propagation needs an inverse for every layer above the first")


def _g(net, l, h):
    """Inverse of layer ``l`` (1-based): maps activity at ``l`` to ``l - 1``."""
    return net.inverses[l - 1].forward(h)


def _difference_target(net, tape, l, target_above):
    h = tape.activations[l]
    return h + (_g(net, l + 1, target_above) - _g(net, l + 1, tape.activations[l + 1]))


def tp_targets(net, tape, top_target):
    _require_inverses(net)
    _check_tape(net, tape)
    L = len(net.layers)
    targets = [None] * (L + 1)
    targets[L] = np.asarray(top_target, dtype=DTYPE).reshape(tape.activations[L].shape)
    for l in range(L - 1, 0, -1):
        targets[l] = _g(net, l + 1, targets[l + 1])
    return TargetStack(targets)


def _top_target(net, tape, target):
    """Output-layer target: the label distribution (plus realised z) or the input to reconstruct."""
    out = tape.activations[-1]
    target = np.asarray(target, dtype=DTYPE)
    if net.task == "classify" and net.aux_size:
        z = out[:, -net.aux_size :]
        target = np.concatenate([target, z], axis=1)
    return target.reshape(out.shape)


def penultimate_gradient(net, tape, target):
    """dL/dh_{L-1}: one exact backprop step through the output layer."""
    e = task_delta(net, tape.activations[-1], target)
    return net.output_layer.transport(e)


def dtp_targets(net, tape, target, alpha):
    if not alpha >= 0:
        raise ParameterError(f"alpha must be non-negative, got {alpha}")
    _require_inverses(net)
    _check_tape(net, tape)
    L = len(net.layers)
    targets = [None] * (L + 1)
    targets[L] = _top_target(net, tape, target)
    targets[L - 1] = tape.activations[L - 1] - alpha * penultimate_gradient(net, tape, target)
    for l in range(L - 2, 0, -1):
        targets[l] = _difference_target(net, tape, l, targets[l + 1])
    return TargetStack(targets)


def sdtp_targets(net, tape, target):
    """Difference targets all the way down, starting from the loss minimiser.

    Reads only the tape and the inverse layers, never forward weights.
    """
    _require_inverses(net)
    _check_tape(net, tape)
    L = len(net.layers)
    targets = [None] * (L + 1)
    top = np.asarray(target, dtype=DTYPE)
    targets[L] = top.reshape(tape.activations[L].shape)
    for l in range(L - 1, 0, -1):
        targets[l] = _difference_target(net, tape, l, targets[l + 1])
    return TargetStack(targets)


def ao_sdtp_targets(net, tape, target):
    """SDTP with the output split as ``[o, z]``; ``z`` is kept in both inverse calls."""
    if net.task != "classify":
        raise ConfigError("ao_sdtp needs a classifier network")
    return sdtp_targets(net, tape, _top_target(net, tape, target))


def hybrid_target_step(net, tape, l, target_above, alpha_mix):
    """Target for layer ``l`` mixing a backprop step with the SDTP difference.

    ``alpha_mix = 1`` gives ``h_l - dL/dh_l`` (a pure BP target),
    ``alpha_mix = 0`` the difference target. For the layer below the output
    the backprop residual is the task-loss delta at the logits.
    """
    if not 0.0 <= alpha_mix <= 1.0:
        raise ParameterError(f"alpha_mix must lie in [0, 1], got {alpha_mix}")
    L = len(net.layers)
    upper = net.layers[l]  # maps h_l -> h_{l+1}
    h_up = tape.activations[l + 1]
    if l + 1 == L:
        top = target_above[:, : net.n_classes] if net.task == "classify" else target_above
        delta = task_delta(net, h_up, top)
    else:
        delta = (h_up - target_above) * activation_deriv(upper.activation, h_up)
    bp_step = upper.transport(delta)
    tp_step = _g(net, l + 1, h_up) - _g(net, l + 1, target_above)
    return tape.activations[l] - (alpha_mix * bp_step + (1.0 - alpha_mix) * tp_step)


def hybrid_targets(net, tape, target, alpha_mix):
    _require_inverses(net)
    _check_tape(net, tape)
    L = len(net.layers)
    targets = [None] * (L + 1)
    targets[L] = _top_target(net, tape, target)
    for l in range(L - 1, 0, -1):
        targets[l] = hybrid_target_step(net, tape, l, targets[l + 1], alpha_mix)
    return TargetStack(targets)


def compute_targets(net, rule, tape, target):
    if rule.kind == "tp":
        return tp_targets(net, tape, _top_target(net, tape, target))
    if rule.kind == "dtp":
        return dtp_targets(net, tape, target, rule.alpha)
    if rule.kind == "sdtp":
        return sdtp_targets(net, tape, _top_target(net, tape, target))
    if rule.kind == "ao_sdtp":
        return ao_sdtp_targets(net, tape, target)
    if rule.kind == "hybrid":
        return hybrid_targets(net, tape, target, rule.alpha_mix)
    raise ConfigError(f"{rule.kind} does not compute targets")


# ----------------------------------------------------------------------------
# Local losses


def forward_loss(layer, h, target):
    _, out = layer.forward(h)
    r = out - target.reshape(out.shape)
    return float(np.sum(r * r) / out.shape[0])


def forward_loss_grad(layer, h, target, out=None, half=False):
    """Gradient of ``||f(h) - target||^2`` (batch mean) wrt the layer's own parameters.

    ``half=True`` uses ``1/2 ||.||^2``. ``out`` may pass a cached ``f(h)``.
    """
    if out is None:
        _, out = layer.forward(h)
    target = np.asarray(target, dtype=DTYPE)
    if target.size != out.size:
        raise DimensionError(f"forward loss target {target.shape} does not match layer output {out.shape}")
    r = out - target.reshape(out.shape)
    scale = 1.0 if half else 2.0
    delta = scale * r * activation_deriv(layer.activation, out)
    return layer.param_grads(delta, h)


def _corrupt(h, sigma, rng, noise):
    if noise is None:
        noise = sample_gaussian(rng, h.shape, sigma) if sigma > 0 else np.zeros_like(h)
    return h + noise


def inverse_loss(layer, inv, h, sigma=0.0, mode="denoising", rng=None, noise=None):
    h_noisy = _corrupt(h, sigma, rng, noise)
    _, y = layer.forward(h_noisy)
    rec = inv.forward(y)
    clean = h if mode == "denoising" else h_noisy
    r = rec - clean.reshape(rec.shape)
    return float(np.sum(r * r) / h.shape[0])


def inverse_loss_grad(layer, inv, h, sigma=0.0, mode="denoising", rng=None, noise=None):
    """Gradient of the reconstruction loss wrt the inverse parameters only.

    ``h`` is the clean input of ``layer``; ``noise`` pins the corruption,
    otherwise it is drawn from ``rng``. Returns ``(grads, loss)``.
    """
    if mode not in INVERSE_LOSS_MODES:
        raise ConfigError(f"inverse_loss_mode must be one of {INVERSE_LOSS_MODES}, got {mode!r}")
    if sigma < 0:
        raise ParameterError(f"sigma must be >= 0, got {sigma}")
    h = np.asarray(h, dtype=DTYPE)
    h_noisy = _corrupt(h, sigma, rng, noise)
    _, y = layer.forward(h_noisy)
    pre, rec = inv.forward_pre(y)
    clean = h if mode == "denoising" else h_noisy
    r = rec - clean.reshape(rec.shape)
    n = h.shape[0]
    delta = 2.0 * r * activation_deriv(inv.activation, rec)
    return inv.param_grads(delta, y), float(np.sum(r * r) / n)


# ----------------------------------------------------------------------------
# One minibatch worth of updates


def gradient_rule_grads(net, rule, tape, target):
    e = task_delta(net, tape.activations[-1], target)
    if rule.kind == "bp":
        grads = bp_backward(net, tape, e)
    elif rule.kind == "fa":
        grads = fa_backward(net, tape, e)
    else:
        grads = dfa_backward(net, tape, e)
    return _freeze_aux(net, grads)


def target_rule_forward_grads(net, rule, tape, target, targets=None):
    if targets is None:
        targets = compute_targets(net, rule, tape, target)
    L = len(net.layers)
    half = rule.kind == "hybrid"
    grads = []
    for i in range(L - 1):
        layer = net.layers[i]
        grads.append(forward_loss_grad(layer, tape.activations[i], targets[i + 1], out=tape.activations[i + 1], half=half))
    e = task_delta(net, tape.activations[-1], target)
    grads.append(net.layers[-1].param_grads(e, tape.activations[L - 1]))
    return _freeze_aux(net, grads), targets


def inverse_grads(net, rule, tape, rng):
    """Inverse-loss gradients for layers 2..L, one noise draw per layer."""
    _require_inverses(net)
    grads = [None] * len(net.layers)
    losses = []
    for i in range(1, len(net.layers)):
        g, loss = inverse_loss_grad(
            net.layers[i], net.inverses[i], tape.activations[i], rule.sigma, rule.inverse_loss_mode, rng=rng
        )
        grads[i] = g
        losses.append(loss)
    return grads, float(np.mean(losses)) if losses else 0.0
