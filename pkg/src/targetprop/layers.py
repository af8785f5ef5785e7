"""Forward and inverse layers, and network assembly from architecture presets.

Conventions: batches are row-major (leading axis = sample). Layer index
``i`` in Python lists corresponds to layer ``l = i + 1`` of the network, so
``tape.activations[l]`` is the output of ``net.layers[l - 1]`` and
``tape.activations[0]`` is the input.
"""
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, DimensionError
from .tensor import DTYPE, glorot_uniform, matmul, softmax

HIDDEN_ACTIVATIONS = ("tanh", "identity")


def activate(kind, pre, aux_size=0):
    if kind == "tanh":
        return np.tanh(pre)
    if kind == "identity":
        return pre.copy()
    if kind == "softmax":
        if aux_size == 0:
            return softmax(pre)
        # [o, z]: softmax over the class block, tanh random features for z
        o = softmax(pre[:, :-aux_size])
        z = np.tanh(pre[:, -aux_size:])
        return np.concatenate([o, z], axis=1)
    raise ConfigError(f"unknown activation {kind!r}")


def activation_deriv(kind, out):
    """Elementwise derivative, written in terms of the activation output."""
    if kind == "tanh":
        return 1.0 - out * out
    if kind == "identity":
        return np.ones_like(out)
    raise ConfigError(f"activation {kind!r} has no elementwise derivative")


def _check_batch(x, sample_shape, what):
    x = np.asarray(x, dtype=DTYPE)
    if x.ndim < 1 or tuple(x.shape[1:]) != tuple(sample_shape):
        # a flat vector per sample is accepted when sizes agree
        if x.ndim == 2 and x.shape[1] == int(np.prod(sample_shape)):
            return x.reshape((x.shape[0],) + tuple(sample_shape))
        raise DimensionError(
            f"{what}: expected batch of shape (N, {', '.join(map(str, sample_shape))}), got {x.shape}"
        )
    return x


# ----------------------------------------------------------------------------
# Dense layers


class DenseLayer:
    """``out = act(h @ W.T + b)``; inputs of any per-sample shape are flattened."""

    kind = "dense"

    def __init__(self, W, b, activation="tanh", in_shape=None, aux_size=0):
        self.W = np.asarray(W, dtype=DTYPE)
        self.b = np.asarray(b, dtype=DTYPE)
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise DimensionError(f"inconsistent dense shapes W{self.W.shape} b{self.b.shape}")
        self.activation = activation
        self.in_shape = tuple(in_shape) if in_shape is not None else (self.W.shape[1],)
        if int(np.prod(self.in_shape)) != self.W.shape[1]:
            raise DimensionError(f"in_shape {self.in_shape} does not match W{self.W.shape}")
        self.aux_size = int(aux_size)

    @property
    def out_shape(self):
        return (self.W.shape[0],)

    @property
    def n_in(self):
        return self.W.shape[1]

    @property
    def n_out(self):
        return self.W.shape[0]

    def params(self):
        return {"W": self.W, "b": self.b}

    def forward(self, h):
        h = _check_batch(h, self.in_shape, "dense_forward")
        flat = h.reshape(h.shape[0], -1)
        pre = matmul(flat, self.W.T) + self.b
        return pre, activate(self.activation, pre, self.aux_size)

    def transport(self, delta, weights=None):
        """Send a pre-activation delta back to the input space through ``weights``.

        ``weights`` is laid out like ``W`` (out x in); BP passes ``W`` itself.
        """
        weights = self.W if weights is None else weights
        back = matmul(delta, weights)
        return back.reshape((delta.shape[0],) + self.in_shape)

    def param_grads(self, delta, h):
        n = delta.shape[0]
        flat = np.asarray(h, dtype=DTYPE).reshape(n, -1)
        return {"W": matmul(delta.T, flat) / n, "b": delta.sum(axis=0) / n}


class InverseDense:
    """Approximate inverse ``g(h) = act(h @ V.T + c)`` reshaped to ``out_shape``."""

    kind = "dense"

    def __init__(self, V, c, activation="tanh", out_shape=None):
        self.V = np.asarray(V, dtype=DTYPE)
        self.c = np.asarray(c, dtype=DTYPE)
        if self.V.ndim != 2 or self.c.shape != (self.V.shape[0],):
            raise DimensionError(f"inconsistent inverse shapes V{self.V.shape} c{self.c.shape}")
        self.activation = activation
        self.out_shape = tuple(out_shape) if out_shape is not None else (self.V.shape[0],)

    @property
    def in_shape(self):
        return (self.V.shape[1],)

    def params(self):
        return {"V": self.V, "c": self.c}

    def forward_pre(self, h):
        h = np.asarray(h, dtype=DTYPE)
        flat = h.reshape(h.shape[0], -1)
        if flat.shape[1] != self.V.shape[1]:
            raise DimensionError(f"inverse_forward: expected {self.V.shape[1]} inputs, got {h.shape}")
        pre = matmul(flat, self.V.T) + self.c
        return pre, activate(self.activation, pre)

    def forward(self, h):
        _, out = self.forward_pre(h)
        return out.reshape((out.shape[0],) + self.out_shape)

    def param_grads(self, delta, h):
        n = delta.shape[0]
        delta = delta.reshape(n, -1)
        flat = np.asarray(h, dtype=DTYPE).reshape(n, -1)
        return {"V": matmul(delta.T, flat) / n, "c": delta.sum(axis=0) / n}


def dense_forward(layer, h):
    return layer.forward(h)


def inverse_forward(inv, h):
    return inv.forward(h)


# ----------------------------------------------------------------------------
# Locally-connected layers


def same_padding(size, kernel, stride):
    """Return (out, pad_before, pad_after) with out = ceil(size / stride).

    Odd total padding puts the extra element after (bottom / right).
    """
    out = -(-size // stride)
    total = max((out - 1) * stride + kernel - size, 0)
    before = total // 2
    return out, before, total - before


@dataclass
class _LCGeometry:
    in_shape: tuple
    kernel: tuple
    stride: int
    out_channels: int
    out_hw: tuple = field(init=False)
    pads: tuple = field(init=False)

    def __post_init__(self):
        H, W, _ = self.in_shape
        kh, kw = self.kernel
        oy, py0, py1 = same_padding(H, kh, self.stride)
        ox, px0, px1 = same_padding(W, kw, self.stride)
        self.out_hw = (oy, ox)
        self.pads = ((py0, py1), (px0, px1))

    @property
    def out_shape(self):
        return self.out_hw + (self.out_channels,)

    @property
    def n_locations(self):
        return self.out_hw[0] * self.out_hw[1]

    @property
    def patch_size(self):
        return self.kernel[0] * self.kernel[1] * self.in_shape[2]

    def weight_shape(self, tied):
        oy, ox = (1, 1) if tied else self.out_hw
        return (oy, ox, self.out_channels) + tuple(self.kernel) + (self.in_shape[2],)

    def patches(self, x):
        """(N, H, W, C) -> (P, N, K) receptive fields, zero padded."""
        (py0, py1), (px0, px1) = self.pads
        xp = np.pad(x, ((0, 0), (py0, py1), (px0, px1), (0, 0)))
        kh, kw = self.kernel
        s = self.stride
        oy, ox = self.out_hw
        win = sliding_window_view(xp, (kh, kw), axis=(1, 2))  # N, Hv, Wv, C, kh, kw
        win = win[:, : (oy - 1) * s + 1 : s, : (ox - 1) * s + 1 : s]
        win = win.transpose(1, 2, 0, 4, 5, 3)  # oy, ox, N, kh, kw, C
        return np.ascontiguousarray(win).reshape(oy * ox, x.shape[0], self.patch_size)

    def fold(self, cols, n):
        """Adjoint of :meth:`patches`: scatter-add (P, N, K) back to (N, H, W, C)."""
        H, W, C = self.in_shape
        kh, kw = self.kernel
        s = self.stride
        oy, ox = self.out_hw
        (py0, py1), (px0, px1) = self.pads
        cols = cols.reshape(oy, ox, n, kh, kw, C).transpose(2, 0, 1, 3, 4, 5)
        xp = np.zeros((n, H + py0 + py1, W + px0 + px1, C), dtype=DTYPE)
        for i in range(kh):
            for j in range(kw):
                xp[:, i : i + (oy - 1) * s + 1 : s, j : j + (ox - 1) * s + 1 : s, :] += cols[:, :, :, i, j, :]
        return xp[:, py0 : py0 + H, px0 : px0 + W, :]

    def apply(self, x, weights):
        """Linear part of the layer: (N, H, W, C) -> (N, oy, ox, C_out)."""
        n = x.shape[0]
        cols = self.patches(x)
        P, K, co = self.n_locations, self.patch_size, self.out_channels
        if weights.shape[0] == 1 and weights.shape[1] == 1 and P > 1:
            out = matmul(cols.reshape(P * n, K), weights.reshape(co, K).T).reshape(P, n, co)
        else:
            out = np.matmul(cols, weights.reshape(P, co, K).transpose(0, 2, 1))
        return out.transpose(1, 0, 2).reshape((n,) + self.out_shape)

    def apply_transposed(self, y, weights):
        """Exact adjoint of :meth:`apply`: (N, oy, ox, C_out) -> (N, H, W, C)."""
        n = y.shape[0]
        P, K, co = self.n_locations, self.patch_size, self.out_channels
        yt = y.reshape(n, P, co).transpose(1, 0, 2)
        if weights.shape[0] == 1 and weights.shape[1] == 1 and P > 1:
            cols = matmul(np.ascontiguousarray(yt).reshape(P * n, co), weights.reshape(co, K)).reshape(P, n, K)
        else:
            cols = np.matmul(yt, weights.reshape(P, co, K))
        return self.fold(cols, n)

    def weight_grads(self, delta, x, tied):
        """Gradient of <delta, apply(x, W)> wrt W, summed over the batch."""
        n = x.shape[0]
        P, K, co = self.n_locations, self.patch_size, self.out_channels
        cols = self.patches(x)  # P, N, K
        dt = delta.reshape(n, P, co).transpose(1, 2, 0)  # P, co, N
        gw = np.matmul(dt, cols)  # P, co, K
        if tied:
            gw = gw.sum(axis=0, keepdims=True)
        return gw.reshape(self.weight_shape(tied))


class LocallyConnectedLayer:
    """Convolution-shaped layer with per-location (untied) weights.

    ``W`` is indexed ``[out_y, out_x, C_out, k_h, k_w, C_in]`` and ``b`` is
    ``[out_y, out_x, C_out]``. With ``tied=True`` both are stored with unit
    location axes and broadcast, which turns the layer into a convolution
    with one bias per channel.
    """

    kind = "lc"

    def __init__(self, in_shape, kernel, stride, out_channels, W=None, b=None, tied=False, activation="tanh"):
        if isinstance(kernel, int):
            kernel = (kernel, kernel)
        if stride < 1:
            raise ConfigError(f"stride must be positive, got {stride}")
        self.geom = _LCGeometry(tuple(in_shape), tuple(kernel), int(stride), int(out_channels))
        self.tied = bool(tied)
        self.activation = activation
        wshape = self.geom.weight_shape(self.tied)
        self.W = np.zeros(wshape, dtype=DTYPE) if W is None else np.asarray(W, dtype=DTYPE)
        bshape = wshape[:3]
        self.b = np.zeros(bshape, dtype=DTYPE) if b is None else np.asarray(b, dtype=DTYPE)
        if self.W.shape != wshape or self.b.shape != bshape:
            raise DimensionError(f"LC weights {self.W.shape}/{self.b.shape}, expected {wshape}/{bshape}")

    in_shape = property(lambda self: self.geom.in_shape)
    out_shape = property(lambda self: self.geom.out_shape)
    kernel = property(lambda self: self.geom.kernel)
    stride = property(lambda self: self.geom.stride)
    out_channels = property(lambda self: self.geom.out_channels)

    @property
    def n_in(self):
        return int(np.prod(self.in_shape))

    @property
    def n_out(self):
        return int(np.prod(self.out_shape))

    def params(self):
        return {"W": self.W, "b": self.b}

    def full_weights(self):
        return np.broadcast_to(self.W, self.geom.weight_shape(False))

    def forward(self, x):
        x = _check_batch(x, self.in_shape, "lc_forward")
        pre = self.geom.apply(x, self.W) + self.b
        return pre, activate(self.activation, pre)

    def transposed_apply(self, y, weights=None):
        y = _check_batch(y, self.out_shape, "lc_transposed_apply")
        weights = self.W if weights is None else weights
        return self.geom.apply_transposed(y, weights)

    def transport(self, delta, weights=None):
        return self.transposed_apply(delta, weights)

    def param_grads(self, delta, h):
        n = delta.shape[0]
        delta = delta.reshape((n,) + self.out_shape)
        h = _check_batch(h, self.in_shape, "lc param grads")
        gb = delta.sum(axis=0)
        if self.tied:
            gb = gb.sum(axis=(0, 1), keepdims=True)
        return {"W": self.geom.weight_grads(delta, h, self.tied) / n, "b": gb / n}


class InverseLC:
    """Inverse of an LC layer: ``act(A^T y + c)`` where ``A`` has the forward
    layer's sparsity pattern but its own (learned) weights ``V``."""

    kind = "lc"

    def __init__(self, geom, V, c, activation="tanh", tied=False):
        self.geom = geom
        self.tied = tied
        self.V = np.asarray(V, dtype=DTYPE)
        self.c = np.asarray(c, dtype=DTYPE)
        if self.V.shape != geom.weight_shape(tied) or self.c.shape != geom.in_shape:
            raise DimensionError(f"InverseLC shapes V{self.V.shape} c{self.c.shape} do not match geometry")
        self.activation = activation

    in_shape = property(lambda self: self.geom.out_shape)
    out_shape = property(lambda self: self.geom.in_shape)

    def params(self):
        return {"V": self.V, "c": self.c}

    def forward_pre(self, y):
        y = _check_batch(y, self.geom.out_shape, "inverse_forward")
        pre = self.geom.apply_transposed(y, self.V) + self.c
        return pre, activate(self.activation, pre)

    def forward(self, y):
        return self.forward_pre(y)[1]

    def param_grads(self, delta, y):
        n = delta.shape[0]
        delta = delta.reshape((n,) + self.geom.in_shape)
        y = _check_batch(y, self.geom.out_shape, "inverse param grads")
        # <delta, A^T y> = <A delta, y>, so the V-gradient is the forward
        # weight gradient with the roles of input and output swapped.
        gV = self.geom.weight_grads(y, delta, self.tied)
        return {"V": gV / n, "c": delta.sum(axis=0) / n}


def lc_forward(layer, x):
    return layer.forward(x)


def lc_transposed_apply(layer, y):
    return layer.transposed_apply(y)


# ----------------------------------------------------------------------------
# Networks


@dataclass
class ActivationTape:
    activations: list  # h_0 .. h_L
    pre_activations: list  # None, a_1 .. a_L

    @property
    def output(self):
        return self.activations[-1]

    def __len__(self):
        return len(self.activations)


class Network:
    """Stack of forward layers with optional inverses and feedback weights.

    ``inverses[i]`` maps the output of ``layers[i]`` back to its input space;
    ``inverses[0]`` is always ``None``. ``feedback`` is ``None`` or a dict
    ``{"kind": "fa" | "dfa", "B": [...]}`` of fixed matrices.
    """

    def __init__(self, layers, inverses=None, feedback=None, aux_size=0, input_shape=None):
        self.layers = list(layers)
        self.inverses = list(inverses) if inverses is not None else [None] * len(self.layers)
        self.feedback = feedback
        self.aux_size = int(aux_size)
        self.input_shape = tuple(input_shape) if input_shape is not None else self.layers[0].in_shape
        for lower, upper in zip(self.layers, self.layers[1:]):
            if int(np.prod(lower.out_shape)) != int(np.prod(upper.in_shape)):
                raise DimensionError(f"layer shapes do not compose: {lower.out_shape} -> {upper.in_shape}")

    def __len__(self):
        return len(self.layers)

    @property
    def output_layer(self):
        return self.layers[-1]

    @property
    def task(self):
        return "classify" if self.output_layer.activation == "softmax" else "reconstruct"

    @property
    def n_classes(self):
        return self.output_layer.n_out - self.aux_size

    @property
    def has_inverses(self):
        return all(inv is not None for inv in self.inverses[1:])

    def forward(self, x):
        h = _check_batch(x, self.input_shape, "forward_pass")
        acts, pres = [h], [None]
        for layer in self.layers:
            pre, h = layer.forward(h)
            acts.append(h)
            pres.append(pre)
        return ActivationTape(acts, pres)

    def predict(self, x):
        return self.forward(x).output

    def forward_params(self):
        """Flat list of ``(layer_index, name, array)`` for the forward weights."""
        return [(i, k, v) for i, layer in enumerate(self.layers) for k, v in layer.params().items()]

    def inverse_params(self):
        return [(i, k, v) for i, inv in enumerate(self.inverses) if inv is not None for k, v in inv.params().items()]

    def parameter_count(self, inverses=False):
        blocks = self.inverse_params() if inverses else self.forward_params()
        return sum(v.size for _, _, v in blocks)

    def state_dict(self):
        state = {}
        for i, name, arr in self.forward_params():
            state[f"layer{i}.{name}"] = arr
        for i, name, arr in self.inverse_params():
            state[f"inverse{i}.{name}"] = arr
        if self.feedback is not None:
            for i, B in enumerate(self.feedback["B"]):
                if B is not None:
                    state[f"feedback{i}.B"] = B
        return state

    def load_state_dict(self, state):
        own = self.state_dict()
        missing = set(own) - set(state)
        if missing:
            raise DimensionError(f"checkpoint lacks blocks {sorted(missing)}")
        for key, arr in own.items():
            src = np.asarray(state[key], dtype=DTYPE)
            if src.shape != arr.shape:
                raise DimensionError(f"{key}: checkpoint shape {src.shape} != {arr.shape}")
            arr[...] = src


def forward_pass(net, x):
    return net.forward(x)


# ----------------------------------------------------------------------------
# Architecture presets

INPUT_SHAPES = {"mnist": (28, 28, 1), "cifar10": (32, 32, 3), "imagenet": (224, 224, 3)}

PRESETS = {
    "mnist_fc": {
        "input_shape": INPUT_SHAPES["mnist"],
        "layers": [{"type": "dense", "units": 256}] * 5 + [{"type": "dense", "units": 10, "activation": "softmax"}],
    },
    "mnist_lc": {
        "input_shape": INPUT_SHAPES["mnist"],
        "layers": [
            {"type": "lc", "kernel": 3, "channels": 32, "stride": 2},
            {"type": "lc", "kernel": 3, "channels": 64, "stride": 2},
            {"type": "dense", "units": 1024},
            {"type": "dense", "units": 10, "activation": "softmax"},
        ],
    },
    "cifar_fc": {
        "input_shape": INPUT_SHAPES["cifar10"],
        "layers": [{"type": "dense", "units": 1024}] * 3 + [{"type": "dense", "units": 10, "activation": "softmax"}],
    },
    "cifar_lc": {
        "input_shape": INPUT_SHAPES["cifar10"],
        "layers": [
            {"type": "lc", "kernel": 5, "channels": 64, "stride": 2},
            {"type": "lc", "kernel": 5, "channels": 128, "stride": 2},
            {"type": "lc", "kernel": 3, "channels": 256, "stride": 1},
            {"type": "dense", "units": 1024},
            {"type": "dense", "units": 10, "activation": "softmax"},
        ],
    },
    "imagenet_lc": {
        "input_shape": INPUT_SHAPES["imagenet"],
        "layers": [
            {"type": "lc", "kernel": 9, "channels": 48, "stride": 4},
            {"type": "lc", "kernel": 3, "channels": 48, "stride": 2},
            {"type": "lc", "kernel": 5, "channels": 96, "stride": 1},
            {"type": "lc", "kernel": 3, "channels": 96, "stride": 2},
            {"type": "lc", "kernel": 3, "channels": 192, "stride": 1},
            {"type": "lc", "kernel": 3, "channels": 192, "stride": 2},
            {"type": "lc", "kernel": 3, "channels": 384, "stride": 1},
            {"type": "dense", "units": 1000, "activation": "softmax"},
        ],
    },
    "autoencoder_mnist": {
        "input_shape": INPUT_SHAPES["mnist"],
        "layers": [
            {"type": "dense", "units": 512},
            {"type": "dense", "units": 64},
            {"type": "dense", "units": 512},
            {"type": "dense", "units": 784, "activation": "identity"},
        ],
    },
}


@dataclass
class LayerPlan:
    type: str
    in_shape: tuple
    out_shape: tuple
    activation: str
    kernel: tuple = None
    stride: int = None
    channels: int = None
    tied: bool = False
    n_params: int = 0


def resolve_architecture(arch):
    """Accept a preset name or an explicit ``{"input_shape", "layers"}`` mapping."""
    if isinstance(arch, str):
        if arch not in PRESETS:
            raise ConfigError(f"unknown architecture preset {arch!r}; choose from {sorted(PRESETS)}")
        return PRESETS[arch]
    if not isinstance(arch, dict) or "layers" not in arch or "input_shape" not in arch:
        raise ConfigError("explicit architecture must be a mapping with 'input_shape' and 'layers'")
    return arch


def plan_network(arch, aux_size=0):
    """Shape-level description of an architecture without allocating weights."""
    arch = resolve_architecture(arch)
    shape = tuple(arch["input_shape"])
    specs = arch["layers"]
    if not specs:
        raise ConfigError("architecture has no layers")
    plans = []
    for idx, spec in enumerate(specs):
        last = idx == len(specs) - 1
        kind = spec.get("type", "dense")
        act = spec.get("activation", "tanh")
        if not last and act not in HIDDEN_ACTIVATIONS:
            raise ConfigError(f"layer {idx}: hidden layers must use tanh or identity, got {act!r}")
        if kind == "dense":
            units = int(spec["units"])
            if last and act == "softmax":
                units += aux_size
            n_in = int(np.prod(shape))
            plans.append(LayerPlan("dense", shape, (units,), act, n_params=units * n_in + units))
            shape = (units,)
        elif kind == "lc":
            if len(shape) != 3:
                raise ConfigError(f"layer {idx}: locally-connected layer needs an image-shaped input, got {shape}")
            if last:
                raise ConfigError("the output layer must be dense")
            k = spec["kernel"]
            k = (k, k) if isinstance(k, int) else tuple(k)
            tied = bool(spec.get("tied", False))
            geom = _LCGeometry(shape, k, int(spec.get("stride", 1)), int(spec["channels"]))
            w = int(np.prod(geom.weight_shape(tied)))
            plans.append(
                LayerPlan("lc", shape, geom.out_shape, act, k, geom.stride, geom.out_channels, tied, w + w // geom.patch_size)
            )
            shape = geom.out_shape
        else:
            raise ConfigError(f"layer {idx}: unknown layer type {kind!r}")
    if aux_size and plans[-1].activation != "softmax":
        raise ConfigError("auxiliary outputs need a softmax classifier output layer")
    return plans


def _make_layer(plan, rng):
    if plan.type == "dense":
        n_in = int(np.prod(plan.in_shape))
        n_out = plan.out_shape[0]
        W = glorot_uniform(rng, n_in, n_out, (n_out, n_in))
        return DenseLayer(W, np.zeros(n_out), plan.activation, in_shape=plan.in_shape)
    geom = _LCGeometry(plan.in_shape, plan.kernel, plan.stride, plan.channels)
    fan_in = geom.patch_size
    fan_out = plan.kernel[0] * plan.kernel[1] * plan.channels
    W = glorot_uniform(rng, fan_in, fan_out, geom.weight_shape(plan.tied))
    return LocallyConnectedLayer(plan.in_shape, plan.kernel, plan.stride, plan.channels, W=W, tied=plan.tied, activation=plan.activation)


def _make_inverse(layer, lower_activation, rng):
    """Inverse for ``layer``; its activation matches the activity it reconstructs."""
    if layer.kind == "dense":
        n_in, n_out = layer.n_in, layer.n_out
        V = glorot_uniform(rng, n_out, n_in, (n_in, n_out))
        return InverseDense(V, np.zeros(n_in), lower_activation, out_shape=layer.in_shape)
    geom = layer.geom
    fan = geom.patch_size
    V = glorot_uniform(rng, geom.kernel[0] * geom.kernel[1] * geom.out_channels, fan, geom.weight_shape(layer.tied))
    return InverseLC(geom, V, np.zeros(geom.in_shape), lower_activation, tied=layer.tied)


def make_feedback(layers, kind, rng, n_error=None):
    """Fixed random feedback weights.

    ``fa``: ``B[i]`` replaces ``W[i]`` when sending deltas from layer ``i``
    down to layer ``i - 1``; dense ``B[i]`` has the shape of ``W[i].T``, LC
    ``B[i]`` has the LC weight shape (transposed sparsity via the adjoint).
    ``dfa``: ``B[i]`` maps the output error straight to hidden layer ``i``,
    shape ``(width_i, n_error)``.
    """
    L = len(layers)
    B = [None] * L
    if kind == "fa":
        for i in range(1, L):
            layer = layers[i]
            if layer.kind == "dense":
                B[i] = glorot_uniform(rng.child(i), layer.n_out, layer.n_in, (layer.n_in, layer.n_out))
            else:
                g = layer.geom
                B[i] = glorot_uniform(rng.child(i), g.patch_size, g.kernel[0] * g.kernel[1] * g.out_channels, g.weight_shape(layer.tied))
    elif kind == "dfa":
        n_error = layers[-1].n_out if n_error is None else n_error
        for i in range(L - 1):
            width = layers[i].n_out
            B[i] = glorot_uniform(rng.child(i), n_error, width, (width, n_error))
    else:
        raise ConfigError(f"unknown feedback kind {kind!r}")
    return {"kind": kind, "B": B}


def build_network(arch, rng, inverses=True, feedback=None, aux_size=0):
    """Allocate a network for a preset name or explicit architecture.

    Weights are Glorot-uniform, biases zero. ``inverses=True`` adds an
    inverse for every layer but the first; ``feedback`` may be ``"fa"`` or
    ``"dfa"``; ``aux_size`` appends that many frozen random-feature units to
    the softmax output layer.
    """
    spec = resolve_architecture(arch)
    plans = plan_network(spec, aux_size=aux_size)
    layers = []
    for i, plan in enumerate(plans):
        layer = _make_layer(plan, rng.child(i))
        if i == len(plans) - 1:
            layer.aux_size = aux_size
        layers.append(layer)
    invs = [None] * len(layers)
    if inverses:
        for i in range(1, len(layers)):
            invs[i] = _make_inverse(layers[i], layers[i - 1].activation, rng.child(1000 + i))
    fb = make_feedback(layers, feedback, rng.child(2000)) if feedback else None
    return Network(layers, invs, fb, aux_size=aux_size, input_shape=tuple(spec["input_shape"]))


def count_parameters(arch, aux_size=0):
    return sum(p.n_params for p in plan_network(arch, aux_size))


def describe(net):
    lines = []
    for i, layer in enumerate(net.layers):
        extra = f" kernel={layer.kernel} stride={layer.stride}" if layer.kind == "lc" else ""
        lines.append(f"{i + 1}: {layer.kind} {layer.in_shape} -> {layer.out_shape} {layer.activation}{extra}")
    return "\n".join(lines)
