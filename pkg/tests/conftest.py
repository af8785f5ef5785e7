import os
from pathlib import Path

import numpy as np
import pytest

from targetprop.data import default_data_dir
from targetprop.layers import build_network
from targetprop.tensor import SeededRng

ACCEPTANCE_LINES = []


def data_root():
    return Path(os.environ.get("TARGETPROP_DATA", "/root/data" if Path("/root/data").exists() else default_data_dir()))


def mnist_dir():
    d = data_root() / "mnist"
    return d if any(d.glob("train*")) else None


def cifar_dir():
    d = data_root() / "cifar10"
    return d if (d / "data_batch_1.bin").exists() else None


@pytest.fixture(scope="session")
def mnist_path():
    d = mnist_dir()
    if d is None:
        pytest.skip(f"MNIST files not found under {data_root()}/mnist")
    return d


@pytest.fixture(scope="session")
def mnist(mnist_path):
    from targetprop.data import load_mnist_dir

    return load_mnist_dir(mnist_path, "train"), load_mnist_dir(mnist_path, "test")


def dense_arch(sizes, out="softmax", hidden="tanh"):
    layers = [{"type": "dense", "units": n, "activation": hidden} for n in sizes[1:-1]]
    layers.append({"type": "dense", "units": sizes[-1], "activation": out})
    return {"input_shape": (sizes[0],), "layers": layers}


def tiny_net(seed=0, sizes=(4, 6, 3), **kw):
    return build_network(dense_arch(sizes), SeededRng(seed), **kw)


def random_batch(seed, n, d):
    return SeededRng(seed).standard_normal((n, d))


def one_hot_rows(seed, n, k):
    labels = SeededRng(seed).integers(k, (n,))
    return np.eye(k)[labels]


def brute_force_lc(x, W, b, stride, kernel):
    """Direct loops over output positions; W is full [oy, ox, co, kh, kw, ci]."""
    n, H, Wd, C = x.shape
    kh, kw = kernel
    oy, ox, co = W.shape[:3]
    ty = max((oy - 1) * stride + kh - H, 0)
    tx = max((ox - 1) * stride + kw - Wd, 0)
    xp = np.zeros((n, H + ty, Wd + tx, C))
    xp[:, ty // 2 : ty // 2 + H, tx // 2 : tx // 2 + Wd] = x
    out = np.zeros((n, oy, ox, co))
    for s in range(n):
        for i in range(oy):
            for j in range(ox):
                patch = xp[s, i * stride : i * stride + kh, j * stride : j * stride + kw, :]
                for c in range(co):
                    out[s, i, j, c] = np.sum(patch * W[i, j, c]) + b[i, j, c]
    return out


class AuditedLayer:
    """Proxy that records every attribute read that exposes forward weights."""

    WEIGHT_ATTRS = {"W", "b", "params", "full_weights", "transport", "transposed_apply", "forward", "param_grads"}

    def __init__(self, layer, log, index):
        object.__setattr__(self, "_layer", layer)
        object.__setattr__(self, "_log", log)
        object.__setattr__(self, "_index", index)

    def __getattr__(self, name):
        if name in self.WEIGHT_ATTRS:
            self._log.append((self._index, name))
        return getattr(self._layer, name)


def audited(net):
    log = []
    net.layers = [AuditedLayer(layer, log, i) for i, layer in enumerate(net.layers)]
    return log


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
