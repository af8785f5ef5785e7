"""Dense float64 arithmetic and a portable seeded random stream.

Tensors are plain ``numpy.ndarray`` objects of dtype float64. Batches are
stored row-wise: the leading axis indexes samples.
"""
import math

import numpy as np

from .errors import DimensionError, ParameterError

DTYPE = np.float64

_TWO_PI = 2.0 * math.pi
_INV_2_53 = 1.0 / 9007199254740992.0


class SeededRng:
    """Random stream driven by a PCG64 bit generator.

    Only the raw 64-bit output of PCG64 is consumed; conversion to doubles
    (top 53 bits) and to Gaussians (Box-Muller) is done here, so draws do
    not depend on numpy's distribution code and stay stable across numpy
    releases. Child streams are derived from ``(seed, key path)`` alone, so
    ``rng.child(i)`` is the same no matter what the parent has drawn.
    """

    def __init__(self, seed, _path=()):
        seed = int(seed)
        if seed < 0 or seed >= 2**64:
            raise ParameterError(f"seed must fit in 64 unsigned bits, got {seed}")
        self.seed = seed
        self.path = tuple(int(k) for k in _path)
        seq = np.random.SeedSequence(entropy=seed, spawn_key=self.path)
        self._bitgen = np.random.PCG64(seq)

    def __repr__(self):
        return f"SeededRng(seed={self.seed}, path={self.path})"

    def child(self, key):
        return SeededRng(self.seed, self.path + (int(key),))

    def raw(self, n):
        return self._bitgen.random_raw(int(n))

    def uniform(self, shape):
        """Doubles in [0, 1) built from the top 53 bits of each raw draw."""
        shape = _as_shape(shape)
        n = int(np.prod(shape, dtype=np.int64))
        bits = self.raw(n) >> np.uint64(11)
        return (bits.astype(DTYPE) * _INV_2_53).reshape(shape)

    def standard_normal(self, shape):
        shape = _as_shape(shape)
        n = int(np.prod(shape, dtype=np.int64))
        pairs = (n + 1) // 2
        u = self.uniform((pairs, 2))
        radius = np.sqrt(-2.0 * np.log1p(-u[:, 0]))  # 1 - u lies in (0, 1]
        angle = _TWO_PI * u[:, 1]
        out = np.empty((pairs, 2), dtype=DTYPE)
        out[:, 0] = radius * np.cos(angle)
        out[:, 1] = radius * np.sin(angle)
        return out.reshape(-1)[:n].reshape(shape)

    def integers(self, high, shape=()):
        """Uniform integers in [0, high)."""
        if high < 1:
            raise ParameterError(f"high must be >= 1, got {high}")
        u = self.uniform(shape)
        return np.minimum(np.floor(u * high), high - 1).astype(np.int64)

    def permutation(self, n):
        keys = self.uniform((n,))
        return np.argsort(keys, kind="stable")


def _as_shape(shape):
    if isinstance(shape, (int, np.integer)):
        return (int(shape),)
    return tuple(int(s) for s in shape)


def matmul(a, b):
    """Matrix product of two 2-D arrays.

    Delegates to BLAS; for fixed shapes and thread count the blocking (and so
    the summation order) is fixed, which keeps results reproducible run to run.
    """
    a = np.asarray(a, dtype=DTYPE)
    b = np.asarray(b, dtype=DTYPE)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply shapes {a.shape} and {b.shape}")
    return a @ b


def tanh_map(x):
    return np.tanh(x)


def tanh_deriv(pre_activation):
    t = np.tanh(pre_activation)
    return 1.0 - t * t


def softmax(logits):
    """Softmax over the last axis, stabilised by subtracting the row max."""
    logits = np.asarray(logits, dtype=DTYPE)
    if logits.shape[-1] < 1:
        raise DimensionError("softmax needs at least one logit")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def sample_gaussian(rng, shape, sigma):
    if sigma < 0:
        raise ParameterError(f"sigma must be non-negative, got {sigma}")
    if sigma == 0:
        return np.zeros(_as_shape(shape), dtype=DTYPE)
    return sigma * rng.standard_normal(shape)


def glorot_bound(fan_in, fan_out):
    if fan_in < 1 or fan_out < 1:
        raise ParameterError(f"fan_in and fan_out must be >= 1, got {fan_in}, {fan_out}")
    return math.sqrt(6.0 / (fan_in + fan_out))


def glorot_uniform(rng, fan_in, fan_out, shape):
    bound = glorot_bound(fan_in, fan_out)
    return bound * (2.0 * rng.uniform(shape) - 1.0)
