"""MNIST / CIFAR-10 readers, augmentation, one-hot encoding and batching.

Readers take local paths only; nothing is downloaded. Pixels are scaled to
[0, 1] and images are stored as ``(N, H, W, C)`` float64.
"""
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractError, FormatError, ParameterError
from .tensor import DTYPE

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
CIFAR_RECORD_BYTES = 1 + 32 * 32 * 3

DATA_ENV = "TARGETPROP_DATA"

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
CIFAR_FILES = {
    "train": [f"data_batch_{i}.bin" for i in range(1, 6)],
    "test": ["test_batch.bin"],
}


@dataclass
class Dataset:
    images: np.ndarray
    labels: np.ndarray
    split: str = "train"
    num_classes: int = 10

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise ContractError(f"{len(self.images)} images but {len(self.labels)} labels")

    def __len__(self):
        return len(self.labels)

    @property
    def image_shape(self):
        return tuple(self.images.shape[1:])

    def subset(self, n):
        """First ``n`` items (the whole set if ``n`` is None or too large)."""
        if n is None or n >= len(self):
            return self
        return Dataset(self.images[:n], self.labels[:n], self.split, self.num_classes)

    def class_counts(self):
        return np.bincount(self.labels, minlength=self.num_classes)


def default_data_dir():
    return Path(os.environ.get(DATA_ENV, "data"))


def _read(path):
    with open(path, "rb") as fh:
        return fh.read()


def _idx_header(buf, path, magic, ndim):
    need = 4 + 4 * ndim
    if len(buf) < need:
        raise FormatError(f"{path}: truncated header ({len(buf)} bytes, need {need}) at offset 0")
    got = struct.unpack(">I", buf[:4])[0]
    if got != magic:
        raise FormatError(f"{path}: bad magic 0x{got:08x} (expected 0x{magic:08x}) at offset 0")
    dims = struct.unpack(f">{ndim}I", buf[4:need])
    expected = need + int(np.prod(dims))
    if len(buf) < expected:
        raise FormatError(f"{path}: truncated payload, file ends at offset {len(buf)}, expected {expected} bytes")
    if len(buf) > expected:
        raise FormatError(f"{path}: {len(buf) - expected} trailing bytes after offset {expected}")
    return dims, need


def read_idx_images(path):
    buf = _read(path)
    (n, rows, cols), off = _idx_header(buf, path, IDX_IMAGES_MAGIC, 3)
    return np.frombuffer(buf, dtype=np.uint8, offset=off).reshape(n, rows, cols)


def read_idx_labels(path):
    buf = _read(path)
    (n,), off = _idx_header(buf, path, IDX_LABELS_MAGIC, 1)
    return np.frombuffer(buf, dtype=np.uint8, offset=off)


def load_mnist(image_path, label_path, split="train"):
    images = read_idx_images(image_path)
    labels = read_idx_labels(label_path)
    if len(images) != len(labels):
        raise FormatError(f"{image_path} holds {len(images)} images but {label_path} holds {len(labels)} labels")
    if labels.size and labels.max() >= 10:
        raise FormatError(f"{label_path}: label {labels.max()} out of range")
    x = (images.astype(DTYPE) / 255.0)[..., None]
    return Dataset(x, labels.astype(np.int64), split, 10)


def _find(directory, name):
    # accept both the canonical "-idx3-ubyte" names and the ".idx3-ubyte" variant
    directory = Path(directory)
    for candidate in (name, name.replace("-idx", ".idx")):
        p = directory / candidate
        if p.exists():
            return p
    raise FileNotFoundError(f"{directory / name} not found")


def mnist_paths(directory, split):
    img, lab = MNIST_FILES[split]
    return _find(directory, img), _find(directory, lab)


def load_mnist_dir(directory, split):
    return load_mnist(*mnist_paths(directory, split), split=split)


def load_cifar10(batch_paths, split="train"):
    """Read CIFAR-10 binary batches: 1 label byte + R, G, B planes of 32x32."""
    chunks = []
    for path in batch_paths:
        buf = _read(path)
        if len(buf) % CIFAR_RECORD_BYTES:
            whole = len(buf) // CIFAR_RECORD_BYTES
            raise FormatError(
                f"{path}: size {len(buf)} is not a multiple of {CIFAR_RECORD_BYTES}; "
                f"partial record at offset {whole * CIFAR_RECORD_BYTES}"
            )
        chunks.append(np.frombuffer(buf, dtype=np.uint8).reshape(-1, CIFAR_RECORD_BYTES))
    if not chunks:
        raise FormatError("no CIFAR-10 batch files given")
    records = np.concatenate(chunks)
    labels = records[:, 0].astype(np.int64)
    if labels.size and labels.max() >= 10:
        bad = int(np.argmax(labels >= 10))
        raise FormatError(f"label {labels[bad]} out of range in record {bad} (offset {bad * CIFAR_RECORD_BYTES})")
    pixels = records[:, 1:].reshape(-1, 3, 32, 32).transpose(0, 2, 3, 1)
    return Dataset(pixels.astype(DTYPE) / 255.0, labels, split, 10)


def cifar10_paths(directory, split):
    directory = Path(directory)
    paths = [directory / name for name in CIFAR_FILES[split]]
    for p in paths:
        if not p.exists():
            raise FileNotFoundError(f"{p} not found")
    return paths


def load_cifar10_dir(directory, split):
    return load_cifar10(cifar10_paths(directory, split), split=split)


# ----------------------------------------------------------------------------
# Augmentation


@dataclass
class AugmentConfig:
    enabled: bool = False
    flip_prob: float = 0.5
    crop_pad: int = 4
    flip_axis: str = "vertical"

    def __post_init__(self):
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ParameterError(f"flip_prob must lie in [0, 1], got {self.flip_prob}")
        if self.crop_pad < 0:
            raise ParameterError(f"crop_pad must be >= 0, got {self.crop_pad}")
        if self.flip_axis not in ("vertical", "horizontal"):
            raise ParameterError(f"flip_axis must be 'vertical' or 'horizontal', got {self.flip_axis!r}")

    @property
    def axis(self):
        # vertical flips turn the image upside down (reverse rows)
        return 0 if self.flip_axis == "vertical" else 1


def flip(image, axis=0):
    return np.flip(image, axis=axis).copy()


def pad_and_crop(image, pad, dy, dx):
    H, W = image.shape[:2]
    padded = np.pad(image, ((pad, pad), (pad, pad), (0, 0)))
    return padded[dy : dy + H, dx : dx + W]


def augment(image, cfg, rng):
    """Random flip (with ``cfg.flip_prob``) and random crop of a zero-padded image."""
    flip_draw, dy, dx = rng.uniform(3)
    out = np.asarray(image, dtype=DTYPE)
    if flip_draw < cfg.flip_prob:
        out = flip(out, cfg.axis)
    if cfg.crop_pad:
        span = 2 * cfg.crop_pad + 1
        out = pad_and_crop(out, cfg.crop_pad, int(dy * span), int(dx * span))
    return out.copy()


def augment_batch(images, cfg, rng):
    return np.stack([augment(img, cfg, rng.child(i)) for i, img in enumerate(images)])


# ----------------------------------------------------------------------------
# Labels and batching


def one_hot(label, num_classes):
    labels = np.asarray(label)
    if np.any(labels < 0) or np.any(labels >= num_classes):
        raise ContractError(f"label out of range [0, {num_classes})")
    out = np.zeros(labels.shape + (num_classes,), dtype=DTYPE)
    np.put_along_axis(out, labels[..., None].astype(np.int64), 1.0, axis=-1)
    return out


def batches(data, batch_size, rng):
    """Seeded permutation of ``range(len(data))`` cut into batches; last one may be short."""
    if batch_size < 1:
        raise ParameterError("batch_size must be >= 1")
    n = data if isinstance(data, (int, np.integer)) else len(data)
    order = rng.permutation(n)
    return [order[i : i + batch_size] for i in range(0, n, batch_size)]
