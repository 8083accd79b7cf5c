"""Dataset sources: synthetic separable samples, a certified separator for real
data, and MNIST in IDX format.
"""
from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import LabeledDataset, seeded_rng

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
MIN_ACCEPT_RATE = 1e-4
MIN_DRAWS_BEFORE_GIVING_UP = 100_000


class IdxError(ValueError):
    pass


class BadMagicError(IdxError):
    pass


class TruncatedError(IdxError):
    pass


class CountMismatchError(IdxError):
    pass


class LabelRangeError(IdxError):
    pass


class NotSeparableError(RuntimeError):
    pass


@dataclass(frozen=True)
class SeparableSpec:
    d: int
    n: int
    norm_wstar_target: float
    seed: int

    def __post_init__(self):
        if self.d < 1 or self.n < 1:
            raise ValueError(f"need d >= 1 and n >= 1, got d={self.d}, n={self.n}")
        if self.norm_wstar_target < 1:
            raise ValueError("a margin-1 separator inside the unit ball has norm >= 1")


def _uniform_ball(rng, m, d):
    g = rng.standard_normal((m, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * (rng.random(m) ** (1.0 / d))[:, None]


def generate_separable(spec: SeparableSpec) -> LabeledDataset:
    """Rejection-sample points uniform in the unit ball at margin ``1/|w*|`` from a random hyperplane."""
    rng = seeded_rng(spec.seed)
    direction = rng.standard_normal(spec.d)
    direction /= np.linalg.norm(direction)
    wstar = spec.norm_wstar_target * direction

    kept = []
    have = tried = 0
    batch = max(1024, 4 * spec.n)
    while have < spec.n:
        X = _uniform_ball(rng, batch, spec.d)
        s = X @ wstar
        ok = np.abs(s) >= 1.0
        tried += batch
        if ok.any():
            kept.append(X[ok])
            have += int(ok.sum())
        if tried >= MIN_DRAWS_BEFORE_GIVING_UP and have / tried < MIN_ACCEPT_RATE:
            raise ValueError(
                f"acceptance rate {have / tried:.2e} below {MIN_ACCEPT_RATE:g}: margin "
                f"1/{spec.norm_wstar_target} is infeasible in d={spec.d}")
    X = np.concatenate(kept)[: spec.n]
    y = np.where(X @ wstar > 0, 1, -1)
    return LabeledDataset(X, y, separator=wstar,
                          metadata={"source": "synthetic", **spec.__dict__})


def estimate_separator(dataset: LabeledDataset, max_passes: int = 1000) -> np.ndarray:
    """Linear separator with every margin >= 1, found by mistake-driven updates.

    The norm of the result upper-bounds the minimal margin-1 separator norm,
    which is what the bound calculators need when the true one is unknown.
    """
    X, y = dataset.X, dataset.y
    w = np.zeros(dataset.d)
    for _ in range(max_passes):
        mistakes = 0
        for i in range(dataset.n):
            if y[i] * (w @ X[i]) <= 0:
                w += y[i] * X[i]
                mistakes += 1
        if mistakes == 0:
            break
    else:
        raise NotSeparableError(f"separability not certified after {max_passes} passes")
    w = w / (y * (X @ w)).min()
    # one ulp of slack can survive the division
    while (y * (X @ w)).min() < 1.0:
        w = w * (1.0 + 1e-15)
    return w


def _read(path) -> bytes:
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as fh:
            return fh.read()
    return path.read_bytes()


def parse_idx_images(buf: bytes) -> np.ndarray:
    if len(buf) < 16:
        raise TruncatedError(f"images header needs 16 bytes, got {len(buf)}")
    magic, count, rows, cols = struct.unpack(">IIII", buf[:16])
    if magic != IMAGES_MAGIC:
        raise BadMagicError(f"bad magic {magic:#010x} for images (expected {IMAGES_MAGIC:#010x})")
    size = count * rows * cols
    if len(buf) - 16 < size:
        raise TruncatedError(f"images payload truncated: {len(buf) - 16} of {size} bytes")
    return np.frombuffer(buf, dtype=np.uint8, count=size, offset=16).reshape(count, rows, cols)


def parse_idx_labels(buf: bytes) -> np.ndarray:
    if len(buf) < 8:
        raise TruncatedError(f"labels header needs 8 bytes, got {len(buf)}")
    magic, count = struct.unpack(">II", buf[:8])
    if magic != LABELS_MAGIC:
        raise BadMagicError(f"bad magic {magic:#010x} for labels (expected {LABELS_MAGIC:#010x})")
    if len(buf) - 8 < count:
        raise TruncatedError(f"labels payload truncated: {len(buf) - 8} of {count} bytes")
    labels = np.frombuffer(buf, dtype=np.uint8, count=count, offset=8)
    if labels.size and labels.max() > 9:
        raise LabelRangeError(f"label out of range: {int(labels.max())}")
    return labels


def load_idx(images_path, labels_path):
    """Parse an IDX image file and its label file; returns ``(images, labels)`` uint8 arrays."""
    images = parse_idx_images(_read(images_path))
    labels = parse_idx_labels(_read(labels_path))
    if images.shape[0] != labels.shape[0]:
        raise CountMismatchError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    return images, labels


def write_idx(images, labels, images_path, labels_path):
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    count, rows, cols = images.shape
    Path(images_path).write_bytes(struct.pack(">IIII", IMAGES_MAGIC, count, rows, cols) + images.tobytes())
    Path(labels_path).write_bytes(struct.pack(">II", LABELS_MAGIC, labels.shape[0]) + labels.tobytes())


def build_mnist_task(raw, digit_pos: int = 3, digit_neg: int = 5, n_train: int = 3000,
                     n_test: int = 1000, seed: int = 0):
    """Binary two-digit task with every input scaled into the unit ball.

    Pixels go to [0, 1], then all vectors are divided by the largest norm in the
    selected pool, which keeps relative margins intact.
    """
    images, labels = raw
    pool = np.flatnonzero((labels == digit_pos) | (labels == digit_neg))
    need = n_train + n_test
    if pool.size < need:
        raise ValueError(f"only {pool.size} images of digits {digit_pos}/{digit_neg}, need {need}")
    rng = seeded_rng(seed)
    chosen = rng.permutation(pool)[:need]
    X = images[chosen].reshape(need, -1).astype(np.float64) / 255.0
    X /= np.linalg.norm(X, axis=1).max()
    y = np.where(labels[chosen] == digit_pos, 1, -1)
    meta = {"source": "mnist", "digit_pos": digit_pos, "digit_neg": digit_neg,
            "positive_label": "+1 <- digit_pos", "seed": seed}
    return (LabeledDataset(X[:n_train], y[:n_train], metadata=meta),
            LabeledDataset(X[n_train:], y[n_train:], metadata=meta))
