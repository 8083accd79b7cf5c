"""Domain types and the RNG contract shared by the rest of the package.

All containers are immutable once built: arrays are copied on construction and
flagged read-only so that params and datasets can be shared between runs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

NORM_TOL = 1e-12
MARGIN_TOL = 1e-9

STATUSES = ("global_min", "nonglobal_stall", "epoch_limit")
ORDERS = ("uniform_with_replacement", "cyclic")


def _frozen(a, dtype=np.float64) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


def seeded_rng(seed: int) -> np.random.Generator:
    """Deterministic stream for one run.

    PCG64 produces the same sequence on every platform for a given seed, which
    is what makes RunRecords reproducible from ``(base_seed, run_id)``.
    """
    seed = int(seed)
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def random_signs(rng: np.random.Generator, size) -> np.ndarray:
    return np.where(rng.random(size) < 0.5, -1.0, 1.0)


@dataclass(frozen=True)
class ActivationKind:
    """Leaky ReLU ``max(alpha*z, z)`` or ReLU ``max(0, z)``."""

    name: str
    alpha: float = 0.0

    def __post_init__(self):
        if self.name == "leaky_relu":
            if not 0.0 < self.alpha < 1.0:
                raise ValueError(f"LeakyReLU needs 0 < alpha < 1, got {self.alpha}")
        elif self.name == "relu":
            object.__setattr__(self, "alpha", 0.0)
        else:
            raise ValueError(f"unknown activation {self.name!r}")

    @classmethod
    def leaky_relu(cls, alpha: float) -> "ActivationKind":
        return cls("leaky_relu", float(alpha))

    @classmethod
    def relu(cls) -> "ActivationKind":
        return cls("relu")

    @property
    def is_relu(self) -> bool:
        return self.name == "relu"

    def __str__(self):
        return "relu" if self.is_relu else f"leaky_relu({self.alpha:g})"


@dataclass(frozen=True)
class Example:
    x: np.ndarray
    y: int

    def __post_init__(self):
        object.__setattr__(self, "x", _frozen(self.x))
        if self.x.ndim != 1:
            raise ValueError("x must be a vector")
        if self.y not in (-1, 1):
            raise ValueError(f"label must be -1 or +1, got {self.y}")
        if np.linalg.norm(self.x) > 1.0 + NORM_TOL:
            raise ValueError(f"example norm {np.linalg.norm(self.x)} exceeds 1")


class LabeledDataset:
    """Ordered examples stored as an ``(n, d)`` matrix plus a label vector.

    Iterating yields :class:`Example` objects in insertion order; the training
    loop works on ``X`` and ``y`` directly.
    """

    def __init__(self, X, y, separator=None, metadata: Optional[dict] = None):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        y = np.asarray(y)
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"{X.shape[0]} inputs but {y.shape[0]} labels")
        if not np.all((y == 1) | (y == -1)):
            raise ValueError("labels must be -1 or +1")
        norms = np.linalg.norm(X, axis=1)
        if norms.size and norms.max() > 1.0 + NORM_TOL:
            raise ValueError(f"max example norm {norms.max()} exceeds 1")
        self.X = _frozen(X)
        self.y = _frozen(y, dtype=np.int64)
        self.separator = None
        if separator is not None:
            w = _frozen(separator)
            if w.shape != (X.shape[1],):
                raise ValueError(f"separator has shape {w.shape}, expected ({X.shape[1]},)")
            margins = self.y * (self.X @ w)
            if margins.size and margins.min() < 1.0 - MARGIN_TOL:
                raise ValueError(f"separator margin {margins.min()} below 1")
            self.separator = w
        self.metadata = dict(metadata or {})

    @classmethod
    def from_examples(cls, examples: Sequence[Example], separator=None, metadata=None):
        if not examples:
            raise ValueError("need at least one example")
        dims = {e.x.shape[0] for e in examples}
        if len(dims) != 1:
            raise ValueError(f"examples have mixed dimensions {sorted(dims)}")
        X = np.stack([e.x for e in examples])
        y = np.array([e.y for e in examples])
        return cls(X, y, separator=separator, metadata=metadata)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def __len__(self):
        return self.n

    def __getitem__(self, i) -> Example:
        return Example(self.X[i], int(self.y[i]))

    def __iter__(self) -> Iterator[Example]:
        for i in range(self.n):
            yield self[i]

    def __eq__(self, other):
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        same_sep = (self.separator is None) == (other.separator is None) and (
            self.separator is None or np.array_equal(self.separator, other.separator)
        )
        return np.array_equal(self.X, other.X) and np.array_equal(self.y, other.y) and same_sep

    def __repr__(self):
        return f"LabeledDataset(n={self.n}, d={self.d}, separator={self.separator is not None})"


@dataclass(frozen=True, eq=False)
class NetworkParams:
    """First-layer weights ``W`` (2k x d) and the fixed second-layer scale ``v``.

    Rows ``0..k-1`` are the positive neurons (outgoing weight +v), rows
    ``k..2k-1`` the negative ones (outgoing weight -v).
    """

    W: np.ndarray
    v: float
    activation: ActivationKind

    def __post_init__(self):
        W = _frozen(self.W)
        if W.ndim != 2 or W.shape[0] == 0 or W.shape[0] % 2:
            raise ValueError(f"W must have 2k rows, got shape {W.shape}")
        if not self.v > 0:
            raise ValueError(f"v must be positive, got {self.v}")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "v", float(self.v))

    @property
    def k(self) -> int:
        return self.W.shape[0] // 2

    @property
    def d(self) -> int:
        return self.W.shape[1]

    @property
    def w_rows(self) -> np.ndarray:
        return self.W[: self.k]

    @property
    def u_rows(self) -> np.ndarray:
        return self.W[self.k:]

    def with_weights(self, W) -> "NetworkParams":
        return NetworkParams(W, self.v, self.activation)

    def __eq__(self, other):
        if not isinstance(other, NetworkParams):
            return NotImplemented
        return (self.v == other.v and self.activation == other.activation
                and np.array_equal(self.W, other.W))


@dataclass(frozen=True)
class TrainConfig:
    eta: float
    max_epochs: int = 1000
    order: str = "uniform_with_replacement"
    seed: int = 0
    margin_tol: float = MARGIN_TOL

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"learning rate must be positive, got {self.eta}")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.order not in ORDERS:
            raise ValueError(f"order must be one of {ORDERS}, got {self.order!r}")
        if self.margin_tol < 0:
            raise ValueError("margin_tol must be >= 0")


@dataclass(frozen=True)
class TrajectoryPoint:
    t: int
    F: float
    G: float
    cosine: float


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    hinge_loss: float
    train_error: float
    test_error: Optional[float] = None


@dataclass
class RunRecord:
    nonzero_updates: int
    status: str
    epoch_stats: list = field(default_factory=list)
    trajectory: Optional[list] = None
    steps: int = 0
    params: Optional[NetworkParams] = None

    @property
    def epochs(self) -> int:
        return self.epoch_stats[-1].epoch if self.epoch_stats else 0

    @property
    def final(self) -> Optional[EpochStats]:
        return self.epoch_stats[-1] if self.epoch_stats else None

    def __eq__(self, other):
        if not isinstance(other, RunRecord):
            return NotImplemented
        return (self.nonzero_updates == other.nonzero_updates and self.status == other.status
                and self.steps == other.steps and self.epoch_stats == other.epoch_stats
                and self.trajectory == other.trajectory and self.params == other.params)
