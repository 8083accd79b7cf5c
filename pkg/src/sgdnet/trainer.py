"""Batch-size-1 SGD on the first layer, with non-zero update accounting.

Convergence is certified by a full deterministic sweep after every epoch:
``global_min`` means every training margin is at least ``1 - margin_tol``;
``nonglobal_stall`` means no training example has a nonzero subgradient
although some margin is still short of 1 (only reachable with ReLU).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import (ActivationKind, EpochStats, Example, LabeledDataset, NetworkParams,
                   RunRecord, TrainConfig, TrajectoryPoint, seeded_rng)
from .network import activation, output_signs, slopes, subgradient, zero_one_error


@dataclass(frozen=True)
class DefaultCorollary2:
    """Rows uniform in the ball of radius ``R = v = 1/sqrt(2k)``."""


@dataclass(frozen=True)
class BoundedRows:
    R: float
    v: float


@dataclass(frozen=True)
class SymmetricBox:
    """Entries i.i.d. uniform on ``[-C, C]``, ``v = 1``."""

    C: float


@dataclass(frozen=True)
class Explicit:
    W: np.ndarray
    v: float


def _uniform_ball_rows(rng, m: int, d: int, R: float) -> np.ndarray:
    g = rng.standard_normal((m, d))
    norms = np.linalg.norm(g, axis=1)
    norms[norms == 0] = 1.0
    radii = R * rng.random(m) ** (1.0 / d)
    W = g * (radii / norms)[:, None]
    # guard against rounding pushing a row a hair past R
    over = np.linalg.norm(W, axis=1) > R
    if over.any():
        W[over] *= (R / np.linalg.norm(W[over], axis=1))[:, None]
    return W


def initialize(scheme, k: int, d: int, activation: ActivationKind, rng) -> NetworkParams:
    if k < 1 or d < 1:
        raise ValueError(f"need k >= 1 and d >= 1, got k={k}, d={d}")
    if isinstance(scheme, DefaultCorollary2):
        R = 1.0 / math.sqrt(2 * k)
        return NetworkParams(_uniform_ball_rows(rng, 2 * k, d, R), R, activation)
    if isinstance(scheme, BoundedRows):
        if not (scheme.R > 0 and scheme.v > 0):
            raise ValueError("BoundedRows needs R > 0 and v > 0")
        return NetworkParams(_uniform_ball_rows(rng, 2 * k, d, scheme.R), scheme.v, activation)
    if isinstance(scheme, SymmetricBox):
        if scheme.C < 0:
            raise ValueError("SymmetricBox needs C >= 0")
        W = rng.uniform(-scheme.C, scheme.C, size=(2 * k, d)) if scheme.C > 0 else np.zeros((2 * k, d))
        return NetworkParams(W, 1.0, activation)
    if isinstance(scheme, Explicit):
        W = np.asarray(scheme.W, dtype=np.float64)
        if W.shape != (2 * k, d):
            raise ValueError(f"explicit W has shape {W.shape}, expected {(2 * k, d)}")
        return NetworkParams(W, scheme.v, activation)
    raise TypeError(f"unknown init scheme {scheme!r}")


def sgd_step(params: NetworkParams, example: Example, eta: float):
    rep = subgradient(params, example)
    if not rep.grad.any():
        return params, False
    return params.with_weights(params.W - eta * rep.grad), True


def trajectory_point(t: int, W: np.ndarray, wstar: np.ndarray) -> TrajectoryPoint:
    k = W.shape[0] // 2
    F = float((W[:k].sum(axis=0) - W[k:].sum(axis=0)) @ wstar)
    G = float(np.linalg.norm(W))
    denom = G * math.sqrt(2 * k) * float(np.linalg.norm(wstar))
    cosine = F / denom if denom > 0 else 0.0
    return TrajectoryPoint(t=t, F=F, G=G, cosine=cosine)


def trajectory_diagnostics(history, wstar) -> list:
    """Potential ``F`` (alignment with the stacked separator), norm ``G`` and their cosine.

    ``history`` is a sequence of NetworkParams (or raw weight matrices), one per
    recorded update; entry ``t`` becomes point ``t``.
    """
    wstar = np.asarray(wstar, dtype=np.float64)
    pts = []
    for t, p in enumerate(history):
        W = p.W if isinstance(p, NetworkParams) else np.asarray(p, dtype=np.float64)
        if W.shape[1] != wstar.shape[0]:
            raise ValueError("separator dimension does not match W")
        pts.append(trajectory_point(t, W, wstar))
    return pts


class _Sweep:
    """Vectorized full pass over a dataset at fixed weights."""

    def __init__(self, X, y, kind: ActivationKind):
        self.X, self.y, self.kind = X, y, kind
        self.x_nonzero = np.any(X != 0, axis=1)

    def __call__(self, W, v):
        k = W.shape[0] // 2
        Z = self.X @ W.T
        h = activation(Z, self.kind)
        out = v * (h[:, :k].sum(axis=1) - h[:, k:].sum(axis=1))
        m = self.y * out
        return Z, out, m

    def moving(self, Z, m) -> bool:
        """True iff some example has a nonzero subgradient."""
        active = (m < 1.0) & self.x_nonzero
        if not active.any():
            return False
        return bool(np.any(slopes(Z[active], self.kind) != 0))


def train(params: NetworkParams, dataset: LabeledDataset, config: TrainConfig,
          test: Optional[LabeledDataset] = None, record_trajectory: bool = False,
          on_step: Optional[Callable] = None) -> RunRecord:
    """Run SGD from ``params`` until a certified global minimum, a stall, or ``max_epochs``.

    One epoch is ``n`` draws. ``on_step(step, index, was_nonzero, W)`` is called
    after every draw with a read-only view of the current weights.
    """
    if dataset.n == 0:
        raise ValueError("dataset is empty")
    if dataset.d != params.d:
        raise ValueError(f"dataset dimension {dataset.d} != network dimension {params.d}")
    if record_trajectory and dataset.separator is None:
        raise ValueError("trajectory recording needs a dataset with a known separator")

    rng = seeded_rng(config.seed)
    X, y = dataset.X, dataset.y
    n, k, v = dataset.n, params.k, params.v
    kind = params.activation
    alpha = kind.alpha
    relu = kind.is_relu
    signs = output_signs(k)
    eta = config.eta
    W = np.array(params.W, copy=True)
    view = W.view()
    view.flags.writeable = False

    sweep = _Sweep(X, y, kind)
    test_sweep = _Sweep(test.X, test.y, kind) if test is not None else None
    tol = config.margin_tol
    wstar = dataset.separator
    trajectory = [trajectory_point(0, W, wstar)] if record_trajectory else None

    def stats(epoch):
        Z, out, m = sweep(W, v)
        te = None
        if test_sweep is not None:
            _, tout, _ = test_sweep(W, v)
            te = float(np.mean(np.where(tout >= 0, 1, -1) != test.y))
        es = EpochStats(epoch, float(np.maximum(1.0 - m, 0.0).mean()),
                        float(np.mean(np.where(out >= 0, 1, -1) != y)), te)
        return es, Z, m

    updates = 0
    steps = 0
    es, Z, m = stats(0)
    epoch_stats = [es]
    status = None
    if m.min() >= 1.0 - tol:
        status = "global_min"
    elif not sweep.moving(Z, m):
        status = "nonglobal_stall"

    epoch = 0
    while status is None and epoch < config.max_epochs:
        epoch += 1
        if config.order == "cyclic":
            order = range(n)
        else:
            order = rng.integers(0, n, size=n).tolist()
        for i in order:
            x = X[i]
            yi = y[i]
            z = W @ x
            if relu:
                h = np.maximum(z, 0.0)
                s = (z > 0).astype(np.float64)
            else:
                h = np.maximum(alpha * z, z)
                s = np.where(z >= 0, 1.0, alpha)
            nonzero = False
            if yi * v * (h[:k].sum() - h[k:].sum()) < 1.0:
                g = np.outer((-v * yi) * signs * s, x)
                if g.any():
                    W -= eta * g
                    nonzero = True
                    updates += 1
                    if trajectory is not None:
                        trajectory.append(trajectory_point(updates, W, wstar))
            steps += 1
            if on_step is not None:
                on_step(steps, i, nonzero, view)
        es, Z, m = stats(epoch)
        epoch_stats.append(es)
        if m.min() >= 1.0 - tol:
            status = "global_min"
        elif not sweep.moving(Z, m):
            status = "nonglobal_stall"

    return RunRecord(nonzero_updates=updates, status=status or "epoch_limit",
                     epoch_stats=epoch_stats, trajectory=trajectory, steps=steps,
                     params=params.with_weights(W))
