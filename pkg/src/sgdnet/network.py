"""Forward pass, hinge loss and its subgradient for the fixed-output two-layer net.

Subgradient conventions at a zero pre-activation: Leaky ReLU takes slope 1,
ReLU takes slope 0. A step is active iff ``y * N(x) < 1`` (strict).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ActivationKind, Example, LabeledDataset, NetworkParams


@dataclass(frozen=True)
class SubgradientReport:
    grad: np.ndarray
    active: bool
    slopes_p: np.ndarray
    slopes_q: np.ndarray


def activation(z, kind: ActivationKind):
    z = np.asarray(z, dtype=np.float64)
    if kind.is_relu:
        out = np.maximum(0.0, z)
    else:
        out = np.maximum(kind.alpha * z, z)
    return out if out.ndim else float(out)


def slopes(z, kind: ActivationKind) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if kind.is_relu:
        return np.where(z > 0, 1.0, 0.0)
    return np.where(z >= 0, 1.0, kind.alpha)


def output_signs(k: int) -> np.ndarray:
    return np.concatenate([np.ones(k), -np.ones(k)])


def _check_dim(params: NetworkParams, d: int):
    if d != params.d:
        raise ValueError(f"input dimension {d} does not match network dimension {params.d}")


def forward(params: NetworkParams, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("forward expects a single vector; use forward_batch for matrices")
    _check_dim(params, x.shape[0])
    h = activation(params.W @ x, params.activation)
    return params.v * (h[: params.k].sum() - h[params.k:].sum())


def forward_batch(params: NetworkParams, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    _check_dim(params, X.shape[1])
    h = activation(X @ params.W.T, params.activation)
    return params.v * (h[:, : params.k].sum(axis=1) - h[:, params.k:].sum(axis=1))


def margins(params: NetworkParams, dataset: LabeledDataset) -> np.ndarray:
    return dataset.y * forward_batch(params, dataset.X)


def _nonempty(dataset: LabeledDataset):
    if dataset.n == 0:
        raise ValueError("dataset is empty")


def hinge_loss(params: NetworkParams, dataset: LabeledDataset) -> float:
    _nonempty(dataset)
    return float(np.maximum(1.0 - margins(params, dataset), 0.0).mean())


def predict(z):
    """Sign with ties going to +1."""
    return np.where(np.asarray(z) >= 0, 1, -1)


def zero_one_error(params: NetworkParams, dataset: LabeledDataset) -> float:
    _nonempty(dataset)
    return float(np.mean(predict(forward_batch(params, dataset.X)) != dataset.y))


def subgradient(params: NetworkParams, example: Example) -> SubgradientReport:
    x = example.x
    _check_dim(params, x.shape[0])
    k = params.k
    z = params.W @ x
    s = slopes(z, params.activation)
    h = activation(z, params.activation)
    out = params.v * (h[:k].sum() - h[k:].sum())
    active = bool(example.y * out < 1.0)
    if not active:
        grad = np.zeros_like(params.W)
    else:
        # d/dw_i of -y*N is -v*p_i*y*x; d/du_i is +v*q_i*y*x
        coef = -params.v * example.y * output_signs(k) * s
        grad = np.outer(coef, x)
    return SubgradientReport(grad=grad, active=active, slopes_p=s[:k], slopes_q=s[k:])


def full_batch_subgradient(params: NetworkParams, dataset: LabeledDataset) -> np.ndarray:
    """Mean of the per-example subgradients (same conventions as ``subgradient``)."""
    _nonempty(dataset)
    k = params.k
    Z = dataset.X @ params.W.T
    h = activation(Z, params.activation)
    out = params.v * (h[:, :k].sum(axis=1) - h[:, k:].sum(axis=1))
    active = dataset.y * out < 1.0
    S = slopes(Z, params.activation) * output_signs(k)
    coef = -params.v * (dataset.y * active)[:, None] * S
    return coef.T @ dataset.X / dataset.n


def critical_point_report(params: NetworkParams, dataset: LabeledDataset, tol: float):
    g = full_batch_subgradient(params, dataset)
    is_critical = bool(np.linalg.norm(g) <= tol)
    is_global = bool(margins(params, dataset).min() >= 1.0 - tol)
    return is_critical, is_global


def nonconvexity_witness(x, alpha: float):
    """Evaluate ``f(w, u) = s(<w,x>) - s(<u,x>)`` at (x, x), (x, -x) and their midpoint.

    The midpoint value exceeds the average of the endpoints, so the map is not
    convex in ``(w, u)``.
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.linalg.norm(x) > 0:
        raise ValueError("x must be nonzero")
    kind = ActivationKind.leaky_relu(alpha)

    def f(w, u):
        return activation(w @ x, kind) - activation(u @ x, kind)

    w1 = w2 = u1 = x
    u2 = -x
    return f(w1, u1), f(w2, u2), f((w1 + w2) / 2, (u1 + u2) / 2)
