"""Explicit instances: the adversarial sequence for the update lower bound, a bad
ReLU local minimum, and the orthogonal-basis task with its dead coordinate set.
"""
from __future__ import annotations

import math

import numpy as np

from .core import ActivationKind, LabeledDataset, NetworkParams
from .network import forward_batch

MAX_DIRECTION_TRIES = 100


class ConstructionError(RuntimeError):
    pass


def adversarial_sequence(d: int) -> LabeledDataset:
    """``(e_1, +1), ..., (e_d, +1)`` with separator ``(1, ..., 1)``."""
    if d < 1:
        raise ValueError("d must be >= 1")
    return LabeledDataset(np.eye(d), np.ones(d, dtype=int), separator=np.ones(d))


def orthogonal_dataset(d: int) -> LabeledDataset:
    return adversarial_sequence(d)


def adversarial_init(k: int, d: int, R: float, v: float,
                     activation: ActivationKind) -> NetworkParams:
    """All positive rows at ``-(R/sqrt d) 1``, all negative rows at ``+(R/sqrt d) 1``.

    Identical rows within each half stay identical under SGD, which is what pins
    the update count on :func:`adversarial_sequence`.
    """
    if k < 1 or d < 1 or not (R > 0 and v > 0):
        raise ValueError("need k, d >= 1 and R, v > 0")
    c = R / math.sqrt(d)
    W = np.vstack([np.full((k, d), -c), np.full((k, d), c)])
    return NetworkParams(W, v, activation)


def relu_bad_local_min(dataset: LabeledDataset, k: int, rng):
    """Build ReLU weights at which a strict majority of examples see only dead units.

    Returns ``(params, safe_eps)``. Every weight perturbation with Frobenius norm
    below ``safe_eps`` leaves each example's activation pattern and its side of
    the margin unchanged, so the loss is locally constant (a local minimum with
    loss above 1/2 and zero subgradient).
    """
    wstar = dataset.separator
    if wstar is None:
        raise ValueError("dataset must carry its margin-1 separator")
    if k < 1:
        raise ValueError("k must be >= 1")
    X = dataset.X
    n, d = X.shape
    norm_wstar = float(np.linalg.norm(wstar))

    for _ in range(MAX_DIRECTION_TRIES):
        w_hat = rng.standard_normal(d)
        w_hat /= np.linalg.norm(w_hat)
        proj = X @ w_hat
        if np.any(proj == 0):
            continue
        neg = int(np.sum(proj < 0))
        if 2 * neg <= n:
            if 2 * (n - neg) <= n:
                continue  # exact tie: neither sign gives a strict majority
            w_hat, proj = -w_hat, -proj
        break
    else:
        raise ConstructionError(
            f"no direction with a strict majority of negative projections after "
            f"{MAX_DIRECTION_TRIES} tries")

    gap = np.abs(proj).min() / 2.0
    c = 2.0 * norm_wstar / gap
    w = c * w_hat + wstar
    u = c * w_hat - wstar
    W = np.vstack([np.tile(w, (k, 1)), np.tile(u, (k, 1))])
    params = NetworkParams(W, 1.0, ActivationKind.relu())

    Z = X @ W.T
    m = dataset.y * forward_batch(params, X)
    alive = proj > 0
    sign_slack = np.abs(Z).min()
    margin_slack = (m[alive] - 1.0).min() if alive.any() else math.inf
    safe_eps = min(sign_slack, margin_slack) / (4 * k)
    return params, float(safe_eps)


def compute_dead_set(params: NetworkParams) -> frozenset:
    """Coordinates ``j`` (0-based) with ``<w_i, e_j> <= 0`` for every positive row."""
    if not params.activation.is_relu:
        raise ValueError("dead sets are defined for ReLU networks")
    return dead_set_of(params.W, params.k)


def dead_set_of(W: np.ndarray, k: int) -> frozenset:
    return frozenset(np.flatnonzero(np.all(W[:k] <= 0, axis=0)).tolist())


def predict_relu_outcome(params: NetworkParams) -> str:
    """``'nonglobal'`` iff the dead set is nonempty, else ``'global'``."""
    return "nonglobal" if compute_dead_set(params) else "global"
