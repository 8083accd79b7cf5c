"""Closed-form bound calculators.

Every function returns a plain float; :func:`report` wraps a value together with
its inputs for serialization.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

FORMULA_IDS = ("Mk", "LowerBound", "Compression", "GeneralizationGlobalMin",
               "ReluKFail", "ReluKSucceed", "ReluIterBound")
# The published statement of the lower bound writes alpha*|w*| in B1 (and |w*|/alpha in B2)
# The lower-bound theorem statement writes alpha*|w*| in B1 (and |w*|/alpha in B2)
# where its derivation ends with alpha*|w*|^2 (and |w*|^2/alpha). We evaluate the
# derived form and flag it on every report.
LOWER_BOUND_NOTE = "derived-form B1/B2 (alpha*|w*|^2, |w*|^2/alpha); stated form uses |w*|"


@dataclass(frozen=True)
class BoundReport:
    formula_id: str
    value: float
    inputs: dict
    notes: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.formula_id not in FORMULA_IDS:
            raise ValueError(f"unknown formula id {self.formula_id!r}")
        if not self.value >= 0:
            raise ValueError(f"{self.formula_id} evaluated to negative value {self.value}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["notes"] = list(self.notes)
        return d


def _check_common(alpha, eta, k, v, R):
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not (v > 0 and R > 0):
        raise ValueError("v and R must be positive")


def theorem1_Mk(norm_wstar: float, alpha: float, eta: float, k: int, v: float, R: float) -> float:
    """Cap on the number of non-zero SGD updates for the Leaky ReLU network."""
    if norm_wstar < 1:
        raise ValueError(f"a margin-1 separator has norm >= 1, got {norm_wstar}")
    _check_common(alpha, eta, k, v, R)
    a, w = alpha, norm_wstar
    eva = eta * v * a
    return (w ** 2 / a ** 2
            + w ** 2 / (k * eta * v ** 2 * a ** 2)
            + math.sqrt(R * (8 * k ** 2 * eta ** 2 * v ** 2 + 8 * eta * k)) * w ** 1.5
            / (2 * k * eva ** 1.5)
            + 2 * R * w / eva)


def lower_bound_terms(norm_wstar, alpha, eta, k, v, R):
    _check_common(alpha, eta, k, v, R)
    w, a = norm_wstar, alpha
    B1 = R * w / (eta * v * a) + min(w ** 2 / (2 * eta * k * v ** 2) - a * w ** 2, 0.0)
    B2 = R * w / (eta * v) + min(w ** 2 / (2 * a ** 2 * eta * k * v ** 2) - w ** 2 / a, 0.0)
    return B1, B2


def lower_bound(norm_wstar: float, alpha: float, eta: float, k: int, v: float, R: float) -> float:
    """Minimum number of updates on the adversarial sequence: ``max(min(B1, B2), |w*|^2)``."""
    B1, B2 = lower_bound_terms(norm_wstar, alpha, eta, k, v, R)
    return max(min(B1, B2), norm_wstar ** 2)


def compression_bound(c_k: int, n: int, delta: float, L_V: float) -> float:
    """Sample-compression risk bound for a scheme of size ``c_k`` (natural log)."""
    if c_k < 0:
        raise ValueError("c_k must be nonnegative")
    if n < 2 * c_k or n < 1:
        raise ValueError(f"compression bound needs n >= 2*c_k, got n={n}, c_k={c_k}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if not 0 <= L_V <= 1:
        raise ValueError(f"L_V must lie in [0, 1], got {L_V}")
    r = c_k * math.log(n / delta) / n
    return L_V + math.sqrt(L_V * 4 * r) + 8 * r


def generalization_global_min(norm_wstar, alpha, eta, k, v, R, n, delta) -> float:
    c = math.ceil(theorem1_Mk(norm_wstar, alpha, eta, k, v, R))
    if n < 2 * c:
        raise ValueError(f"need n >= 2*ceil(M_k) = {2 * c}, got n={n}")
    return compression_bound(c, n, delta, 0.0)


def relu_thresholds(d: int, delta: float):
    """Width thresholds ``(k_fail, k_succeed)`` for ReLU on the orthogonal dataset."""
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return math.log2(d / -math.log(delta)), math.log2(2 * d / delta)


def relu_iteration_bound(d: int, C: float, eta: float) -> int:
    if not (C > 0 and eta > 0):
        raise ValueError("C and eta must be positive")
    return math.ceil(max(d * C / eta, d / eta))


def report(formula_id: str, **inputs) -> BoundReport:
    """Evaluate ``formula_id`` on ``inputs`` and echo them back."""
    notes = ()
    if formula_id == "Mk":
        value = theorem1_Mk(**inputs)
    elif formula_id == "LowerBound":
        value = lower_bound(**inputs)
        notes = (LOWER_BOUND_NOTE,)
    elif formula_id == "Compression":
        value = compression_bound(**inputs)
    elif formula_id == "GeneralizationGlobalMin":
        value = generalization_global_min(**inputs)
    elif formula_id == "ReluKFail":
        value = relu_thresholds(**inputs)[0]
        if value < 0:
            notes = (f"raw threshold {value:.6g} < 0: no width qualifies",)
            value = 0.0
    elif formula_id == "ReluKSucceed":
        value = relu_thresholds(**inputs)[1]
    elif formula_id == "ReluIterBound":
        value = relu_iteration_bound(**inputs)
    else:
        raise ValueError(f"unknown formula id {formula_id!r}")
    return BoundReport(formula_id, float(value), dict(inputs), notes)
