import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from sgdnet.core import ActivationKind, Example, LabeledDataset, NetworkParams, seeded_rng
from sgdnet.network import (activation, critical_point_report, forward, forward_batch,
                            full_batch_subgradient, hinge_loss, nonconvexity_witness, subgradient,
                            zero_one_error)

from conftest import make_params


def test_activation_values():
    assert activation(-2.0, ActivationKind.leaky_relu(0.1)) == pytest.approx(-0.2)
    assert activation(3.0, ActivationKind.leaky_relu(0.1)) == 3.0
    assert activation(-1.0, ActivationKind.relu()) == 0.0


def test_forward_zero_weights():
    p = NetworkParams(np.zeros((4, 3)), 1.0, ActivationKind.leaky_relu(0.2))
    assert forward(p, [0.3, -0.2, 0.1]) == 0.0


def test_forward_hand_example():
    # sigma(0.5) - sigma(-0.5) = 0.5 + 0.25
    p = make_params([1.0, 0.0], [0.0, 1.0])
    assert forward(p, [0.5, -0.5]) == pytest.approx(0.75)


def test_forward_symmetric_cancellation():
    rng = seeded_rng(3)
    w = rng.standard_normal((3, 4))
    p = NetworkParams(np.vstack([w, w]), 0.7, ActivationKind.relu())
    for x in rng.standard_normal((5, 4)):
        assert forward(p, x) == 0.0


def test_forward_dimension_mismatch():
    p = make_params([1.0, 0.0], [0.0, 1.0])
    with pytest.raises(ValueError):
        forward(p, [1.0, 0.0, 0.0])


def test_forward_batch_matches_forward():
    rng = seeded_rng(5)
    p = NetworkParams(rng.standard_normal((6, 3)), 0.4, ActivationKind.leaky_relu(0.3))
    X = rng.standard_normal((7, 3))
    assert np.allclose(forward_batch(p, X), [forward(p, x) for x in X], rtol=0, atol=1e-12)


def test_hinge_loss_cases():
    ds = LabeledDataset([[0.5, 0.0], [0.0, 0.5]], [1, -1])
    zero = NetworkParams(np.zeros((2, 2)), 1.0, ActivationKind.leaky_relu(0.5))
    assert hinge_loss(zero, ds) == 1.0
    p = make_params([4.0, -4.0], [0.0, 4.0], activation=ActivationKind.relu())
    assert np.all(ds.y * forward_batch(p, ds.X) == 2.0)
    assert hinge_loss(p, ds) == 0.0
    single = LabeledDataset([[1.0, 0.0]], [1])
    q = make_params([0.3, 0.0], [0.0, 0.0], activation=ActivationKind.relu())
    assert hinge_loss(q, single) == pytest.approx(0.7)


def test_empty_dataset_errors():
    p = make_params([1.0], [0.0])
    empty = LabeledDataset(np.zeros((0, 1)), np.zeros(0, dtype=int))
    with pytest.raises(ValueError):
        hinge_loss(p, empty)
    with pytest.raises(ValueError):
        zero_one_error(p, empty)


def test_subgradient_inactive_is_zero():
    p = make_params([3.0, 0.0], [0.0, 0.0])
    rep = subgradient(p, Example([0.5, 0.0], 1))  # y*N = 1.5
    assert not rep.active
    assert not rep.grad.any()


def test_subgradient_hand_example():
    p = make_params([-1.0, 0.0], [0.0, 0.0])
    rep = subgradient(p, Example([1.0, 0.0], 1))
    assert rep.active
    assert np.array_equal(rep.grad, [[-0.5, 0.0], [1.0, 0.0]])
    assert rep.slopes_p.tolist() == [0.5] and rep.slopes_q.tolist() == [1.0]


def test_subgradient_relu_all_dead_active_but_zero():
    p = make_params([[-1.0, 0.0], [0.0, -1.0]], [[-1.0, -1.0], [-2.0, 0.0]],
                    activation=ActivationKind.relu())
    rep = subgradient(p, Example([0.6, 0.6], 1))
    assert rep.active
    assert not rep.grad.any()


def test_subgradient_relu_zero_preactivation_has_slope_zero():
    p = make_params([0.0, 1.0], [0.0, 0.0], activation=ActivationKind.relu())
    rep = subgradient(p, Example([1.0, 0.0], 1))
    assert rep.slopes_p.tolist() == [0.0] and rep.slopes_q.tolist() == [0.0]


def test_zero_one_error_cases():
    ds = LabeledDataset([[0.5, 0.0], [0.0, 0.5], [0.2, 0.2]], [1, -1, -1])
    zero = NetworkParams(np.zeros((2, 2)), 1.0, ActivationKind.relu())
    assert zero_one_error(zero, ds) == pytest.approx(2 / 3)
    single = LabeledDataset([[1.0, 0.0]], [1])
    p = make_params([0.0, 0.0], [0.1, 0.0], activation=ActivationKind.relu())
    assert forward(p, [1.0, 0.0]) == pytest.approx(-0.1)
    assert zero_one_error(p, single) == 1.0
    good = make_params([1.0, -1.0], [-1.0, 1.0])
    assert zero_one_error(good, LabeledDataset([[0.5, 0.0], [0.0, 0.5]], [1, -1])) == 0.0


def test_critical_point_at_scaled_separator(small_separable):
    w = small_separable.separator
    p = make_params(2 * w, -2 * w, activation=ActivationKind.leaky_relu(0.3))
    assert critical_point_report(p, small_separable, 1e-12) == (True, True)


def test_zero_weights_not_critical(small_separable):
    p = NetworkParams(np.zeros((4, small_separable.d)), 1.0, ActivationKind.leaky_relu(0.3))
    assert np.linalg.norm((small_separable.y[:, None] * small_separable.X).sum(0)) > 0
    assert critical_point_report(p, small_separable, 1e-12) == (False, False)


def test_full_batch_subgradient_is_mean_of_singles(small_separable):
    rng = seeded_rng(11)
    p = NetworkParams(rng.standard_normal((6, small_separable.d)) * 0.3, 0.5,
                      ActivationKind.leaky_relu(0.2))
    mean = sum(subgradient(p, e).grad for e in small_separable) / small_separable.n
    assert np.allclose(full_batch_subgradient(p, small_separable), mean, atol=1e-14)


def test_nonconvexity_witness_values():
    fa, fb, fm = nonconvexity_witness([0.6, 0.8], 0.5)
    assert (fa, fb, fm) == pytest.approx((0.0, 1.5, 1.0), rel=1e-12)
    assert fm > (fa + fb) / 2
    fa, fb, fm = nonconvexity_witness([2.0, 0.0], 0.1)
    assert (fa, fb, fm) == pytest.approx((0.0, 4.4, 4.0), rel=1e-12)


def test_nonconvexity_witness_rejects_zero():
    with pytest.raises(ValueError):
        nonconvexity_witness([0.0, 0.0], 0.5)


vectors = st.lists(st.floats(-3, 3, allow_nan=False), min_size=1, max_size=6)


@given(vectors, st.floats(1e-3, 0.999))
def test_nonconvexity_witness_strict(x, alpha):
    x = np.array(x)
    assume(np.linalg.norm(x) > 1e-3)
    fa, fb, fm = nonconvexity_witness(x, alpha)
    assert fm > (fa + fb) / 2


def _single_loss(W, v, kind, x, y):
    p = NetworkParams(W, v, kind)
    return max(1.0 - y * forward(p, x), 0.0)


def fd_check(seed, h=1e-6):
    """Largest |subgradient - central difference| at a random differentiable point, or None."""
    rng = seeded_rng(seed)
    k = int(rng.integers(1, 4))
    d = int(rng.integers(1, 5))
    kind = ActivationKind.leaky_relu(float(rng.uniform(0.05, 0.95)))
    W = rng.standard_normal((2 * k, d))
    v = float(rng.uniform(0.2, 2.0))
    x = rng.standard_normal(d)
    x *= rng.uniform(0.1, 1.0) / np.linalg.norm(x)
    y = int(rng.choice([-1, 1]))
    p = NetworkParams(W, v, kind)
    if np.min(np.abs(W @ x)) < 1e-6 or abs(y * forward(p, x) - 1.0) < 1e-6:
        return None
    g = subgradient(p, Example(x, y)).grad
    fd = np.zeros_like(W)
    for idx in np.ndindex(W.shape):
        E = np.zeros_like(W)
        E[idx] = h
        fd[idx] = (_single_loss(W + E, v, kind, x, y) - _single_loss(W - E, v, kind, x, y)) / (2 * h)
    return float(np.abs(fd - g).max())


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32))
def test_subgradient_matches_finite_differences(seed):
    err = fd_check(seed)
    assume(err is not None)
    assert err <= 1e-4


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32), st.floats(0.01, 100), st.sampled_from(["relu", "leaky"]))
def test_positive_homogeneity(seed, c, act):
    rng = seeded_rng(seed)
    kind = ActivationKind.relu() if act == "relu" else ActivationKind.leaky_relu(0.3)
    W = rng.standard_normal((4, 3))
    x = rng.standard_normal(3)
    a = forward(NetworkParams(c * W, 0.7, kind), x)
    b = c * forward(NetworkParams(W, 0.7, kind), x)
    assert a == pytest.approx(b, rel=1e-9, abs=1e-12)
