import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from aedetect import autoencoder as ae


def random_model(rng, d, h, lam=0.0):
    return ae.AutoencoderModel(
        W1=rng.normal(0, 1 / np.sqrt(d), (h, d)), b1=rng.normal(0, 0.1, h),
        W2=rng.normal(0, 1 / np.sqrt(h), (d, h)), b2=rng.normal(0, 0.1, d), l1_lambda=lam,
    )


def zero_model(d, h):
    return ae.AutoencoderModel(np.zeros((h, d)), np.zeros(h), np.zeros((d, h)), np.zeros(d))


# -- independent oracles -------------------------------------------------------

def loss_oracle(model, X, lam):
    """Scalar loops, no matrix products."""
    total_err = total_act = 0.0
    for x in X:
        hidden = []
        for j in range(model.h):
            z = model.b1[j] + sum(model.W1[j, i] * x[i] for i in range(model.d))
            hidden.append(z if z > 0 else 0.0)
        err = 0.0
        for i in range(model.d):
            o = model.b2[i] + sum(model.W2[i, j] * hidden[j] for j in range(model.h))
            err += abs(x[i] - o)
        total_err += err / model.d
        total_act += sum(abs(v) for v in hidden)
    return total_err / len(X) + lam * total_act / len(X)


def fd_oracle(model, X, lam, step=1e-6):
    out = {}
    for name in ae.PARAM_NAMES:
        base = getattr(model, name)
        g = np.empty_like(base)
        for idx in np.ndindex(base.shape):
            plus, minus = base.copy(), base.copy()
            plus[idx] += step
            minus[idx] -= step
            lp = ae.batch_loss(model.with_params({name: plus}), X, lam)
            lm = ae.batch_loss(model.with_params({name: minus}), X, lam)
            g[idx] = (lp - lm) / (2 * step)
        out[name] = g
    return out


def adam_scalar(p, grads, lr, b1=0.9, b2=0.999, eps=1e-8):
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        p = p - lr * (m / (1 - b1**t)) / (math.sqrt(v / (1 - b2**t)) + eps)
    return p


# -- forward / error -----------------------------------------------------------

def test_forward_zero_model():
    h, o = ae.forward(zero_model(3, 6), np.array([1.0, -2.0, 3.0]))
    assert not h.any() and not o.any()


def test_forward_hand_arithmetic():
    m = ae.AutoencoderModel([[2.0]], [-1.0], [[3.0]], [0.5])
    h, o = ae.forward(m, [1.0])
    assert h.tolist() == [1.0] and o.tolist() == [3.5]


def test_forward_deterministic(rng):
    m = random_model(rng, 4, 40)
    x = rng.uniform(size=4)
    a, b = ae.forward(m, x), ae.forward(m, x)
    assert np.array_equal(a[1], b[1]) and np.array_equal(a[0], b[0])


def test_forward_dimension_mismatch(rng):
    with pytest.raises(ValueError):
        ae.forward(random_model(rng, 4, 8), np.ones(5))


def test_reconstruction_error_examples(rng):
    x = rng.normal(size=7)
    assert ae.reconstruction_error(x, x) == 0.0
    assert ae.reconstruction_error([0.0, 0.0], [1.0, -1.0]) == 1.0
    a, b = rng.normal(size=13), rng.normal(size=13)
    acc = 0.0
    for u, v in zip(a, b):
        acc += abs(u - v)
    assert abs(ae.reconstruction_error(a, b) - acc / 13) <= 1e-15
    with pytest.raises(ValueError):
        ae.reconstruction_error([1.0], [1.0, 2.0])


def test_row_errors_match_single_calls(rng):
    m = random_model(rng, 5, 50)
    X = rng.uniform(size=(20, 5))
    errs = ae.row_errors(m, X)
    for x, e in zip(X, errs):
        assert e == ae.reconstruction_error(x, ae.forward(m, x)[1])


# -- loss ----------------------------------------------------------------------

def test_loss_without_regularizer_is_mean_error(rng):
    m = random_model(rng, 3, 30)
    X = rng.uniform(size=(6, 3))
    mean_err = np.mean([ae.reconstruction_error(x, ae.forward(m, x)[1]) for x in X])
    assert abs(ae.batch_loss(m, X, 0.0) - mean_err) <= 1e-15


def test_loss_zero_model_zero_batch():
    assert ae.batch_loss(zero_model(3, 4), np.zeros((5, 3)), 0.1) == 0.0


@pytest.mark.parametrize("lam", [0.0, 1e-4, 0.3])
def test_loss_matches_loop_oracle(rng, lam):
    m = random_model(rng, 4, 9)
    X = rng.uniform(size=(5, 4))
    assert abs(ae.batch_loss(m, X, lam) - loss_oracle(m, X, lam)) <= 1e-12


def test_loss_rejects_empty(rng):
    with pytest.raises(ValueError):
        ae.batch_loss(random_model(rng, 2, 4), np.empty((0, 2)))


# -- gradients -----------------------------------------------------------------

def test_gradient_zero_at_perfect_reconstruction():
    # output == input exactly: W2 @ relu(W1 x + b1) + b2 == x
    m = ae.AutoencoderModel(np.eye(2), np.zeros(2), np.eye(2), np.zeros(2))
    X = np.array([[0.25, 0.5], [0.75, 0.125]])
    g = ae.backward(m, X, 0.0)
    assert not g["W2"].any() and not g["b2"].any()


@pytest.mark.parametrize("lam", [0.0, 1e-4])
def test_gradient_matches_finite_differences(rng, lam):
    m = random_model(rng, 2, 3, lam)
    X = rng.uniform(size=(4, 2))
    assert not ae._near_kink(m, X, 1e-4)
    analytic = ae.backward(m, X, lam)
    numeric = fd_oracle(m, X, lam)
    assert ae.relative_error(analytic, numeric) < 1e-5


def test_gradient_invariant_under_duplicated_batch(rng):
    m = random_model(rng, 3, 12, 1e-3)
    X = rng.uniform(size=(5, 3))
    g1 = ae.backward(m, X)
    g2 = ae.backward(m, np.vstack([X, X]))
    for k in g1:
        np.testing.assert_allclose(g1[k], g2[k], rtol=1e-13, atol=1e-16)


def test_gradient_check_passes_and_catches_bugs():
    assert ae.gradient_check(3, 5, trials=10).passed
    assert ae.gradient_check(3, 5, trials=10, l1_lambda=1e-2).passed

    def broken(model, X, lam):
        g = ae.backward(model, X, lam)
        g["W1"] = g["W1"] + 1.0
        return g

    assert not ae.gradient_check(3, 5, trials=2, grad_fn=broken).passed


# -- Adam ----------------------------------------------------------------------

def test_adam_zero_gradient():
    params = {"w": np.array([1.5, -2.0])}
    state = ae.AdamState.zeros_like(params)
    new, state = ae.adam_step(params, {"w": np.zeros(2)}, state, ae.TrainConfig())
    assert np.array_equal(new["w"], params["w"]) and state.t == 1


def test_adam_first_step_moves_by_lr():
    cfg = ae.TrainConfig(learning_rate=0.1)
    params = {"w": np.array([0.0])}
    new, state = ae.adam_step(params, {"w": np.array([1.0])}, ae.AdamState.zeros_like(params), cfg)
    assert abs(new["w"][0] - (-0.1)) <= 1e-6
    assert new["w"][0] == adam_scalar(0.0, [1.0], 0.1)
    assert params["w"][0] == 0.0  # inputs untouched


def test_adam_two_steps_match_scalar_trace():
    cfg = ae.TrainConfig(learning_rate=0.1)
    p = {"w": np.array([0.0])}
    s = ae.AdamState.zeros_like(p)
    for g in (1.0, 0.5):
        p, s = ae.adam_step(p, {"w": np.array([g])}, s, cfg)
    assert s.t == 2
    assert abs(p["w"][0] - adam_scalar(0.0, [1.0, 0.5], 0.1)) <= 1e-15
    # a varying gradient takes a different path than one doubled-lr step
    doubled, _ = ae.adam_step({"w": np.array([0.0])}, {"w": np.array([1.0])},
                              ae.AdamState.zeros_like(p), ae.TrainConfig(learning_rate=0.2))
    assert abs(p["w"][0] - doubled["w"][0]) > 1e-3


def test_adam_constant_gradient_two_steps_equal_doubled_lr():
    # with bias correction a constant gradient gives m_hat = 1 and v_hat = 1
    # at every step, so two steps land where one double-size step does
    p = {"w": np.array([0.0])}
    s = ae.AdamState.zeros_like(p)
    for _ in range(2):
        p, s = ae.adam_step(p, {"w": np.array([1.0])}, s, ae.TrainConfig(learning_rate=0.1))
    doubled, _ = ae.adam_step({"w": np.array([0.0])}, {"w": np.array([1.0])},
                              ae.AdamState.zeros_like(p), ae.TrainConfig(learning_rate=0.2))
    assert abs(p["w"][0] - doubled["w"][0]) <= 1e-12


# -- training ------------------------------------------------------------------

def test_train_config_validation():
    with pytest.raises(ValueError):
        ae.TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        ae.TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        ae.TrainConfig(l1_lambda=-1)


def test_train_deterministic_and_shapes(rng):
    X = rng.uniform(size=(70, 4))
    cfg = ae.TrainConfig(epochs=3, batch_size=32, seed=11)
    m1, h1 = ae.train(X, cfg)
    m2, h2 = ae.train(X, cfg)
    assert m1.h == 40 and len(h1) == 3
    assert h1 == h2
    for k in ae.PARAM_NAMES:
        assert np.array_equal(getattr(m1, k), getattr(m2, k))
    assert not m1.W1.flags.writeable


def test_train_different_seed_differs(rng):
    X = rng.uniform(size=(40, 3))
    a, _ = ae.train(X, ae.TrainConfig(epochs=1, seed=1))
    b, _ = ae.train(X, ae.TrainConfig(epochs=1, seed=2))
    assert not np.array_equal(a.W1, b.W1)


def test_train_rejects_empty():
    with pytest.raises(ValueError):
        ae.train(np.empty((0, 3)), ae.TrainConfig(epochs=1))


def test_training_reduces_loss():
    from aedetect import dataprep as dp, synthgen as sg
    tr = sg.generate_trace(sg.NodeProfile.random("n", 16, 2), 2200, 16)
    train, _ = dp.split(tr, 0.95)
    X = dp.apply_norm(train.samples, dp.fit_norm(train.samples))
    assert len(X) >= 2000
    _, hist = ae.train(X, ae.TrainConfig(epochs=10))
    assert hist[-1] < hist[0]


def test_glorot_limits(rng):
    p = ae.glorot_init(6, 60, rng)
    lim = np.sqrt(6 / 66)
    assert np.abs(p["W1"]).max() <= lim and np.abs(p["W2"]).max() <= lim
    assert not p["b1"].any() and not p["b2"].any()


# -- properties ----------------------------------------------------------------

vec = hnp.arrays(np.float64, 6, elements=st.floats(-1e3, 1e3))


@settings(max_examples=100, deadline=None)
@given(vec)
def test_relu_properties(z):
    r = ae.relu(z)
    assert np.all(r >= 0)
    assert np.array_equal(ae.relu(r), r)


@settings(max_examples=100, deadline=None)
@given(vec, vec, st.floats(0.01, 100))
def test_error_symmetric_and_scales(a, b, c):
    e = ae.reconstruction_error(a, b)
    assert e == ae.reconstruction_error(b, a)
    assert e >= 0
    assert (e == 0) == np.array_equal(a, b)
    assert math.isclose(ae.reconstruction_error(c * a, c * b), c * e, rel_tol=1e-12, abs_tol=1e-300)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 8))
def test_duplicated_batch_same_loss(seed, n):
    rng = np.random.default_rng(seed)
    m = random_model(rng, 3, 6, 1e-2)
    X = rng.uniform(size=(n, 3))
    assert math.isclose(ae.batch_loss(m, X), ae.batch_loss(m, np.vstack([X, X])), rel_tol=1e-14)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([0.0, 1e-4]))
def test_gradient_property(seed, lam):
    r = ae.gradient_check(3, 6, trials=1, l1_lambda=lam, seed=seed)
    assert r.max_rel_error < 1e-5
