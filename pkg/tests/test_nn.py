import numpy as np
import pytest

from ssnet.nn import (
    OptConfig,
    ParamStore,
    affine,
    affine_backward,
    finite_diff_check,
    glu,
    glu_backward,
    init_params,
    sgd_momentum_step,
    sigmoid,
    softmax_nll,
    softmax_nll_backward,
)


# --- init ------------------------------------------------------------------

def test_init_range_and_shapes():
    store = init_params([("w", (2, 3))], seed=1)
    assert store["w"].shape == (2, 3)
    assert np.all(np.abs(store["w"]) <= 0.08)


def test_init_deterministic():
    a = init_params([("w", (4, 4)), ("b", (4,))], seed=9)
    b = init_params([("w", (4, 4)), ("b", (4,))], seed=9)
    for name in a.names():
        assert np.array_equal(a[name], b[name])


def test_init_empirical_mean_near_zero():
    store = init_params([("w", (100000,))], seed=3, dtype=np.float64)
    assert abs(store["w"].mean()) < 0.002


def test_init_empty_spec_rejected():
    with pytest.raises(ValueError, match="empty"):
        init_params([], seed=0)


def test_param_store_rejects_duplicates():
    store = ParamStore()
    store.add("w", np.zeros(3))
    with pytest.raises(ValueError, match="duplicate"):
        store.add("w", np.zeros(3))


# --- affine ----------------------------------------------------------------

def test_affine_identity():
    y = affine(np.array([3.0, -1.0]), np.eye(2), np.zeros(2))
    assert np.allclose(y, [3.0, -1.0])


def test_affine_hand_example():
    y = affine(np.array([1.0, 1.0]), np.array([[1.0, 2.0]]), np.array([1.0]))
    assert np.allclose(y, [4.0])


def test_affine_shape_mismatch():
    with pytest.raises(ValueError, match="mismatch"):
        affine(np.zeros(3), np.zeros((2, 2)), np.zeros(2))


def test_affine_backward_matches_finite_differences():
    rng = np.random.default_rng(0)
    x = rng.normal(size=4)
    w = rng.normal(size=(3, 4))
    b = rng.normal(size=3)
    g = rng.normal(size=3)
    dx, dw, db = affine_backward(g, x, w)
    eps = 1e-6

    def loss(wm):
        return float(g @ (wm @ x + b))

    for i in range(3):
        for j in range(4):
            wp, wm_ = w.copy(), w.copy()
            wp[i, j] += eps
            wm_[i, j] -= eps
            num = (loss(wp) - loss(wm_)) / (2 * eps)
            assert abs(num - dw[i, j]) / max(abs(num), abs(dw[i, j]), 1e-8) < 1e-6
    assert np.allclose(dx, w.T @ g)
    assert np.allclose(db, g)


# --- glu -------------------------------------------------------------------

def test_glu_zero_gate_halves_value():
    pre = np.array([2.0, -4.0, 0.0, 0.0])
    assert np.allclose(glu(pre), [1.0, -2.0])


def test_glu_zero_value_is_zero():
    pre = np.array([0.0, 0.0, 3.0, -2.0])
    assert np.allclose(glu(pre), [0.0, 0.0])


def test_glu_hand_value():
    # sigmoid(ln 3) = 3/4, so value 2.0 gives 1.5
    pre = np.array([2.0, np.log(3.0)])
    assert np.allclose(glu(pre), [1.5])


def test_glu_odd_length_rejected():
    with pytest.raises(ValueError, match="even"):
        glu(np.zeros(3))


def test_glu_backward_matches_finite_differences():
    rng = np.random.default_rng(1)
    pre = rng.normal(size=8)
    g = rng.normal(size=4)
    grad = glu_backward(g, pre)
    eps = 1e-6
    for i in range(8):
        p_plus, p_minus = pre.copy(), pre.copy()
        p_plus[i] += eps
        p_minus[i] -= eps
        num = (float(g @ glu(p_plus)) - float(g @ glu(p_minus))) / (2 * eps)
        assert abs(num - grad[i]) / max(abs(num), abs(grad[i]), 1e-8) < 1e-6


# --- softmax ---------------------------------------------------------------

def test_softmax_uniform_logits():
    loss, probs = softmax_nll(np.zeros(4), 2)
    assert np.allclose(probs, 0.25)
    assert abs(loss - np.log(4.0)) < 1e-12


def test_softmax_large_logits_stable():
    loss, probs = softmax_nll(np.array([1000.0, 0.0]), 0)
    assert np.isfinite(loss)
    assert probs[0] > 0.999999
    assert abs(probs.sum() - 1.0) < 1e-6


def test_softmax_target_out_of_range():
    with pytest.raises(ValueError, match="out of range"):
        softmax_nll(np.zeros(3), 3)


def test_softmax_backward_matches_finite_differences():
    rng = np.random.default_rng(2)
    logits = rng.normal(size=5)
    _, probs = softmax_nll(logits, 3)
    grad = softmax_nll_backward(probs, 3)
    eps = 1e-6
    for i in range(5):
        lp, lm = logits.copy(), logits.copy()
        lp[i] += eps
        lm[i] -= eps
        num = (softmax_nll(lp, 3)[0] - softmax_nll(lm, 3)[0]) / (2 * eps)
        assert abs(num - grad[i]) / max(abs(num), abs(grad[i]), 1e-8) < 1e-6


def test_argmax_invariant_to_logit_shift():
    rng = np.random.default_rng(3)
    logits = rng.normal(size=6)
    _, p1 = softmax_nll(logits, 0)
    _, p2 = softmax_nll(logits + 123.4, 0)
    assert p1.argmax() == p2.argmax()
    assert np.allclose(p1, p2, atol=1e-9)


# --- optimizer -------------------------------------------------------------

def scalar_store(theta=0.0):
    store = ParamStore(np.float64)
    store.add("theta", np.array([theta]))
    return store


def test_sgd_plain_step():
    store = scalar_store()
    store.grads["theta"][0] = 1.0
    sgd_momentum_step(store, OptConfig(learning_rate=0.1, momentum=0.0))
    assert np.allclose(store["theta"], [-0.1])
    assert store.grads["theta"][0] == 0.0


def test_sgd_momentum_recurrence():
    # v1 = -0.1, v2 = 0.9*(-0.1) - 0.1 = -0.19 -> theta = -0.29
    store = scalar_store()
    cfg = OptConfig(learning_rate=0.1, momentum=0.9)
    store.grads["theta"][0] = 1.0
    sgd_momentum_step(store, cfg)
    assert np.allclose(store["theta"], [-0.1])
    store.grads["theta"][0] = 1.0
    sgd_momentum_step(store, cfg)
    assert np.allclose(store["theta"], [-0.29])


def test_sgd_zero_grad_moves_by_momentum_only():
    store = scalar_store()
    cfg = OptConfig(learning_rate=0.1, momentum=0.9)
    sgd_momentum_step(store, cfg)  # v = 0, theta unchanged
    assert store["theta"][0] == 0.0
    store.grads["theta"][0] = 1.0
    sgd_momentum_step(store, cfg)
    theta_after = store["theta"][0]
    sgd_momentum_step(store, cfg)  # zero grad: theta += 0.9*v
    assert np.allclose(store["theta"][0] - theta_after, 0.9 * (-0.1))


def test_sgd_nan_gradient_names_tensor():
    store = scalar_store()
    store.grads["theta"][0] = np.nan
    with pytest.raises(FloatingPointError, match="theta"):
        sgd_momentum_step(store, OptConfig())


def test_opt_config_validation():
    with pytest.raises(ValueError):
        OptConfig(learning_rate=0.0)
    with pytest.raises(ValueError):
        OptConfig(momentum=1.0)
    with pytest.raises(ValueError):
        OptConfig(decay=0.0)


# --- finite differences -----------------------------------------------------

def quadratic_store():
    rng = np.random.default_rng(4)
    store = ParamStore(np.float64)
    store.add("theta", rng.normal(size=12))
    return store


def quadratic_loss(params):
    theta = params["theta"]
    params.grads["theta"] += theta
    return float(0.5 * (theta**2).sum())


def test_finite_diff_quadratic_is_exact():
    report = finite_diff_check(quadratic_loss, quadratic_store(), 1e-5)
    assert report["theta"] <= 1e-8


def test_finite_diff_epsilon_must_be_positive():
    with pytest.raises(ValueError, match="epsilon must be positive"):
        finite_diff_check(quadratic_loss, quadratic_store(), 0.0)


def test_finite_diff_requires_float64():
    store = ParamStore(np.float32)
    store.add("theta", np.ones(3))
    with pytest.raises(ValueError, match="float64"):
        finite_diff_check(quadratic_loss, store, 1e-5)


def test_finite_diff_detects_nondeterministic_loss():
    store = quadratic_store()
    state = {"calls": 0}

    def noisy(params):
        state["calls"] += 1
        return quadratic_loss(params) + 1e-9 * state["calls"]

    with pytest.raises(ValueError, match="not deterministic"):
        finite_diff_check(noisy, store, 1e-5)


def test_sigmoid_extreme_inputs():
    x = np.array([-1000.0, 0.0, 1000.0])
    s = sigmoid(x)
    assert np.all(np.isfinite(s))
    assert np.allclose(s, [0.0, 0.5, 1.0])
