import math

import numpy as np
import pytest
from scipy.special import expit

from src.core.errors import ConfigError
from src.model.config import ModelConfig
from src.model.danrl import (BatchBundle, ModelParams, branch_weights, decode, encode, gradients, init_params,
                             loss_ae, loss_and_gradients, loss_fop, loss_reg, loss_sg, total_loss)
from src.model.optimizers import Adam, make_optimizer


def _params(n, dims, seed=0, scale=1.0):
    params = init_params((n,) + tuple(dims), seed)
    rng = np.random.default_rng(seed + 100)
    # non-zero biases so their gradients are exercised too
    for bias in params.b + params.b_hat:
        bias += rng.normal(0, 0.1, size=bias.shape)
    for arr in params.W + params.W_hat + [params.H]:
        arr *= scale
    return params


def _instance(n=10, dims=(6, 4), neg=2, seed=0, chi=3.0):
    """Small random graph instance with every branch populated."""
    rng = np.random.default_rng(seed)
    A = np.triu((rng.random((n, n)) < 0.35).astype(float), 1)
    A = A + A.T
    S = rng.random((n, n)) * (rng.random((n, n)) < 0.5)
    S = np.triu(S, 1) + np.triu(S, 1).T
    R = A + 0.5 * S
    edges = np.argwhere(np.triu(A, 1) > 0)
    rows = np.arange(n)
    pairs = np.column_stack([rng.integers(0, n, 25), rng.integers(0, n, 25)])
    negatives = rng.integers(0, n, size=(25, neg))
    B = np.where(R != 0, chi, 1.0)
    bundle = BatchBundle(R=R, rows=rows, B_rows=B, edges=edges, pairs=pairs, negatives=negatives)
    return _params(n, dims, seed), bundle


def _zero_params(n, dims):
    return init_params((n,) + tuple(dims), 0).zeros_like()


def test_encode_examples():
    params = ModelParams(W=[np.array([[1.0], [1.0]])], b=[np.zeros(1)], W_hat=[np.zeros((1, 2))],
                         b_hat=[np.zeros(2)], H=np.zeros((2, 1)))
    np.testing.assert_allclose(encode(params, np.array([0.5, 0.5])), [math.tanh(1.0)], rtol=1e-12)
    zero = _zero_params(5, (3, 2))
    np.testing.assert_array_equal(encode(zero, np.ones(5)), np.zeros(2))
    with pytest.raises(ValueError):
        encode(zero, np.ones(4))


def test_encoder_output_bounded():
    params = _params(8, (5, 3), scale=20.0)
    Y = encode(params, np.random.default_rng(0).random((8, 8)) * 10)
    assert np.all(np.abs(Y) <= 1.0)


def test_decode_shapes_and_zero_params():
    params = init_params((30, 12, 6, 4), 0)
    assert decode(params, np.zeros(4)).shape == (30,)
    np.testing.assert_array_equal(decode(_zero_params(30, (12, 6, 4)), np.ones(4)), np.zeros(30))


def test_loss_fop_oracles():
    params = _zero_params(4, (3,))
    R = np.eye(4)
    assert loss_fop(params, R, [[0, 1]]) == pytest.approx(math.log(2), abs=1e-12)
    assert loss_fop(params, R, [[0, 1], [0, 1]]) == pytest.approx(loss_fop(params, R, [[0, 1]]), abs=1e-12)
    with pytest.raises(ValueError):
        loss_fop(params, R, np.empty((0, 2)))


def test_loss_ae_hadamard_oracle():
    params = ModelParams(W=[np.zeros((2, 1))], b=[np.zeros(1)], W_hat=[np.zeros((1, 2))],
                         b_hat=[np.array([0.5, 0.2])], H=np.zeros((2, 1)))
    value = loss_ae(params, np.array([[1.0, 0.0]]), np.array([[3.0, 1.0]]))
    assert value == pytest.approx(2.29, abs=1e-10)
    assert loss_ae(params, np.array([[0.5, 0.2]]), np.array([[3.0, 1.0]])) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        loss_ae(params, np.array([[1.0, 0.0]]), np.array([[3.0, 1.0, 1.0]]))


def test_loss_sg_oracles():
    params = _zero_params(4, (3,))
    R = np.eye(4)
    value = loss_sg(params, R, [[0, 1], [2, 3]], [[2], [0]])
    assert value == pytest.approx(2 * 2 * math.log(2), abs=1e-10)
    no_neg = loss_sg(params, R, [[0, 1]], np.empty((1, 0), dtype=np.int64))
    assert no_neg == pytest.approx(math.log(2), abs=1e-12)
    with pytest.raises(ValueError):
        loss_sg(params, R, np.empty((0, 2)), np.empty((0, 1)))


def test_loss_sg_matches_per_pair_sum():
    params, bundle = _instance()
    Y = encode(params, bundle.R)
    expected = 0.0
    for (c, ctx), negs in zip(bundle.pairs, bundle.negatives):
        expected -= math.log(expit(params.H[ctx] @ Y[c]))
        for s in negs:
            expected -= math.log(expit(-params.H[s] @ Y[c]))
    assert loss_sg(params, bundle.R, bundle.pairs, bundle.negatives) == pytest.approx(expected, rel=1e-10)


def test_loss_reg_oracles():
    params = ModelParams(W=[np.array([[1.0, 1.0]])], b=[np.zeros(2)], W_hat=[np.array([[2.0]])],
                         b_hat=[np.zeros(1)], H=np.ones((1, 2)))
    assert loss_reg(params) == pytest.approx(3.0)
    assert loss_reg(_zero_params(5, (3,))) == 0.0
    doubled = _params(6, (4, 2))
    base = loss_reg(doubled)
    for w in doubled.W + doubled.W_hat:
        w *= 2
    assert loss_reg(doubled) == pytest.approx(4 * base, rel=1e-12)


def test_total_loss_weighting():
    params, bundle = _instance()
    sg = loss_sg(params, bundle.R, bundle.pairs, bundle.negatives)
    ae = loss_ae(params, bundle.R[bundle.rows], bundle.B_rows)
    fop = loss_fop(params, bundle.R, bundle.edges)
    reg = loss_reg(params)

    only_sg = ModelConfig(alpha=0.0, beta=0.0, gamma=0.0)
    assert total_loss(params, bundle, only_sg) == pytest.approx(sg, rel=1e-12)

    ae_bundle = BatchBundle(R=bundle.R, rows=bundle.rows, B_rows=bundle.B_rows)
    only_ae = ModelConfig(alpha=1.0, beta=0.0, gamma=0.0)
    assert total_loss(params, ae_bundle, only_ae) == pytest.approx(ae, rel=1e-12)

    config = ModelConfig(alpha=0.7, beta=1.3, gamma=0.01)
    expected = sg + 0.7 * ae + 1.3 * fop + 0.01 * reg
    assert total_loss(params, bundle, config) == pytest.approx(expected, rel=1e-10)
    terms, _ = loss_and_gradients(params, bundle, branch_weights(config))
    assert terms["total"] == pytest.approx(expected, rel=1e-10)


@pytest.mark.parametrize("activation", ["tanh", "sigmoid"])
def test_gradient_check(activation):
    """Every analytic gradient component matches central finite differences"""
    params, bundle = _instance()
    weights = {"sg": 1.0, "ae": 0.8, "fop": 1.5, "reg": 0.05}
    _, grads = loss_and_gradients(params, bundle, weights, activation)
    analytic = grads.arrays()
    h = 1e-5
    worst = 0.0
    for name, arr in params.arrays().items():
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            up = loss_and_gradients(params, bundle, weights, activation)[0]["total"]
            arr[idx] = old - h
            down = loss_and_gradients(params, bundle, weights, activation)[0]["total"]
            arr[idx] = old
            numeric = (up - down) / (2 * h)
            a = analytic[name][idx]
            err = abs(a - numeric)
            assert err <= 1e-4 * max(abs(a), abs(numeric)) + 1e-7, f"{name}{idx}: analytic {a}, numeric {numeric}"
            worst = max(worst, err / max(abs(a), abs(numeric), 1e-12))
    print(f"✅ gradient check passed ({activation}), worst relative error {worst:.2e}")


def test_zero_params_zero_input_gradient():
    params = _zero_params(6, (4, 2))
    R = np.zeros((6, 6))
    bundle = BatchBundle(R=R, rows=np.arange(6), edges=[[0, 1]], pairs=[[0, 2]], negatives=[[3]])
    grads = gradients(params, bundle, ModelConfig(layer_dims=(4, 2)))
    for w in grads.W:
        np.testing.assert_array_equal(w, 0.0)


def test_regularizer_gradient_is_gamma_w():
    params = _params(6, (4, 2))
    bundle = BatchBundle(R=np.eye(6))
    config = ModelConfig(layer_dims=(4, 2), alpha=0.0, beta=0.0, gamma=0.3)
    grads = gradients(params, bundle, config)
    for g, w in zip(grads.W + grads.W_hat, params.W + params.W_hat):
        np.testing.assert_allclose(g, 0.3 * w, rtol=1e-12)
    np.testing.assert_array_equal(grads.H, 0.0)


def test_branch_isolation():
    params, bundle = _instance()
    sg_only = gradients(params, bundle, ModelConfig(alpha=0.0, beta=0.0, gamma=0.0))
    for w, bias in zip(sg_only.W_hat, sg_only.b_hat):
        assert not np.any(w) and not np.any(bias)

    ae_bundle = BatchBundle(R=bundle.R, rows=bundle.rows, B_rows=bundle.B_rows)
    ae_only = gradients(params, ae_bundle, ModelConfig(alpha=1.0, beta=0.0, gamma=0.0))
    assert not np.any(ae_only.H)


def test_first_order_training_ranks_edge_highest():
    """Training only the first-order loss on one edge lifts its score above unrelated pairs"""
    n = 4
    R = np.eye(n)
    params = init_params((n, 8, 4), seed=3)
    before = encode(params, R)
    bundle = BatchBundle(R=R, edges=[[0, 1]])
    optimizer = Adam(0.05)
    for _ in range(300):
        _, grads = loss_and_gradients(params, bundle, {"fop": 1.0})
        optimizer.step(params, grads)
    after = encode(params, R)
    w_edge = expit(after[0] @ after[1])
    assert w_edge > expit(before[0] @ before[1])
    for u, k in [(0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]:
        assert w_edge > expit(before[u] @ before[k])


def test_optimizers_descend_quadratic():
    for name in ("sgd", "momentum", "adam"):
        params = _params(5, (3, 2))
        start = loss_reg(params)
        optimizer = make_optimizer(name, 0.05)
        for _ in range(50):
            _, grads = loss_and_gradients(params, BatchBundle(R=np.eye(5)), {"reg": 1.0})
            optimizer.step(params, grads)
        assert loss_reg(params) < start
    with pytest.raises(ConfigError):
        make_optimizer("rmsprop", 0.1)


def test_params_validate_and_round_trip():
    params = init_params((7, 5, 3), 1)
    params.validate()
    restored = ModelParams.from_arrays(params.arrays())
    for name, arr in params.arrays().items():
        np.testing.assert_array_equal(restored.arrays()[name], arr)
    params.H = np.zeros((6, 3))
    with pytest.raises(ValueError):
        params.validate()


def test_config_validation():
    ModelConfig().validate()
    assert ModelConfig().d == 128
    assert ModelConfig(layer_dims=(256, 128)).encoder_dims(2708) == (2708, 256, 128)
    for bad in (dict(chi=1.0), dict(alpha=-1.0), dict(eta=0.0, psi=0.0), dict(layer_dims=()),
                dict(activation="relu"), dict(optimizer="rmsprop"), dict(update_mode="joint")):
        with pytest.raises(ConfigError):
            ModelConfig(**bad).validate()
    config = ModelConfig(layer_dims=(16, 8), alpha=0.5)
    assert ModelConfig.from_dict(config.to_dict()) == config
