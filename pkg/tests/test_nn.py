import numpy as np
import pytest

from frbnet import nn


def naive_conv(x, w, b=None):
    """Direct loop over taps with explicit zero padding."""
    bsz, cin, h, wd = x.shape
    xp = np.zeros((bsz, cin, h + 2, wd + 2))
    xp[:, :, 1:-1, 1:-1] = x
    out = np.zeros((bsz, w.shape[0], h, wd))
    for i in range(3):
        for j in range(3):
            patch = xp[:, :, i:i + h, j:j + wd]
            out += np.einsum("oc,bchw->bohw", w[:, :, i, j], patch)
    if b is not None:
        out += b[None, :, None, None]
    return out


def numeric_grad(f, x, step=1e-6):
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = x[idx]
        x[idx] = old + step
        hi = f()
        x[idx] = old - step
        lo = f()
        x[idx] = old
        g[idx] = (hi - lo) / (2 * step)
    return g


SHAPES = [(2, 3, 8, 5, 7), (3, 16, 3, 6, 4), (1, 16, 16, 4, 4), (2, 6, 16, 3, 9), (1, 2, 2, 2, 2)]


@pytest.mark.parametrize("bsz,cin,cout,h,w", SHAPES)
def test_conv_matches_naive(bsz, cin, cout, h, w):
    rng = np.random.default_rng(cin * 10 + cout)
    x = rng.standard_normal((bsz, cin, h, w))
    k = rng.standard_normal((cout, cin, 3, 3))
    b = rng.standard_normal(cout)
    out, _ = nn.conv3x3(x, k, b)
    np.testing.assert_allclose(out, naive_conv(x, k, b), atol=1e-12)


def test_conv_spans_several_column_chunks():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((2, 4, 40, 33))
    k = rng.standard_normal((8, 4, 3, 3))
    assert 2 * 42 * 35 > 2 * nn.COL_CHUNK
    np.testing.assert_allclose(nn.conv3x3(x, k)[0], naive_conv(x, k), atol=1e-12)


@pytest.mark.parametrize("bsz,cin,cout,h,w", SHAPES[:3])
def test_conv_backward_matches_finite_differences(bsz, cin, cout, h, w):
    rng = np.random.default_rng(1)
    x = rng.standard_normal((bsz, cin, h, w))
    k = rng.standard_normal((cout, cin, 3, 3))
    b = rng.standard_normal(cout)
    up = rng.standard_normal((bsz, cout, h, w))
    out, cache = nn.conv3x3(x, k, b)
    dx, dk, db = nn.conv3x3_backward(up, cache)
    loss = lambda: float(np.sum(up * naive_conv(x, k, b)))
    np.testing.assert_allclose(dx, numeric_grad(loss, x), rtol=1e-6, atol=1e-7)
    np.testing.assert_allclose(dk, numeric_grad(loss, k), rtol=1e-6, atol=1e-7)
    np.testing.assert_allclose(db, numeric_grad(loss, b), rtol=1e-6, atol=1e-7)


def test_conv_chain_matches_sequential():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((2, 6, 7, 5))
    layers = [(rng.standard_normal((16, 6, 3, 3)), rng.standard_normal(16)),
              (rng.standard_normal((16, 16, 3, 3)), None),
              (rng.standard_normal((3, 16, 3, 3)), rng.standard_normal(3))]
    ref = x
    for k, b in layers:
        ref = naive_conv(ref, k, b)
    np.testing.assert_allclose(nn.conv3x3_chain(x, layers), ref, rtol=1e-12, atol=1e-10)


def test_conv_rejects_channel_mismatch():
    with pytest.raises(ValueError):
        nn.conv3x3(np.zeros((1, 3, 4, 4)), np.zeros((8, 4, 3, 3)))


def test_batchnorm_training_statistics():
    rng = np.random.default_rng(3)
    x = rng.normal(2.0, 3.0, (4, 5, 6, 6))
    g, b = rng.uniform(0.5, 2, 5), rng.standard_normal(5)
    rm, rv = np.zeros(5), np.ones(5)
    out, _, new_rm, new_rv = nn.batchnorm(x, g, b, rm, rv, training=True)
    mean = x.mean(axis=(0, 2, 3))
    var = x.var(axis=(0, 2, 3))
    ref = g[None, :, None, None] * (x - mean[None, :, None, None]) / np.sqrt(var + 1e-5)[None, :, None, None]
    np.testing.assert_allclose(out, ref + b[None, :, None, None], atol=1e-12)
    n = 4 * 36
    np.testing.assert_allclose(new_rm, 0.1 * mean, atol=1e-14)
    np.testing.assert_allclose(new_rv, 0.9 + 0.1 * var * n / (n - 1), atol=1e-14)


def test_batchnorm_eval_uses_running_buffers():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((1, 3, 4, 4))
    rm, rv = rng.standard_normal(3), rng.uniform(0.5, 2, 3)
    out, _, new_rm, new_rv = nn.batchnorm(x, np.ones(3), np.zeros(3), rm, rv, training=False)
    np.testing.assert_allclose(out, (x - rm[None, :, None, None]) / np.sqrt(rv + 1e-5)[None, :, None, None])
    assert new_rm is rm and new_rv is rv


def test_batchnorm_needs_batch_of_two():
    with pytest.raises(ValueError):
        nn.batchnorm(np.zeros((1, 2, 3, 3)), np.ones(2), np.zeros(2), np.zeros(2), np.ones(2), training=True)


@pytest.mark.parametrize("training", [True, False])
def test_batchnorm_backward(training):
    rng = np.random.default_rng(5)
    x = rng.standard_normal((3, 2, 4, 3))
    g, b = rng.uniform(0.5, 2, 2), rng.standard_normal(2)
    rm, rv = rng.standard_normal(2), rng.uniform(0.5, 2, 2)
    up = rng.standard_normal(x.shape)
    _, cache, _, _ = nn.batchnorm(x, g, b, rm, rv, training)
    dx, dg, db = nn.batchnorm_backward(up, cache)
    loss = lambda: float(np.sum(up * nn.batchnorm(x, g, b, rm, rv, training)[0]))
    np.testing.assert_allclose(dx, numeric_grad(loss, x), rtol=1e-5, atol=1e-7)
    np.testing.assert_allclose(dg, numeric_grad(loss, g), rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(db, numeric_grad(loss, b), rtol=1e-6, atol=1e-8)


def test_softmax_cross_entropy():
    rng = np.random.default_rng(6)
    logits = rng.standard_normal((5, 4)) * 3
    labels = np.array([0, 3, 1, 1, 2])
    loss, grad = nn.softmax_cross_entropy(logits, labels)
    p = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
    assert loss == pytest.approx(-np.mean(np.log(p[np.arange(5), labels])), rel=1e-12)
    num = numeric_grad(lambda: nn.softmax_cross_entropy(logits, labels)[0], logits)
    np.testing.assert_allclose(grad, num, atol=1e-8)


def test_softmax_cross_entropy_is_stable_for_large_logits():
    loss, grad = nn.softmax_cross_entropy(np.array([[1000.0, 0.0]]), np.array([0]))
    assert loss == 0.0 and np.all(np.isfinite(grad))


def test_activations():
    x = np.array([-800.0, -1.0, 0.0, 2.0, 800.0])
    np.testing.assert_allclose(nn.softplus(x)[1:4], np.log1p(np.exp(x[1:4])))
    assert nn.softplus(x)[-1] == 800.0 and nn.softplus(x)[0] == 0.0
    np.testing.assert_allclose(nn.sigmoid(x)[1:4], 1 / (1 + np.exp(-x[1:4])), rtol=1e-15)
