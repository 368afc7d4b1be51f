"""Minimal numpy layers with explicit backward passes.

Tensors are ``(batch, channels, h, w)`` float64.  Each forward returns its
output plus a cache tuple consumed by the matching backward.
"""

import numpy as np

BN_EPS = 1e-5
BN_MOMENTUM = 0.9
COL_CHUNK = 1024


def _frame(x):
    """Zero-pad ``(b, c, h, w)`` and flatten to ``(c, b*(h+2)*(w+2))``.

    In this layout the input under tap ``(i, j)`` for every output pixel is the
    contiguous slice ``flat[:, off:off + n]`` with ``off = i*(w+2) + j``.
    Output pixel ``(b, y, x)`` lives at frame index ``b*(h+2)*(w+2) + y*(w+2) + x``.
    """
    bsz, cin, h, w = x.shape
    xp = np.zeros((cin, bsz, h + 2, w + 2))
    xp[:, :, 1:-1, 1:-1] = x.transpose(1, 0, 2, 3)
    flat = xp.reshape(cin, -1)
    return flat, flat.shape[1] - 2 * (w + 2) - 2


def _offsets(w):
    return [i * (w + 2) + j for i in range(3) for j in range(3)]


def _unframe(acc, shape):
    # (c, n) frame-indexed values -> (b, c, h, w)
    bsz, _, h, w = shape
    c, n = acc.shape
    full = np.zeros((c, bsz * (h + 2) * (w + 2)))
    full[:, :n] = acc
    return np.ascontiguousarray(full.reshape(c, bsz, h + 2, w + 2)[:, :, :h, :w].transpose(1, 0, 2, 3))


def _conv_frame(flat, n, wd, w):
    cin = flat.shape[0]
    cout = w.shape[0]
    offs = _offsets(wd)
    if cin <= cout:
        # gather the nine shifted inputs chunk by chunk, one GEMM per chunk;
        # a small reused buffer beats materializing all columns at once
        wm = w.reshape(cout, cin * 9)
        acc = np.empty((cout, n))
        cols = np.empty((cin, 9, COL_CHUNK))
        for c0 in range(0, n, COL_CHUNK):
            c1 = min(c0 + COL_CHUNK, n)
            for t, off in enumerate(offs):
                cols[:, t, :c1 - c0] = flat[:, off + c0:off + c1]
            np.matmul(wm, cols.reshape(cin * 9, COL_CHUNK)[:, :c1 - c0], out=acc[:, c0:c1])
        return acc
    # one GEMM for all per-tap outputs, then shift-and-add (cheaper when cout < cin)
    taps = (w.transpose(2, 3, 0, 1).reshape(9 * cout, cin) @ flat).reshape(9, cout, -1)
    acc = taps[0, :, :n].copy()
    for t in range(1, 9):
        acc += taps[t, :, offs[t]:offs[t] + n]
    return acc


def conv3x3_chain(x, layers):
    """Apply 3x3 convs ``[(w, b), ...]`` back to back without a cache.

    Intermediate activations stay in the padded frame layout: an output at
    frame index ``q`` is the next layer's input at ``q + w + 3``, with the
    wrap-around columns and rows zeroed to act as padding.
    """
    x = np.asarray(x, dtype=np.float64)
    bsz, _, h, wd = x.shape
    flat, n = _frame(x)
    q = np.arange(n) % ((h + 2) * (wd + 2))
    valid = ((q % (wd + 2)) < wd) & ((q // (wd + 2)) < h)
    shift = wd + 3
    for k, (w, b) in enumerate(layers):
        acc = _conv_frame(flat, n, wd, w)
        if b is not None:
            acc += b[:, None]
        if k == len(layers) - 1:
            return _unframe(acc, (bsz, w.shape[0], h, wd))
        flat = np.zeros((w.shape[0], flat.shape[1]))
        np.multiply(acc, valid, out=flat[:, shift:shift + n])


def conv3x3(x, w, b=None):
    """Same-padded 3x3 cross-correlation, stride 1.  ``w`` is ``(cout, cin, 3, 3)``."""
    x = np.asarray(x, dtype=np.float64)
    bsz, cin, h, wd = x.shape
    cout = w.shape[0]
    if w.shape[1] != cin:
        raise ValueError(f"conv expects {w.shape[1]} input channels, got {cin}")
    flat, n = _frame(x)
    acc = _conv_frame(flat, n, wd, w)
    out = _unframe(acc, (bsz, cout, h, wd))
    if b is not None:
        out += b[None, :, None, None]
    return out, (flat, x.shape, w, b is not None)


def conv3x3_backward(dout, cache):
    flat, xshape, w, has_bias = cache
    bsz, cin, h, wd = xshape
    cout = w.shape[0]
    gf = np.zeros((cout, bsz, h + 2, wd + 2))
    gf[:, :, :h, :wd] = dout.transpose(1, 0, 2, 3)
    gf = gf.reshape(cout, -1)
    n = flat.shape[1] - 2 * (wd + 2) - 2
    g = gf[:, :n]
    offs = _offsets(wd)
    dw = np.empty((cout, cin, 9))
    for t, off in enumerate(offs):
        dw[:, :, t] = g @ flat[:, off:off + n].T
    back = (w.transpose(2, 3, 1, 0).reshape(9 * cin, cout) @ g).reshape(9, cin, n)
    dflat = np.zeros_like(flat)
    for t, off in enumerate(offs):
        dflat[:, off:off + n] += back[t]
    dx = dflat.reshape(cin, bsz, h + 2, wd + 2)[:, :, 1:-1, 1:-1].transpose(1, 0, 2, 3)
    db = dout.sum(axis=(0, 2, 3)) if has_bias else None
    return np.ascontiguousarray(dx), dw.reshape(w.shape), db


def batchnorm(x, gamma, beta, running_mean, running_var, training, eps=BN_EPS, momentum=BN_MOMENTUM):
    """Per-channel batch norm.

    Training mode normalizes with batch statistics and returns updated running
    buffers (``running = momentum * running + (1 - momentum) * batch``); eval
    mode uses the running buffers and leaves them untouched.
    """
    if training:
        if x.shape[0] < 2:
            raise ValueError("batch norm in training mode needs batch size >= 2")
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        n = x.shape[0] * x.shape[2] * x.shape[3]
        new_mean = momentum * running_mean + (1 - momentum) * mean
        new_var = momentum * running_var + (1 - momentum) * var * n / max(n - 1, 1)
    else:
        mean, var = running_mean, running_var
        new_mean, new_var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
    out = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
    return out, (xhat, inv_std, gamma, training), new_mean, new_var


def batchnorm_backward(dout, cache):
    xhat, inv_std, gamma, training = cache
    dgamma = np.sum(dout * xhat, axis=(0, 2, 3))
    dbeta = np.sum(dout, axis=(0, 2, 3))
    dxhat = dout * gamma[None, :, None, None]
    if training:
        m = dout.shape[0] * dout.shape[2] * dout.shape[3]
        dx = (inv_std[None, :, None, None] / m) * (
            m * dxhat
            - dxhat.sum(axis=(0, 2, 3), keepdims=True)
            - xhat * np.sum(dxhat * xhat, axis=(0, 2, 3), keepdims=True)
        )
    else:
        dx = dxhat * inv_std[None, :, None, None]
    return dx, dgamma, dbeta


def softplus(x):
    return np.logaddexp(0.0, x)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy and its gradient w.r.t. ``logits``."""
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.sum(np.exp(z), axis=1, keepdims=True))
    n = logits.shape[0]
    loss = -float(np.mean(logp[np.arange(n), labels]))
    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n
