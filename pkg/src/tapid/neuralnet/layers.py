"""Forward/backward kernels for the layers used by the CNN.

Tensors are NCHW. Each ``*_forward`` returns ``(out, cache)`` and the matching
``*_backward`` takes ``(dout, cache)``.
"""

from __future__ import annotations

import numpy as np


def conv3x3_forward(x, w, b):
    """3x3 convolution, stride 1, one pixel of zero padding (same size).

    ``w`` has shape (out_channels, in_channels, 3, 3).
    """
    bsz, cin, h, wd = x.shape
    cout = w.shape[0]
    padded = np.pad(x.transpose(0, 2, 3, 1), ((0, 0), (1, 1), (1, 1), (0, 0)))
    # columns ordered (kernel row, kernel col, channel): (B*H*W, 9*C)
    cols = np.concatenate(
        [padded[:, di : di + h, dj : dj + wd, :] for di in range(3) for dj in range(3)], axis=-1
    ).reshape(bsz * h * wd, 9 * cin)
    wmat = w.transpose(0, 2, 3, 1).reshape(cout, 9 * cin)
    out = (cols @ wmat.T + b).reshape(bsz, h, wd, cout).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(out), (cols, x.shape, w)


def conv3x3_backward(dout, cache):
    cols, (bsz, cin, h, wd), w = cache
    cout = w.shape[0]
    d2 = dout.transpose(0, 2, 3, 1).reshape(-1, cout)
    dwmat = d2.T @ cols
    dw = dwmat.reshape(cout, 3, 3, cin).transpose(0, 3, 1, 2)
    db = d2.sum(axis=0)
    dcols = (d2 @ w.transpose(0, 2, 3, 1).reshape(cout, 9 * cin)).reshape(bsz, h, wd, 9, cin)
    dpad = np.zeros((bsz, h + 2, wd + 2, cin), dtype=dout.dtype)
    for k in range(9):
        di, dj = divmod(k, 3)
        dpad[:, di : di + h, dj : dj + wd, :] += dcols[:, :, :, k, :]
    dx = dpad[:, 1:-1, 1:-1, :].transpose(0, 3, 1, 2)
    return np.ascontiguousarray(dx), np.ascontiguousarray(dw), db


def maxpool2x2_forward(x):
    """2x2/2 max pooling; an odd trailing row or column is dropped."""
    bsz, c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    blocks = x[:, :, : 2 * h2, : 2 * w2].reshape(bsz, c, h2, 2, w2, 2)
    blocks = blocks.transpose(0, 1, 2, 4, 3, 5).reshape(bsz, c, h2, w2, 4)
    idx = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]
    return out, (idx, x.shape)


def maxpool2x2_backward(dout, cache):
    idx, (bsz, c, h, w) = cache
    h2, w2 = h // 2, w // 2
    dblocks = np.zeros((bsz, c, h2, w2, 4), dtype=dout.dtype)
    np.put_along_axis(dblocks, idx[..., None], dout[..., None], axis=-1)
    dblocks = dblocks.reshape(bsz, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    dx = np.zeros((bsz, c, h, w), dtype=dout.dtype)
    dx[:, :, : 2 * h2, : 2 * w2] = dblocks.reshape(bsz, c, 2 * h2, 2 * w2)
    return dx


def relu_forward(x):
    out = np.maximum(x, 0)
    return out, out > 0


def relu_backward(dout, mask):
    return dout * mask


def dense_forward(x, w, b):
    """Affine map; ``w`` has shape (in_features, out_features)."""
    return x @ w + b, (x, w)


def dense_backward(dout, cache):
    x, w = cache
    return dout @ w.T, x.T @ dout, dout.sum(axis=0)


def dropout_forward(x, rate, rng):
    """Inverted dropout: kept units are scaled by 1/(1-rate)."""
    if rate <= 0 or rng is None:
        return x, None
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / x.dtype.type(1.0 - rate)
    return x * keep, keep


def dropout_backward(dout, keep):
    return dout if keep is None else dout * keep


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(probs, labels):
    """Mean categorical cross-entropy and its gradient w.r.t. the logits."""
    n = labels.shape[0]
    picked = probs[np.arange(n), labels]
    loss = -np.mean(np.log(np.maximum(picked, np.finfo(probs.dtype).tiny)))
    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1
    return float(loss), dlogits / n
