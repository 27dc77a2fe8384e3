"""Pure-NumPy implementations of the training kernels.

This is the fallback path. Every function here has a numba twin in
``numba_backend`` with an identical signature and identical semantics;
``czsl.kernels`` picks one of the two at import time. All kernels operate
on float64 C-contiguous arrays and never touch global state, so results
are a pure function of their inputs.

Loss kernels return the scalar loss together with the gradient of that
loss with respect to their direct inputs. Reductions are batch means
accumulated in 64-bit.
"""

import numpy as np


def affine(x, w, b):
    """Pre-activation of one dense layer: x @ w.T + b."""
    return x @ w.T + b


def affine_relu(x, w, b):
    """Fused dense layer with rectifier, for inference-only forwards."""
    y = x @ w.T + b
    np.maximum(y, 0.0, out=y)
    return y


def relu(pre):
    return np.maximum(pre, 0.0)


def relu_backward(dout, pre):
    """Gate the upstream gradient by the rectifier mask of ``pre``."""
    return np.where(pre > 0.0, dout, 0.0)


def linear_backward(dout, x_in, w):
    """Gradients of a dense layer given the upstream pre-activation grad.

    Returns (dx, dw, db) where dw has the (out, in) layout of ``w``.
    """
    dw = dout.T @ x_in
    db = dout.sum(axis=0)
    dx = dout @ w
    return dx, dw, db


def softmax(logits):
    """Row-wise softmax, stabilized by max subtraction."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    np.exp(shifted, out=shifted)
    shifted /= shifted.sum(axis=1, keepdims=True)
    return shifted


def softmax_cross_entropy(logits, labels):
    """Mean negative log-likelihood of the true class.

    Gradient is (softmax - onehot) / batch.
    """
    n = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(n)
    loss = float(np.mean(logsumexp - shifted[rows, labels]))
    dlogits = np.exp(shifted - logsumexp[:, None])
    dlogits[rows, labels] -= 1.0
    dlogits /= n
    return loss, dlogits


def softmax_vjp(probs, dprobs):
    """Pull a gradient on softmax outputs back to the logits."""
    inner = (dprobs * probs).sum(axis=1, keepdims=True)
    return probs * (dprobs - inner)


def mse(pred, target):
    """Mean over all entries of the squared difference."""
    diff = pred - target
    loss = float(np.mean(diff * diff))
    dpred = (2.0 / diff.size) * diff
    return loss, dpred


def gaussian_kl(mu, logvar):
    """KL(N(mu, diag exp(logvar)) || N(0, I)), averaged over the batch.

    Per sample the divergence is -0.5 * sum_j(1 + logvar - mu^2 - exp(logvar)),
    which is nonnegative and zero exactly at mu = 0, logvar = 0.
    """
    n = mu.shape[0]
    ev = np.exp(logvar)
    loss = float(-0.5 * np.sum(1.0 + logvar - mu * mu - ev) / n)
    dmu = mu / n
    dlogvar = -0.5 * (1.0 - ev) / n
    return loss, dmu, dlogvar


def reparameterize(mu, logvar, noise):
    """Location-scale sample: mu + exp(logvar / 2) * noise."""
    return mu + np.exp(0.5 * logvar) * noise


def adam_update(p, g, m, v, step, lr, beta1, beta2, eps):
    """One bias-corrected Adam update; ``step`` is the 1-based step index.

    Returns fresh (p, m, v) arrays; inputs are never modified.
    """
    m_new = beta1 * m + (1.0 - beta1) * g
    v_new = beta2 * v + (1.0 - beta2) * g * g
    m_hat = m_new / (1.0 - beta1 ** step)
    v_hat = v_new / (1.0 - beta2 ** step)
    p_new = p - lr * (m_hat / (np.sqrt(v_hat) + eps))
    return p_new, m_new, v_new
