"""Numba-compiled twins of the kernels in ``numpy_backend``.

Same signatures, same semantics. Elementwise kernels evaluate the exact
same IEEE expression sequence as the NumPy path, so they are bit-identical
to it; reduction kernels accumulate sequentially in 64-bit and may differ
from NumPy's pairwise summation in the last bits. No fastmath, no
parallelism: results must be reproducible bit-for-bit across runs.

Compiled code is cached on disk next to this file, so the JIT cost is
paid once per machine.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def affine(x, w, b):
    y = np.dot(x, np.ascontiguousarray(w.T))
    for i in range(y.shape[0]):
        for j in range(y.shape[1]):
            y[i, j] = y[i, j] + b[j]
    return y


@njit(cache=True)
def affine_relu(x, w, b):
    y = np.dot(x, np.ascontiguousarray(w.T))
    for i in range(y.shape[0]):
        for j in range(y.shape[1]):
            v = y[i, j] + b[j]
            y[i, j] = v if v > 0.0 else 0.0
    return y


@njit(cache=True)
def relu(pre):
    out = np.empty_like(pre)
    for i in range(pre.shape[0]):
        for j in range(pre.shape[1]):
            v = pre[i, j]
            out[i, j] = v if v > 0.0 else 0.0
    return out


@njit(cache=True)
def relu_backward(dout, pre):
    dpre = np.empty_like(dout)
    for i in range(dout.shape[0]):
        for j in range(dout.shape[1]):
            dpre[i, j] = dout[i, j] if pre[i, j] > 0.0 else 0.0
    return dpre


@njit(cache=True)
def linear_backward(dout, x_in, w):
    dw = np.dot(np.ascontiguousarray(dout.T), x_in)
    db = np.empty(dout.shape[1])
    for j in range(dout.shape[1]):
        s = 0.0
        for i in range(dout.shape[0]):
            s += dout[i, j]
        db[j] = s
    dx = np.dot(dout, w)
    return dx, dw, db


@njit(cache=True)
def softmax(logits):
    n, c = logits.shape
    probs = np.empty_like(logits)
    for i in range(n):
        hi = logits[i, 0]
        for j in range(1, c):
            if logits[i, j] > hi:
                hi = logits[i, j]
        total = 0.0
        for j in range(c):
            e = np.exp(logits[i, j] - hi)
            probs[i, j] = e
            total += e
        for j in range(c):
            probs[i, j] /= total
    return probs


@njit(cache=True)
def softmax_cross_entropy(logits, labels):
    n, c = logits.shape
    dlogits = np.empty_like(logits)
    loss = 0.0
    for i in range(n):
        hi = logits[i, 0]
        for j in range(1, c):
            if logits[i, j] > hi:
                hi = logits[i, j]
        total = 0.0
        for j in range(c):
            e = np.exp(logits[i, j] - hi)
            dlogits[i, j] = e
            total += e
        lse = np.log(total)
        loss += lse - (logits[i, labels[i]] - hi)
        for j in range(c):
            p = dlogits[i, j] / total
            if j == labels[i]:
                p -= 1.0
            dlogits[i, j] = p / n
    return loss / n, dlogits


@njit(cache=True)
def softmax_vjp(probs, dprobs):
    n, c = probs.shape
    dlogits = np.empty_like(probs)
    for i in range(n):
        inner = 0.0
        for j in range(c):
            inner += dprobs[i, j] * probs[i, j]
        for j in range(c):
            dlogits[i, j] = probs[i, j] * (dprobs[i, j] - inner)
    return dlogits


@njit(cache=True)
def mse(pred, target):
    n = pred.size
    dpred = np.empty_like(pred)
    pf = pred.ravel()
    tf = target.ravel()
    df = dpred.ravel()
    total = 0.0
    scale = 2.0 / n
    for i in range(n):
        d = pf[i] - tf[i]
        total += d * d
        df[i] = scale * d
    return total / n, dpred


@njit(cache=True)
def gaussian_kl(mu, logvar):
    n, z = mu.shape
    dmu = np.empty_like(mu)
    dlogvar = np.empty_like(logvar)
    total = 0.0
    for i in range(n):
        for j in range(z):
            ev = np.exp(logvar[i, j])
            total += 1.0 + logvar[i, j] - mu[i, j] * mu[i, j] - ev
            dmu[i, j] = mu[i, j] / n
            dlogvar[i, j] = -0.5 * (1.0 - ev) / n
    return -0.5 * total / n, dmu, dlogvar


@njit(cache=True)
def reparameterize(mu, logvar, noise):
    z = np.empty_like(mu)
    for i in range(mu.shape[0]):
        for j in range(mu.shape[1]):
            z[i, j] = mu[i, j] + np.exp(0.5 * logvar[i, j]) * noise[i, j]
    return z


@njit(cache=True)
def adam_update(p, g, m, v, step, lr, beta1, beta2, eps):
    p_new = np.empty_like(p)
    m_new = np.empty_like(m)
    v_new = np.empty_like(v)
    pf = p.ravel()
    gf = g.ravel()
    mf = m.ravel()
    vf = v.ravel()
    pn = p_new.ravel()
    mn = m_new.ravel()
    vn = v_new.ravel()
    # math.pow lands in libm, matching CPython's ** bit-for-bit; numba's
    # float ** int lowers to binary powering, which drifts by 1 ulp.
    c1 = 1.0 - math.pow(beta1, float(step))
    c2 = 1.0 - math.pow(beta2, float(step))
    for i in range(pf.size):
        mi = beta1 * mf[i] + (1.0 - beta1) * gf[i]
        vi = beta2 * vf[i] + (1.0 - beta2) * gf[i] * gf[i]
        m_hat = mi / c1
        v_hat = vi / c2
        pn[i] = pf[i] - lr * (m_hat / (np.sqrt(v_hat) + eps))
        mn[i] = mi
        vn[i] = vi
    return p_new, m_new, v_new
