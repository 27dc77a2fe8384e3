"""Shared utilities for the test suite.

The finite-difference checks perturb parameters by h, which moves relu
pre-activations by at most h times the input scale. Configurations are
screened so every pre-activation sits at least `margin` away from the
kink, keeping the loss twice differentiable on the whole FD stencil.
"""

import numpy as np

import oracles
from czsl import nn


def loss_only(p, x, loss, target=None):
    out = nn.mlp_forward(p, x)
    if loss == "softmax_ce":
        return nn.softmax_cross_entropy(out, target)[0]
    if loss == "mse":
        return nn.mse(out, target)[0]
    if loss == "gaussian_kl":
        z = out.shape[1] // 2
        return nn.gaussian_kl(out[:, :z], out[:, z:])[0]
    raise ValueError(loss)


def flat_arrays(p):
    return list(p.weights) + list(p.biases)


def rebuild(template, arrays):
    nw = len(template.weights)
    return nn.MlpParams(weights=list(arrays[:nw]), biases=list(arrays[nw:]),
                        activations=list(template.activations), seed=template.seed)


def clear_of_kinks(p, x, margin=1e-2):
    _, (_, pres) = nn.forward_cached(p, x)
    for pre, act in zip(pres, p.activations):
        if act == "relu" and np.abs(pre).min() <= margin:
            return False
    return True


def make_config(dims, acts, seed, batch, margin=1e-2, attempts=500):
    """Net plus input whose relu pre-activations avoid the kink."""
    for k in range(attempts):
        p = nn.mlp_init(dims, acts, seed=(int(seed) + 7919 * k) % (2 ** 31))
        x = np.random.default_rng((int(seed), k)).normal(size=(batch, dims[0]))
        if clear_of_kinks(p, x, margin):
            return p, x
    raise AssertionError("no kink-free configuration found for %r" % (dims,))


def make_target(loss, out_dim, batch, seed):
    rng = np.random.default_rng((int(seed), 99))
    if loss == "softmax_ce":
        return rng.integers(0, out_dim, size=batch)
    if loss == "mse":
        return rng.normal(size=(batch, out_dim))
    return None


def gradient_errors(p, x, loss, target, h=1e-4):
    """Sorted relative errors, analytic vs central differences, all coords."""
    _, grads = nn.backward(p, x, loss, target)
    fd = oracles.fd_gradients(lambda arrs: loss_only(rebuild(p, arrs), x, loss, target),
                              flat_arrays(p), h=h)
    analytic = list(grads.weights) + list(grads.biases)
    errs = np.concatenate([oracles.rel_err(a, f).ravel()
                           for a, f in zip(analytic, fd)])
    return np.sort(errs)


def module_kink_free(m, x, e, noise, margin=1e-2):
    """True when no relu pre-activation of any of the three nets sits near 0."""
    from czsl import nn as _nn
    xe = np.concatenate([np.asarray(x, dtype=np.float64),
                         np.asarray(e, dtype=np.float64)], axis=1)
    enc_out, (_, enc_pres) = _nn.forward_cached(m.encoder, xe)
    mu, logvar = enc_out[:, :m.z_dim], enc_out[:, m.z_dim:]
    zs = _nn.reparameterize(mu, logvar, noise)
    ze = np.concatenate([zs, np.asarray(e, dtype=np.float64)], axis=1)
    dec_out, (_, dec_pres) = _nn.forward_cached(m.decoder, ze)
    _, (_, aux_pres) = _nn.forward_cached(m.aux, dec_out)
    for params, pres in ((m.encoder, enc_pres), (m.decoder, dec_pres),
                         (m.aux, aux_pres)):
        for pre, act in zip(pres, params.activations):
            if act == "relu" and np.abs(pre).min() <= margin:
                return False
    return True


def train_cvae_inline(module, features, labels, attributes, epochs, batch_size,
                      lr, seed, weights=(1.0, 1.0, 1.0, 1.0)):
    """Minimal Adam loop over cvae_backward, independent of the learner."""
    from czsl import cvae as _cvae
    feats = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    attrs = np.asarray(attributes, dtype=np.float64)
    states = {net: nn.adam_init(getattr(module, net), lr=lr)
              for net in ("encoder", "decoder", "aux")}
    n = feats.shape[0]
    for epoch in range(epochs):
        order = np.random.default_rng((int(seed), epoch, 0)).permutation(n)
        for bi, start in enumerate(range(0, n, batch_size)):
            idx = order[start:start + batch_size]
            x, y = feats[idx], labels[idx]
            e = attrs[y]
            noise = np.random.default_rng((int(seed), epoch, bi, 1)).standard_normal(
                (len(idx), module.z_dim))
            _, _, enc_g, dec_g, aux_g = _cvae.cvae_backward(
                module, x, y, e, noise, weights)
            for net, g in (("encoder", enc_g), ("decoder", dec_g), ("aux", aux_g)):
                p, s = nn.adam_step(getattr(module, net), g, states[net])
                setattr(module, net, p)
                states[net] = s
    return module


def forced_classifier(num_classes, trained_for_task=0):
    """Identity-logit classifier: the feature row IS the logit row.

    Feeding one-hot rows forces the prediction, which makes accuracy
    arithmetic hand-checkable.
    """
    from czsl.classifier import ClassifierParams
    net = nn.mlp_init([num_classes, num_classes], ["identity"], 123)
    net.weights[0][:] = np.eye(num_classes)
    net.biases[0][:] = 0.0
    return ClassifierParams(net=net, trained_for_task=trained_for_task)


def onehot_rows(pred_classes, num_classes):
    x = np.zeros((len(pred_classes), num_classes))
    x[np.arange(len(pred_classes)), list(pred_classes)] = 1.0
    return x
