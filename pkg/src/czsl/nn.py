"""Multilayer-perceptron substrate: forward, reverse-mode gradients, Adam.

Parameters live in float64 and updates are functional: every training step
returns fresh arrays, so freezing a network is just keeping a reference.
The hot math is delegated to ``czsl.kernels``; this module owns shapes,
validation, loss composition, and the checkpoint container.

Checkpoint container (single file):

    bytes 0..7   magic ``MLPCK001``
    bytes 8..11  header length, little-endian uint32
    header       JSON: layer_dims, activations, seed, step
    payload      per layer, weight matrix then bias vector,
                 row-major little-endian binary32

Round trips are bit-exact at the file level. Values are cast through
binary32 on the way out, so load(save(p)) equals p only up to that cast.
"""

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from czsl import kernels
from czsl.kernels import reparameterize, softmax  # noqa: F401  (re-export)

MAGIC = b"MLPCK001"

_ACTIVATIONS = ("relu", "identity")


@dataclass
class MlpParams:
    """Weights[k] has shape (out, in); biases[k] has shape (out,)."""

    weights: list
    biases: list
    activations: list
    seed: int

    @property
    def layer_dims(self):
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    def num_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


@dataclass
class Gradients:
    weights: list
    biases: list


@dataclass
class AdamState:
    m_w: list
    m_b: list
    v_w: list
    v_b: list
    step: int
    lr: float
    beta1: float
    beta2: float
    eps: float


def _as_f64(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def mlp_init(layer_dims, activations, seed: int) -> MlpParams:
    """Uniform(+-1/sqrt(fan_in)) weights, zero biases, deterministic in seed."""
    if len(layer_dims) < 2:
        raise ValueError("need at least one layer (two entries in layer_dims)")
    if any(int(d) <= 0 for d in layer_dims):
        raise ValueError("layer dimensions must be positive, got %r" % (list(layer_dims),))
    if len(activations) != len(layer_dims) - 1:
        raise ValueError(
            "expected %d activation tags for %d dims, got %d"
            % (len(layer_dims) - 1, len(layer_dims), len(activations))
        )
    for tag in activations:
        if tag not in _ACTIVATIONS:
            raise ValueError("unknown activation %r (want one of %r)" % (tag, _ACTIVATIONS))
    rng = np.random.default_rng(int(seed))
    weights = []
    biases = []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        bound = 1.0 / np.sqrt(float(fan_in))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights=weights, biases=biases, activations=list(activations), seed=int(seed))


def _check_input(p: MlpParams, x):
    if x.ndim != 2:
        raise ValueError("input must be 2-d, got shape %r" % (x.shape,))
    want = p.weights[0].shape[1]
    if x.shape[1] != want:
        raise ValueError("input has %d columns, first layer expects %d" % (x.shape[1], want))


def mlp_forward(p: MlpParams, x):
    """Affine-then-activation composition; pure function of (p, x)."""
    h = _as_f64(x)
    _check_input(p, h)
    for w, b, act in zip(p.weights, p.biases, p.activations):
        if act == "relu":
            h = kernels.affine_relu(h, w, b)
        else:
            h = kernels.affine(h, w, b)
    return h


def forward_cached(p: MlpParams, x):
    """Forward pass that keeps per-layer inputs and pre-activations."""
    h = _as_f64(x)
    _check_input(p, h)
    xs = [h]
    pres = []
    for w, b, act in zip(p.weights, p.biases, p.activations):
        pre = kernels.affine(h, w, b)
        pres.append(pre)
        h = kernels.relu(pre) if act == "relu" else pre
        xs.append(h)
    return h, (xs, pres)


def mlp_backward(p: MlpParams, cache, dout):
    """Reverse-mode sweep. Returns (dx, Gradients)."""
    xs, pres = cache
    dws = [None] * len(p.weights)
    dbs = [None] * len(p.biases)
    d = _as_f64(dout)
    for k in range(len(p.weights) - 1, -1, -1):
        if p.activations[k] == "relu":
            d = kernels.relu_backward(d, pres[k])
        d, dws[k], dbs[k] = kernels.linear_backward(d, xs[k], p.weights[k])
    return d, Gradients(weights=dws, biases=dbs)


def softmax_cross_entropy(logits, labels):
    """Mean negative log-softmax at the label; gradient (softmax - onehot)/B."""
    logits = _as_f64(logits)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    if labels.ndim != 1 or labels.shape[0] != logits.shape[0]:
        raise ValueError("labels shape %r does not match batch %d" % (labels.shape, logits.shape[0]))
    c = logits.shape[1]
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise ValueError("label out of range [0, %d)" % c)
    return kernels.softmax_cross_entropy(logits, labels)


def mse(pred, target):
    pred = _as_f64(pred)
    target = _as_f64(target)
    if pred.shape != target.shape:
        raise ValueError("shape mismatch %r vs %r" % (pred.shape, target.shape))
    return kernels.mse(pred, target)


def gaussian_kl(mu, logvar):
    """KL(N(mu, exp(logvar)) || N(0, 1)), mean over the batch."""
    mu = _as_f64(mu)
    logvar = _as_f64(logvar)
    if mu.shape != logvar.shape:
        raise ValueError("shape mismatch %r vs %r" % (mu.shape, logvar.shape))
    return kernels.gaussian_kl(mu, logvar)


_LOSS_TAGS = ("softmax_ce", "mse", "gaussian_kl")


def backward(p: MlpParams, x, loss: str, target=None):
    """Forward, scalar loss, and full parameter gradients in one call.

    loss selects the composition on the network output:
      softmax_ce   target = integer labels
      mse          target = matrix of the output shape
      gaussian_kl  output columns are read as [mu | logvar]; target unused
    """
    out, cache = forward_cached(p, x)
    if loss == "softmax_ce":
        value, dout = softmax_cross_entropy(out, target)
    elif loss == "mse":
        value, dout = mse(out, target)
    elif loss == "gaussian_kl":
        if out.shape[1] % 2 != 0:
            raise ValueError("gaussian_kl needs an even output width, got %d" % out.shape[1])
        z = out.shape[1] // 2
        value, dmu, dlogvar = gaussian_kl(out[:, :z], out[:, z:])
        dout = np.concatenate([dmu, dlogvar], axis=1)
    else:
        raise ValueError("unknown loss tag %r (want one of %r)" % (loss, _LOSS_TAGS))
    _, grads = mlp_backward(p, cache, dout)
    return value, grads


def adam_init(p: MlpParams, lr: float = 1e-4, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    return AdamState(
        m_w=[np.zeros_like(w) for w in p.weights],
        m_b=[np.zeros_like(b) for b in p.biases],
        v_w=[np.zeros_like(w) for w in p.weights],
        v_b=[np.zeros_like(b) for b in p.biases],
        step=0, lr=float(lr), beta1=float(beta1), beta2=float(beta2), eps=float(eps),
    )


def adam_step(p: MlpParams, g: Gradients, s: AdamState):
    """Bias-corrected Adam. Returns (new params, new state); inputs untouched."""
    for w, gw in zip(p.weights, g.weights):
        if w.shape != gw.shape:
            raise ValueError("gradient shape %r does not match weight %r" % (gw.shape, w.shape))
    step = s.step + 1
    new_w, new_b = [], []
    m_w, m_b, v_w, v_b = [], [], [], []
    for k in range(len(p.weights)):
        w, mw, vw = kernels.adam_update(p.weights[k], _as_f64(g.weights[k]),
                                        s.m_w[k], s.v_w[k], step,
                                        s.lr, s.beta1, s.beta2, s.eps)
        b, mb, vb = kernels.adam_update(p.biases[k], _as_f64(g.biases[k]),
                                        s.m_b[k], s.v_b[k], step,
                                        s.lr, s.beta1, s.beta2, s.eps)
        new_w.append(w)
        new_b.append(b)
        m_w.append(mw)
        m_b.append(mb)
        v_w.append(vw)
        v_b.append(vb)
    new_p = MlpParams(weights=new_w, biases=new_b, activations=list(p.activations), seed=p.seed)
    new_s = AdamState(m_w=m_w, m_b=m_b, v_w=v_w, v_b=v_b, step=step,
                      lr=s.lr, beta1=s.beta1, beta2=s.beta2, eps=s.eps)
    return new_p, new_s


def params_to_bytes(p: MlpParams, step: int = 0) -> bytes:
    header = json.dumps(
        {"activations": list(p.activations), "layer_dims": p.layer_dims,
         "seed": int(p.seed), "step": int(step)},
        sort_keys=True, separators=(",", ":"),
    ).encode("utf-8")
    parts = [MAGIC, np.uint32(len(header)).tobytes(), header]
    for w, b in zip(p.weights, p.biases):
        parts.append(np.ascontiguousarray(w, dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f4").tobytes())
    return b"".join(parts)


def params_from_bytes(buf: bytes):
    """Inverse of params_to_bytes. Returns (MlpParams, step)."""
    if buf[:8] != MAGIC:
        raise ValueError("bad magic at byte 0: %r" % buf[:8])
    if len(buf) < 12:
        raise ValueError("truncated container: %d bytes" % len(buf))
    hlen = int(np.frombuffer(buf[8:12], dtype="<u4")[0])
    if len(buf) < 12 + hlen:
        raise ValueError("truncated header at byte 12: need %d bytes" % hlen)
    try:
        header = json.loads(buf[12:12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ValueError("unreadable header at byte 12: %s" % e) from None
    dims = header["layer_dims"]
    acts = header["activations"]
    off = 12 + hlen
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        for shape in ((fan_out, fan_in), (fan_out,)):
            n = int(np.prod(shape))
            end = off + 4 * n
            if len(buf) < end:
                raise ValueError("truncated payload at byte %d: need %d floats" % (off, n))
            arr = np.frombuffer(buf[off:end], dtype="<f4").astype(np.float64).reshape(shape)
            off = end
            if len(shape) == 2:
                weights.append(arr)
            else:
                biases.append(arr)
    if off != len(buf):
        raise ValueError("trailing bytes at %d (container is %d bytes)" % (off, len(buf)))
    p = MlpParams(weights=weights, biases=biases, activations=list(acts),
                  seed=int(header["seed"]))
    return p, int(header["step"])


def save_params(path, p: MlpParams, step: int = 0) -> None:
    with open(path, "wb") as f:
        f.write(params_to_bytes(p, step=step))


def load_params(path):
    with open(path, "rb") as f:
        return params_from_bytes(f.read())


def fingerprint(p: MlpParams) -> str:
    """sha256 of the serialized parameters; ignores the optimizer step."""
    return hashlib.sha256(params_to_bytes(p, step=0)).hexdigest()
